"""Schedule length of a lone Rzx(theta) across [-pi, pi] on a fresh device."""
import argparse

from qupad import reports
from qupad.device import DeviceModel

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--dsr", type=float, default=1.0)
ap.add_argument("--out", default="duration_curve.csv")
args = ap.parse_args()

rows = reports.duration_curve(DeviceModel.random(2, seed=args.seed), dsr=args.dsr)
reports.write_csv(args.out, reports.HEADERS["duration"], rows)
for theta, dt, us in rows[::10]:
    print(f"theta {theta:+.3f}  {dt:5d} dt  {us:.3f} us")
print(f"wrote {args.out}")
