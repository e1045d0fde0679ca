"""Measured P(00) of the Rzx benchmark versus theta and dsr, next to the ideal value."""
import argparse

from qupad import reports
from qupad.device import DeviceModel, drift

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--days", type=float, default=0.0)
ap.add_argument("--shots", type=int, default=8192)
ap.add_argument("--out", default="benchmark_surface.csv")
args = ap.parse_args()

dev = drift(DeviceModel.random(2, seed=args.seed), args.days)
rows = reports.benchmark_surface(dev, shots=args.shots, seed=args.seed)
reports.write_csv(args.out, reports.HEADERS["benchmark"], rows)
worst = max(rows, key=lambda r: abs(r[2] - r[3]))
print(f"{len(rows)} points; largest deviation {worst[2] - worst[3]:+.4f} at theta {worst[0]:.3f}, dsr {worst[1]:.2f}")
print(f"wrote {args.out}")
