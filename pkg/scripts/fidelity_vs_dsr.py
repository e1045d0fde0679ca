"""Output fidelity of a trained TFIM ansatz with one dsr on every pair, over drift days."""
import argparse

from qupad import reports
from qupad.device import DeviceModel
from qupad.experiments import trained_tfim

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--days", default="0,3,6")
ap.add_argument("--shots", type=int, default=20_000)
ap.add_argument("--iterations", type=int, default=400)
ap.add_argument("--out", default="fidelity_vs_dsr.csv")
args = ap.parse_args()

circuit, params, _ = trained_tfim(iterations=args.iterations, seed=args.seed)
dev = DeviceModel.random(4, seed=args.seed)
days = [float(d) for d in args.days.split(",")]
rows = reports.fidelity_vs_dsr(dev, circuit, params, days, shots=args.shots, seed=args.seed)
reports.write_csv(args.out, reports.HEADERS["fidelity"], rows)
for day in days:
    best = max((r for r in rows if r[0] == day), key=lambda r: r[2])
    print(f"day {day:g}: best uniform dsr {best[1]:.2f} (fidelity {best[2]:.4f})")
print(f"wrote {args.out}")
