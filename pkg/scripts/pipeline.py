"""Train, drift, benchmark, calibrate and execute over several device seeds.

Prints fidelity and energy gap at dsr=1 next to the calibrated values.
"""
import argparse

from qupad.experiments import calibration_trial, spread, trained_tfim

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--seeds", type=int, default=10)
ap.add_argument("--days", type=float, default=6.0)
ap.add_argument("--shots", type=int, default=100_000)
ap.add_argument("--beta", type=float, default=0.005)
args = ap.parse_args()

circuit, params, task = trained_tfim(beta=args.beta)
trials = [calibration_trial(circuit, params, task, seed=s, days=args.days, shots=args.shots)
          for s in range(args.seeds)]
print("seed  fid@1   fid*    gap@1   gap*    dsr*")
for t in trials:
    dsr = " ".join(f"{v:.2f}" for _, v in sorted(t.assignment.items()))
    print(f"{t.seed:4d}  {t.fidelity_default:.4f}  {t.fidelity_calibrated:.4f}  "
          f"{t.gap_default:.4f}  {t.gap_calibrated:.4f}  {dsr}")
wins_f = sum(t.fidelity_calibrated > t.fidelity_default for t in trials)
wins_e = sum(t.gap_calibrated < t.gap_default for t in trials)
gain = spread([t.fidelity_calibrated - t.fidelity_default for t in trials])
print(f"fidelity improved on {wins_f}/{len(trials)}, energy gap on {wins_e}/{len(trials)}; "
      f"mean fidelity gain {gain[0]:+.4f} +/- {gain[1]:.4f}")
