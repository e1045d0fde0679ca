"""How well the error-table fit recovers (k1, k2, b) and their products from shot-noisy data.

With a finite shot budget the overall scale k1 trades off against k2 and b;
the products k1*k2 and k1*b stay pinned down far better.
"""
import argparse

import numpy as np

from qupad.lut import ErrorFitParams, dsr_grid, fit_error_params, predict_p00, theta_grid

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--seeds", type=int, default=20)
ap.add_argument("--shots", default="2048,8192,32768,131072")
ap.add_argument("--true", default="0.95,0.08,0.03", help="k1,k2,b")
args = ap.parse_args()

true = np.array([float(v) for v in args.true.split(",")])
fit_true = ErrorFitParams(*true)
print("shots     med|dk1|  med|dk2|  med|db|   med rel(k1k2)  med rel(k1b)")
for shots in (int(s) for s in args.shots.split(",")):
    errs, prods = [], []
    for seed in range(args.seeds):
        rng = np.random.default_rng(seed)
        rows = [(t, d, rng.binomial(shots, predict_p00(t, d, fit_true)) / shots, shots)
                for t in theta_grid(9) for d in dsr_grid(5)]
        f = fit_error_params(rows)
        errs.append(np.abs(f.vector - true))
        prods.append([abs(f.k1 * f.k2 / (true[0] * true[1]) - 1), abs(f.k1 * f.b / (true[0] * true[2]) - 1)])
    e, p = np.median(errs, axis=0), np.median(prods, axis=0)
    print(f"{shots:7d}   {e[0]:.4f}    {e[1]:.4f}    {e[2]:.4f}    {p[0]:.4f}         {p[1]:.4f}")
