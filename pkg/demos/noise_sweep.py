"""
Error against sample size
=========================

A small version of the convergence study on Example 4: mean subspace
error over a few trials for each method, and the fitted log-log slope.
Larger grids and more trials go through ``gcr experiment`` with a JSON
config; this script keeps to sizes that finish in a minute or two.
"""

from gcr import ExperimentConfig, run_sweep

grid = [500, 1000, 2000]
for noise in (5, 50):
    print(f"Example 4, {noise}% noise")
    for method in ("GCR", "SCR", "SIR"):
        cfg = ExperimentConfig(example="4", method=method, noise=noise, n_grid=grid, trials=3, master_seed=2)
        res = run_sweep(cfg)
        errs = "  ".join(f"{row['mean_subspace_error']:.3f}" for row in res.summary)
        print(f"  {method}: {errs}   slope {res.subspace_slope:+.2f}")
