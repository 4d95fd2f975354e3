"""Comparing SA, nested SA and multilevel SA on a small accuracy grid.

``bench_cell`` repeats one tuned configuration with independent seeds and
reports the RMSE against the exact values together with the mean runtime.
The slope of runtime against accuracy is the complexity exponent.  The
step sizes, ladders and budgets come from the bundled ``option_study``
configuration.

Run it with ``python tutorials/03_compare_estimators.py`` (under a minute).
The full experiment is available as ``mlsa-risk compare``.
"""

from mlsa_risk.bench import bench_cell, fit_loglog_slope, warm_up
from mlsa_risk.config import load_config

cfg = load_config("option_study")
warm_up(cfg.model)
grid = [1 / 32, 1 / 64, 1 / 128]

for algo in ("sa", "nsa", "mlsa"):
    records = []
    for eps in grid:
        rec = bench_cell(cfg.model, cfg.plan(algo, "var", eps), 20, 99, cfg.init)
        records.append(rec)
        print(f"{algo:5s} eps=1/{round(1 / eps):<4d} RMSE={rec.rmse:.4f} "
              f"time={rec.mean_runtime_seconds * 1e3:8.2f} ms  "
              f"draws={rec.mean_inner_draws:.0f}")
    fit = fit_loglog_slope(grid, [r.mean_runtime_seconds for r in records])
    print(f"{algo:5s} runtime ~ eps^{fit.slope:.2f}\n")

# SA is the ideal that sees exact losses.  Between the two nested methods,
# MLSA reaches a comparable RMSE with fewer inner draws as eps shrinks.
