"""How the inner sample count biases the nested risk measures.

With ``K`` inner draws the simulated loss is noisier than the exact one,
so its quantile and tail mean sit above the exact values.  The bias decays
like ``1/K``.  Here we run nested SA at several ``K`` with many outer
iterations and compare the averaged estimates to the exact values.

Run it with ``python tutorials/02_nested_bias.py`` (about a minute).
"""

import numpy as np

from mlsa_risk import BiasParam, OptionModel, StepSchedule
from mlsa_risk.bench import bias_study

model = OptionModel()
truth = model.analytic_truth()
# gamma1 = 1 lets the VaR chain travel from its start to the biased
# quantile within the run; a much smaller step would stall on the way.
sched = StepSchedule(gamma1=1.0, beta=1.0, offset=100.0)
biases = [BiasParam(k) for k in (4, 8, 16, 32)]

rows = bias_study(model, biases, n=200_000, sched=sched, reps=10, seed=2024,
                  init=(truth.xi, truth.chi))

print(" K    VaR error   K * error   ES error   K * error")
for row in rows:
    k = round(1 / row.h)
    print(f"{k:3d}  {row.xi_error:9.4f}  {row.xi_rescaled:9.3f}  "
          f"{row.chi_error:9.4f}  {row.chi_rescaled:9.3f}")

# The rescaled columns settle near a constant as K grows: the bias is of
# order 1/K, which is what makes the multilevel telescoping worthwhile.
ks = np.array([round(1 / r.h) for r in rows], dtype=float)
slope = np.polyfit(np.log(ks), np.log([r.xi_error for r in rows]), 1)[0]
print(f"log-log slope of the VaR error against K: {slope:.2f}")
