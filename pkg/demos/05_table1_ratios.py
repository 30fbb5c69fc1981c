# %% [markdown]
# # How much can importance sampling gain?
#
# Two ratios measure how non-uniform a problem is:
#
# * smoothness: `N max_i L_i / sum_i L_i`
# * variance: `N sum_i |g_i|^2 / (sum_i |g_i|)^2` at the minimizer
#
# Both equal 1 when all examples are alike.  Larger values mean more room
# for a non-uniform sampler to help.

# %%
import numpy as np

from avare.metrics import table1_ratios
from avare.problems import FiniteSumProblem, make_synthetic

rows = []
for seed in range(5):
    prob = FiniteSumProblem(make_synthetic(100, 10, seed=seed), "logistic", 1.0)
    rows.append(table1_ratios(prob))
    print(f"seed {seed}: smoothness {rows[-1][0]:.2f}, variance {rows[-1][1]:.2f}")
print("mean:", np.round(np.mean(rows, axis=0), 2))

# %% [markdown]
# On this generator the strong-convexity term makes the per-example
# gradients at the minimizer fairly even, so the variance ratio stays
# close to 1.
