# %% [markdown]
# # Minibatches drawn without replacement
#
# Draw `m` indices one at a time, renormalizing the remaining weights after
# each draw.  Stage `j` returns the gradients already drawn plus the newest
# one reweighted by its conditional probability `q_j`; averaging the stages
# gives an unbiased estimate of the full gradient sum.

# %%
import numpy as np

from avare.estimators import enumerate_moments, wor_trace_variance, wr_trace_variance

rng = np.random.default_rng(1)
g = rng.standard_normal((5, 3))
a = np.linalg.norm(g, axis=1)
p = a / a.sum()

for m in range(1, 6):
    rep = enumerate_moments(g, p, m)
    bias = np.abs(rep.mean - g.sum(axis=0)).max()
    print(f"m={m}: bias {bias:.1e}, trace var {rep.trace_var:8.4f}, "
          f"with replacement {wr_trace_variance(g, p, m):8.4f}")

# %% [markdown]
# With `m = N` every index is drawn, so the last stage is exact.  Drawing
# without replacement never does worse than drawing with replacement at
# these weights.
#
# ## Is norm-proportional sampling optimal for batches?
#
# It is for a single draw, and each stage is optimal given the earlier
# draws.  Over a whole batch it is not: the first draw also decides which
# histories the later stages see.  A small search finds a better `p`.

# %%
from scipy.optimize import minimize

g = np.array([[0.4, -1.2, 0.1], [1.5, 0.9, -1.6], [-0.2, 0.7, 0.5]])
a = np.linalg.norm(g, axis=1)
p_star = a / a.sum()
v_star = wor_trace_variance(g, p_star, 2)
res = minimize(lambda z: wor_trace_variance(g, np.exp(z) / np.exp(z).sum(), 2),
               np.log(p_star), method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14})
p_best = np.exp(res.x) / np.exp(res.x).sum()
print("p*    ", np.round(p_star, 4), "variance", round(v_star, 6))
print("better", np.round(p_best, 4), "variance", round(res.fun, 6))
print(f"improvement {100 * (1 - res.fun / v_star):.2f}%")
