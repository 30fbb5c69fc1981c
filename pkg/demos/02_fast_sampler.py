# %% [markdown]
# # Sampling from the restricted optimum in polylog time
#
# `WeightTable` keeps the weights in an order-statistic tree together with
# prefix sums of the sorted weights.  It finds the cut-off `rho` by binary
# search, then draws from the restricted optimum without building `p`.

# %%
import numpy as np

from avare.rng import make_rng
from avare.sampler import WeightTable
from avare.simplex import solve_restricted_reference

N = 1000
rng = make_rng(0)
h = np.random.default_rng(0).exponential(size=N)
table = WeightTable(h)
eps = 0.5 / N

rho, lam = table.find_rho(eps)
ref = solve_restricted_reference(table.H, eps)
print("rho:", rho, "reference:", ref.rho)
print("max |p - p_ref|:", np.abs(table.probabilities(eps) - ref.p).max())

# %% [markdown]
# ## Empirical frequencies
#
# Draw many times from a frozen table and compare the observed frequencies
# with the closed form.

# %%
draws = np.array([table.draw(eps, rng)[0] for _ in range(200_000)])
freq = np.bincount(draws, minlength=N) / draws.size
top = np.argsort(ref.p)[::-1][:5]
for i in top:
    print(f"index {i:4d}: p = {ref.p[i]:.5f}, observed = {freq[i]:.5f}")

# %% [markdown]
# ## Cost per operation
#
# The tree counts the nodes each operation visits.  Updates are
# logarithmic in N; the search and the draw are logarithmic squared.

# %%
print(f"{'N':>7} {'update':>8} {'search':>8} {'draw':>8}")
for k in (8, 12, 16):
    n = 2**k
    t = WeightTable(np.random.default_rng(k).exponential(size=n))
    v = t.tree.visits
    t.update(3, 2.5)
    up = t.tree.visits - v
    v = t.tree.visits
    rl = t.find_rho(0.5 / n)
    se = t.tree.visits - v
    v = t.tree.visits
    t.draw(0.5 / n, rng, rl)
    print(f"{n:7d} {up:8d} {se:8d} {t.tree.visits - v:8d}")
