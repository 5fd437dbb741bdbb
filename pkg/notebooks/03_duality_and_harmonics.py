# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#   kernelspec:
#     display_name: Python 3
#     language: python
#     name: python3
# ---

# %% [markdown]
# # Duality on small rings and harmonic functions
#
# On rings of a few sites the generators fit in memory, so the duality
# relation with `psi(x, y) = (-1)^|xy|` can be checked to rounding error.
# The same exact machinery gives stationary laws that the simulator must
# reproduce.

# %%
import numpy as np

from rebvoter import exact
from rebvoter.engine import fixed_alpha_plan, run_replicas
from rebvoter.models import Family, ModelSpec, Representation, dual_of
from rebvoter.observables import g_block, harmonic_hat, mu_hat

S, I, M = Representation.SPIN, Representation.INTERFACE, Representation.MIRROR_DUAL

# %%
for fam in (Family.ONE_SIDED, Family.TWO_SIDED, Family.DISAGREEMENT, Family.SWAPPING):
    x = ModelSpec(fam, S, 0.37)
    y = dual_of(x)
    res = max(exact.check_duality(x, y, N) for N in (4, 5, 6))
    print(f"{fam.value:>13} <-> {y.family.value}/{y.representation.value}: {res:.1e}")

# %% [markdown]
# ## Exact stationary law against simulation

# %%
spec = ModelSpec(Family.ONE_SIDED, I, 0.5)
law = exact.stationary(exact.build_generator(spec, 6, "odd"))
ex = exact.exact_observables(law, ["11", "101"])
sim = mu_hat(run_replicas(fixed_alpha_plan(spec, 6, 2e4, 0.5, seed=1), 8))
print(f"E|Y| exact {ex.mean_ones:.4f}   simulated {sim.value[0]:.4f} +- {sim.stderr[0]:.4f}")

# %% [markdown]
# ## Harmonic functions from the dual process
#
# `f_x` is the long-run ratio of odd-overlap probabilities for the pattern
# `x` and for a single site.  Near `alpha = 1` it approaches the number of
# ones in `x`.  Its slope there for blocks of `n` ones follows an integer
# recursion.

# %%
blocks = ("11", "111", "1111")
reps = run_replicas(fixed_alpha_plan(ModelSpec(Family.ONE_SIDED, M), 512, 1e4, 0.99,
                                     seed=2, patterns=blocks), 4)
for p in blocks:
    c = harmonic_hat(reps, p)
    print(f"f_{p} = {c.value[0]:.3f} +- {c.stderr[0]:.3f}")
print("g_block(1..8):", [g_block(n) for n in range(1, 9)])
