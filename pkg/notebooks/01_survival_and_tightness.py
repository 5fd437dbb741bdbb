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
# # Survival and interface tightness at fixed alpha
#
# Fixed-alpha runs of the interface process on a ring.  Twice the particle
# density estimates the survival probability `rho`, and the fraction of time
# with a single particle estimates the tightness `chi`.  For the one-sided
# model both have closed forms, which makes a good first sanity check.
#
# Sizes here are small so the notebook runs in about a minute; the
# acceptance suite uses the full sizes.

# %%
import numpy as np

from rebvoter.analysis import fit_linear_fractional
from rebvoter.engine import fixed_alpha_plan, run_replicas
from rebvoter.models import Family, ModelSpec, Representation
from rebvoter.observables import chi_k_hat, rho_hat

ONE = ModelSpec(Family.ONE_SIDED, Representation.INTERFACE)
TWO = ModelSpec(Family.TWO_SIDED, Representation.INTERFACE)

# %% [markdown]
# ## One-sided rho below the critical point

# %%
for a in (0.1, 0.2, 0.3, 0.4):
    plan = fixed_alpha_plan(ONE, 512, 1e5, a, seed=1, burn_in=5e3)
    c = rho_hat(run_replicas(plan, 4))
    print(f"alpha={a:.1f}  rho_hat={c.value[0]:.4f} +- {c.stderr[0]:.4f}  "
          f"formula={(1 - 2 * a) / (1 - a):.4f}")

# %% [markdown]
# ## One-sided chi above the critical point
#
# Only a handful of particles are alive here, so long runs are cheap.

# %%
for a in (0.7, 0.8, 0.9):
    c = chi_k_hat(run_replicas(fixed_alpha_plan(ONE, 512, 1e6, a, seed=2), 4), 1)
    print(f"alpha={a:.1f}  chi_hat={c.value[0]:.4f} +- {c.stderr[0]:.4f}  formula={2 - 1 / a:.4f}")

# %% [markdown]
# ## Two-sided rho and a linear-fractional fit
#
# No closed form is known for the two-sided model.  A fit of the form
# `(1 - c1 a) / (1 - c2 a)` describes the data well and gives `alpha_c = 1/c1`.

# %%
alphas = np.linspace(0.05, 0.40, 8)
rho = []
for a in alphas:
    rho.append(rho_hat(run_replicas(fixed_alpha_plan(TWO, 512, 5e4, a, seed=3, burn_in=5e3), 2)).value[0])
fit = fit_linear_fractional(alphas, rho)
print(f"c1={fit.c1:.3f}  c2={fit.c2:.3f}  alpha_c={fit.alpha_c:.4f}  rms={fit.residual_rms:.2e}")
