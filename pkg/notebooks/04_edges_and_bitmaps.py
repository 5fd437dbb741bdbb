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
# # Edge speeds and space-time pictures
#
# Seen from its leftmost particle the interface process lives on a window
# of `W` sites.  The mean drift of that particle is the left edge speed.

# %%
import tempfile
from pathlib import Path

import numpy as np

from rebvoter.edge import edge_speed_sweep
from rebvoter.engine import SweepPlan, fixed_alpha_plan, read_pgm, render_spacetime, write_pgm
from rebvoter.models import Family, ModelSpec, Representation

ONE = ModelSpec(Family.ONE_SIDED, Representation.INTERFACE)
TWO = ModelSpec(Family.TWO_SIDED, Representation.INTERFACE)

# %%
for a in (0.0, 0.3, 0.6, 1.0):
    plan = fixed_alpha_plan(ONE, 2048, 2e3, a, seed=3)
    vm, st = edge_speed_sweep(plan, "left", replicas=4)
    vp, _ = edge_speed_sweep(plan, "right", replicas=4)
    print(f"alpha={a:.1f}  v-={vm.value[0]:+.3f}  v+={vp.value[0]:+.3f}  restarts={int(st.restarts.sum())}")

# %% [markdown]
# ## A space-time bitmap
#
# Rows are time samples and columns are sites; dark pixels are particles.

# %%
plan = SweepPlan(TWO, 800, 400.0, 1, 0.45, 0.45, seed=4, burn_in=0.0)
img = render_spacetime(plan, 200, 400.0, 2.0)
out = Path(tempfile.mkdtemp()) / "two_sided.pgm"
write_pgm(out, img)
print(img.shape, "particles in last row:", int(img[-1].sum()), "->", out)
assert np.array_equal(read_pgm(out), img)
