# %% [markdown]
# # Bayesian optimization on a toy function
#
# Minimize the 2-D Sphere function with a Matern 3/2 surrogate and LogEI.
# Designs live in the unit cube; the objective maps them to ``[-5, 5]^2``.

# %%
import numpy as np

from adabo import OptimizerConfig, recommend, run
from adabo.bench import SyntheticObjective, initial_doe

obj = SyntheticObjective("Sphere", 2)
init = initial_doe(obj, dim=2, n_init=8, offset=0)
print("initial best:", init.y.min())

# %%
history = run(obj, init, OptimizerConfig(iterations=20, seed=0))
for r in history.records[::5]:
    print(f"iteration {r.iteration:2d}  y = {r.y:.4g}  incumbent = {r.incumbent:.4g}")

# %% [markdown]
# The recommendation is the best evaluated design, reported in native units.

# %%
u, y = recommend(history)
print("x* =", obj.to_native(u), " f =", y)

# %% [markdown]
# ## Adaptive acquisition
#
# ``BO_iAda`` proposes one candidate per acquisition function, drops those
# that crowd existing designs and picks among the rest.

# %%
ada = run(obj, init, OptimizerConfig(variant="BO_iAda", selection="Categorical", iterations=20, seed=0))
picked = np.bincount([r.acquisition for r in ada.records], minlength=len(ada.config.acquisition_set))
for kind, n in zip(ada.config.acquisition_set, picked):
    print(f"{kind.name:>8}: chosen {n} times")
print("final incumbent:", ada.incumbents[-1])
