# %% [markdown]
# # Choosing a kernel from held-out data
#
# The search walks kernel families and restricted hyperparameter domains,
# scoring each fit by relative mean squared error on a test split and
# stopping as soon as a fit is good enough.

# %%
import numpy as np

from adabo import GpiConfig, gpi_search, split_train_test
from adabo.gpi import enumerate_rlds
from adabo.gpr import Doe, fit_mle, predict
from adabo.kernels import KernelFamily, KernelSpec
from adabo.model_quality import score

rlds = enumerate_rlds()
print(len(rlds), "candidate domains; first few:")
for spec in rlds[:6]:
    print("  ", spec.describe())

# %%
rng = np.random.default_rng(1)
X = rng.random((60, 2))
y = np.abs(np.sin(6 * X[:, 0])) + 0.5 * X[:, 1] + 0.01 * rng.standard_normal(60)
train, test = split_train_test(Doe(X, y), 0.2, rng=0)
print("train/test sizes:", train.n, test.n)

# %%
result = gpi_search(train, test, GpiConfig(), rng=0)
print("winner:", result.spec.describe())
print(f"RelMSE {result.score.relmse:.4f}, TLL {result.score.tll:.3f}, trials {result.trials_used}")

# %% [markdown]
# For comparison, the three unrestricted families scored on the same split.

# %%
for family in KernelFamily:
    rpd = fit_mle(train, KernelSpec(family), restarts=8, rng=0)
    s = score(test, rpd)
    print(f"{family.value:>9}: RelMSE {s.relmse:.4f}  TLL {s.tll:.3f}")

mean, var = predict(rpd, test.X[:3])
print("RQ predictions:", np.round(mean, 3), "+/-", np.round(np.sqrt(var), 3))
