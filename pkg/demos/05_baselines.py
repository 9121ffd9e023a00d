# %% [markdown]
# # Distance-based baselines under the same calibration
#
# Every statistic is calibrated by the same parametric bootstrap, so their
# p-values are directly comparable.

# %%
import numpy as np

from sksd.baselines import BASELINE_KINDS, baseline_test

x = np.random.default_rng(0).standard_t(4, size=100)
for kind in BASELINE_KINDS + ("sksd",):
    rep = baseline_test(kind, x, B=100, seed=1)
    print(f"{kind:10s} statistic={rep.statistic:9.4f}  p={rep.p_value:.2f}")
