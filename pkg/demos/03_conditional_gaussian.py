# %% [markdown]
# # Graphical model with Gaussian conditionals
#
# A ring-structured model in eight dimensions, sampled with a Gibbs sampler.
# The interaction weights enter the score linearly, so both the minimum-KSD and the
# score-matching estimators are a single linear solve.

# %%
import numpy as np

from sksd import (ChainConfig, ConditionalGaussianFamily, KernelSpec, min_ksd_closed_form,
                  score_matching_closed_form, sksd_test)
from sksd.samplers import cond_gauss_ring_sigma

d = 8
EPS = 1.5
chain = ChainConfig(burn_in=500, thin=2)
family = ConditionalGaussianFamily(d, edges=[(i, (i + 1) % d) for i in range(d)], chain=chain)
Sigma = cond_gauss_ring_sigma(d, 2.5)
theta = family.theta_from_sigma(Sigma)
x = family.sample(theta, 500, np.random.default_rng(0))

# %%
spec = KernelSpec.gaussian(np.sqrt(d))
print("truth         ", np.round(theta, 3))
print("min KSD       ", np.round(min_ksd_closed_form(family, spec, x), 3))
print("score matching", np.round(score_matching_closed_form(family, x), 3))

# %% [markdown]
# Second-neighbour interactions of weight `-eps/100` move the data off the ring null,
# but the departure is small next to ring weights of 2 or more. A single sample of 500
# points rarely shows it; detection rates need replicated runs (see the harness demo).

# %%
alt = ConditionalGaussianFamily(d, edges=[tuple(sorted((i, (i + k) % d)))
                                          for i in range(d) for k in (1, 2)], chain=chain)
x_alt = alt.sample(alt.theta_from_sigma(cond_gauss_ring_sigma(d, 2.5, eps=EPS)), 500,
                   np.random.default_rng(1))
for name, data in (("null", x), (f"eps={EPS}", x_alt)):
    print(name, sksd_test(family, "min_ksd_closed", "median", data, B=50, seed=3).summary())
