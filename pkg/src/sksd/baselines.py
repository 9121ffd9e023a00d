"""One-dimensional distance statistics for Gaussian nulls, plus adapters that plug
each of them into :func:`sksd.bootstrap.bootstrap_calibrate`."""
from __future__ import annotations

import numpy as np
from scipy import stats
from scipy.special import erfc

from .bootstrap import bootstrap_calibrate, resolve_kernel
from .kernels import KernelSpec
from .models import GaussianFamily, as_samples
from .stein import v_statistic

AD_CLAMP = 1e-12
BASELINE_KINDS = ("ks", "w1", "mmd", "ad", "lilliefors", "lrt")


def normal_cdf(z):
    return 0.5 * erfc(-np.asarray(z, dtype=float) / np.sqrt(2.0))


def _univariate(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    if x.ndim == 2:
        if x.shape[1] != 1:
            raise ValueError("baseline statistics are one-dimensional")
        x = x[:, 0]
    x = np.atleast_1d(x)
    if x.size < 1:
        raise ValueError("empty sample")
    return x


def ks_statistic(samples, model_cdf) -> float:
    """``sup_x |F_n(x) - F(x)|`` via the order statistics."""
    x = np.sort(_univariate(samples))
    n = x.size
    F = np.asarray(model_cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def w1_statistic(samples, model_samples) -> float:
    """Wasserstein-1 distance between two equal-size empirical measures on R."""
    x = np.sort(_univariate(samples))
    y = np.sort(_univariate(model_samples))
    if x.size != y.size:
        raise ValueError(f"W1 needs matched sample sizes, got {x.size} and {y.size}")
    return float(np.mean(np.abs(x - y)))


def w1_model_statistic(samples, model_sampler, m: int, seed) -> float:
    """W1 between the data and ``m`` fresh draws ``model_sampler(m, rng)``."""
    x = _univariate(samples)
    if m != x.size:
        raise ValueError("W1 against the model needs m == n")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return w1_statistic(x, model_sampler(m, rng))


def mmd_v_statistic(samples, model_samples, spec: KernelSpec) -> float:
    """Biased (V-form) squared MMD."""
    X = as_samples(samples)
    Y = as_samples(model_samples)
    if X.shape[1] != Y.shape[1]:
        raise ValueError("dimension mismatch")
    return float(spec.gram(X, X).mean() + spec.gram(Y, Y).mean() - 2.0 * spec.gram(X, Y).mean())


def anderson_darling_statistic(samples, mu: float, sigma: float) -> float:
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    x = np.sort(_univariate(samples))
    n = x.size
    u = np.clip(normal_cdf((x - mu) / sigma), AD_CLAMP, 1.0 - AD_CLAMP)
    i = np.arange(1, n + 1)
    return float(-n - np.sum((2 * i - 1) * (np.log(u) + np.log1p(-u[::-1]))) / n)


def lilliefors_statistic(samples) -> float:
    """KS distance to the normal fitted with the sample mean and unbiased variance."""
    x = _univariate(samples)
    if x.size < 2:
        raise ValueError("Lilliefors needs at least two points")
    mu, sd = x.mean(), x.std(ddof=1)
    if not sd > 0:
        raise ValueError("zero sample variance")
    return ks_statistic(x, lambda t: normal_cdf((t - mu) / sd))


def vuong_statistic(samples, mu: float, sigma: float) -> float:
    """Normalised log-likelihood ratio of a fitted Student-t against ``N(mu, sigma^2)``."""
    x = _univariate(samples)
    df, loc, scale = stats.t.fit(x)
    ell = stats.t.logpdf(x, df, loc, scale) - stats.norm.logpdf(x, mu, sigma)
    sd = ell.std()
    if not sd > 0:
        return 0.0
    return float(np.sqrt(x.size) * ell.mean() / sd)


def baseline_statistic(kind: str, kernel: KernelSpec | None = None):
    """``statistic_fn(theta, X, rng)`` for the Gaussian ``(mu, sigma)`` null."""
    family = GaussianFamily()
    if kind == "ks":
        return lambda th, X, rng=None: ks_statistic(X, lambda t: normal_cdf((t - th[0]) / th[1]))
    if kind == "w1":
        def w1(th, X, rng):
            n = X.shape[0]
            return w1_model_statistic(X, lambda m, r: family.sample(th, m, r), n, rng)
        return w1
    if kind == "mmd":
        if kernel is None:
            raise ValueError("the MMD statistic needs a kernel")
        return lambda th, X, rng: mmd_v_statistic(X, family.sample(th, X.shape[0], rng), kernel)
    if kind == "ad":
        return lambda th, X, rng=None: anderson_darling_statistic(X, th[0], th[1])
    if kind == "lilliefors":
        return lambda th, X, rng=None: lilliefors_statistic(X)
    if kind == "lrt":
        return lambda th, X, rng=None: vuong_statistic(X, th[0], th[1])
    if kind == "sksd":
        return lambda th, X, rng=None: v_statistic(family, th, kernel, X).value
    raise ValueError(f"unknown baseline {kind!r}; expected one of {BASELINE_KINDS}")


def baseline_test(kind: str, samples, estimator="mle_gaussian", B: int = 200,
                  alpha: float = 0.05, seed: int = 0, kernel="median",
                  pvalue_convention: str = "paper"):
    """Bootstrap-calibrated baseline test of normality."""
    family = GaussianFamily()
    X = as_samples(samples, 1)
    spec = resolve_kernel(kernel, X) if kind in ("mmd", "sksd") or estimator != "mle_gaussian" \
        else None
    return bootstrap_calibrate(baseline_statistic(kind, spec), family, estimator, X, B, alpha,
                               seed, pvalue_convention, spec)
