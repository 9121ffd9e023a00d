"""Parametric-bootstrap calibration of goodness-of-fit statistics."""
from __future__ import annotations

import inspect
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ._rng import child_rng
from .estimators import as_estimator
from .kernels import KernelSpec, median_heuristic
from .models import ModelFamily, as_samples
from .stein import v_statistic

log = logging.getLogger(__name__)

PVALUE_CONVENTIONS = ("paper", "plus-one")
MEDIAN = "median"
FAILURE_FLAG_FRACTION = 0.02


@dataclass
class TestReport:
    """Outcome of one calibrated test."""

    statistic: float
    theta_hat: np.ndarray
    bootstrap_stats: np.ndarray
    p_value: float
    reject: bool
    B: int
    seed: int
    alpha: float
    wall_time: float = 0.0
    n_failed: int = 0
    pvalue_convention: str = "paper"
    kernel: KernelSpec | None = None
    extras: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    @property
    def failure_flag(self) -> bool:
        return self.n_failed > FAILURE_FLAG_FRACTION * self.B

    def to_dict(self, include_replicates: bool = True) -> dict:
        out = {
            "statistic": float(self.statistic),
            "theta_hat": [float(t) for t in np.atleast_1d(self.theta_hat)],
            "p_value": float(self.p_value),
            "reject": bool(self.reject),
            "alpha": self.alpha,
            "B": self.B,
            "seed": self.seed,
            "n_failed": self.n_failed,
            "failure_flag": self.failure_flag,
            "pvalue_convention": self.pvalue_convention,
            "kernel": self.kernel.to_dict() if self.kernel else None,
            "wall_time": self.wall_time,
        }
        if include_replicates:
            out["bootstrap_stats"] = [float(t) for t in self.bootstrap_stats]
        out.update(self.extras)
        return out

    def summary(self) -> str:
        verdict = "reject" if self.reject else "do not reject"
        return (f"T={self.statistic:.6g} p={self.p_value:.4g} ({verdict} at alpha={self.alpha}) "
                f"theta_hat={np.round(np.atleast_1d(self.theta_hat), 4).tolist()} B={self.B}")


def p_value(statistic: float, replicates, convention: str = "paper") -> float:
    """Fraction of replicates at least as large as ``statistic`` (ties count)."""
    reps = np.asarray(replicates, dtype=float)
    if reps.size == 0:
        raise ValueError("no bootstrap replicates")
    count = int(np.sum(reps >= statistic))
    if convention == "paper":
        return count / reps.size
    if convention == "plus-one":
        return (1 + count) / (1 + reps.size)
    raise ValueError(f"unknown p-value convention {convention!r}")


def resolve_kernel(kernel, samples) -> KernelSpec:
    """A concrete KernelSpec; the string ``"median"`` selects a Gaussian kernel with the
    median-heuristic bandwidth of ``samples``."""
    if isinstance(kernel, KernelSpec):
        return kernel
    if kernel == MEDIAN or kernel is None:
        return KernelSpec.gaussian(median_heuristic(samples))
    if kernel == "linear":
        return KernelSpec.linear()
    raise ValueError(f"cannot interpret kernel {kernel!r}")


def _with_rng(statistic_fn):
    """Accept both ``f(theta, X)`` and ``f(theta, X, rng)`` statistics."""
    try:
        params = inspect.signature(statistic_fn).parameters.values()
    except (TypeError, ValueError):
        return statistic_fn
    positional = [p for p in params if p.kind in (p.POSITIONAL_ONLY, p.POSITIONAL_OR_KEYWORD)]
    if len(positional) >= 3 or any(p.kind is p.VAR_POSITIONAL for p in params):
        return statistic_fn
    return lambda theta, X, rng: statistic_fn(theta, X)


def bootstrap_calibrate(statistic_fn, family: ModelFamily, estimator, samples, B: int = 200,
                        alpha: float = 0.05, seed: int = 0, pvalue_convention: str = "paper",
                        kernel: KernelSpec | None = None) -> TestReport:
    """Parametric bootstrap for ``statistic_fn(theta, samples[, rng]) -> float``.

    Each replicate ``b`` draws ``n`` points from the fitted model, refits, and
    recomputes the statistic using its own child random stream, so the report is
    a pure function of the inputs and ``seed``. Replicates whose refit fails are
    discarded and counted; a failure on the observed data raises.
    """
    if B < 1:
        raise ValueError("B must be at least 1")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if pvalue_convention not in PVALUE_CONVENTIONS:
        raise ValueError(f"unknown p-value convention {pvalue_convention!r}")
    start = time.perf_counter()
    fit = as_estimator(estimator)
    statistic_fn = _with_rng(statistic_fn)
    X = as_samples(samples, family.data_dim)
    n = X.shape[0]
    theta_hat = fit(family, X, kernel)
    T = float(statistic_fn(theta_hat, X, child_rng(seed, 0, "observed-statistic")))

    reps = []
    n_failed = 0
    for b in range(B):
        rng = child_rng(seed, b, "bootstrap")
        Xb = family.sample(theta_hat, n, rng)
        try:
            theta_b = fit(family, Xb, kernel)
            Tb = float(statistic_fn(theta_b, Xb, rng))
        except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
            log.debug("bootstrap replicate %d failed: %s", b, exc)
            n_failed += 1
            continue
        if not np.isfinite(Tb):
            n_failed += 1
            continue
        reps.append(Tb)
    if not reps:
        raise RuntimeError("every bootstrap replicate failed")
    reps = np.asarray(reps)
    p = p_value(T, reps, pvalue_convention)
    return TestReport(
        statistic=T, theta_hat=np.atleast_1d(theta_hat), bootstrap_stats=reps, p_value=p,
        reject=bool(p <= alpha), B=B, seed=seed, alpha=alpha,
        wall_time=time.perf_counter() - start, n_failed=n_failed,
        pvalue_convention=pvalue_convention, kernel=kernel,
    )


def sksd_statistic(family: ModelFamily, kernel: KernelSpec):
    """The SKSD V-statistic as a ``statistic_fn`` for :func:`bootstrap_calibrate`."""

    def statistic(theta, X, rng=None):
        return v_statistic(family, theta, kernel, X).value

    return statistic


def sksd_test(family: ModelFamily, estimator, kernel, samples, B: int = 200,
              alpha: float = 0.05, seed: int = 0, pvalue_convention: str = "paper",
              bandwidth_per_replicate: bool = False) -> TestReport:
    """Semiparametric KSD goodness-of-fit test calibrated by parametric bootstrap.

    ``kernel`` is a KernelSpec or ``"median"``. The median-heuristic bandwidth is
    computed once on the observed sample and reused for every replicate, unless
    ``bandwidth_per_replicate`` asks for it to be recomputed on each resample.
    """
    X = as_samples(samples, family.data_dim)
    spec = resolve_kernel(kernel, X)
    if bandwidth_per_replicate and not isinstance(kernel, KernelSpec):
        def statistic(theta, Xs, rng=None):
            return v_statistic(family, theta, resolve_kernel(kernel, Xs), Xs).value

        def fit(fam, Xs, _kernel):
            return as_estimator(estimator)(fam, Xs, resolve_kernel(kernel, Xs))

        return bootstrap_calibrate(statistic, family, fit, X, B, alpha, seed,
                                   pvalue_convention, spec)
    return bootstrap_calibrate(sksd_statistic(family, spec), family, estimator, X, B, alpha,
                               seed, pvalue_convention, spec)
