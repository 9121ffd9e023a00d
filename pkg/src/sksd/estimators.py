"""Nuisance-parameter estimators: Gaussian MLE, closed-form minimum-KSD and score
matching for affine-score families, and a derivative-free minimum-KSD fallback."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .kernels import LINEAR, KernelSpec
from .models import SIGMA_FLOOR, ModelFamily, as_samples
from .stein import v_statistic

MAX_CONDITION = 1e12

ESTIMATOR_KINDS = ("mle_gaussian", "min_ksd_closed", "score_matching_closed", "min_ksd_numeric")


class EstimationError(RuntimeError):
    """The estimator could not produce a parameter for this sample."""


class ConvergenceWarning(UserWarning):
    pass


def project_to_domain(family: ModelFamily, theta) -> np.ndarray:
    return family.project(theta)


def mle_gaussian(samples) -> np.ndarray:
    """``(mean, sqrt(mean squared deviation))`` of a univariate sample."""
    x = as_samples(samples, 1)[:, 0]
    if x.size < 2:
        raise EstimationError("Gaussian MLE needs at least two points")
    mu = x.mean()
    sigma = np.sqrt(np.mean((x - mu) ** 2))
    if not sigma > 0:
        raise EstimationError("zero sample variance")
    return np.array([mu, max(sigma, SIGMA_FLOOR)])


def _solve(Q, rhs, what):
    cond = np.linalg.cond(Q)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise EstimationError(f"{what} system is ill-conditioned (condition number {cond:.3g})")
    return np.linalg.solve(Q, rhs)


def min_ksd_normal_equations(family: ModelFamily, spec: KernelSpec, samples):
    """``(Q, c)`` such that ``n^2 V(theta) = theta' Q theta + 2 c' theta + const``."""
    X = as_samples(samples, family.data_dim)
    n, d = X.shape
    dec = family.affine_decomposition(X)
    J, b = dec.J, dec.b
    k = J.shape[2]
    K = spec.gram(X, X)
    KJ = (K @ J.reshape(n, d * k)).reshape(n, d, k)
    Q = np.einsum("iak,ial->kl", J, KJ)
    # W_i = sum_j [K_ij b_j + grad_2 K(x_i, x_j)]
    if spec.kind == LINEAR:
        W = K @ b + n * X
    else:
        W = K @ b + (X * K.sum(axis=1)[:, None] - K @ X) / spec.bandwidth**2
    c = np.einsum("iak,ia->k", J, W)
    return 0.5 * (Q + Q.T), c


def min_ksd_closed_form(family: ModelFamily, spec: KernelSpec, samples) -> np.ndarray:
    """Exact minimiser of the KSD V-statistic for an affine-score family, box-projected."""
    if not family.affine:
        raise EstimationError(f"{type(family).__name__} has no affine score decomposition")
    Q, c = min_ksd_normal_equations(family, spec, samples)
    return family.project(_solve(Q, -c, "minimum-KSD"))


def score_matching_closed_form(family: ModelFamily, samples) -> np.ndarray:
    """Minimiser of ``(1/n) sum_i [|s(x_i)|^2 / 2 + div s(x_i)]`` for an affine family."""
    if not family.affine:
        raise EstimationError(f"{type(family).__name__} has no affine score decomposition")
    X = as_samples(samples, family.data_dim)
    dec = family.affine_decomposition(X)
    Q = np.einsum("iak,ial->kl", dec.J, dec.J)
    rhs = dec.divergence_grad.sum(axis=0) + np.einsum("iak,ia->k", dec.J, dec.b)
    return family.project(_solve(Q, -rhs, "score-matching"))


@dataclass
class NumericResult:
    theta: np.ndarray
    objective: float
    converged: bool
    n_iter: int


def min_ksd_numeric_result(family: ModelFamily, spec: KernelSpec, samples, init=None,
                           max_iter: int = 2000, tol: float = 1e-8) -> NumericResult:
    X = as_samples(samples, family.data_dim)
    if init is None:
        try:
            init = min_ksd_closed_form(family, spec, X) if family.affine else None
        except EstimationError:
            init = None
        if init is None:
            init = family.initial_theta(X)
    init = family.project(init)

    def objective(theta):
        return v_statistic(family, family.project(theta), spec, X).value

    f0 = objective(init)
    if not np.isfinite(f0):
        raise EstimationError("minimum-KSD objective is not finite at the initial point")
    res = optimize.minimize(
        objective, init, method="Nelder-Mead",
        options={"xatol": tol, "fatol": tol * max(1.0, abs(f0)), "maxiter": max_iter,
                 "maxfev": 4 * max_iter},
    )
    theta = family.project(res.x)
    if res.fun > f0:
        theta, fun = init, f0
    else:
        fun = float(res.fun)
    if not res.success:
        warnings.warn(f"Nelder-Mead stopped before converging: {res.message}", ConvergenceWarning,
                      stacklevel=2)
    return NumericResult(theta, fun, bool(res.success), int(res.nit))


def min_ksd_numeric(family: ModelFamily, spec: KernelSpec, samples, init=None,
                    max_iter: int = 2000, tol: float = 1e-8) -> np.ndarray:
    """Local minimiser of the KSD V-statistic by Nelder-Mead simplex search."""
    return min_ksd_numeric_result(family, spec, samples, init, max_iter, tol).theta


@dataclass
class EstimatorSpec:
    """Which estimator to run; ``kernel=None`` defers to the test's kernel."""

    kind: str = "mle_gaussian"
    kernel: KernelSpec | None = None
    max_iter: int = 2000
    tol: float = 1e-8
    init: list | None = field(default=None)

    def __post_init__(self):
        if self.kind not in ESTIMATOR_KINDS:
            raise ValueError(f"unknown estimator {self.kind!r}; expected one of {ESTIMATOR_KINDS}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "kernel": self.kernel.to_dict() if self.kernel else None,
                "max_iter": self.max_iter, "tol": self.tol, "init": self.init}

    def fit(self, family: ModelFamily, samples, kernel: KernelSpec | None = None) -> np.ndarray:
        """Estimate theta on ``samples``; ``kernel`` is used when the spec has none."""
        spec = self.kernel or kernel
        if self.kind == "mle_gaussian":
            if family.param_dim != 2 or family.data_dim != 1:
                raise EstimationError("mle_gaussian applies to the (mu, sigma) Gaussian family")
            return family.project(mle_gaussian(samples))
        if spec is None and self.kind in ("min_ksd_closed", "min_ksd_numeric"):
            raise EstimationError(f"{self.kind} needs a kernel")
        if self.kind == "min_ksd_closed":
            return min_ksd_closed_form(family, spec, samples)
        if self.kind == "score_matching_closed":
            return score_matching_closed_form(family, samples)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            return min_ksd_numeric(family, spec, samples, self.init, self.max_iter, self.tol)


def as_estimator(estimator):
    """Normalise an EstimatorSpec, kind string, or ``f(family, samples, kernel)`` callable."""
    if isinstance(estimator, str):
        estimator = EstimatorSpec(estimator)
    if isinstance(estimator, EstimatorSpec):
        return estimator.fit
    if callable(estimator):
        return estimator
    raise TypeError(f"cannot use {estimator!r} as an estimator")
