"""Score-based parametric families.

Everything the Stein statistic needs is the score ``s_theta(x) = grad_x log p_theta(x)``;
unnormalised log-densities are exposed for the MCMC samplers. All array-valued
methods are vectorised over the rows of an ``(n, d)`` sample matrix.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial, sqrt

import numba
import numpy as np

from .samplers import ChainConfig, gibbs_conditional_gaussian, mala_sample

SIGMA_FLOOR = 1e-8
GAMMA2_CEILING = -1e-6


def as_samples(samples, data_dim: int | None = None) -> np.ndarray:
    """Coerce ``samples`` to a finite ``(n, d)`` float array."""
    X = np.asarray(samples, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X[:, None] if data_dim in (None, 1) else X[None, :]
    if X.ndim != 2:
        raise ValueError(f"samples must be an (n, d) array, got shape {X.shape}")
    if data_dim is not None and X.shape[1] != data_dim:
        raise ValueError(f"expected {data_dim}-dimensional points, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("samples contain non-finite values")
    return X


@dataclass
class AffineScoreDecomposition:
    """``score(theta, x) = J(x) @ theta + b(x)`` evaluated at each sample row.

    ``J`` has shape (n, d, k), ``b`` (n, d) and ``divergence_grad`` (n, k), the
    latter being the theta-gradient of ``div_x score``.
    """

    J: np.ndarray
    b: np.ndarray
    divergence_grad: np.ndarray

    def score(self, theta) -> np.ndarray:
        return np.einsum("iak,k->ia", self.J, np.asarray(theta, dtype=float)) + self.b


class ModelFamily:
    """Base class for parametric families ``{p_theta : theta in box}``."""

    param_dim: int
    data_dim: int
    affine = False
    param_names: tuple[str, ...] = ()

    @property
    def lower(self) -> np.ndarray:
        return np.full(self.param_dim, -np.inf)

    @property
    def upper(self) -> np.ndarray:
        return np.full(self.param_dim, np.inf)

    def check_theta(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.param_dim,):
            raise ValueError(f"expected {self.param_dim} parameters, got shape {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise ValueError("non-finite parameter")
        return theta

    def project(self, theta) -> np.ndarray:
        return np.clip(self.check_theta(theta), self.lower, self.upper)

    def in_domain(self, theta) -> bool:
        theta = self.check_theta(theta)
        return bool(np.all(theta >= self.lower) and np.all(theta <= self.upper))

    def score(self, theta, X) -> np.ndarray:
        raise NotImplementedError

    def param_score_jacobian(self, theta, X) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no parameter Jacobian")

    def param_divergence_grad(self, theta, X) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no divergence gradient")

    def unnorm_logdensity(self, theta, X) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no log-density")

    def sample(self, theta, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no sampler")

    def affine_decomposition(self, X) -> AffineScoreDecomposition:
        raise TypeError(f"{type(self).__name__} is not affine in its parameters")

    def initial_theta(self, X) -> np.ndarray:
        """Starting point for numeric estimators."""
        return self.project(np.zeros(self.param_dim))

    def numba_target(self, theta):
        """``(logp_grad, params)`` for the compiled MALA path, or None."""
        return None

    def describe(self) -> dict:
        return {"name": type(self).__name__}


class AffineFamily(ModelFamily):
    """Families whose score is affine in theta; derived quantities come for free."""

    affine = True

    def score(self, theta, X):
        theta = self.check_theta(theta)
        return self.affine_decomposition(X).score(theta)

    def param_score_jacobian(self, theta, X):
        self.check_theta(theta)
        return self.affine_decomposition(X).J

    def param_divergence_grad(self, theta, X):
        self.check_theta(theta)
        return self.affine_decomposition(X).divergence_grad


# --------------------------------------------------------------------------
# Gaussian N(mu, sigma^2), d = 1
# --------------------------------------------------------------------------


def gaussian_score(mu: float, sigma: float, x):
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return -(np.asarray(x, dtype=float) - mu) / sigma**2


@numba.njit(cache=True)
def _gaussian_logp_grad(x, params):
    mu, sigma = params[0], params[1]
    z = (x[0] - mu) / sigma
    g = np.empty(1)
    g[0] = -z / sigma
    return -0.5 * z * z, g


class GaussianFamily(ModelFamily):
    """Univariate normal parameterised by ``(mu, sigma)``."""

    param_dim = 2
    data_dim = 1
    param_names = ("mu", "sigma")

    @property
    def lower(self):
        return np.array([-np.inf, SIGMA_FLOOR])

    def _unpack(self, theta):
        mu, sigma = self.check_theta(theta)
        if not sigma > 0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        return mu, sigma

    def score(self, theta, X):
        mu, sigma = self._unpack(theta)
        return gaussian_score(mu, sigma, as_samples(X, 1))

    def param_score_jacobian(self, theta, X):
        mu, sigma = self._unpack(theta)
        x = as_samples(X, 1)[:, 0]
        jac = np.empty((x.size, 1, 2))
        jac[:, 0, 0] = 1.0 / sigma**2
        jac[:, 0, 1] = 2.0 * (x - mu) / sigma**3
        return jac

    def param_divergence_grad(self, theta, X):
        _, sigma = self._unpack(theta)
        n = as_samples(X, 1).shape[0]
        out = np.zeros((n, 2))
        out[:, 1] = 2.0 / sigma**3
        return out

    def unnorm_logdensity(self, theta, X):
        mu, sigma = self._unpack(theta)
        x = as_samples(X, 1)[:, 0]
        return -((x - mu) ** 2) / (2.0 * sigma**2)

    def sample(self, theta, n, rng):
        mu, sigma = self._unpack(theta)
        return (mu + sigma * rng.standard_normal(n))[:, None]

    def initial_theta(self, X):
        x = as_samples(X, 1)[:, 0]
        return self.project([x.mean(), x.std()])

    def numba_target(self, theta):
        mu, sigma = self._unpack(theta)
        return _gaussian_logp_grad, np.array([mu, sigma])

    def describe(self):
        return {"name": "gaussian"}


class GaussianLocationFamily(AffineFamily):
    """``N(theta, I_d)``: score ``theta - x``."""

    param_names = ()

    def __init__(self, d: int = 1):
        self.data_dim = self.param_dim = int(d)
        self.param_names = tuple(f"theta{i}" for i in range(self.param_dim))

    def affine_decomposition(self, X):
        X = as_samples(X, self.data_dim)
        n, d = X.shape
        J = np.broadcast_to(np.eye(d), (n, d, d)).copy()
        return AffineScoreDecomposition(J, -X, np.zeros((n, d)))

    def unnorm_logdensity(self, theta, X):
        theta = self.check_theta(theta)
        X = as_samples(X, self.data_dim)
        return -0.5 * np.sum((X - theta) ** 2, axis=1)

    def sample(self, theta, n, rng):
        theta = self.check_theta(theta)
        return theta + rng.standard_normal((n, self.data_dim))

    def describe(self):
        return {"name": "gaussian_location", "d": self.data_dim}


# --------------------------------------------------------------------------
# Finite-rank kernel exponential family on R
# --------------------------------------------------------------------------


def _kef_basis(x: np.ndarray, rank: int, bandwidth: float):
    """phi_l, phi_l', phi_l'' for l = 1..rank at points x (shape (n,)); each (n, rank)."""
    s2 = bandwidth**2
    g = np.exp(-(x**2) / (2.0 * s2))
    ell = np.arange(1, rank + 1)
    norm = np.array([sqrt(factorial(int(l))) for l in ell])
    xc = x[:, None]
    # negative powers only occur with a zero coefficient (l = 1 in phi'')
    def pw(p):
        return np.where(p >= 0, xc ** np.maximum(p, 0), 0.0)

    phi = pw(ell) * g[:, None] / norm
    dphi = (ell * pw(ell - 1) - pw(ell + 1) / s2) * g[:, None] / norm
    d2phi = (
        ell * (ell - 1) * pw(ell - 2) - (2 * ell + 1) * pw(ell) / s2 + pw(ell + 2) / s2**2
    ) * g[:, None] / norm
    return phi, dphi, d2phi


def kef_score(theta, x, bandwidth: float = 1.0, ref_var: float = 9.0):
    """Score of ``q(x) exp(sum_l theta_l phi_l(x))`` with ``q = N(0, ref_var)``."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if not np.all(np.isfinite(theta)):
        raise ValueError("non-finite parameter")
    x = np.asarray(x, dtype=float)
    flat = np.atleast_1d(x).ravel()
    _, dphi, _ = _kef_basis(flat, theta.size, bandwidth)
    out = -flat / ref_var + dphi @ theta
    return out.reshape(x.shape) if x.ndim else float(out[0])


@numba.njit(cache=True)
def _kef_logp_grad(x, params):
    bw, ref_var = params[0], params[1]
    theta = params[2:]
    x0 = x[0]
    s2 = bw * bw
    g = np.exp(-x0 * x0 / (2.0 * s2))
    logp = -x0 * x0 / (2.0 * ref_var)
    grad = -x0 / ref_var
    norm = 1.0
    for l in range(1, theta.size + 1):
        norm *= np.sqrt(l)
        xl = x0**l
        logp += theta[l - 1] * xl * g / norm
        grad += theta[l - 1] * (l * x0 ** (l - 1) - x0 ** (l + 1) / s2) * g / norm
    out = np.empty(1)
    out[0] = grad
    return logp, out


class KernelExpFamily(AffineFamily):
    """Rank-``p`` kernel exponential family with Gaussian-kernel basis functions.

    ``p(x) ~ N(x; 0, ref_var) * exp(sum_l theta_l x^l / sqrt(l!) * exp(-x^2 / (2 bw^2)))``,
    sampled by MALA.
    """

    data_dim = 1

    def __init__(self, rank: int = 1, bandwidth: float = 1.0, ref_var: float = 9.0,
                 chain: ChainConfig | None = None):
        if rank < 1:
            raise ValueError("rank must be at least 1")
        if not (bandwidth > 0 and ref_var > 0):
            raise ValueError("bandwidth and ref_var must be positive")
        self.param_dim = int(rank)
        self.bandwidth = float(bandwidth)
        self.ref_var = float(ref_var)
        self.chain = chain or ChainConfig()
        self.param_names = tuple(f"theta{l}" for l in range(1, rank + 1))

    def affine_decomposition(self, X):
        x = as_samples(X, 1)[:, 0]
        _, dphi, d2phi = _kef_basis(x, self.param_dim, self.bandwidth)
        return AffineScoreDecomposition(dphi[:, None, :], (-x / self.ref_var)[:, None], d2phi)

    def unnorm_logdensity(self, theta, X):
        theta = self.check_theta(theta)
        x = as_samples(X, 1)[:, 0]
        phi, _, _ = _kef_basis(x, self.param_dim, self.bandwidth)
        return -(x**2) / (2.0 * self.ref_var) + phi @ theta

    def numba_target(self, theta):
        theta = self.check_theta(theta)
        return _kef_logp_grad, np.concatenate([[self.bandwidth, self.ref_var], theta])

    def sample(self, theta, n, rng):
        return mala_sample(self, theta, self.chain, n, rng=rng)

    def describe(self):
        return {"name": "kef", "rank": self.param_dim, "bandwidth": self.bandwidth,
                "ref_var": self.ref_var, "chain": self.chain.to_dict()}


# --------------------------------------------------------------------------
# Conditional Gaussian quadratic-interaction model
# --------------------------------------------------------------------------


def check_cond_gauss_params(Sigma, gamma1, gamma2):
    """Validate and return ``(Sigma, gamma1, gamma2)`` as arrays."""
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    d = Sigma.shape[0]
    gamma1 = np.broadcast_to(np.asarray(gamma1, dtype=float), (d,)).copy()
    gamma2 = np.broadcast_to(np.asarray(gamma2, dtype=float), (d,)).copy()
    if Sigma.shape != (d, d):
        raise ValueError("Sigma must be square")
    if not np.allclose(Sigma, Sigma.T, rtol=0, atol=1e-12):
        raise ValueError("Sigma must be symmetric")
    if np.any(np.diag(Sigma) != 0):
        raise ValueError("Sigma must have a zero diagonal")
    if np.any(Sigma > 0):
        raise ValueError("off-diagonal Sigma entries must be <= 0")
    if np.any(gamma2 >= 0):
        raise ValueError("gamma2 entries must be negative")
    return Sigma, gamma1, gamma2


def cond_gauss_score(Sigma, gamma1, gamma2, x):
    """Score ``4 x_i sum_j Sigma_ij x_j^2 + 2 gamma2_i x_i + gamma1_i`` (rows of x)."""
    Sigma, gamma1, gamma2 = check_cond_gauss_params(Sigma, gamma1, gamma2)
    x = np.asarray(x, dtype=float)
    X = np.atleast_2d(x)
    S = 4.0 * X * ((X**2) @ Sigma) + 2.0 * gamma2 * X + gamma1
    return S.reshape(x.shape)


def ring_edges(d: int, reach: int = 1) -> list[tuple[int, int]]:
    """Edges ``(i, j), i < j`` joining nodes at circular distance 1..reach."""
    edges = set()
    for i in range(d):
        for r in range(1, reach + 1):
            j = (i + r) % d
            if i != j:
                edges.add((min(i, j), max(i, j)))
    return sorted(edges)


class ConditionalGaussianFamily(AffineFamily):
    """Quadratic-interaction model with Gaussian full conditionals.

    Free parameters are the interaction strengths ``Sigma_ij`` on ``edges``
    (upper-triangle pairs; symmetry is applied on reconstruction). With
    ``estimate_gammas`` the linear and quadratic coefficients are appended as
    ``gamma1`` (d values) and ``gamma2`` (d values).
    """

    def __init__(self, d: int, gamma1=2.0, gamma2=-0.5, edges=None,
                 estimate_gammas: bool = False, chain: ChainConfig | None = None):
        self.data_dim = int(d)
        self.edges = [tuple(sorted(map(int, e))) for e in (edges if edges is not None else
                      [(i, j) for i in range(d) for j in range(i + 1, d)])]
        if any(a == b or not (0 <= a < d and 0 <= b < d) for a, b in self.edges):
            raise ValueError("edges must join distinct nodes in range")
        self.gamma1 = np.broadcast_to(np.asarray(gamma1, dtype=float), (d,)).copy()
        self.gamma2 = np.broadcast_to(np.asarray(gamma2, dtype=float), (d,)).copy()
        if np.any(self.gamma2 >= 0):
            raise ValueError("gamma2 entries must be negative")
        self.estimate_gammas = bool(estimate_gammas)
        self.n_edges = len(self.edges)
        self.param_dim = self.n_edges + (2 * d if estimate_gammas else 0)
        self.chain = chain or ChainConfig()
        self._ea = np.array([e[0] for e in self.edges], dtype=int)
        self._eb = np.array([e[1] for e in self.edges], dtype=int)
        names = [f"Sigma_{a}_{b}" for a, b in self.edges]
        if estimate_gammas:
            names += [f"gamma1_{i}" for i in range(d)] + [f"gamma2_{i}" for i in range(d)]
        self.param_names = tuple(names)

    @classmethod
    def ring(cls, d: int, **kwargs) -> "ConditionalGaussianFamily":
        return cls(d, edges=ring_edges(d, 1), **kwargs)

    @property
    def upper(self):
        up = np.full(self.param_dim, np.inf)
        up[: self.n_edges] = 0.0
        if self.estimate_gammas:
            up[self.n_edges + self.data_dim:] = GAMMA2_CEILING
        return up

    def full_params(self, theta):
        """``(Sigma, gamma1, gamma2)`` for a parameter vector, with validation."""
        theta = self.check_theta(theta)
        d = self.data_dim
        Sigma = np.zeros((d, d))
        Sigma[self._ea, self._eb] = theta[: self.n_edges]
        Sigma[self._eb, self._ea] = theta[: self.n_edges]
        if self.estimate_gammas:
            g1 = theta[self.n_edges: self.n_edges + d]
            g2 = theta[self.n_edges + d:]
        else:
            g1, g2 = self.gamma1, self.gamma2
        return check_cond_gauss_params(Sigma, g1, g2)

    def theta_from_sigma(self, Sigma, gamma1=None, gamma2=None) -> np.ndarray:
        Sigma = np.asarray(Sigma, dtype=float)
        theta = Sigma[self._ea, self._eb]
        if self.estimate_gammas:
            g1 = self.gamma1 if gamma1 is None else gamma1
            g2 = self.gamma2 if gamma2 is None else gamma2
            theta = np.concatenate([theta, np.broadcast_to(g1, (self.data_dim,)),
                                    np.broadcast_to(g2, (self.data_dim,))])
        return theta

    def score(self, theta, X):
        Sigma, g1, g2 = self.full_params(theta)
        return cond_gauss_score(Sigma, g1, g2, as_samples(X, self.data_dim))

    def affine_decomposition(self, X):
        X = as_samples(X, self.data_dim)
        n, d = X.shape
        ea, eb = self._ea, self._eb
        X2 = X**2
        J = np.zeros((n, d, self.param_dim))
        cols = np.arange(self.n_edges)
        J[:, ea, cols] += 4.0 * X[:, ea] * X2[:, eb]
        J[:, eb, cols] += 4.0 * X[:, eb] * X2[:, ea]
        div = np.zeros((n, self.param_dim))
        div[:, cols] = 4.0 * (X2[:, ea] + X2[:, eb])
        if self.estimate_gammas:
            idx = np.arange(d)
            J[:, idx, self.n_edges + idx] = 1.0
            J[:, idx, self.n_edges + d + idx] = 2.0 * X
            div[:, self.n_edges + d:] = 2.0
            b = np.zeros((n, d))
        else:
            b = 2.0 * self.gamma2 * X + self.gamma1
        return AffineScoreDecomposition(J, b, div)

    def unnorm_logdensity(self, theta, X):
        Sigma, g1, g2 = self.full_params(theta)
        X = as_samples(X, self.data_dim)
        X2 = X**2
        return np.einsum("ni,ij,nj->n", X2, Sigma, X2) + X2 @ g2 + X @ g1

    def sample(self, theta, n, rng):
        Sigma, g1, g2 = self.full_params(theta)
        return gibbs_conditional_gaussian(Sigma, g1, g2, self.chain, n, rng=rng)

    def describe(self):
        return {"name": "cond_gauss", "d": self.data_dim, "edges": [list(e) for e in self.edges],
                "gamma1": self.gamma1.tolist(), "gamma2": self.gamma2.tolist(),
                "estimate_gammas": self.estimate_gammas, "chain": self.chain.to_dict()}


def affine_score_decomposition(family: ModelFamily, X) -> AffineScoreDecomposition:
    if not family.affine:
        raise TypeError(f"{type(family).__name__} is not affine in its parameters")
    return family.affine_decomposition(X)
