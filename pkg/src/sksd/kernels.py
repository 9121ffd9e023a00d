"""Scalar kernels on R^d with the derivative quantities needed by Stein kernels."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

GAUSSIAN = "gaussian"
LINEAR = "linear"


def _as_point(x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise ValueError(f"expected a point in R^d, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input to kernel")
    return x


def _pair(x, y):
    x, y = _as_point(x), _as_point(y)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    return x, y


@dataclass(frozen=True)
class KernelSpec:
    """A Gaussian ``exp(-|x-y|^2 / (2 h^2))`` or linear ``x.y`` kernel."""

    kind: str = GAUSSIAN
    bandwidth: float | None = 1.0

    def __post_init__(self):
        if self.kind == GAUSSIAN:
            if self.bandwidth is None or not np.isfinite(self.bandwidth) or self.bandwidth <= 0:
                raise ValueError(f"gaussian kernel needs a positive bandwidth, got {self.bandwidth}")
            object.__setattr__(self, "bandwidth", float(self.bandwidth))
        elif self.kind == LINEAR:
            object.__setattr__(self, "bandwidth", None)
        else:
            raise ValueError(f"unknown kernel kind {self.kind!r}")

    @classmethod
    def gaussian(cls, bandwidth: float) -> "KernelSpec":
        return cls(GAUSSIAN, bandwidth)

    @classmethod
    def linear(cls) -> "KernelSpec":
        return cls(LINEAR, None)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "bandwidth": self.bandwidth}

    # vectorised blocks ----------------------------------------------------
    def gram(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Kernel matrix between the rows of ``X`` (n, d) and ``Y`` (m, d)."""
        if self.kind == LINEAR:
            return X @ Y.T
        return np.exp(-sq_dists(X, Y) / (2.0 * self.bandwidth**2))


def sq_dists(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, clipped at zero."""
    d2 = (
        np.sum(X * X, axis=1)[:, None]
        + np.sum(Y * Y, axis=1)[None, :]
        - 2.0 * (X @ Y.T)
    )
    return np.maximum(d2, 0.0)


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x, y = _pair(x, y)
    if spec.kind == LINEAR:
        return float(x @ y)
    diff = x - y
    return float(np.exp(-(diff @ diff) / (2.0 * spec.bandwidth**2)))


def kernel_grads(spec: KernelSpec, x, y) -> tuple[np.ndarray, np.ndarray, float]:
    """Return ``(grad_x K, grad_y K, trace(grad_x grad_y K))`` at ``(x, y)``."""
    x, y = _pair(x, y)
    d = x.shape[0]
    if spec.kind == LINEAR:
        return y.copy(), x.copy(), float(d)
    h2 = spec.bandwidth**2
    diff = x - y
    r2 = float(diff @ diff)
    k = np.exp(-r2 / (2.0 * h2))
    gx = -diff * k / h2
    gy = diff * k / h2
    trace = (d / h2 - r2 / h2**2) * k
    return gx, gy, float(trace)


def median_heuristic(samples) -> float:
    """Median pairwise Euclidean distance (lower median for an even pair count).

    Raises
    ------
    ValueError
        If fewer than two points are given or all points coincide.
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if n < 2:
        raise ValueError("median heuristic needs at least two points")
    dists = np.sort(pdist(X))
    h = float(dists[(dists.size - 1) // 2])
    if not h > 0:
        if dists[-1] == 0:
            raise ValueError("all sample points are identical; bandwidth would be zero")
        # more than half the pairs coincide; fall back to the smallest positive distance
        h = float(dists[dists > 0][0])
    return h
