"""Stein kernel and the (semiparametric) kernelized Stein discrepancy statistic."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import LINEAR, KernelSpec, kernel_eval, kernel_grads, sq_dists
from .models import ModelFamily, as_samples

# rows per block when forming the n x n Stein Gram matrix
BLOCK_ROWS = 1024


@dataclass(frozen=True)
class SteinStatistic:
    value: float
    form: str
    n: int
    kernel: KernelSpec | None

    def __float__(self):
        return self.value


def stein_kernel_h(family: ModelFamily, theta, spec: KernelSpec, x, y) -> float:
    """``s(x).s(y) K + s(x).grad_y K + s(y).grad_x K + tr(grad_x grad_y K)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    sx, sy = family.score(theta, np.stack([x, y]))
    k = kernel_eval(spec, x, y)
    gx, gy, tr = kernel_grads(spec, x, y)
    return float(sx @ sy * k + sx @ gy + sy @ gx + tr)


def stein_gram_block(spec: KernelSpec, Xa, Sa, Xb, Sb) -> np.ndarray:
    """Stein kernel values between two row sets given their scores."""
    d = Xa.shape[1]
    ss = Sa @ Sb.T
    if spec.kind == LINEAR:
        xs_a = np.sum(Xa * Sa, axis=1)
        xs_b = np.sum(Xb * Sb, axis=1)
        return ss * (Xa @ Xb.T) + xs_a[:, None] + xs_b[None, :] + d
    h2 = spec.bandwidth**2
    r2 = sq_dists(Xa, Xb)
    K = np.exp(-r2 / (2.0 * h2))
    xs_a = np.sum(Xa * Sa, axis=1)
    xs_b = np.sum(Xb * Sb, axis=1)
    # s(x).grad_y K = s(x).(x - y) K / h^2 ;  s(y).grad_x K = s(y).(y - x) K / h^2
    cross = (xs_a[:, None] - Sa @ Xb.T) + (xs_b[None, :] - Xa @ Sb.T)
    return K * (ss + cross / h2 + d / h2 - r2 / h2**2)


def stein_gram(family: ModelFamily, theta, spec: KernelSpec, samples) -> np.ndarray:
    X = as_samples(samples, family.data_dim)
    S = family.score(theta, X)
    return stein_gram_block(spec, X, S, X, S)


def _row_sums(family, theta, spec, X):
    """Per-row sums of the Stein Gram matrix and its diagonal, built in row blocks."""
    S = family.score(theta, X)
    n = X.shape[0]
    rows = np.empty(n)
    diag = np.empty(n)
    for start in range(0, n, BLOCK_ROWS):
        stop = min(start + BLOCK_ROWS, n)
        H = stein_gram_block(spec, X[start:stop], S[start:stop], X, S)
        rows[start:stop] = H.sum(axis=1)
        diag[start:stop] = H[np.arange(stop - start), np.arange(start, stop)]
    return rows, diag


def v_statistic(family: ModelFamily, theta, spec: KernelSpec, samples) -> SteinStatistic:
    """``(1/n^2) sum_{i,j} h(x_i, x_j)``; row sums are combined with exact rounding."""
    X = as_samples(samples, family.data_dim)
    n = X.shape[0]
    if n < 1:
        raise ValueError("empty sample")
    rows, _ = _row_sums(family, theta, spec, X)
    return SteinStatistic(math.fsum(rows) / n**2, "V", n, spec)


def u_statistic(family: ModelFamily, theta, spec: KernelSpec, samples) -> SteinStatistic:
    """``(1/(n(n-1))) sum_{i != j} h(x_i, x_j)``; may be negative."""
    X = as_samples(samples, family.data_dim)
    n = X.shape[0]
    if n < 2:
        raise ValueError("U-statistic needs at least two points")
    rows, diag = _row_sums(family, theta, spec, X)
    total = math.fsum(np.concatenate([rows, -diag]))
    return SteinStatistic(total / (n * (n - 1)), "U", n, spec)


def v_statistic_linear_fast(family: ModelFamily, theta, samples) -> SteinStatistic:
    """Linear-kernel V-statistic in O(n d^2) time.

    With ``M = (1/n) sum_i x_i s(x_i)^T`` the V-statistic equals
    ``tr((M + I)^T (M + I))``, the squared Frobenius norm of ``M + I``. This
    coincides with ``tr((M + I)^2)`` only when ``M`` is symmetric (always for d = 1).
    """
    X = as_samples(samples, family.data_dim)
    n, d = X.shape
    if n < 1:
        raise ValueError("empty sample")
    S = family.score(theta, X)
    A = X.T @ S / n + np.eye(d)
    return SteinStatistic(float(np.sum(A * A)), "V", n, KernelSpec.linear())
