"""MCMC samplers (MALA, Gibbs) and the data-generating processes of the experiments."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numba
import numpy as np

PILOT_STEPS = 200
PILOT_TARGET = 0.574


@dataclass(frozen=True)
class ChainConfig:
    """Burn-in and thinning for a chain; ``step_size=None`` means pilot-tuned."""

    burn_in: int = 10_000
    thin: int = 20
    step_size: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError("step_size must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


# --------------------------------------------------------------------------
# MALA
# --------------------------------------------------------------------------


@numba.njit(cache=True)
def _mala_core(target, params, x0, eps, z, logu, burn_in, thin, n, adapt):
    d = x0.size
    x = x0.copy()
    lp, g = target(x, params)
    out = np.empty((n, d))
    accepted = 0
    steps = z.shape[0]
    half = 0.5 * eps * eps
    k = 0
    for t in range(steps):
        mean_fwd = x + half * g
        prop = mean_fwd + eps * z[t]
        lp_p, g_p = target(prop, params)
        mean_bwd = prop + half * g_p
        fwd = 0.0
        bwd = 0.0
        for a in range(d):
            fwd += (prop[a] - mean_fwd[a]) ** 2
            bwd += (x[a] - mean_bwd[a]) ** 2
        log_ratio = lp_p - lp - (bwd - fwd) / (4.0 * half)
        if adapt:
            acc = 1.0 if log_ratio >= 0 else np.exp(log_ratio)
            eps = eps * np.exp((acc - 0.574) / np.sqrt(t + 1.0))
            half = 0.5 * eps * eps
        if np.isfinite(lp_p) and logu[t] < log_ratio:
            x = prop
            lp = lp_p
            g = g_p
            accepted += 1
        if not adapt and t >= burn_in and (t - burn_in + 1) % thin == 0 and k < n:
            out[k] = x
            k += 1
    return out, accepted, eps


def _mala_python(family, theta, x0, eps, z, logu, burn_in, thin, n, adapt):
    def target(x):
        X = x[None, :]
        return float(family.unnorm_logdensity(theta, X)[0]), family.score(theta, X)[0]

    d = x0.size
    x = x0.copy()
    lp, g = target(x)
    out = np.empty((n, d))
    accepted = 0
    k = 0
    half = 0.5 * eps * eps
    for t in range(z.shape[0]):
        mean_fwd = x + half * g
        prop = mean_fwd + eps * z[t]
        lp_p, g_p = target(prop)
        mean_bwd = prop + half * g_p
        fwd = np.sum((prop - mean_fwd) ** 2)
        bwd = np.sum((x - mean_bwd) ** 2)
        log_ratio = lp_p - lp - (bwd - fwd) / (4.0 * half)
        if adapt:
            acc = 1.0 if log_ratio >= 0 else np.exp(log_ratio)
            eps = eps * np.exp((acc - PILOT_TARGET) / np.sqrt(t + 1.0))
            half = 0.5 * eps * eps
        if np.isfinite(lp_p) and logu[t] < log_ratio:
            x, lp, g = prop, lp_p, g_p
            accepted += 1
        if not adapt and t >= burn_in and (t - burn_in + 1) % thin == 0 and k < n:
            out[k] = x
            k += 1
    return out, accepted, eps


@dataclass
class MalaRun:
    samples: np.ndarray
    acceptance_rate: float
    step_size: float
    diagnostics: dict = field(default_factory=dict)


def mala_run(family, theta, cfg: ChainConfig, n: int, rng: np.random.Generator | None = None,
             x0=None, compiled: bool = True) -> MalaRun:
    """Run one MALA chain and keep ``n`` thinned states after burn-in.

    Proposal ``x' = x + (eps^2 / 2) s(x) + eps Z``, Metropolis-Hastings corrected with the
    unnormalised density. When ``cfg.step_size`` is None, ``eps`` comes from a
    200-step pilot run that targets acceptance 0.574 and is then frozen.
    """
    theta = family.check_theta(theta)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    d = family.data_dim
    x0 = np.zeros(d) if x0 is None else np.asarray(x0, dtype=float).reshape(d)
    lp0 = float(family.unnorm_logdensity(theta, x0[None, :])[0])
    if not np.isfinite(lp0):
        raise ValueError("log-density is not finite at the initial state")

    target = family.numba_target(theta) if compiled else None

    def run(eps, steps, burn_in, thin, keep, adapt):
        z = rng.standard_normal((steps, d))
        logu = np.log(rng.random(steps))
        if target is not None:
            fn, params = target
            return _mala_core(fn, params, x0, float(eps), z, logu, burn_in, thin, keep, adapt)
        return _mala_python(family, theta, x0, float(eps), z, logu, burn_in, thin, keep, adapt)

    eps = cfg.step_size
    if eps is None:
        _, _, eps = run(1.0, PILOT_STEPS, 0, 1, 0, True)
    steps = cfg.burn_in + n * cfg.thin
    out, accepted, _ = run(eps, steps, cfg.burn_in, cfg.thin, n, False)
    return MalaRun(out, accepted / steps, float(eps))


def mala_sample(family, theta, cfg: ChainConfig, n: int, rng=None, **kwargs) -> np.ndarray:
    return mala_run(family, theta, cfg, n, rng=rng, **kwargs).samples


# --------------------------------------------------------------------------
# Gibbs sampler for the conditional Gaussian model
# --------------------------------------------------------------------------


@numba.njit(cache=True)
def _gibbs_core(Sigma, g1, g2, x0, z, burn_in, thin, n):
    d = x0.size
    x = x0.copy()
    out = np.empty((n, d))
    k = 0
    for t in range(z.shape[0]):
        for i in range(d):
            c = g2[i]
            for j in range(d):
                if j != i:
                    c += 2.0 * Sigma[i, j] * x[j] * x[j]
            x[i] = -g1[i] / (2.0 * c) + np.sqrt(-1.0 / (2.0 * c)) * z[t, i]
        if t >= burn_in and (t - burn_in + 1) % thin == 0 and k < n:
            out[k] = x
            k += 1
    return out


def gibbs_conditional_gaussian(Sigma, gamma1, gamma2, cfg: ChainConfig, n: int,
                               rng: np.random.Generator | None = None) -> np.ndarray:
    """Systematic-scan Gibbs sampler; ``X_i | X_-i ~ N(-gamma1_i / (2 c_i), -1 / (2 c_i))``
    with ``c_i = sum_{j != i} 2 Sigma_ij x_j^2 + gamma2_i``. Starts at the origin."""
    from .models import check_cond_gauss_params

    Sigma, g1, g2 = check_cond_gauss_params(Sigma, gamma1, gamma2)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    d = Sigma.shape[0]
    sweeps = cfg.burn_in + n * cfg.thin
    z = rng.standard_normal((sweeps, d))
    return _gibbs_core(Sigma, g1, g2, np.zeros(d), z, cfg.burn_in, cfg.thin, n)


# --------------------------------------------------------------------------
# Data-generating processes
# --------------------------------------------------------------------------

DGP_KINDS = (
    "gaussian_shift", "student_t_shifted", "gaussian_mixture", "generalized_chi2",
    "mult_local_alt", "add_local_alt", "model_family",
)

_BOUNDED_TILTS = {
    "tanh": np.tanh,
    "sin": np.sin,
    "cos": np.cos,
}


@dataclass
class DgpSpec:
    """A data-generating process: ``kind`` plus its keyword parameters."""

    kind: str
    params: dict = field(default_factory=dict)
    n: int = 100

    def __post_init__(self):
        if self.kind not in DGP_KINDS:
            raise ValueError(f"unknown DGP kind {self.kind!r}; expected one of {DGP_KINDS}")
        if self.n < 1:
            raise ValueError("n must be positive")
        p = self.params
        if self.kind == "student_t_shifted" and not p.get("nu", 0) > 0:
            raise ValueError("student_t_shifted needs nu > 0")
        if self.kind == "gaussian_mixture" and not 0 <= p.get("w", 0.5) <= 1:
            raise ValueError("mixture weight w must lie in [0, 1]")
        if self.kind == "generalized_chi2":
            if not p.get("alpha", 0) > 0:
                raise ValueError("generalized_chi2 needs alpha > 0")
        if self.kind in ("mult_local_alt", "add_local_alt") and p.get("gamma", 0) < 0:
            raise ValueError("local-alternative strength gamma must be >= 0")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n, **self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "DgpSpec":
        d = dict(d)
        kind = d.pop("kind")
        n = int(d.pop("n", 100))
        return cls(kind, d, n)


def gen_chi2_inverse_cdf(alpha: float, shift: float, nodes: int = 8192):
    """Grid inverse-CDF for the density ``x^(alpha-1) exp(-(x - shift)^2 / 2)`` on x > 0.

    For ``alpha < 1`` the grid is uniform in ``u = x^alpha``, where
    ``x^(alpha-1) dx = du / alpha`` removes the singularity at 0; otherwise the density is
    regular and the grid is uniform in ``x``. Returns a callable mapping uniforms to draws.
    """
    upper = shift + 12.0
    if alpha < 1:
        u = np.linspace(0.0, upper**alpha, nodes)
        x = u ** (1.0 / alpha)
        f = np.exp(-((x - shift) ** 2) / 2.0)
    else:
        u = x = np.linspace(0.0, upper, nodes)
        f = x ** (alpha - 1.0) * np.exp(-((x - shift) ** 2) / 2.0)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(u))])
    cdf /= cdf[-1]
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    cdf_k, x_k = cdf[keep], x[keep]

    def ppf(q):
        return np.interp(q, cdf_k, x_k)

    return ppf


def _normal_null(params):
    return float(params.get("mu0", 0.0)), float(params.get("sigma0", 1.0))


def dgp_sample(spec: DgpSpec, seed: int | np.random.Generator) -> np.ndarray:
    """Draw ``spec.n`` iid observations (an ``(n, d)`` array)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    p, n = spec.params, spec.n
    kind = spec.kind
    if kind == "gaussian_shift":
        x = p.get("mu", 0.0) + p.get("sigma", 1.0) * rng.standard_normal(n)
    elif kind == "student_t_shifted":
        nu = float(p["nu"])
        shift = p.get("shift", 10.0 / (nu + 1.0))
        x = shift + rng.standard_t(nu, n)
    elif kind == "gaussian_mixture":
        w, delta = float(p.get("w", 0.5)), float(p.get("delta", 0.0))
        z = rng.standard_normal(n)
        pick = rng.random(n) < w
        x = np.where(pick, z, delta + (1.0 + delta) * z)
    elif kind == "generalized_chi2":
        ppf = gen_chi2_inverse_cdf(float(p["alpha"]), float(p.get("shift", 1.0)))
        x = ppf(rng.random(n))
        # the grid maps u = 0 to x = 0; nudge to keep the support open
        x = np.maximum(x, np.finfo(float).tiny)
    elif kind == "mult_local_alt":
        x = _mult_local_alt(p, n, rng)
    elif kind == "add_local_alt":
        mu0, s0 = _normal_null(p)
        eta = float(p.get("gamma", 0.0)) / np.sqrt(n)
        if eta > 1:
            raise ValueError("gamma / sqrt(n) must not exceed 1")
        g_mu, g_var = float(p.get("g_mean", 2.0)), float(p.get("g_var", 3.0))
        z = rng.standard_normal(n)
        from_g = rng.random(n) < eta
        x = np.where(from_g, g_mu + np.sqrt(g_var) * z, mu0 + s0 * z)
    else:
        return _model_family_sample(p, n, rng)
    return np.asarray(x, dtype=float)[:, None]


def _mult_local_alt(p, n, rng):
    """Rejection sampling of ``p0(x) (1 + h(x) / sqrt(n))`` for a bounded tilt ``h``."""
    mu0, s0 = _normal_null(p)
    name = p.get("tilt", "tanh")
    if name not in _BOUNDED_TILTS:
        raise ValueError(f"unsupported tilt {name!r}; bounded tilts are {sorted(_BOUNDED_TILTS)}")
    amp = float(p.get("gamma", 0.0))
    eta = amp / np.sqrt(n)
    if eta > 1:
        raise ValueError("tilt amplitude / sqrt(n) must not exceed 1 (density would go negative)")
    h = _BOUNDED_TILTS[name]
    envelope = 1.0 + eta
    out = np.empty(0)
    while out.size < n:
        m = 2 * (n - out.size) + 16
        z = rng.standard_normal(m)
        accept = rng.random(m) * envelope < 1.0 + eta * h(z)
        out = np.concatenate([out, mu0 + s0 * z[accept]])
    return out[:n]


def _model_family_sample(p, n, rng):
    from .models import ConditionalGaussianFamily, GaussianFamily, KernelExpFamily, ring_edges

    family = p["family"]
    chain = ChainConfig(**p.get("chain", {}))
    if family == "kef":
        theta = np.asarray(p["theta"], dtype=float)
        model = KernelExpFamily(theta.size, p.get("bandwidth", 1.0), p.get("ref_var", 9.0), chain)
        return model.sample(theta, n, rng)
    if family == "gaussian":
        return GaussianFamily().sample([p.get("mu", 0.0), p.get("sigma", 1.0)], n, rng)
    if family == "cond_gauss_ring":
        Sigma = cond_gauss_ring_sigma(p["d"], p["weights"], p.get("eps", 0.0))
        model = ConditionalGaussianFamily(
            p["d"], p.get("gamma1", 2.0), p.get("gamma2", -0.5),
            edges=ring_edges(p["d"], 2), chain=chain,
        )
        return model.sample(model.theta_from_sigma(Sigma), n, rng)
    raise ValueError(f"unknown model family {family!r}")


def cond_gauss_ring_sigma(d: int, weights, eps: float = 0.0) -> np.ndarray:
    """Ring interaction matrix with adjacent weights ``-w`` and second-neighbour ``-eps/100``.

    The edge joining nodes ``i`` and ``i + 1 (mod d)`` carries ``-weights[i + 1]``.
    """
    w = np.broadcast_to(np.asarray(weights, dtype=float), (d,))
    Sigma = np.zeros((d, d))
    for i in range(d):
        j = (i + 1) % d
        Sigma[i, j] = Sigma[j, i] = -w[j]
    for i in range(d):
        j = (i + 2) % d
        if j != i and Sigma[i, j] == 0:
            Sigma[i, j] = Sigma[j, i] = -1e-2 * eps
    return Sigma
