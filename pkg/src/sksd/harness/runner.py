"""Single tests and replicated power experiments."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .._rng import child_rng, child_seed
from ..baselines import baseline_statistic
from ..bootstrap import TestReport, bootstrap_calibrate, resolve_kernel, sksd_test
from ..estimators import EstimationError
from ..kernels import KernelSpec
from ..models import as_samples
from ..neyman import neyman_sksd_test
from ..samplers import dgp_sample
from .config import ExperimentConfig, TestConfig, build_family, parse_kernel

log = logging.getLogger(__name__)


def run_test(test: TestConfig, samples, B: int, alpha: float, seed: int,
             null: dict | None = None) -> TestReport:
    """Run ``test`` on ``samples``; ``null`` overrides the family dict of ``test``."""
    family = build_family(null if null is not None else test.null)
    X = as_samples(samples, family.data_dim)
    kernel = parse_kernel(test.kernel)
    estimator = test.estimator_spec()
    if test.kind == "sksd":
        return sksd_test(family, estimator, kernel, X, B, alpha, seed, test.pvalue_convention)
    if test.kind == "neyman-sksd":
        return neyman_sksd_test(family, estimator, X, B, alpha, seed, kernel=kernel,
                                m=test.mc_draws, pvalue_convention=test.pvalue_convention)
    spec = resolve_kernel(kernel, X) if test.kind == "mmd" or isinstance(kernel, KernelSpec) \
        or estimator.kind != "mle_gaussian" else None
    return bootstrap_calibrate(baseline_statistic(test.kind, spec), family, estimator, X, B,
                               alpha, seed, test.pvalue_convention, spec)


def run_single_test(test: TestConfig, data=None, dgp=None, B: int = 200, alpha: float = 0.05,
                    seed: int = 0) -> TestReport:
    """One test on a data array or on a fresh draw from ``dgp`` (a DgpSpec)."""
    if (data is None) == (dgp is None):
        raise ValueError("give exactly one of data and dgp")
    if data is None:
        data = dgp_sample(dgp, child_rng(seed, 0, "data"))
    return run_test(test, data, B, alpha, seed)


@dataclass
class ReplicateResult:
    grid_index: int
    sweep_value: float
    replicate: int
    seed: int
    statistic: float | None
    p_value: float | None
    reject: int | None
    theta: list
    elapsed_ms: float
    n_failed: int = 0
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def replicate_seed(master: int, grid_index: int, replicate: int) -> int:
    return child_seed(master, replicate, f"replicate/{grid_index}")


def _run_replicate(cfg: ExperimentConfig, g: int, r: int) -> ReplicateResult:
    seed = replicate_seed(cfg.seed, g, r)
    start = time.perf_counter()
    value = cfg.grid[g]
    try:
        X = dgp_sample(cfg.dgp_at(g), child_rng(seed, 0, "data"))
        rep = run_test(cfg.test, X, cfg.B, cfg.alpha, child_seed(seed, 0, "test"), cfg.null_at(g))
    except (EstimationError, ArithmeticError, ValueError, RuntimeError,
            np.linalg.LinAlgError) as exc:
        log.warning("replicate %s/%d failed: %s", value, r, exc)
        return ReplicateResult(g, value, r, seed, None, None, None, [],
                               1e3 * (time.perf_counter() - start),
                               error=f"{type(exc).__name__}: {exc}")
    return ReplicateResult(
        g, value, r, seed, float(rep.statistic), float(rep.p_value), int(rep.reject),
        [float(t) for t in np.atleast_1d(rep.theta_hat)], 1e3 * (time.perf_counter() - start),
        n_failed=rep.n_failed,
    )


def _run_chunk(cfg: ExperimentConfig, jobs):
    return [_run_replicate(cfg, g, r) for g, r in jobs]


def run_replicates(cfg: ExperimentConfig, workers: int = 1) -> list[ReplicateResult]:
    """All (grid value, replicate) jobs, sorted by grid index then replicate."""
    jobs = [(g, r) for g in range(len(cfg.grid)) for r in range(cfg.R)]
    if workers <= 1:
        results = _run_chunk(cfg, jobs)
    else:
        chunks = [jobs[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_run_chunk, [cfg] * len(chunks), chunks)
            results = [res for part in parts for res in part]
    return sorted(results, key=lambda res: (res.grid_index, res.replicate))


def aggregate(results: list[ReplicateResult], grid: list) -> list[dict]:
    """Rejection rate and binomial standard error per grid value, over successful replicates."""
    out = []
    for g, value in enumerate(grid):
        ok = [res.reject for res in results if res.grid_index == g and not res.failed]
        failed = sum(1 for res in results if res.grid_index == g and res.failed)
        m = len(ok)
        rate = sum(ok) / m if m else float("nan")
        se = float(np.sqrt(rate * (1.0 - rate) / m)) if m else float("nan")
        out.append({"sweep_value": value, "rejection_rate": rate, "se": se, "n_ok": m,
                    "n_failed": failed})
    return out


def run_power_experiment(cfg: ExperimentConfig, workers: int = 1, out_dir=None):
    """Run the experiment and write its CSV and JSON sidecar; returns the CSV path."""
    from .io import emit_results

    results = run_replicates(cfg, workers)
    path = cfg.csv_path() if out_dir is None else Path(out_dir) / f"{cfg.name}.csv"
    emit_results(results, aggregate(results, cfg.grid), path, cfg, theta_names(cfg))
    return path


def theta_names(cfg: ExperimentConfig) -> tuple[str, ...]:
    """Parameter names of the null; positional when the sweep changes the parameter layout."""
    families = [build_family(cfg.null_at(g)) for g in range(len(cfg.grid))]
    names = {fam.param_names for fam in families}
    if len(names) == 1 and all(names):
        return families[0].param_names
    return tuple(str(i) for i in range(max(fam.param_dim for fam in families)))
