"""JSON experiment configuration.

A config file holds either one experiment object or
``{"defaults": {...}, "experiments": [...]}``; each experiment is merged over the
defaults (one level deep) and may list several ``tests``, which expand into one
:class:`ExperimentConfig` each.

Experiment keys
---------------
name : str
dgp : dict
    ``{"kind": ..., <params>}`` as accepted by :class:`sksd.samplers.DgpSpec`.
sweep : dict
    ``{"name": param, "values": [...]}``. ``param`` is a DGP parameter, an indexed
    list element such as ``"theta[1]"``, or ``"n"``.
test : dict
    ``kind`` (sksd, neyman-sksd, ks, w1, mmd, ad, lilliefors, lrt), ``null`` (family
    dict), ``estimator``, ``kernel``, ``pvalue_convention``, ``mc_draws``, ``label``.
n, B, R, alpha, seed, output
    Sample size, bootstrap size, replications, level, master seed, output directory.

String values ``"@param"`` inside the null family dict are replaced by the
resolved DGP parameter of the same name. A ``cond_gauss_ring`` DGP accepts
``"weights": "uniform"``: weights ``U[2, 2 + d/2]`` drawn once per dimension ``d``
from the master seed.
"""
from __future__ import annotations

import copy
import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .._rng import child_rng
from ..estimators import ESTIMATOR_KINDS, EstimatorSpec
from ..kernels import GAUSSIAN, LINEAR, KernelSpec
from ..models import (ConditionalGaussianFamily, GaussianFamily, GaussianLocationFamily,
                      KernelExpFamily, ModelFamily)
from ..samplers import ChainConfig, DgpSpec

TEST_KINDS = ("sksd", "neyman-sksd", "ks", "w1", "mmd", "ad", "lilliefors", "lrt")
GAUSSIAN_ONLY_TESTS = ("ks", "w1", "mmd", "ad", "lilliefors", "lrt")
FAMILY_NAMES = ("gaussian", "gaussian_location", "kef", "cond_gauss_ring", "cond_gauss")
DEFAULT_B = 200
DEFAULT_R = 200
_INDEXED = re.compile(r"^(\w+)\[(\d+)\]$")


class ConfigError(ValueError):
    pass


def build_family(spec: dict) -> ModelFamily:
    """Instantiate a model family from ``{"name": ..., <options>}``."""
    if isinstance(spec, str):
        spec = {"name": spec}
    spec = dict(spec)
    name = spec.pop("name", None)
    chain = ChainConfig(**spec.pop("chain", {})) if "chain" in spec else None
    if name == "gaussian":
        return GaussianFamily()
    if name == "gaussian_location":
        return GaussianLocationFamily(int(spec.get("d", 1)))
    if name == "kef":
        return KernelExpFamily(int(spec.get("rank", 1)), float(spec.get("bandwidth", 1.0)),
                               float(spec.get("ref_var", 9.0)), chain)
    if name == "cond_gauss_ring":
        return ConditionalGaussianFamily.ring(
            int(spec["d"]), gamma1=spec.get("gamma1", 2.0), gamma2=spec.get("gamma2", -0.5),
            estimate_gammas=bool(spec.get("estimate_gammas", False)), chain=chain)
    if name == "cond_gauss":
        return ConditionalGaussianFamily(
            int(spec["d"]), gamma1=spec.get("gamma1", 2.0), gamma2=spec.get("gamma2", -0.5),
            edges=spec.get("edges"), estimate_gammas=bool(spec.get("estimate_gammas", False)),
            chain=chain)
    raise ConfigError(f"unknown model family {name!r}; expected one of {FAMILY_NAMES}")


def parse_kernel(kernel, bandwidth=None):
    """``"median"`` (Gaussian, median heuristic), ``"linear"``, or a fixed Gaussian kernel.

    ``kernel`` may also be a dict ``{"kind": ..., "bandwidth": ...}``. Returns a
    KernelSpec or the string ``"median"``.
    """
    if isinstance(kernel, dict):
        kernel, bandwidth = kernel.get("kind", GAUSSIAN), kernel.get("bandwidth", bandwidth)
    if kernel in (None, "median"):
        kernel = GAUSSIAN
    if kernel == LINEAR:
        return KernelSpec.linear()
    if kernel != GAUSSIAN:
        raise ConfigError(f"unknown kernel {kernel!r}")
    if bandwidth in (None, "median"):
        return "median"
    try:
        return KernelSpec.gaussian(float(bandwidth))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad bandwidth {bandwidth!r}: {exc}") from None


@dataclass
class TestConfig:
    """Which test to run against which null."""

    kind: str = "sksd"
    null: dict = field(default_factory=lambda: {"name": "gaussian"})
    estimator: str | dict = "mle_gaussian"
    kernel: str | dict = "median"
    pvalue_convention: str = "paper"
    mc_draws: int | None = None
    label: str | None = None

    __test__ = False

    def __post_init__(self):
        if self.kind not in TEST_KINDS:
            raise ConfigError(f"unknown test {self.kind!r}; expected one of {TEST_KINDS}")
        if self.pvalue_convention not in ("paper", "plus-one"):
            raise ConfigError(f"unknown p-value convention {self.pvalue_convention!r}")
        if self.kind in GAUSSIAN_ONLY_TESTS and (self.null or {}).get("name") != "gaussian":
            raise ConfigError(f"test {self.kind!r} needs the gaussian null family")
        self.estimator_spec()

    def estimator_spec(self) -> EstimatorSpec:
        est = self.estimator
        if isinstance(est, str):
            if est not in ESTIMATOR_KINDS:
                raise ConfigError(f"unknown estimator {est!r}; expected one of {ESTIMATOR_KINDS}")
            return EstimatorSpec(est)
        est = dict(est)
        kernel = est.pop("kernel", None)
        if kernel is not None:
            parsed = parse_kernel(kernel)
            if not isinstance(parsed, KernelSpec):
                raise ConfigError("an estimator kernel must be fixed, not median")
            est["kernel"] = parsed
        try:
            return EstimatorSpec(**est)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None


@dataclass
class ExperimentConfig:
    """One sweep of one test: ``R`` replications at every grid value."""

    name: str
    dgp: dict
    sweep: dict
    test: TestConfig
    n: int = 100
    B: int = DEFAULT_B
    R: int = DEFAULT_R
    alpha: float = 0.05
    seed: int = 0
    output: str = "results"

    def __post_init__(self):
        if not isinstance(self.test, TestConfig):
            self.test = TestConfig(**self.test)
        if "kind" not in self.dgp:
            raise ConfigError("dgp needs a kind")
        if not isinstance(self.sweep, dict) or "name" not in self.sweep:
            raise ConfigError("sweep needs a name and values")
        if not list(self.sweep.get("values", [])):
            raise ConfigError("sweep grid must be nonempty")
        if self.R < 1:
            raise ConfigError("R must be at least 1")
        if self.B < 1:
            raise ConfigError("B must be at least 1")
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        self.dgp_at(0)

    @property
    def grid(self) -> list:
        return list(self.sweep["values"])

    @property
    def sweep_name(self) -> str:
        return self.sweep["name"]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["test"] = asdict(self.test)
        return out

    def dgp_at(self, index: int) -> DgpSpec:
        """The fully resolved DGP for grid point ``index``."""
        value = self.grid[index]
        params = copy.deepcopy(self.dgp)
        n = int(params.pop("n", self.n))
        name = self.sweep_name
        if name == "n":
            n = int(value)
        else:
            m = _INDEXED.match(name)
            if m:
                key, pos = m.group(1), int(m.group(2))
                if not isinstance(params.get(key), list) or pos >= len(params[key]):
                    raise ConfigError(f"sweep {name!r} does not index a list parameter")
                params[key][pos] = value
            else:
                params[name] = value
        if params.get("family") == "cond_gauss_ring" and params.get("weights") == "uniform":
            d = int(params["d"])
            params["weights"] = weights_for(self.seed, d).tolist()
        try:
            return DgpSpec.from_dict({**params, "n": n})
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid dgp: {exc}") from None

    def null_at(self, index: int) -> dict:
        """Null family dict with ``"@param"`` references resolved for grid point ``index``."""
        spec = self.dgp_at(index)
        resolved = {}
        for key, val in (self.test.null or {}).items():
            if isinstance(val, str) and val.startswith("@"):
                ref = val[1:]
                if ref == "n":
                    val = spec.n
                elif ref in spec.params:
                    val = spec.params[ref]
                else:
                    raise ConfigError(f"null references unknown dgp parameter {ref!r}")
            resolved[key] = val
        return resolved

    def csv_path(self) -> Path:
        return Path(self.output) / f"{self.name}.csv"


def _expand(raw: dict) -> list[ExperimentConfig]:
    raw = dict(raw)
    tests = raw.pop("tests", None)
    if tests is None:
        tests = [raw.pop("test", {})]
    elif "test" in raw:
        raise ConfigError("give either test or tests, not both")
    out = []
    for t in tests:
        t = dict(t)
        item = dict(raw)
        label = t.get("label") or (t.get("kind") if len(tests) > 1 else None)
        if len(tests) > 1:
            t["label"] = label
            item["name"] = f"{raw.get('name', 'experiment')}_{label}"
        item["test"] = t
        item.setdefault("name", "experiment")
        try:
            out.append(ExperimentConfig(**item))
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
    return out


def load_config(source) -> list[ExperimentConfig]:
    """Parse a config file path, JSON string, or dict into experiments."""
    if isinstance(source, dict):
        doc = source
    else:
        text = Path(source).read_text() if Path(str(source)).exists() else str(source)
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    if "experiments" not in doc:
        return _expand(doc)
    defaults = doc.get("defaults", {})
    configs = []
    for exp in doc["experiments"]:
        merged = copy.deepcopy(defaults)
        for key, val in exp.items():
            if isinstance(val, dict) and isinstance(merged.get(key), dict):
                merged[key] = {**merged[key], **val}
            else:
                merged[key] = val
        configs.extend(_expand(merged))
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        raise ConfigError("experiment names must be unique within a config")
    return configs


def weights_for(seed: int, d: int) -> np.ndarray:
    """The per-dimension ring weights used by ``"weights": "uniform"``."""
    return child_rng(seed, d, "dgp-weights").uniform(2.0, 2.0 + d / 2.0, d)
