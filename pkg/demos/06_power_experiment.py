# %% [markdown]
# # Replicated experiments from a JSON config
#
# The harness expands a config into one CSV per test, plus a JSON sidecar with the
# config and the aggregated rejection rates. Here a reduced version of the
# normality experiment runs with few replications.

# %%
import json
import tempfile

from sksd.harness import load_config, read_results, run_power_experiment

config = {
    "name": "mixture",
    "dgp": {"kind": "gaussian_mixture", "w": 0.5},
    "sweep": {"name": "delta", "values": [0.0, 1.0, 2.0]},
    "test": {"kind": "sksd", "null": {"name": "gaussian"}},
    "n": 100, "B": 50, "R": 10, "seed": 7,
}
(cfg,) = load_config(config)
out = tempfile.mkdtemp()
path = run_power_experiment(cfg, out_dir=out)

# %%
rows, meta = read_results(path)
print(path.read_text().splitlines()[0])
print(json.dumps(meta["aggregate"], indent=1))

# %% [markdown]
# The same run from the shell:
#
#     sksd power --config configs/normality.json --out results --workers 8 --R 20
