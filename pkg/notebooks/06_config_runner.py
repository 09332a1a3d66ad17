# %% [markdown]
# # Running experiments from JSON configs
#
# The same experiments are reachable as `mourrelab <experiment> config.json`.
# Every run writes a data file plus a manifest with the config, the checks and
# the data file's sha256.

# %%
import json
import tempfile
from pathlib import Path

from mourrelab.runner import ConfigError, run, validate

out = Path(tempfile.mkdtemp())
manifest = run({'experiment': 'torus-lemma', 'nu': 3, 'grid': 128}, output_dir=out)
print(manifest.checks)
print((out / 'torus-lemma.csv').read_text())

# %% [markdown]
# Bad configs fail with one line per problem.

# %%
try:
    validate({'experiment': 'mourre', 'a': -3, 'lambda': 2.0, 'typo': 1})
except ConfigError as exc:
    print(exc)
