"""A miniature ablation grid over the five model variants.

All variants share the same corpora per seed, so score differences come
from the model change alone.  Even at this tiny scale the broad picture
shows: features beat triggers alone, and noisy training helps when the
test features are noisy.  The acceptance suite runs the full-size grid
where the gated variants separate cleanly as well.
"""

import time

from evcoref.corpus import FeatureSchema, GenConfig
from evcoref.experiment import ExperimentSpec, format_experiment_table, run_experiment
from evcoref.model import Dims
from evcoref.training import TrainConfig

spec = ExperimentSpec(
    schema=FeatureSchema.default(),
    gen=GenConfig(),
    dims=Dims(d=32, l=8, p=16, w=2),
    train=TrainConfig(epochs=8),
    seeds=(1, 2),
    doc_counts={"train": 50, "dev": 10, "test": 20},
)

started = time.time()
result = run_experiment(spec)
print(format_experiment_table(result))
print(f"\n{len(result['runs'])} runs in {time.time() - started:.0f}s")
print("\nper-seed AVG (points):")
for run in result["runs"]:
    print(f"  seed {run['seed']} {run['variant']:<13s} {100 * run['avg']:.2f}")
