"""Why the auxiliary image matters: a target that is invisible in RGB.

In the camouflage regime the target is never drawn in RGB; only the
thermal image shows it.  Two identical models are trained, one with the
thermal channel zeroed, and both track held-out sequences.

Run: python demos/03_camouflage.py [steps]
"""
import sys

from sutrack.data import generate_pool
from sutrack.embedding import Task
from sutrack.model import ModelConfig, TrackerModel
from sutrack.training import TrainConfig, evaluate_tracking, train

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 500
pool = generate_pool(40, 60, seed=3, tasks=(Task.RGBT,), regime="camouflage")
held = generate_pool(10, 60, seed=33, tasks=(Task.RGBT,), regime="camouflage")

for drop in (False, True):
    model = TrackerModel(ModelConfig())
    train(model, pool, TrainConfig(steps=steps, mix={"RGBT": 1.0}, drop_aux=drop))
    label = "rgb only   " if drop else "rgb+thermal"
    print(label, evaluate_tracking(model, held, aux_dropped=drop))
