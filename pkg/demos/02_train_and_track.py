"""Train the toy model briefly, then track a few sequences end to end.

Run: python demos/02_train_and_track.py [steps]
A few hundred steps already localize targets roughly; the acceptance
suite uses 3000 steps on 20 sequences.
"""
import sys
import time

import numpy as np

from sutrack.data import generate_pool, metrics
from sutrack.model import ModelConfig, TrackerModel
from sutrack.tracker import Tracker
from sutrack.training import TrainConfig, evaluate_tracking, task_accuracy, train, track_sequence

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 400
pool = generate_pool(20, 60, seed=1)
model = TrackerModel(ModelConfig())

print("untrained", evaluate_tracking(model, pool[:5]))

t0 = time.time()


def show(step, row):
    if step % 100 == 0 or step == steps - 1:
        cls, iou, l1, task, total = row[1:]
        print(f"step {step:4d}  focal {cls:.3f}  giou {iou:.3f}  l1 {l1:.3f}  task {task:.3f}  total {total:.3f}  {time.time() - t0:.0f}s")


train(model, pool, TrainConfig(steps=steps), show)

print("trained", evaluate_tracking(model, pool[:5]))
print("task accuracy / CE on fresh draws", task_accuracy(model, pool, 200, seed=3))

# one sequence in detail: the dynamic template refresh happens at frame 25 and 50
seq = pool[0]
boxes, conf = track_sequence(Tracker(model), seq)
print(seq.task.name, "confidence at frames 24, 25, 50:", np.round(conf[[24, 25, 50]], 3))
print("per-sequence", metrics(boxes[1:], seq.boxes[1:]))
