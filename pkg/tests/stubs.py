"""A scripted stand-in for the network, for driving the tracker state machine."""
import numpy as np

from sutrack.heads import HeadOutput
from sutrack.model import ModelConfig
from sutrack.numerics import Tensor


class ScriptedModel:
    """Returns a score map whose peak (at a central cell) is the next scripted value."""

    def __init__(self, confidences, cfg: ModelConfig | None = None):
        self.cfg = cfg or ModelConfig()
        self.confidences = list(confidences)
        self.calls = 0
        self.seen_templates = []

    def track_forward(self, inputs):
        s = self.cfg.search_grid
        conf = self.confidences[self.calls]
        self.calls += 1
        self.seen_templates.append(inputs.templates.copy())
        score = np.full((1, s, s), 0.05)
        score[0, s // 2, s // 2] = conf
        offset = np.full((1, s, s, 2), 0.5)
        size = np.full((1, s, s, 2), 0.25)
        return HeadOutput(Tensor(score), Tensor(offset), Tensor(size))


def moving_frames(n, size=128, seed=0):
    """Frames with a bright square drifting right; a new image every frame."""
    from sutrack.embedding import ModalFrame

    rng = np.random.default_rng(seed)
    frames = []
    for k in range(n):
        img = rng.uniform(0.2, 0.4, (size, size, 3))
        x = 40 + (k % 30)
        img[50:66, x : x + 16] = 0.9
        frames.append(ModalFrame(img))
    return frames
