"""Walk through how one frame pair becomes a token sequence.

Run: python demos/01_tokens.py
"""
import numpy as np

from sutrack.data import Descriptor, generate
from sutrack.embedding import Task, box_mask, concat_channels, soft_mask_avg, text_feature
from sutrack.model import ModelConfig, TrackerModel
from sutrack.tracker import Template, crop_frame

cfg = ModelConfig()
seq = generate(Descriptor(task=Task.RGBD, start=(40, 30), size=(18, 14)), seed=0, length=4)
frame, box = seq.frames[0], seq.boxes[0].astype(float)
print("frame", frame.rgb.shape, "aux", frame.aux.shape, "box", box)

# the template is a crop twice the target size, resampled to 32 x 32
tmpl = Template.from_frame(frame, box, cfg)
print("template", tmpl.image.shape, "(six channels: RGB then depth)")
print("foreground fraction per template patch:", np.round(tmpl.fractions, 3))

# a grid-aligned box gives fractions of exactly 0 or 1
print("aligned box:", soft_mask_avg(box_mask((16, 0, 32, 32), 32, 32), 16))

# the search region is four times the target size, resampled to 64 x 64
search, t, in_crop = crop_frame(seq.frames[1], seq.boxes[1].astype(float), 4.0, cfg.search_size)
print("search crop side in frame pixels", round(t.side, 2), "target in crop", np.round(in_crop, 2))

model = TrackerModel(cfg)
seq_tokens = model.tokenizer(
    np.stack([tmpl.image, tmpl.image])[None],
    np.stack([tmpl.fractions, tmpl.fractions])[None],
    concat_channels(search)[None],
    text_feature(None, cfg.dim)[None],
)
print("tokens", seq_tokens.tokens.shape)
for name, (lo, hi) in seq_tokens.spans.items():
    print(f"  {name:18s} {lo:3d}..{hi:3d}")
print("parameters", model.param_count())
