"""The full tracker network: tokenizer -> encoder -> box head / task head."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .embedding import Tokenizer, TokenizerConfig, TokenSequence
from .encoder import Encoder, EncoderConfig
from .heads import POOLING_MODES, HeadOutput, TaskHead, TrackHead, pool_tokens
from .numerics import F, Module, Tensor


@dataclass
class ModelConfig:
    patch_size: int = 16
    dim: int = 64
    depth: int = 2
    heads: int = 4
    mlp_ratio: float = 4.0
    template_size: int = 32
    search_size: int = 64
    token_type_mode: str = "soft"
    fusion_mode: str = "concat"
    init_mode: str = "half_copy"
    tokenizer_mode: str = "joint"
    pooling_mode: str = "mean_pool"
    head_hidden: int = 64
    task_hidden: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.pooling_mode not in POOLING_MODES:
            raise ValueError(f"unknown pooling mode {self.pooling_mode!r}")
        if self.pooling_mode == "text_token" and self.fusion_mode != "concat":
            raise ValueError("text_token pooling needs concat language fusion")
        self.tokenizer_config()
        self.encoder_config()

    def tokenizer_config(self) -> TokenizerConfig:
        return TokenizerConfig(
            patch_size=self.patch_size,
            dim=self.dim,
            template_size=self.template_size,
            search_size=self.search_size,
            token_type_mode=self.token_type_mode,
            fusion_mode=self.fusion_mode,
            init_mode=self.init_mode,
            tokenizer_mode=self.tokenizer_mode,
            extra_task_token=self.pooling_mode == "extra_task_token",
        )

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(self.depth, self.dim, self.heads, self.mlp_ratio)

    @property
    def search_grid(self) -> int:
        return self.search_size // self.patch_size

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise KeyError(f"unknown model config keys: {unknown}")
        return cls(**d)


@dataclass
class ModelInputs:
    """A batch of already-cropped inputs.

    templates: (B, T, Ht, Wt, 6); template_masks: (B, T, n_t) per-patch
    foreground fractions; search: (B, Hs, Ws, 6); text: (B, D) sentence
    features.
    """

    templates: np.ndarray
    template_masks: np.ndarray
    search: np.ndarray
    text: np.ndarray


class TrackerModel(Module):
    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        self.tokenizer = Tokenizer(rng, cfg.tokenizer_config())
        self.encoder = Encoder(rng, cfg.encoder_config())
        self.box_head = TrackHead(rng, cfg.dim, cfg.head_hidden)
        self.task_head = TaskHead(rng, cfg.dim, cfg.task_hidden)
        self.assign_names()

    def encode(self, inputs: ModelInputs) -> TokenSequence:
        seq = self.tokenizer(inputs.templates, inputs.template_masks, inputs.search, inputs.text)
        return seq.with_tokens(self.encoder(seq.tokens))

    def search_tokens(self, seq: TokenSequence) -> Tensor:
        """Search-region output tokens, one per grid cell.

        With separate RGB/auxiliary token streams the two token grids are
        averaged cell by cell.
        """
        tokens = seq.span("search")
        if seq.streams == 1:
            return tokens
        n = tokens.shape[-2] // seq.streams
        return F.mean(
            F.stack([tokens[..., k * n : (k + 1) * n, :] for k in range(seq.streams)], axis=0), axis=0
        )

    def forward(self, inputs: ModelInputs) -> tuple[HeadOutput, Tensor, TokenSequence]:
        seq = self.encode(inputs)
        out = self.box_head(self.search_tokens(seq))
        logits = self.task_head(pool_tokens(seq, self.cfg.pooling_mode))
        return out, logits, seq

    def track_forward(self, inputs: ModelInputs) -> HeadOutput:
        seq = self.encode(inputs)
        return self.box_head(self.search_tokens(seq))

    def param_count(self) -> int:
        return int(sum(p.size for p in self.parameters()))
