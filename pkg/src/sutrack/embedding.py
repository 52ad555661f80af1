"""Turning RGB, auxiliary images and language into one token sequence.

Images are H x W x C float arrays in [0, 1].  A 6-channel image is split into
non-overlapping P x P patches in row-major patch order; each patch is
flattened channel-major (channel, row, column), matching the layout of a
convolutional patch-embedding kernel, so that the first 3P^2 weight columns act
on the RGB half and the last 3P^2 on the auxiliary half.
"""
from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .numerics import F, Linear, Module, Parameter, Tensor

PAD_SENTENCE = "\x00<pad>"


class Task(enum.IntEnum):
    RGB = 0
    RGBD = 1
    RGBT = 2
    RGBE = 3
    RGBL = 4


NUM_TASKS = len(Task)


@dataclass
class ModalFrame:
    """One video frame with its optional auxiliary image and description."""

    rgb: np.ndarray
    aux: np.ndarray | None = None
    language: str | None = None
    task: Task = Task.RGB

    def __post_init__(self):
        self.task = Task(self.task)
        if self.rgb.ndim != 3 or self.rgb.shape[2] != 3:
            raise ValueError(f"rgb must be H x W x 3, got {self.rgb.shape}")
        if self.aux is not None and self.aux.shape != self.rgb.shape:
            raise ValueError(f"aux shape {self.aux.shape} does not match rgb {self.rgb.shape}")
        if self.task in (Task.RGBD, Task.RGBT, Task.RGBE) and self.aux is None:
            raise ValueError(f"{self.task.name} frame needs an auxiliary image")
        if self.task == Task.RGBL and not self.language:
            raise ValueError("RGBL frame needs a language description")

    @property
    def shape(self) -> tuple[int, int]:
        return self.rgb.shape[:2]


def concat_channels(frame: ModalFrame) -> np.ndarray:
    """Stack RGB and auxiliary channels; without auxiliary data RGB is repeated."""
    aux = frame.rgb if frame.aux is None else frame.aux
    return np.concatenate([frame.rgb, aux], axis=-1)


def patchify(img: np.ndarray, patch: int) -> np.ndarray:
    """(..., H, W, C) -> (..., H*W/P^2, C*P^2), row-major patches, channel-major inside."""
    *lead, h, w, c = img.shape
    if h % patch or w % patch:
        raise ValueError(f"image size {h}x{w} is not divisible by patch size {patch}")
    gh, gw = h // patch, w // patch
    x = img.reshape(*lead, gh, patch, gw, patch, c)
    n = len(lead)
    # (..., gh, gw, c, py, px)
    x = x.transpose(*range(n), n, n + 2, n + 4, n + 1, n + 3)
    return x.reshape(*lead, gh * gw, c * patch * patch)


class PatchEmbedder(Module):
    """Affine map from flattened P x P x C patches to D-dim tokens."""

    def __init__(self, weight: np.ndarray, bias: np.ndarray, patch: int, group: str = "other"):
        self.patch = patch
        self.W_p = Parameter(weight, group)
        self.b_p = Parameter(bias, group)

    @property
    def channels(self) -> int:
        return self.W_p.shape[1] // (self.patch * self.patch)

    def __call__(self, img: np.ndarray) -> Tensor:
        patches = patchify(img, self.patch)
        if patches.shape[-1] != self.W_p.shape[1]:
            raise ValueError(
                f"patch vectors of length {patches.shape[-1]} do not fit weight {self.W_p.shape}"
            )
        return F.matmul(Tensor(patches), self.W_p.T) + self.b_p


def patch_embed(img6: np.ndarray, embedder: PatchEmbedder) -> Tensor:
    return embedder(img6)


def init_from_rgb_weights(
    w3: np.ndarray, mode: str, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Expand a D x 3P^2 RGB patch weight to D x 6P^2.

    ``half_copy`` halves both copies so a duplicated-RGB input reproduces the
    3-channel output; ``full_copy`` keeps both at full scale; ``single_copy``
    keeps the RGB half and draws the auxiliary half from U(-a, a) with
    a = 1/sqrt(3P^2).
    """
    if mode == "half_copy":
        return np.concatenate([w3 / 2, w3 / 2], axis=1)
    if mode == "full_copy":
        return np.concatenate([w3, w3], axis=1)
    if mode == "single_copy":
        rng = rng if rng is not None else np.random.default_rng(0)
        bound = 1.0 / np.sqrt(w3.shape[1])
        return np.concatenate([w3, rng.uniform(-bound, bound, w3.shape)], axis=1)
    raise ValueError(f"unknown init mode {mode!r}")


@lru_cache(maxsize=4096)
def _stub_vector(text: str, dim: int) -> np.ndarray:
    seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little")
    v = np.random.default_rng(seed).standard_normal(dim)
    v = v / np.linalg.norm(v)
    v.flags.writeable = False
    return v


def text_feature(language: str | None, dim: int) -> np.ndarray:
    """Deterministic unit-norm stand-in for a frozen sentence encoder."""
    return _stub_vector(PAD_SENTENCE if language is None else language, dim)


def text_token(language: str | None, projection: Linear) -> Tensor:
    dim = projection.weight.shape[1]
    return projection(Tensor(text_feature(language, dim)[None, :]))


def box_mask(box, height: int, width: int) -> np.ndarray:
    """Binary mask of pixels whose centers fall inside ``box`` = (x0, y0, x1, y1)."""
    x0, y0, x1, y1 = box
    cols = np.arange(width) + 0.5
    rows = np.arange(height) + 0.5
    inside_x = (cols >= x0) & (cols < x1)
    inside_y = (rows >= y0) & (rows < y1)
    return (inside_y[:, None] & inside_x[None, :]).astype(np.float64)


def soft_mask_avg(mask: np.ndarray, patch: int) -> np.ndarray:
    """Fraction of foreground pixels in each patch, row-major patch order."""
    h, w = mask.shape[-2:]
    if h % patch or w % patch:
        raise ValueError(f"mask size {h}x{w} is not divisible by patch size {patch}")
    lead = mask.shape[:-2]
    blocks = mask.reshape(*lead, h // patch, patch, w // patch, patch)
    counts = blocks.sum(axis=(-3, -1))
    return counts.reshape(*lead, -1) / (patch * patch)


class TokenTypeTable(Module):
    MODES = ("none", "hard", "soft")

    def __init__(self, rng: np.random.Generator, dim: int, mode: str = "soft"):
        if mode not in self.MODES:
            raise ValueError(f"unknown token type mode {mode!r}")
        self.mode = mode
        # always drawn so every mode leaves the rng in the same state
        fg, bg, search = (rng.uniform(-0.02, 0.02, dim) for _ in range(3))
        if mode != "none":
            self.E_fg = Parameter(fg)
            self.E_bg = Parameter(bg)
            self.E_search = Parameter(search)


def harden(m_avg: np.ndarray) -> np.ndarray:
    """Round foreground fractions to {0, 1}; exactly one half counts as foreground."""
    return (np.asarray(m_avg) >= 0.5).astype(np.float64)


def apply_token_type(
    tokens: Tensor, m_avg: np.ndarray | None, table: TokenTypeTable, span_kind: str
) -> Tensor:
    """Add token-type embeddings to one span of tokens (shape ..., n, D).

    Template spans blend foreground and background types by each patch's
    foreground fraction ``m_avg`` (shape ..., n); search spans get the search
    type.  In ``hard`` mode the fraction is first rounded.
    """
    if table.mode == "none":
        return tokens
    if span_kind == "search":
        return tokens + table.E_search
    if span_kind != "template":
        raise ValueError(f"unknown span kind {span_kind!r}")
    if m_avg is None:
        raise ValueError(f"{table.mode} token types need per-patch foreground fractions")
    m = np.asarray(m_avg, dtype=np.float64)
    if table.mode == "hard":
        m = harden(m)
    m = m[..., None]
    return tokens + Tensor(m) * table.E_fg + Tensor(1.0 - m) * table.E_bg


@dataclass
class TokenSequence:
    """Tokens (N x D, or B x N x D) plus the index range of every span."""

    tokens: Tensor
    spans: dict[str, tuple[int, int]]
    grids: dict[str, tuple[int, int]] = field(default_factory=dict)
    streams: int = 1

    @property
    def length(self) -> int:
        return self.tokens.shape[-2]

    def span(self, name: str) -> Tensor:
        lo, hi = self.spans[name]
        return self.tokens[..., lo:hi, :]

    def with_tokens(self, tokens: Tensor) -> "TokenSequence":
        return TokenSequence(tokens, dict(self.spans), dict(self.grids), self.streams)


TEMPLATE_SPANS = ("static_template", "dynamic_template")


@dataclass
class TokenizerConfig:
    patch_size: int = 16
    dim: int = 64
    template_size: int = 32
    search_size: int = 64
    token_type_mode: str = "soft"
    fusion_mode: str = "concat"
    init_mode: str = "half_copy"
    tokenizer_mode: str = "joint"
    extra_task_token: bool = False

    def __post_init__(self):
        for name, size in (("template", self.template_size), ("search", self.search_size)):
            if size % self.patch_size:
                raise ValueError(f"{name} size {size} not divisible by patch {self.patch_size}")
        if self.fusion_mode not in ("concat", "add", "mul"):
            raise ValueError(f"unknown fusion mode {self.fusion_mode!r}")
        if self.tokenizer_mode not in ("joint", "separate"):
            raise ValueError(f"unknown tokenizer mode {self.tokenizer_mode!r}")

    @property
    def template_grid(self) -> int:
        return self.template_size // self.patch_size

    @property
    def search_grid(self) -> int:
        return self.search_size // self.patch_size


class Tokenizer(Module):
    """Learned part of sequence construction (embedders, positions, types, text)."""

    def __init__(self, rng: np.random.Generator, cfg: TokenizerConfig):
        self.cfg = cfg
        p, d = cfg.patch_size, cfg.dim
        # stands in for pretrained RGB patch weights
        w3 = rng.uniform(-1, 1, (d, 3 * p * p)) / np.sqrt(3 * p * p)
        if cfg.tokenizer_mode == "joint":
            w6 = init_from_rgb_weights(w3, cfg.init_mode, rng)
            self.embed = PatchEmbedder(w6, np.zeros(d), p)
        else:
            self.embed_rgb = PatchEmbedder(w3.copy(), np.zeros(d), p)
            self.embed_aux = PatchEmbedder(w3.copy(), np.zeros(d), p)
        self.pos_template = Parameter(rng.uniform(-0.02, 0.02, (cfg.template_grid**2, d)))
        self.pos_search = Parameter(rng.uniform(-0.02, 0.02, (cfg.search_grid**2, d)))
        self.token_types = TokenTypeTable(rng, d, cfg.token_type_mode)
        self.text_proj = Linear(rng, d, d)
        if cfg.extra_task_token:
            self.task_token = Parameter(rng.uniform(-0.02, 0.02, d))

    def _embed_image(self, img6: np.ndarray, pos: Parameter) -> list[Tensor]:
        if self.cfg.tokenizer_mode == "joint":
            return [self.embed(img6) + pos]
        return [self.embed_rgb(img6[..., :3]) + pos, self.embed_aux(img6[..., 3:]) + pos]

    def __call__(
        self,
        templates: np.ndarray,
        template_masks: np.ndarray | None,
        search: np.ndarray,
        text: np.ndarray,
    ) -> TokenSequence:
        """Build the batched sequence.

        templates: (B, T, Ht, Wt, 6); template_masks: (B, T, n_t) foreground
        fractions; search: (B, Hs, Ws, 6); text: (B, D) sentence features.
        """
        cfg = self.cfg
        b, t = templates.shape[:2]
        if t not in (1, 2):
            raise ValueError(f"expected 1 or 2 templates, got {t}")
        if templates.shape[2:4] != (cfg.template_size,) * 2:
            raise ValueError(
                f"template resolution {templates.shape[2:4]} != configured {cfg.template_size}"
            )
        if search.shape[1:3] != (cfg.search_size,) * 2:
            raise ValueError(f"search resolution {search.shape[1:3]} != configured {cfg.search_size}")
        pieces: list[Tensor] = []
        spans: dict[str, tuple[int, int]] = {}
        grids: dict[str, tuple[int, int]] = {}
        start = 0
        for k in range(t):
            name = TEMPLATE_SPANS[k]
            m = None if template_masks is None else template_masks[:, k]
            for stream in self._embed_image(templates[:, k], self.pos_template):
                pieces.append(apply_token_type(stream, m, self.token_types, "template"))
            n = cfg.template_grid**2 * self.streams
            spans[name] = (start, start + n)
            grids[name] = (cfg.template_grid, cfg.template_grid)
            start += n
        for stream in self._embed_image(search, self.pos_search):
            pieces.append(apply_token_type(stream, None, self.token_types, "search"))
        n = cfg.search_grid**2 * self.streams
        spans["search"] = (start, start + n)
        grids["search"] = (cfg.search_grid, cfg.search_grid)
        start += n

        text_tok = F.reshape(self.text_proj(Tensor(text)), (b, 1, cfg.dim))
        if cfg.fusion_mode == "add":
            pieces = [p + text_tok for p in pieces]
        elif cfg.fusion_mode == "mul":
            pieces = [p * text_tok for p in pieces]
        else:
            pieces.append(text_tok)
            spans["text"] = (start, start + 1)
            start += 1
        if cfg.extra_task_token:
            pieces.append(F.broadcast_to(self.task_token, (b, 1, cfg.dim)))
            spans["task"] = (start, start + 1)
            start += 1
        tokens = F.concat(pieces, axis=1)
        return TokenSequence(tokens, spans, grids, self.streams)

    @property
    def streams(self) -> int:
        return 1 if self.cfg.tokenizer_mode == "joint" else 2


def template_fractions(boxes, size: int, patch: int) -> np.ndarray:
    """Per-patch foreground fractions for template boxes given in crop pixels."""
    return np.stack([soft_mask_avg(box_mask(b, size, size), patch) for b in boxes])


def build_sequence(
    templates: list[tuple[ModalFrame, tuple]],
    search: ModalFrame,
    tokenizer: Tokenizer,
) -> TokenSequence:
    """Single-sample sequence from already-cropped template frames and a search frame."""
    cfg = tokenizer.cfg
    if not 1 <= len(templates) <= 2:
        raise ValueError(f"expected 1 or 2 templates, got {len(templates)}")
    imgs = np.stack([concat_channels(f) for f, _ in templates])[None]
    masks = template_fractions([b for _, b in templates], cfg.template_size, cfg.patch_size)[None]
    s = concat_channels(search)[None]
    text = text_feature(search.language, cfg.dim)[None]
    seq = tokenizer(imgs, masks, s, text)
    return seq.with_tokens(seq.tokens[0])
