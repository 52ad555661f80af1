"""Gradient-check cases shared by the unit tests and the acceptance run.

Each builder takes a seeded generator and returns ``(fn, inputs)`` where
``fn`` maps input Tensors to a scalar.  Outputs are contracted with a fixed
random weight so that every output element reaches the gradient.
"""
import numpy as np

from sutrack.heads import HeadOutput
from sutrack.losses import LossWeights, Targets, center_cell, focal_target, total_loss
from sutrack.numerics import F, Tensor

SEEDS = range(20)


def _contract(out: Tensor, rng) -> Tensor:
    w = rng.normal(size=out.shape)
    return F.sum(out * w)


def _away(rng, shape, lo=0.3, hi=2.0):
    """Values bounded away from zero with random sign."""
    return rng.uniform(lo, hi, shape) * rng.choice([-1.0, 1.0], shape)


def _unary(op, domain="any"):
    def build(rng):
        shape = (3, 4)
        if domain == "positive":
            x = rng.uniform(0.2, 3.0, shape)
        elif domain == "nonzero":
            x = _away(rng, shape)
        else:
            x = rng.normal(size=shape)
        w = rng.normal(size=shape)
        return (lambda a: F.sum(op(a) * w)), [x]

    return build


def _binary(op, b_domain="any", shapes=((3, 4), (3, 4))):
    def build(rng):
        a = rng.normal(size=shapes[0])
        b = _away(rng, shapes[1]) if b_domain == "nonzero" else rng.normal(size=shapes[1])
        w = rng.normal(size=np.broadcast_shapes(*shapes))
        return (lambda x, y: F.sum(op(x, y) * w)), [a, b]

    return build


def _extremum(op):
    def build(rng):
        a = rng.normal(size=(3, 4))
        # keep the operands apart so the finite difference never straddles a tie
        b = a + _away(rng, (3, 4), 0.05, 1.0)
        w = rng.normal(size=(3, 4))
        return (lambda x, y: F.sum(op(x, y) * w)), [a, b]

    return build


def _clip(rng):
    x = rng.uniform(-2, 2, (3, 4))
    x[np.abs(np.abs(x) - 1.0) < 0.05] = 0.0
    w = rng.normal(size=(3, 4))
    return (lambda a: F.sum(F.clip(a, -1.0, 1.0) * w)), [x]


def _power(exponent):
    def build(rng):
        x = rng.uniform(0.3, 2.0, (3, 4))
        w = rng.normal(size=(3, 4))
        return (lambda a: F.sum(F.power(a, exponent) * w)), [x]

    return build


def _softmax(op):
    def build(rng):
        x = rng.normal(size=(2, 3, 5))
        w = rng.normal(size=(2, 3, 5))
        return (lambda a: F.sum(op(a) * w)), [x]

    return build


def _layer_norm(rng):
    x = rng.normal(size=(2, 3, 6))
    g = rng.normal(size=6)
    b = rng.normal(size=6)
    w = rng.normal(size=(2, 3, 6))
    return (lambda a, gg, bb: F.sum(F.layer_norm(a, gg, bb) * w)), [x, g, b]


def _reduce(op, axis, keepdims):
    def build(rng):
        x = rng.normal(size=(2, 3, 4))
        out_shape = op(Tensor(x), axis=axis, keepdims=keepdims).shape
        w = rng.normal(size=out_shape)
        return (lambda a: F.sum(op(a, axis=axis, keepdims=keepdims) * w)), [x]

    return build


def _matmul(sa, sb):
    def build(rng):
        a = rng.normal(size=sa)
        b = rng.normal(size=sb)
        out_shape = np.matmul(a, b).shape
        w = rng.normal(size=out_shape)
        return (lambda x, y: F.sum(F.matmul(x, y) * w)), [a, b]

    return build


def _transpose(rng):
    x = rng.normal(size=(2, 3, 4))
    w = rng.normal(size=(4, 2, 3))
    return (lambda a: F.sum(F.transpose(a, (2, 0, 1)) * w)), [x]


def _reshape(rng):
    x = rng.normal(size=(2, 3, 4))
    w = rng.normal(size=(6, 4))
    return (lambda a: F.sum(F.reshape(a, (6, 4)) * w)), [x]


def _broadcast(rng):
    x = rng.normal(size=(3, 1))
    w = rng.normal(size=(2, 3, 4))
    return (lambda a: F.sum(F.broadcast_to(a, (2, 3, 4)) * w)), [x]


def _concat(rng):
    a, b = rng.normal(size=(2, 3)), rng.normal(size=(2, 5))
    w = rng.normal(size=(2, 8))
    return (lambda x, y: F.sum(F.concat([x, y], axis=1) * w)), [a, b]


def _stack(rng):
    a, b = rng.normal(size=(2, 3)), rng.normal(size=(2, 3))
    w = rng.normal(size=(2, 2, 3))
    return (lambda x, y: F.sum(F.stack([x, y], axis=1) * w)), [a, b]


def _slice(rng):
    x = rng.normal(size=(4, 5))
    w = rng.normal(size=(2, 3))
    return (lambda a: F.sum(a[1:3, ::2] * w)), [x]


def _take(rng):
    x = rng.normal(size=(4, 5))
    rows = np.array([0, 2, 2, 3])
    cols = np.array([1, 1, 1, 4])
    w = rng.normal(size=4)
    return (lambda a: F.sum(F.take(a, (rows, cols)) * w)), [x]


def toy_loss_case(rng, batch=2, grid=4, patch=16):
    """Random head outputs and targets for the composite loss."""
    size = grid * patch
    boxes, heat, cells = [], [], []
    for _ in range(batch):
        w, h = rng.uniform(10, 30, 2)
        cx, cy = rng.uniform(w / 2 + 1, size - w / 2 - 1), rng.uniform(h / 2 + 1, size - h / 2 - 1)
        b = np.array([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2])
        boxes.append(b / size)
        heat.append(focal_target(b, grid, patch))
        cells.append(center_cell(b, patch))
    targets = Targets(np.stack(heat), np.stack(boxes), np.array(cells), rng.integers(0, 5, batch))
    raw = [
        rng.normal(size=(batch, grid, grid)),
        rng.normal(size=(batch, grid, grid, 2)),
        rng.normal(size=(batch, grid, grid, 2)) * 0.5 - 1.0,
        rng.normal(size=(batch, 5)),
    ]
    return raw, targets


def _full_loss(rng):
    raw, targets = toy_loss_case(rng)

    def fn(s, o, z, logits):
        out = HeadOutput(F.sigmoid(s), F.sigmoid(o), F.sigmoid(z))
        return total_loss(out, logits, targets, LossWeights()).total

    return fn, raw


CASES = {
    "add": _binary(F.add),
    "add_broadcast": _binary(F.add, shapes=((3, 4), (4,))),
    "sub": _binary(F.sub),
    "mul": _binary(F.mul),
    "mul_broadcast": _binary(F.mul, shapes=((2, 3, 4), (3, 1))),
    "div": _binary(F.div, "nonzero"),
    "power_2": _power(2.0),
    "power_half": _power(0.5),
    "power_neg": _power(-1.5),
    "maximum": _extremum(F.maximum),
    "minimum": _extremum(F.minimum),
    "clip": _clip,
    "absolute": _unary(F.absolute, "nonzero"),
    "exp": _unary(F.exp),
    "log": _unary(F.log, "positive"),
    "sqrt": _unary(F.sqrt, "positive"),
    "sigmoid": _unary(F.sigmoid),
    "tanh": _unary(F.tanh),
    "gelu": _unary(F.gelu),
    "softmax": _softmax(F.softmax),
    "log_softmax": _softmax(F.log_softmax),
    "layer_norm": _layer_norm,
    "sum_all": _reduce(F.sum, None, False),
    "sum_axis": _reduce(F.sum, 1, False),
    "sum_axes_keep": _reduce(F.sum, (0, 2), True),
    "mean_all": _reduce(F.mean, None, False),
    "mean_axis": _reduce(F.mean, -1, True),
    "matmul_2d": _matmul((3, 4), (4, 2)),
    "matmul_batched_2d": _matmul((2, 3, 4), (4, 5)),
    "matmul_batched": _matmul((2, 3, 4), (2, 4, 2)),
    "matmul_vec": _matmul((3, 4), (4,)),
    "matmul_vec_left": _matmul((4,), (4, 3)),
    "transpose": _transpose,
    "reshape": _reshape,
    "broadcast_to": _broadcast,
    "concat": _concat,
    "stack": _stack,
    "slice": _slice,
    "take": _take,
    "full_loss": _full_loss,
}
