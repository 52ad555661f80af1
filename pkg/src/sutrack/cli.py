"""``sutrack`` command line: gen, train, track, eval and ablate."""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from .config import ALIASES, ConfigError, RunConfig, canonical_key, coerce, load_config, parse_overrides, parse_value
from .data.container import ContainerError, list_sequences, read_dataset, read_sequence, write_dataset
from .data.metrics import metrics
from .data.synthetic import generate_pool
from .model import TrackerModel
from .numerics import CheckpointError, load_checkpoint, save_checkpoint
from .tracker import Tracker, format_results, parse_results
from .training import LOSS_COLUMNS, evaluate_tracking, task_accuracy, track_sequence, train

HELDOUT_OFFSET = 7919  # seed offset for held-out data so it never overlaps training data


def _thread_limit():
    value = os.environ.get("SUTRACK_THREADS")
    if not value:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    try:
        n = int(value)
    except ValueError:
        raise ConfigError(f"SUTRACK_THREADS must be a positive integer, got {value!r}") from None
    if n < 1:
        raise ConfigError(f"SUTRACK_THREADS must be a positive integer, got {value!r}")
    return threadpool_limits(limits=n)


def make_pool(cfg: RunConfig, count: int, seed: int):
    return generate_pool(
        count,
        cfg.length,
        seed,
        tasks=cfg.task_list(),
        regime=cfg.regime,
        height=cfg.frame_size,
        width=cfg.frame_size,
    )


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def write_loss_csv(path: str | os.PathLike, history: list[tuple]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(LOSS_COLUMNS)
        for row in history:
            w.writerow([_fmt(v) for v in row])


def load_model(ckpt: str | os.PathLike) -> tuple[TrackerModel, RunConfig]:
    ckpt = Path(ckpt)
    if not ckpt.is_file():
        raise CheckpointError(f"checkpoint not found: {ckpt}")
    sidecar = Path(f"{ckpt}.config.json")
    cfg = load_config(sidecar if sidecar.is_file() else None)
    model = TrackerModel(cfg.model_config())
    model.load_state_dict(load_checkpoint(ckpt))
    return model, cfg


def cmd_gen(args, cfg: RunConfig) -> None:
    pool = make_pool(cfg, cfg.num_sequences, cfg.seed)
    names = write_dataset(args.out, pool)
    print(f"wrote {len(names)} sequences to {args.out}")


def cmd_train(args, cfg: RunConfig) -> None:
    pool = list(read_dataset(args.data).values())
    if not pool:
        raise ContainerError(f"{args.data}: no sequences found")
    model = TrackerModel(cfg.model_config())
    every = max(1, cfg.steps // 10)

    def report(step, row):
        if step % every == 0 or step == cfg.steps - 1:
            print(" ".join(f"{k}={_fmt(v) if k == 'step' else f'{v:.4f}'}" for k, v in zip(LOSS_COLUMNS, row)))

    history = train(model, pool, cfg.train_config(), report)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out, model.state_dict())
    write_loss_csv(f"{out}.loss.csv", history)
    with open(f"{out}.config.json", "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=1)
    print(f"wrote {out}, {out}.loss.csv and {out}.config.json")


def cmd_track(args, cfg: RunConfig) -> None:
    model, ckpt_cfg = load_model(args.ckpt)
    tracker = Tracker(model, **ckpt_cfg.tracker_kwargs())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = list_sequences(args.data)
    for name in names:
        boxes, confs = track_sequence(tracker, read_sequence(Path(args.data) / name))
        (out / f"{name}.txt").write_text(format_results(boxes, confs), encoding="utf-8")
    print(f"tracked {len(names)} sequences into {out}")


def cmd_eval(args, cfg: RunConfig) -> None:
    names = list_sequences(args.data)
    if not names:
        raise ContainerError(f"{args.data}: no sequences found")
    preds, gts, per_seq = [], [], {}
    for name in names:
        path = Path(args.pred) / f"{name}.txt"
        if not path.is_file():
            raise FileNotFoundError(f"missing result file {path}")
        boxes, _ = parse_results(path.read_text(encoding="utf-8"))
        gt = read_sequence(Path(args.data) / name).boxes
        per_seq[name] = metrics(boxes[1:], gt[1:])
        preds.append(boxes[1:])
        gts.append(gt[1:])
    overall = metrics(np.concatenate(preds), np.concatenate(gts))
    result = {"overall": overall, "sequences": per_seq}
    out = Path(args.out) if args.out else Path(args.pred) / "metrics.json"
    out.write_text(json.dumps(result, indent=1), encoding="utf-8")
    for k, v in overall.items():
        print(f"{k} {v:.4f}")
    print(f"wrote {out}")


def parse_axis(text: str) -> tuple[str, list]:
    if "=" not in text:
        raise ConfigError(f"axis must look like NAME=V1,V2,..., got {text!r}")
    name, values = text.split("=", 1)
    key = canonical_key(name)
    vals = [coerce(key, parse_value(v), "axis: ") for v in values.split(",") if v != ""]
    if not vals:
        raise ConfigError(f"axis {name!r} has no values")
    return key, vals


def cmd_ablate(args, cfg: RunConfig) -> None:
    key, values = parse_axis(args.axis)
    train_pool = make_pool(cfg, cfg.num_sequences, cfg.seed)
    held = make_pool(cfg, cfg.eval_sequences, cfg.seed + HELDOUT_OFFSET)
    rows = []
    for value in values:
        run = RunConfig(**{**cfg.to_dict(), key: value}).validate()
        model = TrackerModel(run.model_config())
        history = train(model, train_pool, run.train_config())
        acc, ce = task_accuracy(model, held, run.eval_samples, run.seed + HELDOUT_OFFSET)
        track = evaluate_tracking(model, held, aux_dropped=run.drop_aux, **run.tracker_kwargs())
        row = {key: value, "final_loss": history[-1][-1], "task_accuracy": acc, "task_ce": ce, **track}
        rows.append(row)
        print(" ".join(f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
    out = Path(args.out)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(v) for k, v in row.items()})
    print(f"wrote {out}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sutrack",
        description="Toy unified multi-modal tracker. Extra --key value flags override config keys.",
        epilog="config keys: " + ", ".join(RunConfig.__dataclass_fields__)
        + "; aliases: " + ", ".join(f"{a}={b}" for a, b in ALIASES.items()),
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", allow_abbrev=False, help="write a synthetic dataset")
    g.add_argument("--config")
    g.add_argument("--out", required=True)

    t = sub.add_parser("train", allow_abbrev=False, help="train a model and write a checkpoint")
    t.add_argument("--config")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)

    k = sub.add_parser("track", allow_abbrev=False, help="track every sequence of a dataset")
    k.add_argument("--ckpt", required=True)
    k.add_argument("--data", required=True)
    k.add_argument("--out", required=True)

    e = sub.add_parser("eval", allow_abbrev=False, help="score result files against ground truth")
    e.add_argument("--pred", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", help="metrics JSON path (default PRED/metrics.json)")

    a = sub.add_parser("ablate", allow_abbrev=False, help="train and score one model per axis value")
    a.add_argument("--config")
    a.add_argument("--axis", required=True, help="NAME=V1,V2,...")
    a.add_argument("--out", default="ablation.csv")
    return p


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "track": cmd_track, "eval": cmd_eval, "ablate": cmd_ablate}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        overrides = parse_overrides(extra)
        cfg = load_config(getattr(args, "config", None), overrides)
        with _thread_limit():
            COMMANDS[args.command](args, cfg)
    except (ConfigError, ContainerError, CheckpointError, FileNotFoundError, KeyError, ValueError, OSError) as exc:
        print(f"sutrack {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
