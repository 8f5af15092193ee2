from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import yaml

from modules.app.config_manager import SWEEP_KEYS, apply_overrides, load_config, set_key, validate_config
from modules.app.evaluation_controller import TASKS, align_embeddings, evaluate, run_sweep
from modules.app.training_controller import embed, state_from_checkpoint, train
from modules.errors import CheckpointError, ConfigError, DatasetError, DivergenceError
from modules.infrastructure.graph.synthetic import SyntheticSpec, gen_synthetic, load_synthetic_spec
from modules.infrastructure.io.checkpoint_io import load_checkpoint
from modules.infrastructure.io.dataset_io import load_dataset
from modules.infrastructure.io.embedding_io import export_embeddings, read_embeddings
from modules.infrastructure.io.path_manager import RunPaths
from modules.infrastructure.logging.logging_setup import (
    get_logger,
    set_correlation_id,
    setup_logging,
    teardown_logging,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_DIVERGENCE = 3


def _emit_error(kind: str, msg: str, **extra) -> None:
    payload = {"level": "ERROR", "kind": kind, "msg": msg, **extra}
    sys.stderr.write(json.dumps(payload, ensure_ascii=False) + "\n")
    sys.stderr.flush()


class CliParser(argparse.ArgumentParser):
    """Usage errors exit with the config-error code and a structured line."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        _emit_error("config", message)
        raise SystemExit(EXIT_CONFIG)


# ---------- shared helpers ----------


def _resolve_config(args: argparse.Namespace) -> dict:
    cfg = load_config(getattr(args, "config", None))
    if getattr(args, "seed", None) is not None:
        cfg = set_key(cfg, "runtime.seed", int(args.seed))
    cfg = apply_overrides(cfg, getattr(args, "set", None) or [])
    validate_config(cfg)
    return cfg


def _start_logging(cfg: dict, log_dir: Optional[Path], correlation_id: str) -> None:
    log_cfg = cfg["logging"]
    setup_logging(
        level=str(log_cfg["level"]).upper(),
        log_dir=log_dir if log_dir is not None else log_cfg["directory"],
        json_enabled=bool(log_cfg["json_enabled"]),
        max_bytes=int(log_cfg["rotation"]["max_bytes"]),
        backup_count=int(log_cfg["rotation"]["backup_count"]),
    )
    set_correlation_id(correlation_id)


def _parse_int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"expected a comma-separated list of integers, got {text!r}") from e


def _print_json(data) -> None:
    sys.stdout.write(json.dumps(data, indent=2, sort_keys=True) + "\n")


# ---------- subcommands ----------


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    paths = RunPaths(args.out_dir)
    _start_logging(cfg, paths.log_dir, f"train-seed{cfg['runtime']['seed']}")
    data_dir = Path(args.data_dir).resolve()
    graph = load_dataset(data_dir)
    state, history = train(
        graph,
        cfg,
        out_dir=paths.out_dir,
        resume_from=args.resume,
        checkpoint_extra={"data_dir": str(data_dir)},
    )
    export_embeddings(embed(state, graph), paths.embeddings, graph.labels)
    _print_json(
        {
            "out_dir": str(paths.out_dir),
            "epochs": state.epoch,
            "final_total_loss": history[-1]["total"] if history else None,
            "checkpoint": str(paths.last_checkpoint),
            "embeddings": str(paths.embeddings),
        }
    )
    return EXIT_OK


def cmd_embed(args: argparse.Namespace) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    state, cfg = state_from_checkpoint(ckpt)
    out = Path(args.out)
    _start_logging(cfg, out.parent / "logs", f"embed-epoch{ckpt.epoch}")
    data_dir = args.data_dir or ckpt.metadata.get("data_dir")
    if not data_dir:
        raise ConfigError("the checkpoint records no dataset; pass --data-dir")
    graph = load_dataset(data_dir)
    if graph.target_features.shape[1] != int(ckpt.metadata["in_dim"]):
        raise DatasetError(
            f"dataset features have dim {graph.target_features.shape[1]}, "
            f"the checkpoint expects {ckpt.metadata['in_dim']}",
            path=data_dir,
        )
    export_embeddings(embed(state, graph), out, graph.labels)
    _print_json({"embeddings": str(out), "epoch": ckpt.epoch})
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    out = Path(args.out) if args.out else None
    _start_logging(cfg, out.parent / "logs" if out else None, f"eval-seed{cfg['runtime']['seed']}")
    graph = load_dataset(args.data_dir)
    node_ids, _, emb = read_embeddings(args.embeddings)
    emb = align_embeddings(node_ids, emb, graph.num_targets)
    splits = _parse_int_list(args.splits) if args.splits else None
    report = evaluate(emb, graph, cfg, task=args.task, splits=splits, repeats=args.repeats)
    report.metadata["embeddings"] = str(args.embeddings)
    text = report.to_json(out)
    if out is not None:
        out.with_suffix(".md").write_text(report.to_markdown(), encoding="utf-8")
    sys.stdout.write(text + "\n")
    return EXIT_OK


def cmd_gen_synthetic(args: argparse.Namespace) -> int:
    spec = load_synthetic_spec(args.spec) if args.spec else SyntheticSpec()
    if args.seed is not None:
        spec.seed = int(args.seed)
    out = Path(args.out)
    _start_logging(load_config(None), out / "logs", f"gen-synthetic-seed{spec.seed}")
    gen_synthetic(spec, out)
    _print_json({"dataset": str(out), "n_target": spec.n_target, "n_classes": spec.n_classes})
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    out_dir = Path(args.out_dir)
    _start_logging(cfg, out_dir / "logs", f"sweep-{args.param}")
    try:
        values = [yaml.safe_load(v) for v in args.values.split(",") if v.strip()]
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse sweep values {args.values!r}: {e}") from e
    graph = load_dataset(args.data_dir)
    reports = run_sweep(graph, cfg, args.param, values, out_dir, workers=args.workers)
    _print_json({str(v): r.to_dict() for v, r in zip(values, reports)})
    return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    from modules.presentation.plot import plot_embeddings

    out = Path(args.out)
    _start_logging(load_config(None), out.parent / "logs", "plot")
    plot_embeddings(args.embeddings, out, title=args.title)
    _print_json({"image": str(out)})
    return EXIT_OK


# ---------- parser ----------


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="YAML or JSON config file")
    p.add_argument("--seed", type=int, default=None, help="overrides runtime.seed")
    p.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", help="dotted config override, repeatable"
    )


def build_parser() -> CliParser:
    parser = CliParser(prog="hgvae", description="HGVAE: variational HAN autoencoder with progressive negatives")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and export embeddings")
    _add_config_args(p)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("embed", help="export embeddings from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--data-dir", default=None, help="defaults to the dataset recorded in the checkpoint")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("eval", help="linear-probe classification and k-means clustering")
    _add_config_args(p)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--task", choices=TASKS, default="both")
    p.add_argument("--splits", default=None, help="comma-separated split sizes, e.g. 20,40,60")
    p.add_argument("--repeats", type=int, default=None)
    p.add_argument("--out", default=None, help="report JSON path; a .md table is written beside it")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen-synthetic", help="write a planted-partition heterogeneous graph")
    p.add_argument("--spec", default=None, help="YAML or JSON synthetic spec")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("sweep", help="train and evaluate once per parameter value")
    _add_config_args(p)
    p.add_argument("--param", choices=sorted(SWEEP_KEYS), required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="2-D scatter of an embedding file")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--title", default=None)
    p.set_defaults(func=cmd_plot)
    return parser


_ERROR_KINDS: Dict[type, tuple] = {
    ConfigError: ("config", EXIT_CONFIG),
    DatasetError: ("data", EXIT_DATA),
    CheckpointError: ("data", EXIT_DATA),
    DivergenceError: ("divergence", EXIT_DIVERGENCE),
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler: Callable[[argparse.Namespace], int] = args.func
        return handler(args)
    except SystemExit as e:
        return int(e.code or 0)
    except tuple(_ERROR_KINDS) as e:
        kind, code = next(v for k, v in _ERROR_KINDS.items() if isinstance(e, k))
        extra = {}
        if isinstance(e, DatasetError) and e.path is not None:
            extra = {"path": str(e.path), "line": e.line}
        if isinstance(e, DivergenceError):
            extra = {"component": e.component, "epoch": e.epoch}
        logger.error("%s error: %s", kind, e)
        _emit_error(kind, str(e), **extra)
        return code
    except ValueError as e:
        logger.error("invalid input: %s", e)
        _emit_error("data", str(e))
        return EXIT_DATA
    except Exception as e:
        get_logger("Uncaught").error("Uncaught exception", exc_info=True)
        _emit_error("internal", f"{type(e).__name__}: {e}")
        return 4
    finally:
        teardown_logging()


if __name__ == "__main__":
    sys.exit(main())
