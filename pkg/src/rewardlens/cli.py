"""Batch entry points: train, explain, faithfulness, heatmap, serve.

Exit codes: 0 success, 1 validation failure, 2 I/O failure.
Environment variables REWARDLENS_CONFIG and REWARDLENS_CKPT supply default
paths for --config and --ckpt.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

from . import env, workflow
from .env import Action, GridError
from .explain import lexicon_for
from .persistence import (
    Checkpoint,
    CorruptFile,
    MapHashMismatch,
    PersistenceError,
    ValidationError,
    VersionMismatch,
    load_checkpoint,
    parse_config,
    save_checkpoint,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _read_config(path: Optional[str]):
    path = path or os.environ.get("REWARDLENS_CONFIG")
    if not path:
        raise ValidationError("config", "no config path given (flag or REWARDLENS_CONFIG)")
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, base_dir=p.parent)


def _read_checkpoint(path: Optional[str]) -> Checkpoint:
    path = path or os.environ.get("REWARDLENS_CKPT")
    if not path:
        raise ValidationError("ckpt", "no checkpoint path given (flag or REWARDLENS_CKPT)")
    return load_checkpoint(path)


def cmd_train(args) -> int:
    try:
        config = _read_config(args.config)
    except ValidationError as exc:
        return _fail(str(exc), EXIT_VALIDATION)
    except OSError as exc:
        return _fail(str(exc), EXIT_IO)
    try:
        grid = workflow.load_grid(config)
    except GridError as exc:
        return _fail(f"map: {exc}", EXIT_VALIDATION)

    artifacts = workflow.train_experiment(
        config, grid=grid, episodes=args.episodes, seed=args.seed
    )
    checkpoint = workflow.checkpoint_for(config, artifacts)
    checkpoint.episodes_run = artifacts.episodes_run
    try:
        save_checkpoint(args.out, checkpoint)
    except OSError as exc:
        return _fail(f"cannot write checkpoint {args.out}: {exc}", EXIT_IO)

    print(f"episodes: {artifacts.episodes_run}")
    print(f"success_rate: {artifacts.success_rate:.3f}")
    for ip in artifacts.ips:
        residual = workflow.predictor_residual(grid, config.classes, ip)
        name = config.classes.by_id(ip.class_id).name
        print(f"residual[{name}]: {residual:.6f}")
    print(f"checkpoint: {args.out}")
    return EXIT_OK


def _parse_state(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"state must be x,y: got {text!r}")
    return int(parts[0]), int(parts[1])


def _parse_actions(text: str) -> list[Action]:
    return [Action.from_name(part) for part in text.split(",") if part.strip()]


def cmd_explain(args) -> int:
    try:
        checkpoint = _read_checkpoint(args.ckpt)
    except (ValidationError,) as exc:
        return _fail(str(exc), EXIT_VALIDATION)
    except (VersionMismatch, MapHashMismatch, CorruptFile) as exc:
        return _fail(str(exc), EXIT_VALIDATION)
    except OSError as exc:
        return _fail(str(exc), EXIT_IO)
    if not checkpoint.trained:
        return _fail("checkpoint holds no trained artifacts", EXIT_VALIDATION)

    try:
        grid = env.load_map(checkpoint.map_text, checkpoint.classes)
        position = _parse_state(args.state)
        counterfactual = _parse_actions(args.counterfactual)
        lexicon = lexicon_for(checkpoint.classes, person=args.person)
        result = workflow.explain_query(
            grid,
            checkpoint.classes,
            lexicon,
            checkpoint.agent,
            checkpoint.ips,
            position,
            counterfactual,
            mode=args.mode,
            extra_steps=args.extra_steps,
        )
    except (GridError, ValueError) as exc:
        return _fail(str(exc), EXIT_VALIDATION)

    print(result.text)
    if args.json:
        doc = {
            "mode": result.structure.mode,
            "empty": result.structure.empty,
            "text": result.text,
            "action_agent": env.ACTION_NAMES[result.action_agent],
            "action_user": env.ACTION_NAMES[result.action_user],
            "per_class": {
                str(cid): {
                    "mean_agent": st.mean_agent,
                    "mean_user": st.mean_user,
                    "dominant": st.dominant.value if st.dominant else None,
                }
                for cid, st in result.structure.per_class.items()
            },
            "path_agent": [list(p) for p in result.traj_agent.positions],
            "path_user": [list(p) for p in result.traj_user.positions],
        }
        if result.structure.local_top is not None:
            doc["local_top"] = {
                "set_agent": list(result.structure.local_top.set_agent),
                "set_user": list(result.structure.local_top.set_user),
                "method": result.structure.local_top.method.value,
            }
        print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_faithfulness(args) -> int:
    try:
        checkpoint = _read_checkpoint(args.ckpt)
    except (ValidationError, VersionMismatch, MapHashMismatch, CorruptFile) as exc:
        return _fail(str(exc), EXIT_VALIDATION)
    except OSError as exc:
        return _fail(str(exc), EXIT_IO)
    if not checkpoint.trained:
        return _fail("checkpoint holds no trained artifacts", EXIT_VALIDATION)

    if args.thresholds:
        try:
            thresholds = [float(v) for v in args.thresholds.split(",") if v.strip()]
        except ValueError:
            return _fail(f"bad thresholds list {args.thresholds!r}", EXIT_VALIDATION)
    else:
        thresholds = []
    if not thresholds:
        from .faithfulness import DEFAULT_THRESHOLDS

        thresholds = list(DEFAULT_THRESHOLDS)
    if any(v < 0 for v in thresholds):
        return _fail("thresholds must be non-negative", EXIT_VALIDATION)

    from .faithfulness import build_report

    grid = env.load_map(checkpoint.map_text, checkpoint.classes)
    report = build_report(
        grid, checkpoint.classes, checkpoint.agent, checkpoint.ips, thresholds=thresholds,
        k=args.k,
    )
    out = Path(args.out)
    try:
        out.write_text(report.to_json() + "\n", encoding="utf-8")
        csv_path = out.with_suffix(".csv")
        csv_path.write_text(report.threshold_curve_csv(), encoding="utf-8")
    except OSError as exc:
        return _fail(f"cannot write report: {exc}", EXIT_IO)
    print(f"direct_agreement: {report.direct_agreement:.3f}")
    print(f"probe_accuracy: {report.probe_accuracy:.3f}")
    if report.rmspe_per_run:
        mean = sum(report.rmspe_per_run) / len(report.rmspe_per_run)
        print(f"mean_rmspe: {mean:.2f}%")
    print(f"report: {out}")
    print(f"curve: {csv_path}")
    return EXIT_OK


def cmd_heatmap(args) -> int:
    try:
        checkpoint = _read_checkpoint(args.ckpt)
    except (ValidationError, VersionMismatch, MapHashMismatch, CorruptFile) as exc:
        return _fail(str(exc), EXIT_VALIDATION)
    except OSError as exc:
        return _fail(str(exc), EXIT_IO)

    grid = env.load_map(checkpoint.map_text, checkpoint.classes)
    if args.model == "agent":
        vf = checkpoint.agent
    else:
        vf = None
        for ip in checkpoint.ips:
            rc = checkpoint.classes.by_id(ip.class_id)
            if args.model in (str(ip.class_id), rc.name):
                vf = ip.values
                break
        if vf is None:
            return _fail(f"unknown model {args.model!r}", EXIT_VALIDATION)

    rows = workflow.heatmap_grid(grid, vf)
    lines = [
        ",".join("" if v is None else f"{v:.6f}" for v in row) for row in rows
    ]
    try:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        return _fail(f"cannot write {args.out}: {exc}", EXIT_IO)
    print(f"heatmap: {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    try:
        config = _read_config(args.config)
    except ValidationError as exc:
        return _fail(str(exc), EXIT_VALIDATION)
    except OSError as exc:
        return _fail(str(exc), EXIT_IO)
    if not 0 < args.port < 65536:
        return _fail(f"port {args.port} out of range", EXIT_IO)
    from .service import serve

    try:
        serve(config, host=args.host, port=args.port)
    except OSError as exc:
        return _fail(f"cannot bind {args.host}:{args.port}: {exc}", EXIT_IO)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rewardlens",
        description="Train gridworld agents with influence predictors and "
        "explain their route choices.",
        epilog="exit codes: 0 success, 1 validation failure, 2 I/O failure",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train agent + predictors, write a checkpoint")
    p_train.add_argument("--config", help="experiment config path (or REWARDLENS_CONFIG)")
    p_train.add_argument("--out", required=True, help="checkpoint output path")
    p_train.add_argument("--episodes", type=int, default=None)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.set_defaults(func=cmd_train)

    p_explain = sub.add_parser("explain", help="answer a counterfactual query")
    p_explain.add_argument("--ckpt", help="checkpoint path (or REWARDLENS_CKPT)")
    p_explain.add_argument("--state", required=True, help="decision point as x,y")
    p_explain.add_argument("--counterfactual", required=True,
                           help="comma-separated actions, e.g. up,up,left")
    p_explain.add_argument("--mode", choices=["aggregated", "local"], default="aggregated")
    p_explain.add_argument("--extra-steps", type=int, default=5)
    p_explain.add_argument("--person", choices=["third", "first"], default="third")
    p_explain.add_argument("--json", action="store_true", help="also print the structure")
    p_explain.set_defaults(func=cmd_explain)

    p_faith = sub.add_parser("faithfulness", help="evaluate predictor faithfulness")
    p_faith.add_argument("--ckpt", help="checkpoint path (or REWARDLENS_CKPT)")
    p_faith.add_argument("--thresholds", default="", help="comma-separated, e.g. 0,0.05,0.1")
    p_faith.add_argument("--k", type=int, default=5)
    p_faith.add_argument("--out", required=True, help="report JSON path (CSV written beside)")
    p_faith.set_defaults(func=cmd_faithfulness)

    p_heat = sub.add_parser("heatmap", help="export per-cell max values as CSV")
    p_heat.add_argument("--ckpt", help="checkpoint path (or REWARDLENS_CKPT)")
    p_heat.add_argument("--model", required=True, help="agent, class id, or class name")
    p_heat.add_argument("--out", required=True)
    p_heat.set_defaults(func=cmd_heatmap)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--config", help="experiment config path (or REWARDLENS_CONFIG)")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PersistenceError as exc:
        return _fail(str(exc), EXIT_VALIDATION)
    except GridError as exc:
        return _fail(str(exc), EXIT_VALIDATION)


if __name__ == "__main__":
    sys.exit(main())
