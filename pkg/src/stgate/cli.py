"""Command-line orchestration: train, eval, sweeps, verification, data export.

Every artifact embeds the resolved run configuration (flat dotted keys) and
the seed, so equal configs produce byte-identical outputs.  Sweep commands
re-initialize each grid point from ``seed + index`` and share one cohort
and one correlation matrix across points.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .cohort import preprocess, write_csv
from .config import RunConfig, format_flat, from_flat, parse_config_file, to_flat
from .errors import StgateError, TrainingDivergedError
from .fusion import load_checkpoint, save_checkpoint
from .graph import correlation_matrix, save_edgelist
from .metrics import evaluate
from .optim import ParamStore
from .train import build_graph, predict_split, train_model
from .cohort import node_observation_matrix, train_target_stats

DEFAULT_GAMMAS = [round(0.1 * i, 1) for i in range(11)]
DEFAULT_RHOS = [round(0.1 * i, 1) for i in range(1, 11)]


def _json_dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")


def _config_comment_lines(flat: dict[str, Any]) -> list[str]:
    return [f"# {line}" for line in format_flat(flat)]


def _write_csv_artifact(path: Path, flat: dict[str, Any], header: str, rows: list[str]) -> None:
    lines = _config_comment_lines(flat) + [header] + rows
    _write_text(path, "\n".join(lines) + "\n")


def _prepare(cfg: RunConfig):
    cohort = preprocess(cfg.load_cohort(), split_seed=cfg.seed)
    model_cfg = cfg.model_config(d_in=cohort.d_in)
    return cohort, model_cfg


def cmd_train(cfg: RunConfig) -> int:
    """Train one model and write metrics, loss curve, checkpoint, and graph."""
    out = Path(cfg.out_dir)
    flat = to_flat(cfg)
    cohort, model_cfg = _prepare(cfg)
    try:
        result = train_model(cohort, model_cfg, cfg.train, cfg.density, cfg.seed)
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    payload = {
        "config": flat,
        "seed": cfg.seed,
        "loss": {
            "train_mse_initial": result.train_mse_initial,
            "train_mse_final": result.train_mse_final,
            "final_to_initial_ratio": result.train_mse_final / result.train_mse_initial,
        },
        "metrics": {name: report.to_dict() for name, report in result.metrics.items()},
        "graph": {
            "n_nodes": result.graph.n_nodes,
            "density": result.graph.density,
            "n_edges": result.graph.n_edges(),
        },
    }
    _write_text(out / "metrics.json", _json_dumps(payload))

    rows = [f"{e},{tr!r},{va!r}" for e, tr, va in result.loss_curve]
    _write_csv_artifact(out / "loss_curve.csv", flat, "epoch,train_mse,val_mse", rows)

    save_checkpoint(
        out / "checkpoint.json",
        result.params,
        config=flat,
        graph=result.graph,
        extras={
            "seed": cfg.seed,
            "y_mean": result.y_mean,
            "y_std": result.y_std,
            "stage_threshold": result.stage_threshold,
        },
    )
    save_edgelist(result.graph, out / "graph.edgelist", trailer=format_flat(flat))
    for name, report in result.metrics.items():
        print(f"{name}: {report.to_json()}")
    return 0


def cmd_eval(cfg: RunConfig, checkpoint: str) -> int:
    """Evaluate a saved checkpoint on a (re)loaded cohort's splits."""
    arrays, ckpt_config, graph, extras = load_checkpoint(checkpoint)
    if graph is None:
        print("error: checkpoint carries no graph", file=sys.stderr)
        return 1
    cohort = preprocess(cfg.load_cohort(), split_seed=cfg.seed)
    model_cfg = cfg.model_config(d_in=cohort.d_in)
    params = _params_from_arrays(arrays)
    threshold = extras.get("stage_threshold")
    if threshold is None:
        threshold = train_target_stats(cohort)[2]
    reports = {}
    for split in ("train", "val", "test"):
        y_hat, y_true = predict_split(
            cohort, split, graph, model_cfg, params,
            extras.get("y_mean", 0.0), extras.get("y_std", 1.0),
        )
        reports[split] = evaluate(y_hat, y_true, threshold)
    payload = {
        "config": to_flat(cfg),
        "seed": cfg.seed,
        "checkpoint": str(checkpoint),
        "checkpoint_config": ckpt_config,
        "metrics": {name: r.to_dict() for name, r in reports.items()},
    }
    _write_text(Path(cfg.out_dir) / "metrics.json", _json_dumps(payload))
    for name, report in reports.items():
        print(f"{name}: {report.to_json()}")
    return 0


def _params_from_arrays(arrays: dict[str, np.ndarray]) -> ParamStore:
    params = ParamStore()
    for name, arr in arrays.items():
        params.add(name, arr)
    return params


def _run_sweep(cfg: RunConfig, variable: str, values: list[float]) -> int:
    out = Path(cfg.out_dir)
    flat = to_flat(cfg)
    cohort, _ = _prepare(cfg)
    corr = correlation_matrix(node_observation_matrix(cohort, "train"))
    rows = []
    for index, value in enumerate(sorted(values)):
        point_cfg = from_flat(dict(to_flat(cfg)))
        if variable == "gamma":
            point_cfg.gate_mode = "fixed"
            point_cfg.fixed_gamma = value
            rho = cfg.density
        else:
            rho = value
        model_cfg = point_cfg.model_config(d_in=cohort.d_in)
        result = train_model(
            cohort, model_cfg, point_cfg.train, rho, seed=cfg.seed + index, corr=corr
        )
        report = result.metrics["test"]
        rows.append(f"{value!r},{report.auc!r},{report.rmse!r},{report.ipw_f1!r}")
        print(f"{variable}={value}: {report.to_json()}")
    name = "sweep_gate.csv" if variable == "gamma" else "sweep_density.csv"
    _write_csv_artifact(out / name, flat, f"{variable},auc,rmse,ipw_f1", rows)
    return 0


def cmd_sweep_gate(cfg: RunConfig, gammas: list[float]) -> int:
    """Train one fixed-gate model per gamma; CSV row per grid point."""
    if any(not 0.0 <= g <= 1.0 for g in gammas):
        print("error: gammas must lie in [0, 1]", file=sys.stderr)
        return 2
    return _run_sweep(cfg, "gamma", gammas)


def cmd_sweep_density(cfg: RunConfig, rhos: list[float]) -> int:
    """Rebuild the graph per density, retrain, one CSV row per grid point."""
    if any(not 0.0 <= r <= 1.0 for r in rhos):
        print("error: rhos must lie in [0, 1]", file=sys.stderr)
        return 2
    return _run_sweep(cfg, "rho", rhos)


def cmd_generate_data(cfg: RunConfig) -> int:
    """Write the synthetic cohort as a schema CSV."""
    cohort = cfg.load_cohort()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "cohort.csv"
    write_csv(cohort, path)
    print(f"wrote {path} ({len(cohort.patients)} patients, T={cohort.t_steps})")
    return 0


def cmd_verify(seed: int = 7) -> int:
    """Run the full invariant suite; nonzero exit on any failure."""
    from .verify import run_all

    results = run_all(seed=seed)
    failed = 0
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        detail = f" ({res.detail})" if res.detail and not res.passed else ""
        print(f"[{status}] {res.name}{detail}")
        failed += 0 if res.passed else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


def _build_config(args: argparse.Namespace) -> RunConfig:
    flat: dict[str, Any] = {}
    if getattr(args, "config", None):
        flat.update(parse_config_file(args.config))
    for pair in getattr(args, "set", None) or []:
        if "=" not in pair:
            raise StgateError(f"--set expects key=value, got {pair!r}")
        key, _, value = pair.partition("=")
        flat[key.strip()] = value.strip()
    if getattr(args, "seed", None) is not None:
        flat["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        flat["out"] = args.out
    if getattr(args, "data", None) is not None:
        flat["data.source"] = args.data
    return from_flat(flat)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--seed", type=int, help="run seed (overrides config)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--data", help="'synthetic' or a cohort CSV path")
    parser.add_argument(
        "--set", action="append", metavar="KEY=VALUE",
        help="override any config key (repeatable)",
    )


def _float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip() != ""]


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="stgate",
        description="Structure-aware temporal progression model: training, sweeps, verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and write artifacts")
    _add_common(p_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    _add_common(p_eval)
    p_eval.add_argument("--checkpoint", required=True, help="checkpoint.json path")

    p_gate = sub.add_parser("sweep-gate", help="fixed-gamma sweep")
    _add_common(p_gate)
    p_gate.add_argument("--gammas", type=_float_list,
                        default=DEFAULT_GAMMAS, help="comma list, default 0,0.1,...,1.0")

    p_density = sub.add_parser("sweep-density", help="graph density sweep")
    _add_common(p_density)
    p_density.add_argument("--rhos", type=_float_list,
                           default=DEFAULT_RHOS, help="comma list, default 0.1,...,1.0")

    p_gen = sub.add_parser("generate-data", help="write the synthetic cohort CSV")
    _add_common(p_gen)

    p_verify = sub.add_parser("verify", help="run the invariant suite")
    p_verify.add_argument("--seed", type=int, default=7)

    args = parser.parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(seed=args.seed)
        cfg = _build_config(args)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "eval":
            return cmd_eval(cfg, args.checkpoint)
        if args.command == "sweep-gate":
            return cmd_sweep_gate(cfg, args.gammas)
        if args.command == "sweep-density":
            return cmd_sweep_density(cfg, args.rhos)
        if args.command == "generate-data":
            return cmd_generate_data(cfg)
    except StgateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
