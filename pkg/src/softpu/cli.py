"""Command-line interface.

Every subcommand reads a JSON config (``--config``), with ``--seed`` and
``--out`` overriding the config's seed and output directory. The only
environment override is ``SOFTPU_OUT`` for the output directory (flag beats
env beats config). All outputs are UTF-8; everything except the report's
wall-clock field is byte-stable for a fixed config and seed.

Subcommands: generate | experiment | eval | bound-check | fit-prior |
frontier.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import save_csv, schema_for, write_provenance
from .experiment import (
    ExperimentConfig,
    config_field,
    build_dataset,
    report_to_json,
    run_experiment,
)
from .labeling import fit_prior, mean_log_likelihood, prior_to_json, records_from_csv
from .metrics import (
    auc,
    bound_report,
    curve_to_csv,
    fpr_spu,
    roc_real,
    roc_spu,
    save_json,
    tpr_spu,
)
from .oracle import (
    DiscreteProblem,
    exhaustive_frontier,
    problem_from_json,
    verify_mela_optimality,
    verify_noisy_gap,
)
from .training import load_model, threshold_classify


def _load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such config file: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"config {path} is not valid JSON: {exc}") from None


def _resolve_out(args, config: dict) -> Path:
    out = args.out or os.environ.get("SOFTPU_OUT") or config.get("out_dir")
    if not out:
        raise ValueError("no output directory: pass --out, set SOFTPU_OUT, "
                         "or put 'out_dir' in the config")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _resolve_seed(args, config: dict) -> int:
    seed = args.seed if args.seed is not None else config.get("seed")
    if seed is None:
        raise ValueError("config field 'seed' is required (or pass --seed)")
    return int(seed)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    config = _load_config(args.config)
    seed = _resolve_seed(args, config)
    out = _resolve_out(args, config)
    dataset_cfg = config_field(config, "dataset", dict, required=True)
    data = build_dataset(dataset_cfg, seed)
    save_csv(data, out / "dataset.csv")
    echo = {"dataset": dataset_cfg, "seed": seed, "schema": schema_for(data).to_dict()}
    write_provenance(data, echo, out / "provenance.json")
    print(f"wrote {out / 'dataset.csv'} ({len(data)} rows)")
    return 0


def cmd_experiment(args) -> int:
    config = _load_config(args.config)
    if args.seed is not None:
        config["seed"] = args.seed
    exp = ExperimentConfig.from_dict(config)
    out = _resolve_out(args, config)
    report = run_experiment(exp)
    report_to_json(report, out / "report.json")
    delta = report["delta.test.auc_real"]
    print(f"wrote {out / 'report.json'} (soft - baseline test AUC: {delta:+.4f})")
    return 0


def _scores_for(config: dict, data) -> np.ndarray:
    model_path = config_field(config, "model", str, required=True)
    if not Path(model_path).exists():
        raise FileNotFoundError(f"no such model file: {model_path}")
    return load_model(model_path).scores(data.features)


def cmd_eval(args) -> int:
    config = _load_config(args.config)
    seed = _resolve_seed(args, config)
    out = _resolve_out(args, config)
    data = build_dataset(config_field(config, "dataset", dict, required=True), seed)
    scores = _scores_for(config, data)

    curve = roc_spu(data, scores)
    curve_to_csv(curve, out / "curve_spu.csv")
    record = {"spu.auc": auc(curve), "n_samples": len(data)}
    if data.true_labels is not None:
        real_curve = roc_real(data, scores)
        curve_to_csv(real_curve, out / "curve_real.csv")
        record["real.auc"] = auc(real_curve)
    thresholds = config_field(config, "thresholds", list, default=[])
    rows = []
    for t in thresholds:
        pred = threshold_classify(scores, float(t))
        rows.append(
            {
                "threshold": float(t),
                "tpr_spu": tpr_spu(data, pred),
                "fpr_spu": fpr_spu(data, pred),
            }
        )
    record["threshold_grid"] = rows
    save_json(record, out / "eval.json")
    print(f"wrote {out / 'curve_spu.csv'} and {out / 'eval.json'}")
    return 0


def cmd_bound_check(args) -> int:
    config = _load_config(args.config)
    seed = _resolve_seed(args, config)
    out = _resolve_out(args, config)
    data = build_dataset(config_field(config, "dataset", dict, required=True), seed)
    scores = _scores_for(config, data)
    record = bound_report(data, scores)
    save_json(record, out / "bound.json")
    status = "ok" if record["satisfied"] else "VIOLATED"
    print(
        f"auc_spu={record['auc_spu']:.6f} <= bound={record['bound']:.6f} "
        f"(margin {record['margin']:+.6f}) [{status}]"
    )
    return 0 if record["satisfied"] else 1


def cmd_fit_prior(args) -> int:
    config = _load_config(args.config)
    out = _resolve_out(args, config)
    records = records_from_csv(config_field(config, "records", str, required=True))
    prior = fit_prior(
        records,
        grid_size=config_field(config, "grid_size", int, default=101),
        lam=config_field(config, "lambda", float, default=1e-3),
        step_size=config_field(config, "step_size", float, default=0.5),
        max_iters=config_field(config, "max_iters", int, default=500),
        tol=config_field(config, "tol", float, default=1e-9),
    )
    prior_to_json(prior, out / "prior.json")
    loglik = mean_log_likelihood(records, prior)
    print(
        f"wrote {out / 'prior.json'} ({len(records)} records, "
        f"{len(prior.objective_trace)} objective values, "
        f"mean log-likelihood {loglik:.6f})"
    )
    return 0


def cmd_frontier(args) -> int:
    config = _load_config(args.config)
    out = _resolve_out(args, config)
    problem_cfg = config_field(config, "problem", (str, dict), required=True)
    if isinstance(problem_cfg, str):
        if not Path(problem_cfg).exists():
            raise FileNotFoundError(f"no such problem file: {problem_cfg}")
        problem = problem_from_json(problem_cfg)
    else:
        problem = DiscreteProblem.from_dict(problem_cfg)

    record = {"n_cells": problem.n_cells, "class_prior": problem.class_prior}
    for kind in config_field(config, "kinds", list, default=["spu", "real"]):
        record[kind] = exhaustive_frontier(problem, kind).to_dict()
    verify = config_field(config, "verify", dict, default={})
    if verify.get("mela"):
        record["mela_optimality"] = verify_mela_optimality(problem).to_dict()
    if "noisy" in verify:
        noisy = verify["noisy"]
        record["noisy_gap"] = verify_noisy_gap(
            problem,
            epsilon=float(noisy["epsilon"]),
            c_h=float(noisy.get("c_h", 1.0)),
            m_const=float(noisy["m"]),
        ).to_dict()
    save_json(record, out / "frontier.json")
    print(f"wrote {out / 'frontier.json'}")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "generate": cmd_generate,
    "experiment": cmd_experiment,
    "eval": cmd_eval,
    "bound-check": cmd_bound_check,
    "fit-prior": cmd_fit_prior,
    "frontier": cmd_frontier,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softpu",
        description="Soft-label PU learning toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--out", default=None, help="output directory override")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
