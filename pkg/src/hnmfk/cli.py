"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import io as hio
from .classifier import (ClassifierParams, classical_predict, classify, classify_hnmf2,
                         hierarchy_records, hierarchy_stats)
from .evaluation import make_report
from .nmfk import diagnostics_csv, nmfk
from .preprocess import FeatureBlock, prepare
from .synth import SyntheticSpec, synth_generate

log = logging.getLogger("hnmfk")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
MODES = ("hnmfk", "hnmf2", "classical")


@dataclass
class RunConfig:
    t: float = 1.0
    k_min: int = 1
    k_max: int = 100
    perturbations: int = 20
    epsilon: float = 0.015
    max_iter: int = 500
    tol: float = 1e-8
    alpha: float = 0.05
    sil_threshold: float = 0.8
    max_depth: int = 50
    child_k_rule: str = "algorithm"
    seed: int = 0
    mode: str = "hnmfk"
    threads: int = 1

    @classmethod
    def resolve(cls, file_values: dict, cli_values: dict) -> "RunConfig":
        """Defaults, overridden by the config file, overridden by the command line."""
        cfg = cls()
        types = {f.name: f.type for f in fields(cls)}
        for source in (file_values, cli_values):
            for key, value in source.items():
                if value is None:
                    continue
                if key not in types:
                    raise hio.DataError(f"unknown configuration key {key!r}")
                cast = {"float": float, "int": int, "str": str}[types[key]]
                try:
                    setattr(cfg, key, cast(value))
                except ValueError:
                    raise hio.DataError(f"bad value for {key}: {value!r}") from None
        if cfg.mode not in MODES:
            raise hio.DataError(f"mode must be one of {', '.join(MODES)}")
        return cfg

    def classifier_params(self) -> ClassifierParams:
        return ClassifierParams(t=self.t, k_min_root=self.k_min, k_max_root=self.k_max,
                                n_perturbs=self.perturbations, epsilon=self.epsilon,
                                max_iter=self.max_iter, tol=self.tol,
                                sil_threshold=self.sil_threshold, alpha=self.alpha,
                                max_depth=self.max_depth, child_k_rule=self.child_k_rule,
                                seed=self.seed, n_jobs=self.threads)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_run_options(p):
    g = p.add_argument_group("run configuration (override --config)")
    g.add_argument("--config", type=Path, help="key = value configuration file")
    g.add_argument("--t", type=float, help="cluster uniformity threshold (default 1.0)")
    g.add_argument("--k-min", type=int, help="root k search start (default 1)")
    g.add_argument("--k-max", type=int, help="root k search end (default 100, clipped to data)")
    g.add_argument("--perturbations", type=int, help="ensemble size M (default 20)")
    g.add_argument("--epsilon", type=float, help="perturbation half-width (default 0.015)")
    g.add_argument("--max-iter", type=int, help="MU iterations (default 500)")
    g.add_argument("--tol", type=float, help="MU relative objective tolerance (default 1e-8)")
    g.add_argument("--alpha", type=float, help="rank-sum significance level (default 0.05)")
    g.add_argument("--sil-threshold", type=float, help="minimum silhouette (default 0.8)")
    g.add_argument("--max-depth", type=int, help="recursion depth guard (default 50)")
    g.add_argument("--child-k-rule", choices=("algorithm", "prose"))
    g.add_argument("--seed", type=int)
    g.add_argument("--mode", choices=MODES)
    g.add_argument("--threads", type=int, help="worker threads; results do not depend on it")


def _run_config(args) -> RunConfig:
    file_values = hio.read_config(args.config) if args.config else {}
    cli_values = {f.name: getattr(args, f.name, None) for f in fields(RunConfig)}
    return RunConfig.resolve(file_values, cli_values)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hnmfk", description="Hierarchical NMFk classification tools.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("preprocess", help="concatenate, clip and scale feature blocks")
    p.add_argument("blocks", nargs="+", type=Path,
                   help="block matrix files; NAME=PATH sets the block name (default: file stem)")
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--z-limit", type=float, default=3.0)
    p.add_argument("--provenance", type=Path, help="write block column ranges as JSON")

    p = sub.add_parser("synth", help="generate a planted-hierarchy data set")
    p.add_argument("spec", type=Path, help="key = value synthetic spec")
    p.add_argument("-o", "--output", type=Path, required=True,
                   help="output prefix: PREFIX.hnmf, PREFIX_labels.csv, PREFIX_truth.csv, PREFIX_known.csv")

    p = sub.add_parser("classify", help="hierarchical semi-supervised classification")
    p.add_argument("matrix", type=Path)
    p.add_argument("labels", type=Path, help="labels CSV, -1 for unknown")
    p.add_argument("-o", "--out-dir", type=Path, required=True)
    p.add_argument("--truth", type=Path, help="true labels CSV; enables report.json")
    _add_run_options(p)

    p = sub.add_parser("nmfk-diag", help="per-k NMFk diagnostics as CSV")
    p.add_argument("matrix", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True)
    _add_run_options(p)

    p = sub.add_parser("eval", help="score a predictions file")
    p.add_argument("truth", type=Path)
    p.add_argument("predictions", type=Path)
    p.add_argument("labels", type=Path, help="labels the classifier saw (-1 unknown)")
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--abstain-policy", choices=("exclude", "count-as-wrong"), default="exclude")
    return parser


def _parse_block_arg(arg: Path):
    text = str(arg)
    if "=" in text:
        name, path = text.split("=", 1)
        return name, Path(path)
    return arg.stem, arg


def cmd_preprocess(args) -> int:
    blocks = []
    for arg in args.blocks:
        name, path = _parse_block_arg(arg)
        blocks.append(FeatureBlock(name, hio.read_matrix(path)))
    X, provenance = prepare(blocks, z_limit=args.z_limit)
    hio.write_matrix(args.output, X)
    if args.provenance:
        spans = {k: [v.start, v.stop] for k, v in provenance.items()}
        args.provenance.write_text(json.dumps(spans, indent=2) + "\n")
    log.info("wrote %s (%d x %d)", args.output, *X.shape)
    return EXIT_OK


def _read_spec(path) -> SyntheticSpec:
    values = hio.read_config(path)
    spec = SyntheticSpec()
    types = {f.name: f.type for f in fields(SyntheticSpec)}
    for key, value in values.items():
        if key not in types:
            raise hio.DataError(f"{path}: unknown spec key {key!r}")
        try:
            if key == "samples_per_family":
                parts = [int(v) for v in value.split(",")]
                setattr(spec, key, parts[0] if len(parts) == 1 else parts)
            elif types[key] == "float":
                setattr(spec, key, float(value))
            else:
                setattr(spec, key, int(value))
        except ValueError:
            raise hio.DataError(f"{path}: bad value for {key}: {value!r}") from None
    return spec


def cmd_synth(args) -> int:
    spec = _read_spec(args.spec)
    try:
        data = synth_generate(spec)
    except ValueError as exc:
        raise hio.DataError(f"infeasible spec: {exc}") from None
    prefix = str(args.output)
    hio.write_matrix(prefix + ".hnmf", data.X)
    hio.write_labels(prefix + "_labels.csv", data.observed)
    hio.write_labels(prefix + "_truth.csv", data.labels)
    hio.write_mask(prefix + "_known.csv", data.known)
    return EXIT_OK


def cmd_classify(args) -> int:
    cfg = _run_config(args)
    X = hio.read_matrix(args.matrix)
    y = hio.read_labels(args.labels)
    if y.size != X.shape[0]:
        raise hio.DataError(f"{args.labels}: {y.size} labels for {X.shape[0]} samples")
    params = cfg.classifier_params()
    params.k_max_root = min(params.k_max_root, *X.shape)
    run = {"hnmfk": classify, "hnmf2": classify_hnmf2, "classical": classical_predict}[cfg.mode]
    pred, root = run(X, y, params)

    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    hio.write_predictions(out / "predictions.csv", pred)
    hio.write_hierarchy(out / "hierarchy.jsonl", hierarchy_records(root))
    if args.truth:
        truth = hio.read_labels(args.truth)
        if truth.size != y.size:
            raise hio.DataError(f"{args.truth}: {truth.size} labels for {y.size} samples")
        rep = make_report(truth, pred, y, hierarchy=hierarchy_stats(root))
        hio.write_report(out / "report.json", rep.to_dict())
    hio.write_report(out / "config.json", asdict(cfg))
    return EXIT_OK


def cmd_nmfk_diag(args) -> int:
    cfg = _run_config(args)
    X = hio.read_matrix(args.matrix)
    if cfg.k_max > min(X.shape):
        raise hio.DataError(f"k_max={cfg.k_max} exceeds min(n, m)={min(X.shape)}")
    res = nmfk(X, cfg.k_min, cfg.k_max, n_perturbs=cfg.perturbations,
               sil_threshold=cfg.sil_threshold, alpha=cfg.alpha, epsilon=cfg.epsilon,
               max_iter=cfg.max_iter, tol=cfg.tol, seed=cfg.seed, n_jobs=cfg.threads)
    Path(args.output).write_text(diagnostics_csv(res.per_k))
    log.info("k_opt = %d", res.k_opt)
    return EXIT_OK


def cmd_eval(args) -> int:
    truth = hio.read_labels(args.truth)
    pred = hio.read_predictions(args.predictions)
    seen = hio.read_labels(args.labels)
    if not truth.size == pred.size == seen.size:
        raise hio.DataError("truth, predictions and labels differ in length")
    rep = make_report(truth, pred, seen, abstain_policy=args.abstain_policy)
    hio.write_report(args.output, rep.to_dict())
    return EXIT_OK


COMMANDS = {
    "preprocess": cmd_preprocess,
    "synth": cmd_synth,
    "classify": cmd_classify,
    "nmfk-diag": cmd_nmfk_diag,
    "eval": cmd_eval,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"hnmfk: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (hio.DataError, ValueError, OSError) as exc:
        print(f"hnmfk: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
