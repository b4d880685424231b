"""Command line entry point.

    singular-poisson simulate   --config model.cfg --seed 7 -n 64 --out dir/
    singular-poisson estimate   batch.txt --config model.cfg [--estimator mle]
    singular-poisson limit      --config model.cfg --seed 7 -M 1000 --out dir/
    singular-poisson experiment --config rate.cfg --seed 1 --out dir/

Exit status: 0 on success, 1 on invalid input, 2 on any other failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import __version__
from .config import parse_kv, section
from .errors import ConfigError, ValidationError
from .estimators import EstimatorConfig, bayes_estimate, mle_estimate
from .experiments import ExperimentConfig, report_document, run_experiment
from .limit import LimitConfig, draw_zeta_xi, draws_to_csv
from .model import fingerprint, model_from_mapping
from .sampler import batch_from_text, batch_to_text, sample_batch


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _read_config(path):
    if path is None:
        raise ConfigError("--config is required")
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_kv(p.read_text())


def _model_mapping(mapping):
    sub = section(mapping, "model")
    return sub if sub else mapping


def _emit(text, out, name):
    if out is None:
        sys.stdout.write(text)
        return
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    (d / name).write_text(text)
    print(d / name)


def _json(doc):
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _rows_csv(rows):
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def cmd_simulate(args):
    mapping = _read_config(args.config)
    model = model_from_mapping(_model_mapping(mapping))
    n = args.n if args.n is not None else int(mapping.get("experiment.n", mapping.get("n", "0")))
    batch = sample_batch(model, n, args.seed)
    _emit(batch_to_text(batch), args.out, "batch.txt")


def cmd_estimate(args):
    mapping = _read_config(args.config)
    model = model_from_mapping(_model_mapping(mapping))
    est_cfg = EstimatorConfig.from_mapping(section(mapping, "estimator"))
    path = Path(args.batch)
    if not path.is_file():
        raise ConfigError(f"batch file not found: {args.batch}")
    batch = batch_from_text(path.read_text(), model)
    if args.estimator == "mle":
        res = mle_estimate(batch, model, est_cfg)
    else:
        res = bayes_estimate(batch, model, config=est_cfg)
    doc = {
        "estimate": res.estimate,
        "estimator": res.estimator_kind,
        "diagnostics": res.diagnostics,
        "n": batch.n,
        "model": fingerprint(model),
        "batch_seed": batch.seed,
        "version": __version__,
    }
    if args.format == "csv":
        _emit(f"estimator,estimate\n{res.estimator_kind},{res.estimate!r}\n", args.out, "estimate.csv")
    else:
        _emit(_json(doc), args.out, "estimate.json")


def cmd_limit(args):
    mapping = _read_config(args.config)
    m = _model_mapping(mapping)
    try:
        a, b, p = float(m["a"]), float(m["b"]), float(m["p"])
    except KeyError as exc:
        raise ConfigError(f"missing model key {exc}") from exc
    cfg = LimitConfig.resolve(section(mapping, "limit"), a, b, p)
    M = args.M if args.M is not None else int(mapping.get("experiment.limit_replicates", "1000"))
    draws = draw_zeta_xi(a, b, p, cfg, M, args.seed, with_xi=p > 0)
    _emit(draws_to_csv(draws), args.out, "limit_draws.csv")


def cmd_experiment(args):
    cfg = ExperimentConfig.from_mapping(_read_config(args.config), seed=args.seed)
    report = run_experiment(cfg, threads=args.threads)
    doc = report_document(cfg, report)
    table = _rows_csv(report.rows)
    if args.out is None:
        sys.stdout.write(table if args.format == "csv" else _json(doc))
        return
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    (d / "report.json").write_text(_json(doc))
    (d / "table.csv").write_text(table)
    print(d / "report.json")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--seed", type=int, default=None, help="master seed")
    common.add_argument("--out", help="output directory (default: standard output)")
    common.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    parser = _Parser(prog="singular-poisson", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="draw a batch of event paths")
    p.add_argument("-n", type=int, help="number of paths")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", parents=[common], help="estimate theta from a batch file")
    p.add_argument("batch", help="batch file written by 'simulate'")
    p.add_argument("--estimator", choices=("bayes", "mle"), default="bayes")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("limit", parents=[common], help="draw zeta and xi from the limit process")
    p.add_argument("-M", type=int, help="number of draws")
    p.set_defaults(func=cmd_limit)

    p = sub.add_parser("experiment", parents=[common], help="run an experiment from a config file")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if args.seed is None and args.command != "experiment":
            args.seed = 0
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
        args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
