"""Command-line interface.

Verbs: generate (write a synthetic dataset), run (full evaluation),
sweep-eta (learning-rate sweep), report (re-derive report files from a
saved records.csv). Every run-config leaf is overridable with a flag of
its dotted name (e.g. --fuser.eta 0.4); the documented short flags are
aliases for the common ones. Exit codes: 0 success, 1 validation error,
2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Dict, List

import yaml

from .core import ValidationError
from .harness import (RunConfig, apply_dotted_overrides, config_to_dict,
                      report_from_records, run, run_config_from_dict, sweep_eta)
from .scenarios import write_suite

_ALIASES = {
    "n": "n_samples",
    "eta": "fuser.eta",
    "gamma": "fuser.gamma",
    "lambda": "fuser.sharpness",
    "zeta": "rule_predictor.temperature",
    "reward-base": "rule_predictor.reward_base",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # bad usage is a validation error (exit code 1)
        raise ValidationError(message)


def _leaf_paths(tree: dict, prefix: str = "") -> List[str]:
    paths = []
    for key, value in tree.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            paths.extend(_leaf_paths(value, dotted + "."))
        else:
            paths.append(dotted)
    return paths


def _dest(path: str) -> str:
    return "cfg__" + path.replace(".", "__").replace("-", "_")


def _parse_value(text: str):
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return text


def _add_config_flags(parser: _Parser) -> Dict[str, str]:
    """Dotted flags for every config leaf plus the short aliases.

    Returns dest -> dotted path for recovering values after parsing.
    """
    parser.add_argument("--config", metavar="FILE",
                        help="YAML or JSON run-config file")
    dest_to_path: Dict[str, str] = {}
    for path in _leaf_paths(config_to_dict(RunConfig())):
        dest = _dest(path)
        parser.add_argument(f"--{path}", dest=dest, metavar="VALUE",
                            help=argparse.SUPPRESS)
        dest_to_path[dest] = path
    for flag, path in _ALIASES.items():
        dest = "alias__" + flag.replace("-", "_")
        parser.add_argument(f"--{flag}", dest=dest, metavar="VALUE",
                            help=f"alias for --{path}")
        dest_to_path[dest] = path
    return dest_to_path


def _deep_merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def _load_yaml(path: str) -> dict:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ValidationError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ValidationError(f"{path}: invalid YAML: {exc}") from exc
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: config must be a mapping")
    return doc


def _build_run_config(args, dest_to_path: Dict[str, str]) -> RunConfig:
    tree = config_to_dict(RunConfig())
    if args.config:
        tree = _deep_merge(tree, _load_yaml(args.config))
    if getattr(args, "suite", None) is not None:
        if tree.get("dataset"):
            raise ValidationError("--suite and a dataset path are mutually exclusive")
        if args.suite != "default":
            tree["suite"] = _deep_merge(tree["suite"], _load_yaml(args.suite))
        tree["dataset"] = None
    overrides = {}
    for dest, path in dest_to_path.items():
        raw = getattr(args, dest, None)
        if raw is not None:
            overrides[path] = _parse_value(raw)
    if getattr(args, "predictors", None):
        parts = [p.strip() for p in args.predictors.split(",")]
        if len(parts) != 2:
            raise ValidationError("--predictors expects '<learned>,<rule>'")
        overrides["predictors.learned"], overrides["predictors.rule"] = parts
    tree = apply_dotted_overrides(tree, overrides)
    return run_config_from_dict(tree)


def _add_input_flags(parser: _Parser):
    parser.add_argument("--suite", nargs="?", const="default", metavar="FILE",
                        help="use the synthetic suite (optionally configured "
                             "from FILE) instead of a dataset file")
    parser.add_argument("--predictors", metavar="LEARNED,RULE",
                        help="predictor names for the two slots "
                             "(kinematic, rule_hierarchy, external)")


def build_parser() -> _Parser:
    parser = _Parser(prog="trajfuse",
                     description="Trajectory-prediction fusion toolkit")
    sub = parser.add_subparsers(dest="verb", required=True)

    parser._subparser_map = {}

    p_gen = sub.add_parser("generate", cls=_Parser,
                           help="write a synthetic dataset file")
    p_gen.add_argument("--out", required=True, metavar="FILE")
    parser._subparser_map["generate"] = _add_config_flags(p_gen)
    _add_input_flags(p_gen)

    p_run = sub.add_parser("run", cls=_Parser, help="run the evaluation loop")
    p_run.add_argument("--out", metavar="DIR", help="report output directory")
    parser._subparser_map["run"] = _add_config_flags(p_run)
    _add_input_flags(p_run)

    p_sweep = sub.add_parser("sweep-eta", cls=_Parser,
                             help="run once per learning rate with shared seeds")
    p_sweep.add_argument("--etas", default="0.1,0.4,0.7,1.0", metavar="LIST",
                         help="comma-separated learning rates")
    p_sweep.add_argument("--out", metavar="DIR")
    parser._subparser_map["sweep-eta"] = _add_config_flags(p_sweep)
    _add_input_flags(p_sweep)

    p_rep = sub.add_parser("report", cls=_Parser,
                           help="re-derive report files from records.csv")
    p_rep.add_argument("--records", required=True, metavar="DIR")
    p_rep.add_argument("--out", metavar="DIR")
    return parser


def _dispatch(args, parser) -> int:
    if args.verb == "generate":
        config = _build_run_config(args, parser._subparser_map["generate"])
        write_suite(config.suite, args.out)
        print(f"wrote dataset to {args.out}")
        return 0
    if args.verb == "run":
        config = _build_run_config(args, parser._subparser_map["run"])
        result = run(config, out=args.out)
        for label, row in sorted(result.table.rows.items()):
            print(f"{label}: mean ADE {row.mean['ade']:.3f} m, "
                  f"MDB {row.mdb_pct:.2f}%")
        if result.failed_episodes:
            print(f"failed episodes: {len(result.failed_episodes)}")
        if args.out:
            print(f"report written to {args.out}")
        return 0
    if args.verb == "sweep-eta":
        config = _build_run_config(args, parser._subparser_map["sweep-eta"])
        try:
            etas = [float(e) for e in args.etas.split(",") if e.strip()]
        except ValueError as exc:
            raise ValidationError(f"--etas must be numbers: {exc}") from exc
        result = sweep_eta(config, etas, out=args.out)
        print(json.dumps(result.to_dict(), indent=1, sort_keys=True))
        return 0
    if args.verb == "report":
        report_from_records(args.records, out=args.out)
        print(f"report written to {args.out or args.records}")
        return 0
    raise ValidationError(f"unknown verb {args.verb!r}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _dispatch(args, parser)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 2
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 2
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
