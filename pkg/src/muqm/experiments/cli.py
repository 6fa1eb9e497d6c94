"""Command-line front end.

Exit codes: 0 on success, 2 on configuration errors, 3 on numeric-domain
errors (including unsupported precision and collapse-contract violations).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import List, Optional

from ..collapse import CSV_HEADER
from ..dynamics import TRAJECTORY_CSV_HEADER
from ..errors import CollapseContractError, ConfigError, NumericDomainError, UnsupportedPrecisionError
from .config import ExperimentConfig, config_from_mapping, dumps_config, load_config
from . import runner

SUBCOMMANDS = {
    "analyze": "analyze",
    "collapse": "measurement_chain",
    "ensemble": "ensemble",
    "recollapse": "recollapse",
    "truncate": "truncate",
    "bounds": "bounds",
}

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _event_rows(records):
    for rec in records:
        for ev in rec.events:
            yield [str(rec.trajectory_id)] + ev.csv_row() + [rec.final_state_digest]


def _record_dict(rec) -> dict:
    return {
        "trajectory_id": rec.trajectory_id,
        "forced": rec.forced,
        "events": [e.to_dict() for e in rec.events],
        "final_state_digest": rec.final_state_digest,
    }


def render(cfg: ExperimentConfig):
    """Run ``cfg`` and return ``(main_output, summary_or_None)`` as text."""
    exp = cfg.experiment
    event_header = ("trajectory_id",) + CSV_HEADER + ("final_state_digest",)
    if exp == "analyze":
        report = runner.analyze(cfg)
        return (report.to_json() if cfg.format == "json" else report.to_text()), None
    if exp == "measurement_chain":
        rec = runner.run_collapse(cfg) if not cfg.state.lower().startswith("eq1") else runner.run_measurement_chain(cfg)
        if cfg.format == "json":
            return _json(_record_dict(rec)), None
        return _csv(event_header, _event_rows([rec])), None
    if exp == "ensemble":
        rep = runner.run_ensemble(cfg)
        summary = rep.summary()
        if cfg.format == "json":
            return _json({"summary": summary, "trajectories": [_record_dict(r) for r in rep.records]}), None
        lines = [f"{k}: {json.dumps(v) if isinstance(v, dict) else _fmt(v)}" for k, v in summary.items()]
        return _csv(event_header, _event_rows(rep.records)), "\n".join(lines) + "\n"
    if exp == "recollapse":
        runs = runner.run_recollapse(cfg)
        if cfg.format == "json":
            return _json([
                {"trajectory_id": i, "steps": [dict(zip(TRAJECTORY_CSV_HEADER, s.csv_row())) for s in steps]}
                for i, steps in runs
            ]), None
        rows = ([str(i)] + s.csv_row() for i, steps in runs for s in steps)
        return _csv(("trajectory_id",) + TRAJECTORY_CSV_HEADER, rows), None
    if exp == "truncate":
        out = runner.run_truncate(cfg)
    else:
        out = runner.run_bounds(cfg)
    if cfg.format == "json":
        return _json(out), None
    width = max(len(k) for k in out)
    return "".join(f"{k:<{width}}  {_fmt(v)}\n" for k, v in out.items()), None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="muqm", description="Finite-resolution quantum measurement simulator.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="experiment config file ([experiment] key = value)")
        p.add_argument("--state", help="preset (bell, ghz(N), w(N), eq1(c...), basis(0101), coherent(a)) or state file")
        p.add_argument("--mu", type=int)
        p.add_argument("--kappa", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--trajectories", type=int)
        p.add_argument("--steps", type=int)
        p.add_argument("--output", help="output path (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--unitary", help="recollapse step unitary: ghz-entangler or identity")
        p.add_argument("--total-bits", dest="total_bits", type=float)
        p.add_argument("--length", type=float)
        p.add_argument("--entropy", type=float)
        p.add_argument("--save-config", dest="save_config", help="write the resolved config here")
    return parser


_CLI_KEYS = ("state", "mu", "kappa", "seed", "trajectories", "steps", "output", "format",
             "unitary", "total_bits", "length", "entropy")


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    experiment = SUBCOMMANDS[args.command]
    values = {}
    if args.config:
        base = load_config(args.config)
        if base.experiment != experiment:
            raise ConfigError(f"config is for {base.experiment!r}, not {experiment!r}")
        values = {k: getattr(base, k) for k in _CLI_KEYS if getattr(base, k) is not None}
    values.update({k: getattr(args, k) for k in _CLI_KEYS if getattr(args, k) is not None})
    values["experiment"] = experiment
    return config_from_mapping(values)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.save_config:
            with open(args.save_config, "w", encoding="utf-8") as fh:
                fh.write(dumps_config(cfg))
        text, summary = render(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericDomainError, UnsupportedPrecisionError, CollapseContractError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        if summary:
            sys.stdout.write(summary)
    else:
        sys.stdout.write(text)
        if summary:
            sys.stderr.write(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
