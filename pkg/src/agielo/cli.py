"""Command-line entry point: ``agielo {rate,analyze,simulate,predict}``.

Exit codes: 0 success, 1 usage or configuration error, 2 data/format error,
3 numeric/domain error. Failures print one ``error:`` line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

from . import analysis
from .engine import (
    ConfigError,
    load_config,
    load_run,
    load_score_matrix,
    parse_checkpoints,
    ratings_from_run,
    run_from_dict,
    run_ratings,
)
from .exceptions import ArgumentError, DomainError, FormatError
from .scoring import get_scoring
from .synthetic import OutcomeMode, PopulationSpec, recovery_report, simulate_matrix, write_truth

log = logging.getLogger("agielo")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DOMAIN = 0, 1, 2, 3


class UsageError(ArgumentError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _build_parser() -> argparse.ArgumentParser:
    shared = _Parser(add_help=False)
    shared.add_argument("--seed", type=int)
    shared.add_argument("--variant", choices=["standard", "unscaled"])
    shared.add_argument("--scoring", help="scoring registry id, e.g. identity or affine:0.01:0")
    shared.add_argument("--bin-width", type=float, default=analysis.DEFAULT_BIN_WIDTH)
    shared.add_argument("--checkpoints", help="comma-separated match percentages")

    parser = _Parser(prog="agielo", description="Joint difficulty/competency ratings for benchmark results.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("rate", parents=[shared], help="rate agents and test cases from a score matrix CSV")
    p.add_argument("input", help="score matrix CSV (case_id,<agent>,...)")
    p.add_argument("-c", "--config", help="key=value run configuration file")
    p.add_argument("-o", "--output", required=True, help="run JSON to write")
    p.add_argument("--passes", type=int)

    p = sub.add_parser("analyze", parents=[shared], help="gap, reliability and distribution reports")
    p.add_argument("run", help="run JSON written by 'rate'")
    p.add_argument("-o", "--output-dir", required=True)
    p.add_argument("--thresholds", type=_float_list, default=analysis.DEFAULT_THRESHOLDS,
                   help="oracle confidences, default 0.5,0.9,0.99")
    p.add_argument("--matrix", help="score matrix CSV for the reliability report (default: run's source)")

    p = sub.add_parser("simulate", parents=[shared], help="simulate a population with known ratings")
    p.add_argument("--agents", type=int, default=20)
    p.add_argument("--cases", type=int, default=5000)
    p.add_argument("--mode", choices=[m.value for m in OutcomeMode], default="binary")
    p.add_argument("--prior-mu", type=float, default=1500.0)
    p.add_argument("--prior-sigma", type=float, default=350.0)
    p.add_argument("-o", "--output-dir", required=True)
    p.add_argument("--recover", action="store_true", help="also rate the matrix and report recovery")

    p = sub.add_parser("predict", parents=[shared], help="expected metric of an agent on a case")
    p.add_argument("run", help="run JSON written by 'rate'")
    p.add_argument("--agent", required=True)
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--case")
    target.add_argument("--rating", type=float)
    return parser


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _config_from_args(args, config_path=None):
    checkpoints = parse_checkpoints(args.checkpoints) if args.checkpoints else None
    return load_config(config_path, seed=args.seed, variant=args.variant, scoring=args.scoring,
                       checkpoints=checkpoints, passes=getattr(args, "passes", None))


def _relative_source(matrix_path, run_path) -> str:
    """Matrix location as recorded in run metadata: relative to the run JSON."""
    return Path(os.path.relpath(Path(matrix_path).resolve(), Path(run_path).resolve().parent)).as_posix()


def cmd_rate(args) -> int:
    if args.config is not None and not os.path.isfile(args.config):
        raise FileNotFoundError(args.config)
    config = _config_from_args(args, args.config)
    matrix = load_score_matrix(args.input, config.scoring or "identity")
    result = run_ratings(matrix, config, source=_relative_source(args.input, args.output))
    _write_text(Path(args.output), result.to_json())
    print(f"agents={matrix.n_agents} cases={matrix.n_cases} matches={result.n_matches} seed={config.seed}")
    return EXIT_OK


def _percentile_csv(curve: analysis.PercentileCurve) -> str:
    lines = ["rating,cumulative_fraction"]
    lines += [f"{r:.6f},{f:.6f}" for r, f in curve.points()]
    return "\n".join(lines) + "\n"


def _histogram_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin_lo", "bin_hi", "case_count", "agent_ids_in_bin"])
    for r in rows:
        w.writerow([f"{r['bin_lo']:.6f}", f"{r['bin_hi']:.6f}", r["case_count"], ";".join(r["agent_ids_in_bin"])])
    return buf.getvalue()


def cmd_analyze(args) -> int:
    for s in args.thresholds:
        if not 0.0 < s < 1.0:
            raise DomainError(f"threshold must lie in (0, 1), got {s!r}")
    if args.bin_width <= 0:
        raise DomainError(f"bin width must be > 0, got {args.bin_width!r}")
    data = load_run(args.run)
    meta = data.get("metadata") or {}
    fn = get_scoring(args.scoring or meta.get("scoring") or "identity")
    agents, cases = ratings_from_run(data)
    gaps = analysis.gap_report_from_ratings(agents, cases, args.thresholds, fn)

    reliability = None
    matrix_path = args.matrix
    if matrix_path is None and meta.get("source"):
        matrix_path = str(Path(args.run).resolve().parent / meta["source"])
    if matrix_path and os.path.isfile(matrix_path):
        matrix = load_score_matrix(matrix_path, fn.id)
        if set(matrix.agent_ids) != set(agents) or set(matrix.case_ids) != set(cases):
            raise FormatError(f"matrix {matrix_path} does not match the players in {args.run}")
        if matrix.n_agents >= 2 and matrix.n_cases >= 2:
            source = run_from_dict(data, matrix) if "seed" in meta else (agents, cases)
            reliability = analysis.consistency_report(matrix, source, args.bin_width).to_dict()
    elif args.matrix:
        raise FileNotFoundError(args.matrix)

    out = Path(args.output_dir)
    report = {"gap_report": gaps.to_dict(), "reliability": reliability,
              "metric": fn.metric_name, "scoring": fn.id}
    _write_text(out / "report.json", _dump(report))
    _write_text(out / "percentile_curve.csv", _percentile_csv(analysis.percentile_curve(cases.values())))
    _write_text(out / "histogram.csv", _histogram_csv(analysis.histogram(cases, agents, args.bin_width)))
    g = gaps
    print(f"r_t_max={g.r_t_max:.1f} r_a_max={g.r_a_max:.1f} expected_metric={g.expected_metric:.3f} "
          + " ".join(f"gap@{100 * s:g}%={v:.1f}" for s, v in sorted(g.gaps.items())))
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = PopulationSpec(args.agents, args.cases, args.prior_mu, args.prior_sigma, OutcomeMode(args.mode),
                          args.seed if args.seed is not None else 0)
    pop, matrix = simulate_matrix(spec)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    matrix_path = out / "matrix.csv"
    matrix.to_csv(matrix_path)
    write_truth(pop, out / "truth.json")
    summary = f"agents={spec.n_agents} cases={spec.n_cases} mode={spec.outcome_mode.value} seed={spec.seed}"
    if args.recover:
        config = _config_from_args(args)
        result = run_ratings(load_score_matrix(matrix_path), config,
                             source=_relative_source(matrix_path, out / "run.json"))
        _write_text(out / "run.json", result.to_json())
        rec = recovery_report(pop.truth(), result.players)
        _write_text(out / "recovery.json", _dump(rec.to_dict()))
        summary += f" rho_agents={rec.rho_agents:.6f} rho_cases={rec.rho_cases:.6f}"
    print(summary)
    return EXIT_OK


class UnknownIdError(FormatError):
    pass


def cmd_predict(args) -> int:
    data = load_run(args.run)
    agents, cases = ratings_from_run(data)
    fn = get_scoring(args.scoring or (data.get("metadata") or {}).get("scoring") or "identity")
    if args.agent not in agents:
        raise UnknownIdError(f"unknown agent id {args.agent!r}")
    if args.case is not None:
        if args.case not in cases:
            raise UnknownIdError(f"unknown case id {args.case!r}")
        r_t = cases[args.case]
    else:
        r_t = args.rating
    e = analysis.expected_score(agents[args.agent], r_t)
    print(f"predicted_metric={fn.inverse(e):.6f} expected_score={e:.6f}")
    return EXIT_OK


_COMMANDS = {"rate": cmd_rate, "analyze": cmd_analyze, "simulate": cmd_simulate, "predict": cmd_predict}


def _fail(code: int, kind: str, message: str) -> int:
    text = " ".join(str(message).split())
    print(f"error: code={code} kind={kind} message={text}", file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("AGIELO_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    try:
        args = _build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        return _fail(EXIT_USAGE, "usage", exc)
    except (FormatError, OSError, UnicodeDecodeError) as exc:
        return _fail(EXIT_DATA, "data", exc)
    except DomainError as exc:
        return _fail(EXIT_DOMAIN, "domain", exc)
    except ArgumentError as exc:
        return _fail(EXIT_USAGE, "usage", exc)


if __name__ == "__main__":
    sys.exit(main())
