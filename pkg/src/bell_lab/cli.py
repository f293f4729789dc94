"""bell-lab command line.

Exit codes: 0 success, 1 usage error, 2 data error, 3 model rejected
(only with ``analyze --fail-on-reject``).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys

from . import __version__
from .analysis import CANONICAL_TESTS, Hypothesis, build_report, chsh_section, empty_scan, scan_section
from .fitting import PARAMETERS, FitFamily, fit_model, fitted_model
from .inequality import ChshAngles, CoefficientVector
from .io import DataError, emit_curve, emit_report, load_dataset, read_settings_csv, write_counts
from .model import AnalyzerSettings, StateModel
from .simulator import SEED_MAX, ExperimentPlan, NoiseConfig, pair_truth, run_experiment

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_REJECTED = 0, 1, 2, 3

log = logging.getLogger("bell_lab")

BUILTIN_SETTINGS = {
    # the four CHSH pairs: a=0, a'=45, b=22.5, b'=67.5
    "chsh": [(0.0, 22.5), (0.0, 67.5), (45.0, 22.5), (45.0, 67.5)],
    "grid16": [(a, b) for a in (0.0, 22.5, 45.0, 67.5) for b in (0.0, 22.5, 45.0, 67.5)],
    "sweep16": [(0.0, 11.25 * k) for k in range(16)],
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str, n: int, what: str) -> list[float]:
    try:
        values = [float(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"{what} must be {n} comma-separated numbers, got {text!r}") from None
    if len(values) != n or not all(math.isfinite(v) for v in values):
        raise UsageError(f"{what} must be {n} comma-separated finite numbers, got {text!r}")
    return values


def _add_model_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--model", choices=("max", "nonmax", "lhv"), default="max")
    g.add_argument("--theta", type=float, default=None, help="entanglement angle in radians (nonmax)")
    g.add_argument("--visibility", type=float, default=1.0)
    g.add_argument("--alpha-offset-deg", type=float, default=0.0)
    g.add_argument("--beta-offset-deg", type=float, default=0.0)


def _model(args) -> StateModel:
    if args.model == "lhv":
        return StateModel.lhv()
    if args.model == "nonmax":
        if args.theta is None:
            raise UsageError("--model nonmax requires --theta")
        return StateModel.nonmax_entangled(args.theta, args.visibility)
    return StateModel.max_entangled(args.visibility)


def _hypothesis(args) -> Hypothesis:
    return Hypothesis(_model(args), math.radians(args.alpha_offset_deg), math.radians(args.beta_offset_deg))


def _tests(source: str) -> tuple[CoefficientVector, ...]:
    if source == "builtin":
        return CANONICAL_TESTS
    try:
        with open(source, encoding="utf-8") as fh:
            raw = json.load(fh)
        return tuple(CoefficientVector.from_sequence(c) for c in raw)
    except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        raise DataError(f"cannot read test vectors from {source}: {exc}") from exc


def _chsh_angles(text: str | None) -> ChshAngles:
    if text is None:
        return ChshAngles.standard()
    return ChshAngles.from_degrees(*_floats(text, 4, "--angles"))


def _settings(source: str) -> list[AnalyzerSettings]:
    if source.startswith("builtin:"):
        name = source.split(":", 1)[1]
        if name not in BUILTIN_SETTINGS:
            raise UsageError(f"unknown builtin setting list {name!r}; choose from {sorted(BUILTIN_SETTINGS)}")
        return [AnalyzerSettings.from_degrees(a, b) for a, b in BUILTIN_SETTINGS[name]]
    return read_settings_csv(source)


def cmd_simulate(args) -> int:
    if not (0 <= args.seed <= SEED_MAX):
        raise UsageError("--seed must be a 64-bit unsigned integer")
    if args.shots < 1:
        raise UsageError("--shots must be positive")
    noise = NoiseConfig(
        alpha_offset=math.radians(args.alpha_offset_deg),
        beta_offset=math.radians(args.beta_offset_deg),
        anomaly_eps1=args.anomaly_eps1,
        anomaly_eps2=args.anomaly_eps2,
    )
    plan = ExperimentPlan(_settings(args.settings), args.shots, _model(args), noise, args.seed)
    records = run_experiment(plan)
    write_counts(records, args.output)
    if args.meta:
        truths = [pair_truth(plan, s) for s in plan.setting_pairs]
        meta = {
            "tool": "bell-lab",
            "version": __version__,
            "seed": args.seed,
            "shots_per_pair": args.shots,
            "model": Hypothesis(plan.model).describe(),
            "noise": {
                "alpha_offset_deg": args.alpha_offset_deg,
                "beta_offset_deg": args.beta_offset_deg,
                "anomaly_eps1": args.anomaly_eps1,
                "anomaly_eps2": args.anomaly_eps2,
            },
            "applied_anomaly": [
                {"alpha_deg": t.settings.alpha_deg, "beta_deg": t.settings.beta_deg,
                 "eps1": t.applied_eps1, "eps2": t.applied_eps2}
                for t in truths
            ],
        }
        emit_report(meta, args.meta)
    return EXIT_OK


def cmd_analyze(args) -> int:
    dataset = load_dataset(args.counts, strict=args.strict)
    hypothesis = _hypothesis(args)
    report = build_report(
        dataset.records,
        hypothesis,
        tests=_tests(args.tests),
        z_threshold=args.z_threshold,
        variance_from=args.variance,
        chsh_angles=_chsh_angles(args.chsh_angles),
        source=dataset.metadata.get("source"),
    )
    emit_report(report, args.output)
    if args.fail_on_reject and report["verdict"]["model_rejected"]:
        log.warning("model rejected: %d of %d tests at |z| >= %g",
                    report["verdict"]["n_rejected"], report["verdict"]["n_tests"], args.z_threshold)
        return EXIT_REJECTED
    return EXIT_OK


def cmd_scan(args) -> int:
    if args.random_c < 0:
        raise UsageError("--random-c must be non-negative")
    dataset = load_dataset(args.counts, strict=args.strict)
    hypothesis = _hypothesis(args)
    scan = scan_section(dataset.records, hypothesis, args.random_c, args.seed, args.include_optimal, args.variance)
    report = build_report(dataset.records, hypothesis, z_threshold=args.z_threshold, variance_from=args.variance,
                          scan=scan, source=dataset.metadata.get("source"))
    emit_report(report, args.output)
    return EXIT_OK


def cmd_chsh(args) -> int:
    angles = _chsh_angles(args.angles)
    records = None
    hypothesis = None
    if args.counts is not None:
        records = load_dataset(args.counts, strict=args.strict).records
    else:
        hypothesis = _hypothesis(args)
    section = chsh_section(records, hypothesis, angles)
    if section["S"] is None:
        raise DataError("dataset does not contain all four CHSH setting pairs " + str(section["angles"]))
    emit_report(section, args.output)
    return EXIT_OK


def cmd_fit(args) -> int:
    free: list[str] = []
    for name in (x.strip() for x in args.free.split(",") if x.strip()):
        if name == "offsets":
            free += ["alpha_offset", "beta_offset"]
        elif name in PARAMETERS:
            free.append(name)
        else:
            raise UsageError(f"unknown free parameter {name!r}; choose from theta, visibility, offsets")
    fixed = {
        "theta": args.theta if args.theta is not None else math.pi / 4,
        "visibility": args.visibility,
        "alpha_offset": math.radians(args.alpha_offset_deg),
        "beta_offset": math.radians(args.beta_offset_deg),
    }
    try:
        family = FitFamily(tuple(free), fixed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    dataset = load_dataset(args.counts, strict=args.strict)
    fit = fit_model(dataset.records, family)
    if fit.uninformative:
        log.warning("fitted visibility %.3g < 0.05: uninformative fit", fit.parameters["visibility"])
    p = fit.parameters
    hypothesis = Hypothesis(fitted_model(p), p["alpha_offset"], p["beta_offset"])
    report = build_report(dataset.records, hypothesis, z_threshold=args.z_threshold, fit=fit,
                          scan=empty_scan(), source=dataset.metadata.get("source"))
    emit_report(report, args.output)
    return EXIT_OK


def cmd_curve(args) -> int:
    c = CoefficientVector.from_sequence(_floats(args.c, 4, "--c"))
    if not args.step_deg > 0:
        raise UsageError("--step-deg must be positive")
    emit_curve(_model(args), c, math.radians(args.step_deg), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bell-lab", description="Linear-combination tests for EPR-Bohm coincidence data")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate a counts CSV")
    _add_model_args(p)
    p.add_argument("--anomaly-eps1", type=float, default=0.0, help="transfer -- -> ++")
    p.add_argument("--anomaly-eps2", type=float, default=0.0, help="transfer -+ -> +-")
    p.add_argument("--settings", default="builtin:chsh", help="CSV with alpha_deg,beta_deg or builtin:chsh|grid16|sweep16")
    p.add_argument("--shots", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--meta", default=None, help="also write generation metadata JSON here")
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_simulate)

    def data_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("counts", help="counts CSV, or - for stdin")
        p.add_argument("--strict", action="store_true", help="reject duplicate setting pairs instead of merging")
        p.add_argument("--variance", choices=("model", "empirical"), default="model")
        p.add_argument("--z-threshold", type=float, default=5.0)
        p.add_argument("-o", "--output", default="-")

    p = sub.add_parser("analyze", help="run the E_c test family against a model")
    data_args(p)
    _add_model_args(p)
    p.add_argument("--tests", default="builtin", help="JSON list of 4-vectors, or builtin")
    p.add_argument("--chsh-angles", default=None, help="a,a',b,b' in degrees")
    p.add_argument("--fail-on-reject", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("scan", help="search random and optimal coefficient vectors")
    data_args(p)
    _add_model_args(p)
    p.add_argument("--random-c", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--include-optimal", action="store_true")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("chsh", help="CHSH statistic from data or a model")
    p.add_argument("counts", nargs="?", default=None)
    p.add_argument("--strict", action="store_true")
    _add_model_args(p)
    p.add_argument("--angles", default=None, help="a,a',b,b' in degrees (default 0,45,22.5,67.5)")
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_chsh)

    p = sub.add_parser("fit", help="minimum chi-square fit of theta, visibility, offsets")
    data_args(p)
    _add_model_args(p)
    p.add_argument("--free", default="theta,visibility", help="comma list from theta,visibility,offsets")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("curve", help="write E_c versus analyzer separation")
    _add_model_args(p)
    p.add_argument("--c", default="1,-1,-1,1")
    p.add_argument("--step-deg", type=float, default=1.0)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_curve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        log.error("usage error: %s", exc)
        return EXIT_USAGE
    except DataError as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except ValueError as exc:
        # model/plan construction errors from user-supplied numbers
        log.error("usage error: %s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
