"""Assemble per-pair E_c tests, CHSH, chi-square, scans and fits into a report."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import __version__
from .fitting import FitResult
from .inequality import (
    CLASSICAL_BOUND,
    CORRELATION,
    TSIRELSON,
    ChshAngles,
    CoefficientVector,
    chsh_statistic,
    correlation,
    optimal_coefficients,
)
from .model import (
    AnalyzerSettings,
    ModelKind,
    ProbabilityQuad,
    StateModel,
    lhv_correlation,
    lhv_probabilities,
    predict_probabilities,
)
from .simulator import CountsRecord, max_workers, stream
from .statistics import (
    ImpossibleOutcomeError,
    TestResult,
    chi_square_statistic,
    empirical_quad,
    evaluate_test,
    multinomial_covariance,
)

CANONICAL_TESTS = (
    CORRELATION,
    CoefficientVector(1.0, 1.0, 1.0, 1.0),
    CoefficientVector(1.0, 0.0, 0.0, -1.0),
    CoefficientVector(0.0, 1.0, -1.0, 0.0),
    CoefficientVector(1.0, 1.0, -1.0, -1.0),
    CoefficientVector(1.0, -1.0, 1.0, -1.0),
)

# angle match tolerance when locating CHSH pairs in a dataset, degrees
_ANGLE_MATCH_DEG = 1e-6


@dataclass(frozen=True)
class Hypothesis:
    """A model plus the analyzer offsets it assumes."""

    model: StateModel
    alpha_offset: float = 0.0
    beta_offset: float = 0.0

    def quad(self, settings: AnalyzerSettings) -> ProbabilityQuad:
        effective = settings.shifted(self.alpha_offset, self.beta_offset)
        if self.model.kind is ModelKind.LHV:
            return lhv_probabilities(effective)
        return predict_probabilities(self.model, effective)

    def correlation(self, alpha: float, beta: float) -> float:
        settings = AnalyzerSettings(alpha, beta)
        if self.model.kind is ModelKind.LHV and self.alpha_offset == 0.0 and self.beta_offset == 0.0:
            return lhv_correlation(settings)
        return correlation(self.quad(settings))

    def describe(self) -> dict:
        return {
            "kind": self.model.kind.value,
            "theta": self.model.theta if self.model.kind is ModelKind.NONMAX_ENTANGLED else None,
            "visibility": self.model.visibility if self.model.kind is not ModelKind.LHV else None,
            "alpha_offset_deg": math.degrees(self.alpha_offset),
            "beta_offset_deg": math.degrees(self.beta_offset),
        }


def result_entry(result: TestResult, threshold: float) -> dict:
    return {
        "c": list(result.c.as_tuple()),
        "observed": result.observed,
        "predicted": result.predicted,
        "sigma": result.sigma,
        "z": result.z,
        "compensation_ratio": result.compensation_ratio,
        "degenerate": result.degenerate,
        "rejected": result.rejects(threshold),
    }


def _map(fn, items: Sequence, workers: int | None):
    workers = max_workers() if workers is None else max(1, workers)
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def evaluate_pairs(
    records: Sequence[CountsRecord],
    hypothesis: Hypothesis,
    tests: Sequence[CoefficientVector],
    variance_from: str = "model",
    workers: int | None = None,
) -> list[list[TestResult]]:
    def one(rec: CountsRecord) -> list[TestResult]:
        emp = empirical_quad(rec)
        quad = hypothesis.quad(rec.settings)
        return [evaluate_test(c, emp, quad, variance_from) for c in tests]

    return _map(one, list(records), workers)


def _find_pair(records: Sequence[CountsRecord], alpha: float, beta: float) -> CountsRecord | None:
    for rec in records:
        if (abs(rec.settings.alpha_deg - math.degrees(alpha)) < _ANGLE_MATCH_DEG
                and abs(rec.settings.beta_deg - math.degrees(beta)) < _ANGLE_MATCH_DEG):
            return rec
    return None


def chsh_section(records: Sequence[CountsRecord] | None, hypothesis: Hypothesis | None, angles: ChshAngles) -> dict:
    """CHSH from data when all four pairs are present, else from the model."""
    section: dict = {
        "angles": [math.degrees(x) for x in (angles.a, angles.a_prime, angles.b, angles.b_prime)],
        "source": None,
        "S": None,
        "S_model": None,
        "classical_bound": CLASSICAL_BOUND,
        "tsirelson": TSIRELSON,
        "violates_classical_bound": None,
    }
    if hypothesis is not None:
        section["S_model"] = chsh_statistic(hypothesis.correlation, angles)
    found = [_find_pair(records, a, b) for a, b in angles.pairs()] if records else [None]
    if all(rec is not None for rec in found):
        table = {(a, b): correlation(empirical_quad(rec).as_probability_quad())
                 for (a, b), rec in zip(angles.pairs(), found)}
        section["S"] = chsh_statistic(lambda a, b: table[(a, b)], angles)
        section["source"] = "data"
        section["violates_classical_bound"] = abs(section["S"]) > CLASSICAL_BOUND
    elif hypothesis is not None:
        section["S"] = section["S_model"]
        section["source"] = "model"
        section["violates_classical_bound"] = abs(section["S"]) > CLASSICAL_BOUND + 1e-12
    return section


def chi_square_section(records: Sequence[CountsRecord], hypothesis: Hypothesis, n_fitted: int = 0) -> dict:
    try:
        result = chi_square_statistic(((rec, hypothesis.quad(rec.settings)) for rec in records), n_fitted)
    except ImpossibleOutcomeError as exc:
        return {"chi2": None, "dof": 3 * len(records) - n_fitted, "p_value": 0.0,
                "degenerate": True, "error": str(exc)}
    except ValueError as exc:
        return {"chi2": None, "dof": None, "p_value": None, "degenerate": True, "error": str(exc)}
    return {"chi2": result.chi2, "dof": result.dof, "p_value": result.p_value}


def empty_scan() -> dict:
    return {"n_tested": 0, "max_abs_z": 0.0, "argmax_c": None, "argmax_pair": None}


def random_unit_coefficients(n: int, seed: int) -> list[CoefficientVector]:
    rng = stream(seed, 0)
    out = []
    while len(out) < n:
        v = rng.standard_normal(4)
        norm = float(np.linalg.norm(v))
        if norm > 1e-12:
            out.append(CoefficientVector.from_sequence(v / norm))
    return out


def scan_section(
    records: Sequence[CountsRecord],
    hypothesis: Hypothesis,
    n_random: int,
    seed: int,
    include_optimal: bool,
    variance_from: str = "model",
    workers: int | None = None,
) -> dict:
    """Max |z| over random unit c (shared across pairs) and per-pair optimal c.

    Optimal directions are chosen from the data they are tested on, so their
    z values are not calibrated as N(0, 1) under the model.
    """
    family = random_unit_coefficients(n_random, seed) if n_random > 0 else []
    best_z, best_c, best_pair = 0.0, None, None
    n_tested = len(family)
    per_pair = evaluate_pairs(records, hypothesis, family, variance_from, workers) if family else [[]] * len(records)
    for rec, results in zip(records, per_pair):
        candidates = list(results)
        if include_optimal:
            emp = empirical_quad(rec)
            quad = hypothesis.quad(rec.settings)
            delta = emp.as_array() - quad.as_array()
            opt = optimal_coefficients(delta, multinomial_covariance(quad, emp.n))
            candidates.append(evaluate_test(opt.c, emp, quad, variance_from))
            n_tested += 1
        for res in candidates:
            if not res.degenerate and abs(res.z) > best_z:
                best_z = abs(res.z)
                best_c = list(res.c.as_tuple())
                best_pair = [rec.settings.alpha_deg, rec.settings.beta_deg]
    return {"n_tested": n_tested, "max_abs_z": best_z, "argmax_c": best_c, "argmax_pair": best_pair}


def fit_section(fit: FitResult) -> dict:
    p = fit.parameters
    return {
        "parameters": {
            "theta": p["theta"],
            "visibility": p["visibility"],
            "alpha_offset_deg": math.degrees(p["alpha_offset"]),
            "beta_offset_deg": math.degrees(p["beta_offset"]),
        },
        "chi2": fit.chi2,
        "dof": fit.dof,
        "p_value": fit.p_value,
        "converged": fit.converged,
        "evaluations": fit.evaluations,
        "uninformative": fit.uninformative,
    }


def aggregate_section(tests: Sequence[CoefficientVector], per_pair: Sequence[Sequence[TestResult]], threshold: float) -> list[dict]:
    out = []
    for j, c in enumerate(tests):
        zs = [row[j].z for row in per_pair if not row[j].degenerate]
        out.append({
            "c": list(c.as_tuple()),
            "n_pairs": len(zs),
            "max_abs_z": max((abs(z) for z in zs), default=0.0),
            "sum_z2": math.fsum(z * z for z in zs),
            "n_rejected": sum(1 for z in zs if abs(z) >= threshold),
        })
    return out


def build_report(
    records: Sequence[CountsRecord],
    hypothesis: Hypothesis,
    tests: Sequence[CoefficientVector] = CANONICAL_TESTS,
    z_threshold: float = 5.0,
    variance_from: str = "model",
    chsh_angles: ChshAngles | None = None,
    fit: FitResult | None = None,
    scan: dict | None = None,
    source: str | None = None,
    workers: int | None = None,
) -> dict:
    """Full accept/reject report for one hypothesis against a dataset.

    A hypothesis is rejected when any non-degenerate test reaches
    ``|z| >= z_threshold``. Multiple testing is reported, not corrected.
    """
    records = list(records)
    per_pair_results = evaluate_pairs(records, hypothesis, tests, variance_from, workers)
    per_pair = [
        {
            "alpha_deg": rec.settings.alpha_deg,
            "beta_deg": rec.settings.beta_deg,
            "n": rec.total,
            "tests": [result_entry(r, z_threshold) for r in results],
        }
        for rec, results in zip(records, per_pair_results)
    ]
    n_fitted = 0 if fit is None else 3 * len(records) - fit.dof
    scan = scan if scan is not None else empty_scan()
    n_tests = sum(1 for row in per_pair_results for r in row if not r.degenerate)
    n_rejected = sum(1 for row in per_pair_results for r in row if r.rejects(z_threshold))
    max_abs_z = max((abs(r.z) for row in per_pair_results for r in row if not r.degenerate), default=0.0)
    scan_rejected = scan["max_abs_z"] >= z_threshold

    report = {
        "meta": {
            "tool": "bell-lab",
            "version": __version__,
            "source": source,
            "model": hypothesis.describe(),
            "n_pairs": len(records),
            "tests_per_pair": len(tests),
            "z_threshold": z_threshold,
            "variance": variance_from,
        },
        "per_pair": per_pair,
        "chsh": chsh_section(records, hypothesis, chsh_angles or ChshAngles.standard()),
        "chi_square": chi_square_section(records, hypothesis, n_fitted),
    }
    if fit is not None:
        report["fit"] = fit_section(fit)
    report["scan"] = scan
    report["aggregate"] = aggregate_section(tests, per_pair_results, z_threshold)
    report["verdict"] = {
        "n_tests": n_tests,
        "n_rejected": n_rejected,
        "max_abs_z": max_abs_z,
        "model_rejected": n_rejected > 0 or scan_rejected,
    }
    return report
