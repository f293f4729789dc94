"""Empirical estimates, multinomial error model, E_c tests and chi-square."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .inequality import CoefficientVector, linear_combination
from .model import ProbabilityQuad
from .simulator import CountsRecord

DEGENERATE_SIGMA = 1e-12
ZERO_PROB = 1e-12


@dataclass(frozen=True)
class EmpiricalQuad:
    p_pp: float
    p_pm: float
    p_mp: float
    p_mm: float
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("an empirical quad needs n >= 1")
        if abs(math.fsum(self.as_tuple()) - 1.0) > 1e-12:
            raise ValueError("empirical frequencies must sum to 1")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.p_pp, self.p_pm, self.p_mp, self.p_mm)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=float)

    def as_probability_quad(self) -> ProbabilityQuad:
        return ProbabilityQuad(*self.as_tuple())


@dataclass(frozen=True)
class TestResult:
    c: CoefficientVector
    observed: float
    predicted: float
    sigma: float
    z: float
    compensation_ratio: float
    degenerate: bool

    def rejects(self, threshold: float) -> bool:
        return not self.degenerate and abs(self.z) >= threshold


class ImpossibleOutcomeError(ValueError):
    """Observed counts in an outcome the model gives probability zero."""


def empirical_quad(counts: CountsRecord) -> EmpiricalQuad:
    n = counts.total
    if n <= 0:
        raise ValueError(f"counts at {counts.settings} have zero total")
    return EmpiricalQuad(*(k / n for k in counts.counts()), n=n)


def multinomial_covariance(quad, n: int | None = None) -> np.ndarray:
    """Covariance of relative frequencies: (diag(p) - p p') / n.

    ``quad`` is an EmpiricalQuad (its own n) or any 4-probability object plus ``n``.
    """
    if n is None:
        n = quad.n
    if n < 1:
        raise ValueError("n must be >= 1")
    p = np.asarray(quad.as_tuple(), dtype=float)
    return (np.diag(p) - np.outer(p, p)) / n


def combination_variance(c: np.ndarray, p: np.ndarray, n: int) -> float:
    """c' Sigma c for the multinomial covariance, in centered form.

    sum p_i (c_i - cbar)^2 / n has no cancellation, so directions in the
    null space (c constant) come out exactly zero rather than ~1e-16 / n.
    """
    cbar = float(np.dot(p, c) / np.sum(p))
    return math.fsum(p * (c - cbar) ** 2) / n


def compensation_ratio(c, delta) -> float:
    """|sum c_i d_i| / sum |c_i d_i|; 0 = terms cancel fully, 1 = no cancellation."""
    c = np.asarray(c.as_tuple() if isinstance(c, CoefficientVector) else c, dtype=float)
    terms = c * np.asarray(delta, dtype=float)
    denom = math.fsum(np.abs(terms))
    if denom < 1e-15:
        return 0.0
    return min(abs(math.fsum(terms)) / denom, 1.0)


def evaluate_test(
    c: CoefficientVector,
    empirical: EmpiricalQuad,
    predicted_quad: ProbabilityQuad,
    variance_from: str = "model",
) -> TestResult:
    """z-test of E_c against a model prediction.

    By default the variance is the multinomial variance under the model's own
    quad (the null hypothesis); ``variance_from="empirical"`` uses the observed
    frequencies instead.
    """
    observed = linear_combination(c, empirical)
    predicted = linear_combination(c, predicted_quad)
    if variance_from == "model":
        p, n = predicted_quad.as_array(), empirical.n
    elif variance_from == "empirical":
        p, n = empirical.as_array(), empirical.n
    else:
        raise ValueError(f"variance_from must be 'model' or 'empirical', got {variance_from!r}")
    var = combination_variance(c.as_array(), p, n)
    sigma = math.sqrt(var)
    delta = empirical.as_array() - predicted_quad.as_array()
    rho = compensation_ratio(c, delta)
    if sigma < DEGENERATE_SIGMA:
        return TestResult(c, observed, predicted, sigma, 0.0, rho, True)
    return TestResult(c, observed, predicted, sigma, (observed - predicted) / sigma, rho, False)


# -- regularized incomplete gamma ------------------------------------------

_GAMMA_EPS = 1e-15
_GAMMA_MAX_ITER = 10_000


def _lower_series(a: float, x: float) -> float:
    # P(a, x) = x^a e^-x / Gamma(a+1) * sum x^k / ((a+1)...(a+k))
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_GAMMA_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _GAMMA_EPS:
            break
    else:
        raise ArithmeticError(f"incomplete gamma series did not converge for a={a}, x={x}")
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _upper_continued_fraction(a: float, x: float) -> float:
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _GAMMA_MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        step = d * c
        h *= step
        if abs(step - 1.0) < _GAMMA_EPS:
            break
    else:
        raise ArithmeticError(f"incomplete gamma continued fraction did not converge for a={a}, x={x}")
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gamma_q(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a)."""
    if a <= 0.0 or x < 0.0 or not (math.isfinite(a) and not math.isnan(x)):
        raise ValueError(f"gamma_q needs a > 0 and x >= 0, got a={a}, x={x}")
    if x == 0.0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        return 1.0 - _lower_series(a, x)
    return _upper_continued_fraction(a, x)


def chi2_sf(chi2: float, dof: int) -> float:
    return gamma_q(dof / 2.0, chi2 / 2.0)


# -- chi-square goodness of fit ---------------------------------------------


@dataclass(frozen=True)
class ChiSquare:
    chi2: float
    dof: int
    p_value: float


def chi_square_terms(counts: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Per-cell (n_obs - n p)^2 / (n p), shape (pairs, 4).

    Cells with p < 1e-12 and no counts contribute 0; cells with p < 1e-12 and
    counts are +inf.
    """
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    n = counts.sum(axis=1, keepdims=True)
    expected = n * probs
    zero = probs < ZERO_PROB
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = (counts - expected) ** 2 / expected
    terms = np.where(zero, np.where(counts > 0, np.inf, 0.0), terms)
    return terms


def chi_square_statistic(
    dataset: Iterable[tuple[CountsRecord, ProbabilityQuad]], n_fitted: int = 0
) -> ChiSquare:
    pairs: Sequence[tuple[CountsRecord, ProbabilityQuad]] = list(dataset)
    if not pairs:
        raise ValueError("chi-square needs at least one setting pair")
    counts = np.array([rec.counts() for rec, _ in pairs], dtype=float)
    probs = np.array([q.as_tuple() for _, q in pairs], dtype=float)
    terms = chi_square_terms(counts, probs)
    bad = np.argwhere(np.isinf(terms))
    if bad.size:
        rec = pairs[int(bad[0][0])][0]
        outcome = ("++", "+-", "-+", "--")[int(bad[0][1])]
        raise ImpossibleOutcomeError(
            f"outcome {outcome} observed {rec.counts()[int(bad[0][1])]} times at "
            f"alpha={rec.settings.alpha_deg:.6g} deg, beta={rec.settings.beta_deg:.6g} deg "
            "but the model assigns it probability 0"
        )
    # exact-sum so the result does not depend on how pairs were grouped
    chi2 = math.fsum(terms.ravel())
    dof = 3 * len(pairs) - n_fitted
    if dof < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {dof}")
    return ChiSquare(chi2, dof, chi2_sf(chi2, dof))
