"""Probability models for two-photon polarization measurements.

Outcome order everywhere is ``(++, +-, -+, --)``. Angles are radians.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

NORMALIZATION_TOL = 1e-12


def _check_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"angle must be finite, got {v!r}")


@dataclass(frozen=True)
class AnalyzerSettings:
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        _check_finite(self.alpha, self.beta)

    @classmethod
    def from_degrees(cls, alpha_deg: float, beta_deg: float) -> "AnalyzerSettings":
        return cls(math.radians(alpha_deg), math.radians(beta_deg))

    @property
    def alpha_deg(self) -> float:
        return math.degrees(self.alpha)

    @property
    def beta_deg(self) -> float:
        return math.degrees(self.beta)

    def shifted(self, alpha_offset: float, beta_offset: float) -> "AnalyzerSettings":
        return AnalyzerSettings(self.alpha + alpha_offset, self.beta + beta_offset)


@dataclass(frozen=True)
class ProbabilityQuad:
    p_pp: float
    p_pm: float
    p_mp: float
    p_mm: float

    def __post_init__(self) -> None:
        values = self.as_tuple()
        if any(not math.isfinite(p) or p < 0.0 or p > 1.0 for p in values):
            raise ValueError(f"probabilities must lie in [0, 1], got {values}")
        if abs(math.fsum(values) - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"probabilities must sum to 1, got sum {math.fsum(values)!r}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.p_pp, self.p_pm, self.p_mp, self.p_mm)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=float)

    @classmethod
    def from_sequence(cls, values) -> "ProbabilityQuad":
        p = [float(x) for x in values]
        if len(p) != 4:
            raise ValueError("a probability quad has exactly four components")
        return cls(*p)


class ModelKind(enum.Enum):
    MAX_ENTANGLED = "max"
    NONMAX_ENTANGLED = "nonmax"
    LHV = "lhv"


@dataclass(frozen=True)
class StateModel:
    """A state hypothesis plus white-noise visibility.

    ``theta`` is only meaningful for ``NONMAX_ENTANGLED``; the state is
    ``cos(theta)|HH> + sin(theta)|VV>``.
    """

    kind: ModelKind
    theta: float = math.pi / 4
    visibility: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.visibility <= 1.0):
            raise ValueError(f"visibility must be in [0, 1], got {self.visibility!r}")
        if self.kind is ModelKind.NONMAX_ENTANGLED and not (0.0 < self.theta < math.pi / 2):
            raise ValueError(f"theta must be in (0, pi/2), got {self.theta!r}")

    @classmethod
    def max_entangled(cls, visibility: float = 1.0) -> "StateModel":
        return cls(ModelKind.MAX_ENTANGLED, math.pi / 4, visibility)

    @classmethod
    def nonmax_entangled(cls, theta: float, visibility: float = 1.0) -> "StateModel":
        return cls(ModelKind.NONMAX_ENTANGLED, theta, visibility)

    @classmethod
    def lhv(cls) -> "StateModel":
        return cls(ModelKind.LHV)


def entangled_quads(theta, visibility, alpha, beta) -> np.ndarray:
    """Vectorized outcome probabilities, shape ``(..., 4)``.

    Amplitudes come from projecting ``cos(theta)|HH> + sin(theta)|VV>`` onto
    ``|+g> = (cos g, sin g)`` and ``|-g> = (-sin g, cos g)`` on each side.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    cb, sb = np.cos(beta), np.sin(beta)
    a_pp = ct * ca * cb + st * sa * sb
    a_pm = -ct * ca * sb + st * sa * cb
    a_mp = -ct * sa * cb + st * ca * sb
    a_mm = ct * sa * sb + st * ca * cb
    quads = np.stack([a_pp**2, a_pm**2, a_mp**2, a_mm**2], axis=-1)
    return visibility * quads + (1.0 - visibility) * 0.25


def predict_probabilities(model: StateModel, settings: AnalyzerSettings) -> ProbabilityQuad:
    if model.kind is ModelKind.LHV:
        raise ValueError("LHV model has no quantum prediction; use lhv_correlation or lhv_probabilities")
    alpha, beta = settings.alpha, settings.beta
    _check_finite(alpha, beta)
    v = model.visibility
    if model.kind is ModelKind.MAX_ENTANGLED:
        d = alpha - beta
        same = 0.5 * math.cos(d) ** 2
        diff = 0.5 * math.sin(d) ** 2
        quad = (same, diff, diff, same)
    else:
        quad = tuple(float(x) for x in entangled_quads(model.theta, 1.0, alpha, beta))
    return ProbabilityQuad(*(v * p + (1.0 - v) * 0.25 for p in quad))


def fold_delta(alpha: float, beta: float) -> float:
    """|alpha - beta| reduced to [0, pi]; analyzers have period pi."""
    return math.fmod(abs(alpha - beta), math.pi)


def lhv_correlation(settings: AnalyzerSettings) -> float:
    """Sawtooth correlation of the deterministic hidden-variable model."""
    delta = fold_delta(settings.alpha, settings.beta)
    if delta <= math.pi / 2:
        return 1.0 - 4.0 * delta / math.pi
    return 4.0 * delta / math.pi - 3.0


def lhv_probabilities(settings: AnalyzerSettings) -> ProbabilityQuad:
    """Joint outcome probabilities of the hidden-variable model.

    Each side's marginal is exactly 1/2 (lambda is uniform over a full
    period), so the quad follows from the correlation alone.
    """
    e = lhv_correlation(settings)
    same = (1.0 + e) / 4.0
    diff = (1.0 - e) / 4.0
    return ProbabilityQuad(same, diff, diff, same)


def lhv_response(lam, analyzer_angle):
    """Deterministic +/-1 outcome: sign of cos 2(angle - lambda), ties to +1.

    Accepts scalars or arrays; scalar in, int out.
    """
    value = np.cos(2.0 * (np.asarray(analyzer_angle, dtype=float) - np.asarray(lam, dtype=float)))
    # cos 2(.) == 0 up to rounding of the angle arithmetic counts as a tie
    out = np.where(value >= -1e-15, 1, -1)
    if out.ndim == 0:
        return int(out)
    return out
