"""Linear combinations of joint probabilities, CHSH, and the optimal test direction."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import ProbabilityQuad

PINV_RCOND = 1e-12
TSIRELSON = 2.0 * math.sqrt(2.0)
CLASSICAL_BOUND = 2.0


@dataclass(frozen=True)
class CoefficientVector:
    c_pp: float
    c_pm: float
    c_mp: float
    c_mm: float

    def __post_init__(self) -> None:
        values = self.as_tuple()
        if not all(math.isfinite(x) for x in values):
            raise ValueError(f"coefficients must be finite, got {values}")
        if all(x == 0.0 for x in values):
            raise ValueError("coefficient vector must have at least one nonzero component")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.c_pp, self.c_pm, self.c_mp, self.c_mm)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=float)

    @classmethod
    def from_sequence(cls, values) -> "CoefficientVector":
        c = [float(x) for x in values]
        if len(c) != 4:
            raise ValueError("a coefficient vector has exactly four components")
        return cls(*c)

    def normalized(self) -> "CoefficientVector":
        """Unit length, first nonzero component positive."""
        return CoefficientVector.from_sequence(_canonical(self.as_array()))


CORRELATION = CoefficientVector(1.0, -1.0, -1.0, 1.0)
NORMALIZATION = CoefficientVector(1.0, 1.0, 1.0, 1.0)


@dataclass(frozen=True)
class ChshAngles:
    a: float
    a_prime: float
    b: float
    b_prime: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(x) for x in (self.a, self.a_prime, self.b, self.b_prime)):
            raise ValueError("CHSH angles must be finite")

    @classmethod
    def from_degrees(cls, a, a_prime, b, b_prime) -> "ChshAngles":
        return cls(*(math.radians(x) for x in (a, a_prime, b, b_prime)))

    @classmethod
    def standard(cls) -> "ChshAngles":
        return cls(0.0, math.pi / 4, math.pi / 8, 3 * math.pi / 8)

    def pairs(self) -> list[tuple[float, float]]:
        """Setting pairs in the order they enter the statistic."""
        return [(self.a, self.b), (self.a, self.b_prime), (self.a_prime, self.b), (self.a_prime, self.b_prime)]


def correlation(quad: ProbabilityQuad) -> float:
    return quad.p_pp - quad.p_pm - quad.p_mp + quad.p_mm


def linear_combination(c: CoefficientVector, quad: ProbabilityQuad) -> float:
    # same left-to-right order as correlation() so c=(1,-1,-1,1) agrees bitwise
    return c.c_pp * quad.p_pp + c.c_pm * quad.p_pm + c.c_mp * quad.p_mp + c.c_mm * quad.p_mm


def chsh_statistic(curve: Callable[[float, float], float], angles: ChshAngles) -> float:
    """S = E(a,b) - E(a,b') + E(a',b) + E(a',b').

    ``curve`` maps (alpha, beta) in radians to a correlation value.
    """
    return (
        curve(angles.a, angles.b)
        - curve(angles.a, angles.b_prime)
        + curve(angles.a_prime, angles.b)
        + curve(angles.a_prime, angles.b_prime)
    )


def _canonical(c: np.ndarray) -> np.ndarray:
    # divide by max |c| first so the norm cannot underflow
    c = c / np.max(np.abs(c))
    c = c / np.linalg.norm(c)
    nonzero = np.flatnonzero(np.abs(c) > 0.0)
    if nonzero.size and c[nonzero[0]] < 0.0:
        c = -c
    return c + 0.0  # drop negative zeros


def _validate_covariance(cov: np.ndarray) -> np.ndarray:
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (4, 4) or not np.all(np.isfinite(cov)):
        raise ValueError("covariance must be a finite 4x4 matrix")
    scale = max(float(np.max(np.abs(cov))), np.finfo(float).tiny)
    if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12 * scale):
        raise ValueError("covariance must be symmetric")
    eig = np.linalg.eigvalsh(0.5 * (cov + cov.T))
    if eig[0] < -1e-10 * max(eig[-1], 0.0) - 1e-300:
        raise ValueError(f"covariance must be positive semidefinite (min eigenvalue {eig[0]:.3g})")
    return 0.5 * (cov + cov.T)


def significance(c, delta, covariance) -> float:
    """|c . delta| / sqrt(c' cov c); 0 where the variance vanishes."""
    c = np.asarray(c, dtype=float)
    var = float(c @ np.asarray(covariance, dtype=float) @ c)
    if var <= 0.0:
        return 0.0
    return abs(float(c @ np.asarray(delta, dtype=float))) / math.sqrt(var)


@dataclass(frozen=True)
class OptimalTest:
    c: CoefficientVector
    degenerate: bool


def optimal_coefficients(delta, covariance) -> OptimalTest:
    """Coefficient vector maximizing |c.delta| / sqrt(c' cov c).

    The maximizer of this generalized Rayleigh quotient is ``pinv(cov) @ delta``
    when delta lies in the covariance's row space. Singular values below
    ``1e-12 * largest`` are treated as zero, which discards the (1,1,1,1)
    direction of a multinomial covariance.
    """
    delta = np.asarray(delta, dtype=float)
    if delta.shape != (4,) or not np.all(np.isfinite(delta)):
        raise ValueError("delta must be a finite 4-vector")
    cov = _validate_covariance(covariance)

    if not np.any(delta != 0.0):
        return OptimalTest(CORRELATION.normalized(), True)

    # the optimal direction is invariant to the scale of delta
    delta = delta / np.max(np.abs(delta))
    eigval, eigvec = np.linalg.eigh(cov)
    top = max(float(eigval[-1]), 0.0)
    keep = eigval > PINV_RCOND * top if top > 0.0 else np.zeros(4, dtype=bool)
    projected = eigvec[:, keep].T @ delta
    c = eigvec[:, keep] @ (projected / eigval[keep])
    if not np.any(keep) or np.linalg.norm(projected) <= 1e-12 * np.linalg.norm(delta):
        return OptimalTest(CoefficientVector.from_sequence(_canonical(delta)), True)
    return OptimalTest(CoefficientVector.from_sequence(_canonical(c)), False)
