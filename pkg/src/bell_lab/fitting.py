"""Minimum chi-square estimation of state and noise parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .model import StateModel, entangled_quads
from .simulator import CountsRecord, NoiseConfig
from .statistics import chi2_sf, chi_square_terms

PENALTY = 1e30
UNINFORMATIVE_VISIBILITY = 0.05
# open intervals are closed this far inside their ends
_EDGE = 1e-9

PARAMETERS = ("theta", "visibility", "alpha_offset", "beta_offset")
BOUNDS = {
    "theta": (_EDGE, math.pi / 2 - _EDGE),
    "visibility": (0.0, 1.0),
    "alpha_offset": (-math.pi / 4 + _EDGE, math.pi / 4 - _EDGE),
    "beta_offset": (-math.pi / 4 + _EDGE, math.pi / 4 - _EDGE),
}


@dataclass(frozen=True)
class SimplexResult:
    x: np.ndarray
    f: float
    evaluations: int
    converged: bool


def nelder_mead(
    objective: Callable[[np.ndarray], float],
    x0: Sequence[float],
    bounds: Sequence[tuple[float, float]] | None = None,
    tol: float = 1e-10,
    max_evals: int = 5000,
    initial_step: Sequence[float] | None = None,
) -> SimplexResult:
    """Downhill simplex with clamping to a box.

    Coefficients are the textbook ones (reflect 1, expand 2, contract 1/2,
    shrink 1/2). Converged means the spread of function values across the
    simplex fell below ``tol``.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    k = x0.size
    if k < 1:
        raise ValueError("nelder_mead needs at least one coordinate")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if bounds is None:
        lo = np.full(k, -np.inf)
        hi = np.full(k, np.inf)
    else:
        if len(bounds) != k:
            raise ValueError("one (low, high) bound per coordinate is required")
        lo = np.array([b[0] for b in bounds], dtype=float)
        hi = np.array([b[1] for b in bounds], dtype=float)
        if np.any(lo > hi):
            raise ValueError("bounds must satisfy low <= high")
        if np.any(x0 < lo) or np.any(x0 > hi):
            raise ValueError("x0 lies outside the bounds")

    def clamp(x: np.ndarray) -> np.ndarray:
        return np.minimum(np.maximum(x, lo), hi)

    evals = 0

    def f(x: np.ndarray) -> float:
        nonlocal evals
        evals += 1
        value = float(objective(x))
        return value if math.isfinite(value) else math.inf

    if initial_step is None:
        width = hi - lo
        step = np.where(np.isfinite(width), 0.1 * width, 0.1 * np.maximum(1.0, np.abs(x0)))
    else:
        step = np.asarray(initial_step, dtype=float)

    simplex = [x0.copy()]
    for i in range(k):
        x = x0.copy()
        x[i] = x0[i] + step[i]
        if x[i] > hi[i]:
            x[i] = x0[i] - step[i]
        simplex.append(clamp(x))
    points = np.array(simplex)
    values = np.array([f(p) for p in points])

    converged = False
    while True:
        order = np.argsort(values, kind="stable")
        points, values = points[order], values[order]
        if values[-1] - values[0] < tol:
            converged = True
            break
        if evals >= max_evals:
            break

        centroid = points[:-1].mean(axis=0)
        worst = points[-1]
        xr = clamp(centroid + (centroid - worst))
        fr = f(xr)
        if fr < values[0]:
            xe = clamp(centroid + 2.0 * (centroid - worst))
            fe = f(xe)
            if fe < fr:
                points[-1], values[-1] = xe, fe
            else:
                points[-1], values[-1] = xr, fr
            continue
        if fr < values[-2]:
            points[-1], values[-1] = xr, fr
            continue

        if fr < values[-1]:
            xc = clamp(centroid + 0.5 * (xr - centroid))
        else:
            xc = clamp(centroid + 0.5 * (worst - centroid))
        fc = f(xc)
        if fc < min(fr, values[-1]):
            points[-1], values[-1] = xc, fc
            continue

        best = points[0]
        for i in range(1, k + 1):
            points[i] = clamp(best + 0.5 * (points[i] - best))
            values[i] = f(points[i])

    i = int(np.argmin(values))
    return SimplexResult(points[i].copy(), float(values[i]), evals, converged)


@dataclass(frozen=True)
class FitFamily:
    """Which parameters are free; the rest are pinned at ``fixed``.

    ``theta`` = pi/4 is the maximally entangled state.
    """

    free: tuple[str, ...]
    fixed: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        free = tuple(self.free)
        object.__setattr__(self, "free", free)
        if not free:
            raise ValueError("a fit family needs at least one free parameter")
        unknown = set(free) - set(PARAMETERS)
        if unknown:
            raise ValueError(f"unknown parameters {sorted(unknown)}; choose from {PARAMETERS}")
        if len(set(free)) != len(free):
            raise ValueError("free parameters must be distinct")
        fixed = {"theta": math.pi / 4, "visibility": 1.0, "alpha_offset": 0.0, "beta_offset": 0.0}
        fixed.update(self.fixed)
        object.__setattr__(self, "fixed", fixed)

    def full(self, x: Sequence[float]) -> dict[str, float]:
        params = dict(self.fixed)
        params.update(zip(self.free, (float(v) for v in x)))
        return params


@dataclass(frozen=True)
class FitResult:
    parameters: dict
    chi2: float
    dof: int
    p_value: float
    converged: bool
    evaluations: int
    uninformative: bool = False

    def model(self) -> StateModel:
        return fitted_model(self.parameters)

    def noise(self) -> NoiseConfig:
        return NoiseConfig(
            alpha_offset=self.parameters["alpha_offset"], beta_offset=self.parameters["beta_offset"]
        )


def fitted_model(params: dict) -> StateModel:
    theta = params["theta"]
    if theta == math.pi / 4:
        return StateModel.max_entangled(params["visibility"])
    return StateModel.nonmax_entangled(theta, params["visibility"])


def _starts(lo: np.ndarray, hi: np.ndarray) -> list[np.ndarray]:
    # center, the two diagonal corners of the inner box, two alternating corners
    k = lo.size
    width = hi - lo
    alternating = np.array([0.1 if i % 2 == 0 else 0.9 for i in range(k)])
    fractions = [np.full(k, 0.5), np.full(k, 0.25), np.full(k, 0.75), alternating, 1.0 - alternating]
    return [lo + fr * width for fr in fractions]


def fit_model(dataset: Sequence[CountsRecord], family: FitFamily, tol: float = 1e-9, max_evals: int = 4000) -> FitResult:
    """Minimize chi-square over the family's free parameters.

    Five fixed starts, each followed by one restart from its own optimum to
    undo early simplex collapse; the best point wins. Family members that put
    zero probability on an observed outcome score 1e30.
    """
    records = list(dataset)
    if not records:
        raise ValueError("fit_model needs a non-empty dataset")
    dof = 3 * len(records) - len(family.free)
    if dof < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {dof}")

    counts, alphas, betas = _arrays(records)

    def objective(x: np.ndarray) -> float:
        return _chi2(counts, alphas, betas, family.full(x))

    lo = np.array([BOUNDS[name][0] for name in family.free])
    hi = np.array([BOUNDS[name][1] for name in family.free])
    bounds = list(zip(lo, hi))

    best: SimplexResult | None = None
    total_evals = 0
    for x0 in _starts(lo, hi):
        run = nelder_mead(objective, x0, bounds, tol=tol, max_evals=max_evals)
        polish = nelder_mead(objective, run.x, bounds, tol=tol, max_evals=max_evals,
                             initial_step=0.01 * (hi - lo))
        total_evals += run.evaluations + polish.evaluations
        cand = polish if polish.f <= run.f else run
        cand = SimplexResult(cand.x, cand.f, cand.evaluations, run.converged and polish.converged)
        if best is None or cand.f < best.f:
            best = cand

    params = family.full(best.x)
    p_value = chi2_sf(best.f, dof) if best.f < PENALTY else 0.0
    return FitResult(
        parameters=params,
        chi2=best.f,
        dof=dof,
        p_value=p_value,
        converged=best.converged,
        evaluations=total_evals,
        uninformative=params["visibility"] < UNINFORMATIVE_VISIBILITY,
    )


def _arrays(records: Sequence[CountsRecord]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    counts = np.array([r.counts() for r in records], dtype=float)
    alphas = np.array([r.settings.alpha for r in records])
    betas = np.array([r.settings.beta for r in records])
    return counts, alphas, betas


def _chi2(counts: np.ndarray, alphas: np.ndarray, betas: np.ndarray, params: dict) -> float:
    probs = entangled_quads(
        params["theta"], params["visibility"], alphas + params["alpha_offset"], betas + params["beta_offset"]
    )
    terms = chi_square_terms(counts, probs)
    if np.isinf(terms).any():
        return PENALTY
    return math.fsum(terms.ravel())


def chi2_at_parameters(dataset: Sequence[CountsRecord], params: dict) -> float:
    """Fit objective at given parameters, no minimization."""
    full = {"theta": math.pi / 4, "visibility": 1.0, "alpha_offset": 0.0, "beta_offset": 0.0}
    full.update(params)
    return _chi2(*_arrays(list(dataset)), full)
