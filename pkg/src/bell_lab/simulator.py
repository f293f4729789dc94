"""Synthetic coincidence counts with noise and compensating anomalies."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import (
    AnalyzerSettings,
    ModelKind,
    ProbabilityQuad,
    StateModel,
    lhv_response,
    predict_probabilities,
)

SEED_MAX = 2**64 - 1


@dataclass(frozen=True)
class NoiseConfig:
    """Imperfections applied on top of a model.

    ``visibility`` multiplies whatever visibility the model already carries.
    Offsets are added to the nominal analyzer angles.
    """

    visibility: float = 1.0
    alpha_offset: float = 0.0
    beta_offset: float = 0.0
    anomaly_eps1: float = 0.0
    anomaly_eps2: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.visibility <= 1.0):
            raise ValueError(f"visibility must be in [0, 1], got {self.visibility!r}")
        for name in ("alpha_offset", "beta_offset", "anomaly_eps1", "anomaly_eps2"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class CountsRecord:
    settings: AnalyzerSettings
    n_pp: int
    n_pm: int
    n_mp: int
    n_mm: int

    def __post_init__(self) -> None:
        for name in ("n_pp", "n_pm", "n_mp", "n_mm"):
            n = getattr(self, name)
            if int(n) != n or n < 0:
                raise ValueError(f"counts must be non-negative integers, got {self.counts()}")
            object.__setattr__(self, name, int(n))

    def counts(self) -> tuple[int, int, int, int]:
        return (self.n_pp, self.n_pm, self.n_mp, self.n_mm)

    @property
    def total(self) -> int:
        return self.n_pp + self.n_pm + self.n_mp + self.n_mm


@dataclass(frozen=True)
class ExperimentPlan:
    setting_pairs: tuple[AnalyzerSettings, ...]
    shots_per_pair: int
    model: StateModel
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "setting_pairs", tuple(self.setting_pairs))
        if not self.setting_pairs:
            raise ValueError("an experiment plan needs at least one setting pair")
        if int(self.shots_per_pair) != self.shots_per_pair or self.shots_per_pair < 1:
            raise ValueError(f"shots_per_pair must be a positive integer, got {self.shots_per_pair!r}")
        if not (0 <= self.seed <= SEED_MAX):
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class AnomalyResult:
    quad: ProbabilityQuad
    applied_eps1: float
    applied_eps2: float


def apply_anomaly(quad: ProbabilityQuad, eps1: float, eps2: float) -> AnomalyResult:
    """Move eps1 from -- to ++ and eps2 from -+ to +-.

    Each transfer is clamped so that both members of its pair stay in [0, 1].
    The correlation and the total are unchanged.
    """
    p_pp, p_pm, p_mp, p_mm = quad.as_tuple()
    e1 = min(max(eps1, -p_pp), p_mm)
    e2 = min(max(eps2, -p_pm), p_mp)
    out = ProbabilityQuad(p_pp + e1, p_pm + e2, p_mp - e2, p_mm - e1)
    return AnomalyResult(out, e1, e2)


def stream(seed: int, pair_index: int) -> np.random.Generator:
    """Counter-based substream for one setting pair.

    The Philox key is (seed, pair_index); draws within the pair advance the
    counter, so the k-th shot of a pair always sees the same random words.
    """
    if not (0 <= seed <= SEED_MAX) or pair_index < 0:
        raise ValueError("seed must be 64-bit unsigned and pair_index non-negative")
    return np.random.Generator(np.random.Philox(key=np.array([seed, pair_index], dtype=np.uint64)))


def sample_counts(
    quad: ProbabilityQuad, shots: int, rng: np.random.Generator, settings: AnalyzerSettings | None = None
) -> CountsRecord:
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p = np.clip(quad.as_array(), 0.0, 1.0)
    p = p / p.sum()
    n = rng.multinomial(int(shots), p)
    return CountsRecord(settings or AnalyzerSettings(0.0, 0.0), *(int(x) for x in n))


def sample_lhv_counts(settings: AnalyzerSettings, shots: int, rng: np.random.Generator) -> CountsRecord:
    """One shared lambda ~ U[0, pi) per shot, deterministic response on each side."""
    lam = rng.uniform(0.0, math.pi, size=int(shots))
    a = lhv_response(lam, settings.alpha)
    b = lhv_response(lam, settings.beta)
    # index 0..3 in (++, +-, -+, --) order
    idx = (a < 0).astype(np.int64) * 2 + (b < 0).astype(np.int64)
    n = np.bincount(idx, minlength=4)
    return CountsRecord(settings, *(int(x) for x in n))


@dataclass(frozen=True)
class PairTruth:
    """Noise-free generating quad for one pair, after offsets, visibility and anomaly."""

    settings: AnalyzerSettings
    model_quad: ProbabilityQuad | None
    quad: ProbabilityQuad | None
    applied_eps1: float
    applied_eps2: float


def pair_truth(plan: ExperimentPlan, settings: AnalyzerSettings) -> PairTruth:
    noise = plan.noise
    if plan.model.kind is ModelKind.LHV:
        return PairTruth(settings, None, None, 0.0, 0.0)
    effective = settings.shifted(noise.alpha_offset, noise.beta_offset)
    v = plan.model.visibility * noise.visibility
    model = StateModel(plan.model.kind, plan.model.theta, v)
    base = predict_probabilities(model, effective)
    anomalous = apply_anomaly(base, noise.anomaly_eps1, noise.anomaly_eps2)
    return PairTruth(settings, base, anomalous.quad, anomalous.applied_eps1, anomalous.applied_eps2)


def max_workers() -> int:
    """Parallelism cap from ``BELL_LAB_THREADS``; defaults to all cores."""
    raw = os.environ.get("BELL_LAB_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"BELL_LAB_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def _simulate_pair(plan: ExperimentPlan, index: int) -> CountsRecord:
    settings = plan.setting_pairs[index]
    rng = stream(plan.seed, index)
    if plan.model.kind is ModelKind.LHV:
        effective = settings.shifted(plan.noise.alpha_offset, plan.noise.beta_offset)
        record = sample_lhv_counts(effective, plan.shots_per_pair, rng)
        return CountsRecord(settings, *record.counts())
    truth = pair_truth(plan, settings)
    return sample_counts(truth.quad, plan.shots_per_pair, rng, settings)


def run_experiment(plan: ExperimentPlan, workers: int | None = None) -> list[CountsRecord]:
    """Simulate every setting pair; output is independent of ``workers``.

    Records carry the nominal (un-offset) settings, as an experimenter would
    log them.
    """
    workers = max_workers() if workers is None else max(1, workers)
    indices = range(len(plan.setting_pairs))
    if workers == 1 or len(plan.setting_pairs) == 1:
        return [_simulate_pair(plan, i) for i in indices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda i: _simulate_pair(plan, i), indices))
