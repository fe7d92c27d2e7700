"""Medical treatment domain: health level over a fixed number of days."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import MdpSample, Umdp
from .sampling import select_samples

SHIFTS = np.arange(-3, 4)


@dataclass
class MedicalSpec:
    health_levels: int = 20
    days: int = 7
    actions: int = 3
    noise_sd: float = 0.1
    n_samples: int = 15
    n_candidates: int | None = None
    initial_health: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.noise_sd > 0:
            raise ValueError("noise_sd must be > 0")
        if self.actions > SHIFTS.size:
            raise ValueError("at most 7 actions (distinct outcome rows)")
        if not 0 <= self.initial_health < self.health_levels:
            raise ValueError("initial_health out of range")


def state_index(h: int, d: int, spec_or_meta) -> int:
    """Goal is state 0; day ``d`` health ``h`` maps so that later days get smaller indices."""
    H, D = _dims(spec_or_meta)
    return 1 + (D - 1 - d) * H + h


def _dims(x):
    if isinstance(x, dict):
        return x["health_levels"], x["days"]
    return x.health_levels, x.days


def terminal_cost(h: int) -> float:
    return 0.05 * (19 - h) + (2.0 if h == 0 else 0.0)


def nominal_outcomes(rng, health_levels: int, actions: int) -> np.ndarray:
    """Per health level, ``actions`` distinct rows of the 7x7 identity, shape (H, A, 7)."""
    eye = np.eye(SHIFTS.size)
    return np.stack([eye[rng.choice(SHIFTS.size, size=actions, replace=False)] for _ in range(health_levels)])


def build_sample(outcomes: np.ndarray, meta: dict) -> MdpSample:
    """Sample from outcome matrices (H, A, 7); health is clamped to the valid range."""
    H, D = meta["health_levels"], meta["days"]
    A = outcomes.shape[1]
    S = 1 + H * D
    rows = [(0, a, 0, 1.0, 0.0) for a in range(A)]
    for d in range(D):
        for h in range(H):
            s = state_index(h, d, meta)
            for a in range(A):
                if d == D - 1:
                    rows.append((s, a, 0, 1.0, terminal_cost(h)))
                    continue
                mass: dict = {}
                for k, dh in enumerate(SHIFTS):
                    t = state_index(int(np.clip(h + dh, 0, H - 1)), d + 1, meta)
                    mass[t] = mass.get(t, 0.0) + outcomes[h, a, k]
                rows.extend((s, a, t, p, 0.0) for t, p in mass.items())
    return MdpSample.from_triples(S, A, state_index(meta["initial_health"], 0, meta), (0,), rows)


def draw_samples(rng, meta: dict, count: int) -> list[MdpSample]:
    nominal = np.asarray(meta["nominal"], dtype=float)
    out = []
    for _ in range(count):
        noisy = nominal + np.abs(rng.normal(0.0, meta["noise_sd"], size=nominal.shape))
        out.append(build_sample(noisy / noisy.sum(axis=2, keepdims=True), meta))
    return out


def gen_medical(spec: MedicalSpec) -> Umdp:
    rng = np.random.default_rng(spec.seed)
    meta = {"domain": "medical", "health_levels": spec.health_levels, "days": spec.days,
            "noise_sd": spec.noise_sd, "initial_health": spec.initial_health, "seed": spec.seed,
            "nominal": nominal_outcomes(rng, spec.health_levels, spec.actions)}
    pool = max(spec.n_samples, spec.n_candidates or spec.n_samples)
    samples = draw_samples(rng, meta, pool)
    if pool > spec.n_samples:
        samples = select_samples(samples, spec.n_samples)
    labels = ("goal",) + tuple(f"h={s % spec.health_levels},d={spec.days - 1 - s // spec.health_levels}"
                               for s in range(spec.health_levels * spec.days))
    return Umdp.from_samples(samples, state_labels=labels,
                             action_labels=tuple(f"treat{a}" for a in range(spec.actions)), meta=meta)
