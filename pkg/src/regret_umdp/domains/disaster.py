"""Disaster-rescue gridworld with uncertain swamp and obstacle locations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import UmdpError
from ..model import MdpSample, Umdp, validate_umdp
from .sampling import select_samples

# 8 headings, counter-clockwise starting east: (dx, dy)
DIRECTIONS = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))
ACTION_LABELS = ("E", "NE", "N", "NW", "W", "SW", "S", "SE")
P_TARGET, P_SIDE, P_OBSTACLE = 0.8, 0.1, 0.05
BASE_COST = 0.5
SWAMP_COST = (1.0, 2.0)
MAX_RETRIES = 100


@dataclass
class DisasterSpec:
    width: int = 6
    height: int = 6
    region_rate: float = 1 / 15
    n_samples: int = 15
    n_candidates: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.width * self.height < 4 or min(self.width, self.height) < 2:
            raise ValueError("grid must have at least 4 cells and both sides >= 2")
        if not 0 <= self.region_rate <= 1:
            raise ValueError("region_rate must be a probability")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


def cell_index(x: int, y: int, width: int) -> int:
    return y * width + x


def _neighbours(c: int, width: int, height: int) -> list[int]:
    x, y = c % width, c // width
    out = [c]
    for dx, dy in DIRECTIONS:
        nx, ny = x + dx, y + dy
        if 0 <= nx < width and 0 <= ny < height:
            out.append(cell_index(nx, ny, width))
    return sorted(out)


def draw_regions(rng, width: int, height: int, rate: float, start: int, goal: int):
    """Swamp and obstacle regions: a centre cell plus its in-grid neighbours."""
    cells = [c for c in range(width * height) if c not in (start, goal)]
    swamp = [c for c in cells if rng.random() < rate]
    obstacle = [c for c in cells if rng.random() < rate]
    mk = lambda centres: [_neighbours(c, width, height) for c in centres]
    return mk(swamp), mk(obstacle)


def build_sample(width: int, height: int, start: int, goal: int, swamps: dict, obstacles: set) -> MdpSample:
    """One MDP sample from concrete swamp costs ``{cell: cost}`` and obstacle cells."""
    S = width * height
    cost = np.full(S, BASE_COST)
    for c, v in swamps.items():
        cost[c] = v
    rows = []
    for s in range(S):
        if s == goal:
            rows.extend((s, a, s, 1.0, 0.0) for a in range(len(DIRECTIONS)))
            continue
        x, y = s % width, s // width
        for a in range(len(DIRECTIONS)):
            mass: dict = {}
            for k, p in ((a, P_TARGET), ((a - 1) % 8, P_SIDE), ((a + 1) % 8, P_SIDE)):
                dx, dy = DIRECTIONS[k]
                nx, ny = x + dx, y + dy
                if not (0 <= nx < width and 0 <= ny < height):
                    continue
                t = cell_index(nx, ny, width)
                if t in obstacles:
                    p = P_OBSTACLE
                mass[t] = mass.get(t, 0.0) + p
            stay = 1.0 - sum(mass.values())
            if stay > 1e-12:
                mass[s] = mass.get(s, 0.0) + stay
            rows.extend((s, a, t, p, cost[t]) for t, p in mass.items())
    return MdpSample.from_triples(S, len(DIRECTIONS), start, (goal,), rows)


def draw_samples(rng, meta: dict, count: int) -> list[MdpSample]:
    """Fresh samples: one swamp (with a uniform cost) and one obstacle per region."""
    w, h, start, goal = meta["width"], meta["height"], meta["start"], meta["goal"]
    out = []
    for _ in range(count):
        swamps = {}
        for region in meta["swamp_regions"]:
            cells = [c for c in region if c not in (start, goal)]
            swamps[int(rng.choice(cells))] = float(rng.uniform(*SWAMP_COST))
        obstacles = set()
        for region in meta["obstacle_regions"]:
            cells = [c for c in region if c not in (start, goal)]
            obstacles.add(int(rng.choice(cells)))
        out.append(build_sample(w, h, start, goal, swamps, obstacles))
    return out


def gen_disaster(spec: DisasterSpec) -> Umdp:
    """Disaster-rescue UMDP; start and goal sit in opposite corners.

    The goal is cell 0 and the start the last cell.  When ``n_candidates``
    exceeds ``n_samples`` a larger pool is drawn and reduced by coverage-based
    selection.
    """
    rng = np.random.default_rng(spec.seed)
    w, h = spec.width, spec.height
    goal, start = 0, w * h - 1
    for _ in range(MAX_RETRIES):
        swamp_regions, obstacle_regions = draw_regions(rng, w, h, spec.region_rate, start, goal)
        meta = {"domain": "disaster", "width": w, "height": h, "start": start, "goal": goal,
                "swamp_regions": swamp_regions, "obstacle_regions": obstacle_regions, "seed": spec.seed}
        pool = max(spec.n_samples, spec.n_candidates or spec.n_samples)
        samples = draw_samples(rng, meta, pool)
        if pool > spec.n_samples:
            samples = select_samples(samples, spec.n_samples)
        labels = tuple(f"({s % w},{s // w})" for s in range(w * h))
        umdp = Umdp.from_samples(samples, state_labels=labels, action_labels=ACTION_LABELS, meta=meta)
        if not validate_umdp(umdp):
            return umdp
    raise UmdpError(f"could not build a valid disaster UMDP in {MAX_RETRIES} attempts")
