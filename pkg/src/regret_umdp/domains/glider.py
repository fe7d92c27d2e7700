"""Underwater glider navigation abstracted from an ocean-current field.

Each sample is one epoch of the current field.  Transition probabilities
integrate a Gaussian position error over the grid cells; with a diagonal
covariance this is a product of two 1-D normal CDF differences, and mass
falling outside the grid is assigned to the nearest boundary cell.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from ..model import MdpSample, Umdp
from .sampling import select_samples

PROB_FLOOR = 1e-4


@dataclass
class GliderSpec:
    width: int = 10
    height: int = 10
    cell_size: float = 500.0
    glider_speed: float = 0.6
    dt: float = 800.0
    sigma: float = 150.0
    headings: int = 12
    cost_range: tuple = (0.8, 1.0)
    shallow_penalty: float = 3.0
    depth_limit: float = 260.0
    current_limit: float = 0.12
    epochs: int = 12
    max_speed: float = 0.25
    n_kernels: int = 6
    field: str = "synthetic"
    seed: int = 0

    def __post_init__(self):
        if not self.cell_size > 0:
            raise ValueError("cell_size must be > 0")
        if self.headings < 1:
            raise ValueError("headings must be >= 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")


def synthetic_current_field(seed: int, dims: tuple[int, int], epochs: int = 12, max_speed: float = 0.25,
                            n_kernels: int = 6) -> np.ndarray:
    """Smooth rotational current field, shape (epochs, height, width, 2) in m/s.

    A sum of Gaussian vortices (velocity = rotated stream-function gradient)
    whose centres drift and strengths oscillate slowly across epochs.  The
    field is scaled so that its largest speed equals ``max_speed``.
    """
    if not max_speed > 0:
        raise ValueError("max_speed must be > 0")
    height, width = dims
    out = np.zeros((epochs, height, width, 2))
    if n_kernels == 0:
        return out
    rng = np.random.default_rng(seed)
    centre = rng.uniform([0, 0], [width, height], size=(n_kernels, 2))
    drift = rng.normal(0.0, 0.05 * max(width, height) / max(epochs, 1), size=(n_kernels, 2))
    radius = rng.uniform(0.15, 0.4, size=n_kernels) * max(width, height)
    strength = rng.normal(0.0, 1.0, size=n_kernels)
    phase = rng.uniform(0, 2 * np.pi, size=n_kernels)
    yy, xx = np.mgrid[0:height, 0:width] + 0.5
    for e in range(epochs):
        c = centre + drift * e
        amp = strength * (1.0 + 0.3 * np.sin(phase + 2 * np.pi * e / 24.0))
        for k in range(n_kernels):
            dx, dy = xx - c[k, 0], yy - c[k, 1]
            psi = amp[k] * np.exp(-(dx ** 2 + dy ** 2) / (2 * radius[k] ** 2))
            # u = d(psi)/dy, v = -d(psi)/dx
            out[e, :, :, 0] += -dy / radius[k] ** 2 * psi
            out[e, :, :, 1] += dx / radius[k] ** 2 * psi
    peak = np.linalg.norm(out, axis=3).max()
    if peak > 0:
        out *= max_speed / peak
    return out


def synthetic_depth(seed: int, dims: tuple[int, int]) -> np.ndarray:
    """Smooth bathymetry in metres, roughly between 150 and 400."""
    height, width = dims
    rng = np.random.default_rng(seed + 7919)
    yy, xx = np.mgrid[0:height, 0:width] + 0.5
    depth = np.full((height, width), 300.0)
    for _ in range(4):
        cx, cy = rng.uniform(0, width), rng.uniform(0, height)
        r = rng.uniform(0.2, 0.5) * max(width, height)
        depth += rng.uniform(-150, 100) * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * r ** 2))
    return np.clip(depth, 50.0, 600.0)


def load_field(path: str) -> np.ndarray:
    """Field file: JSON ``{"epochs": [[[[vx, vy], ...row], ...], ...]}`` in m/s."""
    with open(path) as fh:
        data = json.load(fh)
    return np.asarray(data["epochs"] if isinstance(data, dict) else data, dtype=float)


def _axis_probs(mean: float, sigma: float, n: int, L: float) -> tuple[np.ndarray, np.ndarray]:
    """Cell probabilities along one axis with the tails folded into the boundary cells."""
    edges = (np.arange(1, n) * L - mean) / sigma
    cdf = np.concatenate(([0.0], ndtr(edges), [1.0]))
    p = np.diff(cdf)
    keep = np.flatnonzero(p >= PROB_FLOOR)
    if keep.size == 0:
        keep = np.array([int(np.argmax(p))])
    q = p[keep]
    return keep, q / q.sum()


def build_sample(current: np.ndarray, meta: dict) -> MdpSample:
    """Abstraction for one epoch's current field of shape (height, width, 2)."""
    w, h, L = meta["width"], meta["height"], meta["cell_size"]
    A = meta["headings"]
    S = w * h
    goal, start = meta["goal"], meta["start"]
    speed = np.linalg.norm(current, axis=2).reshape(-1)
    depth = np.asarray(meta["depth"], dtype=float).reshape(-1)
    entry = np.asarray(meta["entry_cost"], dtype=float).reshape(-1)
    cost = entry + meta["shallow_penalty"] * ((depth < meta["depth_limit"]) & (speed > meta["current_limit"]))
    ang = 2 * np.pi * np.arange(A) / A
    vg = meta["glider_speed"] * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    rows = [(goal, a, goal, 1.0, 0.0) for a in range(A)]
    for s in range(S):
        if s == goal:
            continue
        x, y = s % w, s // w
        vc = current[y, x]
        for a in range(A):
            mx = (x + 0.5) * L + (vg[a, 0] + vc[0]) * meta["dt"]
            my = (y + 0.5) * L + (vg[a, 1] + vc[1]) * meta["dt"]
            ix, px = _axis_probs(mx, meta["sigma"], w, L)
            iy, py = _axis_probs(my, meta["sigma"], h, L)
            succ = (iy[:, None] * w + ix[None, :]).reshape(-1)
            p = (py[:, None] * px[None, :]).reshape(-1)
            rows.extend((s, a, int(t), float(pp), float(cost[t])) for t, pp in zip(succ, p))
    return MdpSample.from_triples(S, A, start, (goal,), rows)


def _pick_endpoints(rng, w: int, h: int) -> tuple[int, int]:
    """Start and goal cells at least half the grid diagonal apart."""
    need = 0.5 * np.hypot(w - 1, h - 1)
    while True:
        a, b = rng.choice(w * h, size=2, replace=False)
        if np.hypot(a % w - b % w, a // w - b // w) >= need:
            return int(a), int(b)


def gen_glider(spec: GliderSpec, field: np.ndarray | None = None) -> Umdp:
    """Glider UMDP with one sample per current-field epoch."""
    rng = np.random.default_rng(spec.seed)
    dims = (spec.height, spec.width)
    if field is None:
        if spec.field == "synthetic":
            field = synthetic_current_field(spec.seed, dims, spec.epochs, spec.max_speed, spec.n_kernels)
        else:
            field = load_field(spec.field)
    field = np.asarray(field, dtype=float)
    if field.ndim != 4 or field.shape[1:] != (spec.height, spec.width, 2):
        raise ValueError(f"current field shape {field.shape} does not match grid {spec.height}x{spec.width}")
    start, goal = _pick_endpoints(rng, spec.width, spec.height)
    meta = {"domain": "glider", "width": spec.width, "height": spec.height, "cell_size": spec.cell_size,
            "glider_speed": spec.glider_speed, "dt": spec.dt, "sigma": spec.sigma, "headings": spec.headings,
            "shallow_penalty": spec.shallow_penalty, "depth_limit": spec.depth_limit,
            "current_limit": spec.current_limit, "start": start, "goal": goal, "seed": spec.seed,
            "entry_cost": rng.uniform(*spec.cost_range, size=dims),
            "depth": synthetic_depth(spec.seed, dims), "field": field}
    samples = [build_sample(field[e], meta) for e in range(field.shape[0])]
    labels = tuple(f"({s % spec.width},{s // spec.width})" for s in range(spec.width * spec.height))
    return Umdp.from_samples(samples, state_labels=labels,
                             action_labels=tuple(f"{int(round(360 * a / spec.headings))}deg"
                                                 for a in range(spec.headings)), meta=meta)


def draw_samples(rng, meta: dict, count: int) -> list[MdpSample]:
    """Test samples: interpolate between adjacent epochs, then add 2% speed noise."""
    field = np.asarray(meta["field"], dtype=float)
    E = field.shape[0]
    out = []
    for _ in range(count):
        pos = rng.uniform(0, E - 1) if E > 1 else 0.0
        lo = int(np.floor(pos))
        hi = min(lo + 1, E - 1)
        frac = pos - lo
        cur = (1 - frac) * field[lo] + frac * field[hi]
        speed = np.linalg.norm(cur, axis=2, keepdims=True)
        cur = cur + rng.normal(0.0, 1.0, size=cur.shape) * 0.02 * speed
        out.append(build_sample(cur, meta))
    return out


def gen_glider_pool(spec: GliderSpec, n_samples: int, field=None) -> Umdp:
    """Glider UMDP whose epochs are reduced to ``n_samples`` by coverage selection."""
    umdp = gen_glider(spec, field)
    if n_samples >= umdp.n_samples:
        return umdp
    return umdp.with_samples(select_samples(list(umdp.samples), n_samples))
