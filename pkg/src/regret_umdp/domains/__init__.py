"""Benchmark UMDP generators."""

from __future__ import annotations

import numpy as np

from ..model import Umdp
from . import disaster, glider, medical
from .disaster import DisasterSpec, gen_disaster
from .glider import GliderSpec, gen_glider, synthetic_current_field
from .medical import MedicalSpec, gen_medical
from .sampling import prune_actions, select_samples

DOMAINS = ("disaster", "medical", "glider")


def generate(domain: str, seed: int = 0, n_samples: int = 15, n_candidates: int | None = None,
             size: int | None = None, **kw) -> Umdp:
    """Build a benchmark UMDP; ``size`` sets the grid side for grid domains."""
    if domain == "disaster":
        if size is not None:
            kw.setdefault("width", size)
            kw.setdefault("height", size)
        return gen_disaster(DisasterSpec(n_samples=n_samples, n_candidates=n_candidates, seed=seed, **kw))
    if domain == "medical":
        return gen_medical(MedicalSpec(n_samples=n_samples, n_candidates=n_candidates, seed=seed, **kw))
    if domain == "glider":
        if size is not None:
            kw.setdefault("width", size)
            kw.setdefault("height", size)
        return glider.gen_glider_pool(GliderSpec(seed=seed, **kw), n_samples)
    raise ValueError(f"unknown domain {domain!r}; expected one of {DOMAINS}")


def resample(umdp: Umdp, count: int = 100, seed: int = 0):
    """Fresh samples from the generator context stored in ``umdp.meta``."""
    domain = umdp.meta.get("domain")
    modules = {"disaster": disaster, "medical": medical, "glider": glider}
    if domain not in modules:
        raise ValueError(f"UMDP has no generator context (domain={domain!r})")
    rng = np.random.default_rng([seed, int(umdp.meta.get("seed", 0)), 0x7E57])
    return modules[domain].draw_samples(rng, umdp.meta, count)


__all__ = ["DOMAINS", "DisasterSpec", "GliderSpec", "MedicalSpec", "gen_disaster", "gen_glider", "gen_medical",
           "generate", "prune_actions", "resample", "select_samples", "synthetic_current_field"]
