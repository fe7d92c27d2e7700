"""Coverage-based sample selection and action pruning."""

from __future__ import annotations

import numpy as np

from ..errors import UmdpError, ValidationError
from ..model import MdpSample, Umdp, validate_umdp
from ..solve import optimal_values


def parameter_vectors(samples) -> np.ndarray:
    """Flatten each sample's (probability, cost) entries over the union of supports."""
    S = samples[0].n_states
    keys = [smp.row_ids * S + smp.indices for smp in samples]
    union = np.unique(np.concatenate(keys))
    out = np.zeros((len(samples), 2 * union.size))
    for i, (smp, k) in enumerate(zip(samples, keys)):
        pos = np.searchsorted(union, k)
        out[i, pos] = smp.probs
        out[i, union.size + pos] = smp.costs
    return out


def select_indices(vectors: np.ndarray, k: int) -> list[int]:
    """Greedy k-center under the L-infinity distance, seeded nearest the centroid."""
    m = vectors.shape[0]
    if m == 0:
        raise ValueError("no candidates to select from")
    if not 0 < k <= m:
        raise ValueError(f"cannot select {k} of {m} candidates")
    centroid = vectors.mean(axis=0)
    first = int(np.argmin(np.abs(vectors - centroid).max(axis=1)))
    chosen = [first]
    dist = np.abs(vectors - vectors[first]).max(axis=1)
    while len(chosen) < k:
        dist[chosen] = -1.0
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.abs(vectors - vectors[nxt]).max(axis=1))
    return sorted(chosen)


def select_samples(candidates, k: int) -> list[MdpSample]:
    """``k`` candidates covering the parameter space, in their original order."""
    if not candidates:
        raise ValueError("no candidates to select from")
    return [candidates[i] for i in select_indices(parameter_vectors(candidates), k)]


def prune_actions(umdp: Umdp) -> Umdp:
    """Keep only actions chosen by some per-sample optimal policy; goal rows untouched."""
    keep = np.zeros((umdp.n_states, umdp.n_actions), dtype=bool)
    for smp in umdp.samples:
        acts = optimal_values(smp)[1].actions
        keep[np.arange(umdp.n_states), acts] = True
    keep[umdp.goal_mask] = True
    keep &= umdp.available
    empty = ~keep.any(axis=1) & ~umdp.goal_mask
    if empty.any():
        raise UmdpError(f"pruning removed every action at state {int(np.flatnonzero(empty)[0])}")
    pruned = umdp.with_samples([smp.restrict_actions(keep) for smp in umdp.samples], pruned=True)
    problems = validate_umdp(pruned)
    if problems:
        raise ValidationError(problems)
    return pruned
