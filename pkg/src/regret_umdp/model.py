"""Data model for sample-based SSP UMDPs.

An :class:`MdpSample` is one fully specified SSP MDP (costs and transitions)
stored sparsely by ``(state, action)`` row.  A :class:`Umdp` bundles an ordered
list of samples that share states, actions, initial state and goals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import StructureError

MASS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MdpSample:
    """One (cost, transition) instantiation of an SSP MDP.

    Row ``r = s * n_actions + a`` holds the successor distribution of ``(s, a)``
    in CSR form: ``indices[indptr[r]:indptr[r+1]]`` are successors and
    ``probs``/``costs`` the matching probabilities and transition costs.
    An empty row means the action is unavailable at that state.
    """

    n_states: int
    n_actions: int
    initial: int
    goals: tuple[int, ...]
    indptr: np.ndarray
    indices: np.ndarray
    probs: np.ndarray
    costs: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_triples(cls, n_states, n_actions, initial, goals, rows: Iterable[Sequence]) -> "MdpSample":
        """Build from ``(s, a, s', p, c)`` rows; zero-probability rows are dropped."""
        arr = [(int(s), int(a), int(t), float(p), float(c)) for s, a, t, p, c in rows]
        arr = [r for r in arr if r[3] != 0.0]
        if arr:
            s, a, t, p, c = (np.array(col) for col in zip(*arr))
        else:
            s = a = t = np.zeros(0, dtype=int)
            p = c = np.zeros(0)
        s, a, t = s.astype(np.int64), a.astype(np.int64), t.astype(np.int64)
        for name, idx, hi in (("state", s, n_states), ("action", a, n_actions), ("successor", t, n_states)):
            if idx.size and (idx.min() < 0 or idx.max() >= hi):
                raise StructureError(f"{name} index out of range")
        row = s * n_actions + a
        order = np.lexsort((t, row))
        row, t, p, c = row[order], t[order], p[order], c[order]
        dup = (np.diff(row) == 0) & (np.diff(t) == 0)
        if dup.any():
            k = int(np.flatnonzero(dup)[0])
            raise StructureError(
                f"duplicate transition ({row[k] // n_actions},{row[k] % n_actions},{t[k]})"
            )
        indptr = np.zeros(n_states * n_actions + 1, dtype=np.int64)
        np.cumsum(np.bincount(row, minlength=n_states * n_actions), out=indptr[1:])
        return cls(int(n_states), int(n_actions), int(initial), tuple(sorted(int(g) for g in goals)),
                   indptr, t, p, c)

    @classmethod
    def from_dense(cls, T, C, initial, goals) -> "MdpSample":
        """Build from dense ``(S, A, S)`` transition and cost arrays."""
        T = np.asarray(T, dtype=float)
        C = np.broadcast_to(np.asarray(C, dtype=float), T.shape)
        s, a, t = np.nonzero(T)
        rows = zip(s, a, t, T[s, a, t], C[s, a, t])
        return cls.from_triples(T.shape[0], T.shape[1], initial, goals, rows)

    # -- derived views -----------------------------------------------------

    @cached_property
    def T(self) -> sp.csr_matrix:
        shape = (self.n_states * self.n_actions, self.n_states)
        return sp.csr_matrix((self.probs, self.indices, self.indptr), shape=shape)

    @cached_property
    def row_ids(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_states * self.n_actions), np.diff(self.indptr))

    @cached_property
    def available(self) -> np.ndarray:
        return (np.diff(self.indptr) > 0).reshape(self.n_states, self.n_actions)

    @cached_property
    def cbar(self) -> np.ndarray:
        """Expected immediate cost per (s, a); ``inf`` where unavailable."""
        n = self.n_states * self.n_actions
        out = np.bincount(self.row_ids, weights=self.probs * self.costs, minlength=n)
        out[np.diff(self.indptr) == 0] = np.inf
        return out.reshape(self.n_states, self.n_actions)

    @cached_property
    def cbar_star(self) -> np.ndarray:
        """Best expected immediate cost per state (``C̄*``)."""
        return self.cbar.min(axis=1)

    @cached_property
    def goal_mask(self) -> np.ndarray:
        m = np.zeros(self.n_states, dtype=bool)
        m[list(self.goals)] = True
        return m

    @cached_property
    def row_mass(self) -> np.ndarray:
        mass = np.bincount(self.row_ids, weights=self.probs, minlength=self.n_states * self.n_actions)
        return mass.reshape(self.n_states, self.n_actions)

    def row(self, s: int, a: int):
        """Return ``(successors, probs, costs)`` views for ``(s, a)``."""
        r = s * self.n_actions + a
        lo, hi = self.indptr[r], self.indptr[r + 1]
        if lo == hi:
            raise StructureError(f"no transitions for (s={s}, a={a})")
        return self.indices[lo:hi], self.probs[lo:hi], self.costs[lo:hi]

    def triples(self):
        """Yield ``(s, a, s', p, c)`` for every stored transition."""
        A = self.n_actions
        for r in range(self.n_states * A):
            for k in range(self.indptr[r], self.indptr[r + 1]):
                yield r // A, r % A, int(self.indices[k]), float(self.probs[k]), float(self.costs[k])

    def restrict_actions(self, keep: np.ndarray) -> "MdpSample":
        """Copy with rows of ``(s, a)`` where ``keep[s, a]`` is False removed."""
        keep_rows = np.asarray(keep, dtype=bool).reshape(-1)
        lengths = np.diff(self.indptr)
        entry_keep = np.repeat(keep_rows, lengths)
        new_len = np.where(keep_rows, lengths, 0)
        indptr = np.zeros_like(self.indptr)
        np.cumsum(new_len, out=indptr[1:])
        return MdpSample(self.n_states, self.n_actions, self.initial, self.goals, indptr,
                         self.indices[entry_keep], self.probs[entry_keep], self.costs[entry_keep])


@dataclass(frozen=True, eq=False)
class Umdp:
    """Sample-based SSP UMDP: shared structure plus a list of samples."""

    n_states: int
    n_actions: int
    initial: int
    goals: tuple[int, ...]
    samples: tuple[MdpSample, ...]
    state_labels: tuple[str, ...] | None = None
    action_labels: tuple[str, ...] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "goals", tuple(sorted(int(g) for g in self.goals)))

    @classmethod
    def from_samples(cls, samples, **kw) -> "Umdp":
        first = samples[0]
        return cls(first.n_states, first.n_actions, first.initial, first.goals, tuple(samples), **kw)

    @cached_property
    def goal_mask(self) -> np.ndarray:
        m = np.zeros(self.n_states, dtype=bool)
        m[list(self.goals)] = True
        return m

    @cached_property
    def available(self) -> np.ndarray:
        """Action availability (taken as the union over samples)."""
        out = np.zeros((self.n_states, self.n_actions), dtype=bool)
        for q in self.samples:
            out |= q.available
        return out

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    def with_samples(self, samples, **meta_updates) -> "Umdp":
        meta = dict(self.meta)
        meta.update(meta_updates)
        return Umdp(self.n_states, self.n_actions, self.initial, self.goals, tuple(samples),
                    self.state_labels, self.action_labels, meta)


class StationaryPolicy:
    """Per-state action distribution, stored as an ``(S, A)`` array."""

    def __init__(self, probs):
        self.probs = np.asarray(probs, dtype=float)
        if self.probs.ndim != 2:
            raise ValueError("policy array must be (n_states, n_actions)")

    @classmethod
    def deterministic(cls, actions, n_actions: int) -> "StationaryPolicy":
        actions = np.asarray(actions, dtype=int)
        probs = np.zeros((actions.size, n_actions))
        probs[np.arange(actions.size), actions] = 1.0
        return cls(probs)

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    @property
    def is_deterministic(self) -> bool:
        return bool(np.all(np.isclose(self.probs.max(axis=1), 1.0)))

    @property
    def actions(self) -> np.ndarray:
        return self.probs.argmax(axis=1)

    def check(self, available: np.ndarray | None = None) -> list[str]:
        issues = []
        mass = self.probs.sum(axis=1)
        for s in np.flatnonzero(np.abs(mass - 1.0) > MASS_TOL):
            issues.append(f"policy row {s} sums to {mass[s]:.12g}")
        if np.any(self.probs < 0):
            issues.append("negative policy probability")
        if available is not None:
            bad = (self.probs > 0) & ~available
            for s, a in zip(*np.nonzero(bad)):
                issues.append(f"policy uses unavailable action {a} at state {s}")
        return issues

    def __repr__(self):
        if self.is_deterministic:
            return f"StationaryPolicy(actions={self.actions.tolist()})"
        return f"StationaryPolicy(probs={self.probs.tolist()})"


def goal_reachable(adjacency: sp.spmatrix, goal_mask: np.ndarray) -> np.ndarray:
    """States with a positive-probability path to a goal in ``adjacency`` (S x S)."""
    adj = sp.csr_matrix(adjacency, copy=True)
    adj.eliminate_zeros()
    rev = adj.T.tocsr()
    reach = goal_mask.copy()
    frontier = np.flatnonzero(reach)
    while frontier.size:
        hit = rev[frontier].indices
        new = np.unique(hit[~reach[hit]])
        reach[new] = True
        frontier = new
    return reach


def union_adjacency(sample: MdpSample) -> sp.csr_matrix:
    """State graph with an edge whenever some action moves s to s'."""
    rows = sample.row_ids // sample.n_actions
    data = np.ones(rows.size)
    return sp.csr_matrix((data, (rows, sample.indices)), shape=(sample.n_states, sample.n_states))


def validate_umdp(umdp: Umdp) -> list[str]:
    """Return a list of human-readable invariant violations (empty if valid).

    Besides structural checks this reports, per sample, whether a proper
    policy exists (every state can reach a goal under some action sequence).
    """
    out: list[str] = []
    S, A = umdp.n_states, umdp.n_actions
    if not umdp.goals:
        out.append("goal set is empty")
    if not 0 <= umdp.initial < S:
        out.append(f"initial state {umdp.initial} out of range")
    if any(not 0 <= g < S for g in umdp.goals):
        out.append("goal index out of range")
    if not umdp.samples:
        out.append("UMDP has no samples")
        return out
    ref_avail = umdp.samples[0].available
    for q, smp in enumerate(umdp.samples, start=1):
        tag = f"sample {q}"
        if (smp.n_states, smp.n_actions) != (S, A):
            out.append(f"{tag}: state/action space {smp.n_states}x{smp.n_actions} differs from {S}x{A}")
            continue
        if smp.initial != umdp.initial or tuple(smp.goals) != tuple(umdp.goals):
            out.append(f"{tag}: initial state or goals differ from the UMDP")
        if np.any(smp.probs < 0) or np.any(smp.probs > 1):
            out.append(f"{tag}: probability outside [0, 1]")
        if not np.all(np.isfinite(smp.costs)):
            out.append(f"{tag}: non-finite cost")
        if np.any(smp.costs < 0):
            out.append(f"{tag}: negative cost")
        mass = smp.row_mass
        bad = smp.available & (np.abs(mass - 1.0) > MASS_TOL)
        for s, a in zip(*np.nonzero(bad)):
            out.append(f"{tag}: distribution mass {mass[s, a]:.12g} at ({s},{a})")
        if not np.array_equal(smp.available, ref_avail):
            out.append(f"{tag}: action availability differs from sample 1")
        for s in range(S):
            if s in umdp.goals:
                for a in np.flatnonzero(smp.available[s]):
                    succ, p, c = smp.row(s, a)
                    if not (succ.size == 1 and succ[0] == s and p[0] == 1.0 and c[0] == 0.0):
                        out.append(f"{tag}: goal {s} is not absorbing with zero cost under action {a}")
            elif not smp.available[s].any():
                out.append(f"{tag}: state {s} has no available action")
        if umdp.goals and all(0 <= g < S for g in umdp.goals):
            reach = goal_reachable(union_adjacency(smp), smp.goal_mask)
            if not reach.all():
                out.append(f"no proper policy in sample {q} (goal unreachable from state {int(np.flatnonzero(~reach)[0])})")
    return out


@dataclass(frozen=True)
class FactoredUmdp:
    """Independent uncertainty: a menu of ``(succ, probs, costs)`` choices per ``(s, a)``.

    The sample set is the Cartesian product of the menus.  Goal states need no
    menu; they are given an absorbing zero-cost self-loop under every action.
    """

    n_states: int
    n_actions: int
    initial: int
    goals: tuple[int, ...]
    menus: dict

    def n_products(self) -> int:
        out = 1
        for choices in self.menus.values():
            out *= len(choices)
        return out

    def product_samples(self, limit: int = 100_000) -> list[MdpSample]:
        import itertools

        if self.n_products() > limit:
            raise ValueError(f"product sample set has {self.n_products()} members (limit {limit})")
        keys = sorted(self.menus)
        goal_rows = [(g, a, g, 1.0, 0.0) for g in self.goals for a in range(self.n_actions)]
        out = []
        for combo in itertools.product(*(range(len(self.menus[k])) for k in keys)):
            rows = list(goal_rows)
            for (s, a), j in zip(keys, combo):
                succ, p, c = self.menus[(s, a)][j]
                rows.extend((s, a, t, pp, cc) for t, pp, cc in zip(succ, p, c))
            out.append(MdpSample.from_triples(self.n_states, self.n_actions, self.initial, self.goals, rows))
        return out

    def to_umdp(self, limit: int = 100_000) -> Umdp:
        return Umdp.from_samples(self.product_samples(limit), meta={"factored": True})
