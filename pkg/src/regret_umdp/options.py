"""n-step options: reachable sets, per-sample backups and the inner minimax solve.

An option anchored at ``s̄`` follows a deterministic table ``(state, t) -> action``
for ``n`` steps or until a goal is entered.  The inner problem picks the table
minimising the worst case over samples of

    V^n_q(s̄) + c_q(s̄) - offset_q

where ``V^n_q`` is the expected ``n``-step stage cost and ``c_q`` the expected
continuation value at the states where the option ends.  With stage cost
``C̄_q``, continuation ``reg + V*_q`` and offset ``V*_q(s̄)`` this is the regret
backup; with the myopic gap as stage cost and ``cemr`` as continuation it is the
CEMR backup.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import CoverageError, SearchBudgetExceeded, StructureError
from .model import MdpSample, Umdp

DEFAULT_KAPPA = 1e-4
DEFAULT_NODE_BUDGET = 10**7


@dataclass(frozen=True, eq=False)
class OptionPolicy:
    """Deterministic non-stationary option policy anchored at ``anchor``."""

    anchor: int
    horizon: int
    table: dict = field(default_factory=dict)
    objective: float | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("option horizon must be >= 1")

    def action(self, s: int, t: int) -> int:
        try:
            return self.table[(s, t)]
        except KeyError:
            raise StructureError(f"option at {self.anchor}: no action for state {s} at step {t}") from None

    def rows(self) -> list[list[int]]:
        return [[s, t, a] for (s, t), a in sorted(self.table.items(), key=lambda kv: (kv[0][1], kv[0][0]))]

    def same_table(self, other: "OptionPolicy | None") -> bool:
        return other is not None and self.table == other.table


@dataclass(frozen=True)
class ReachableSets:
    """``sets[q][t]``: states reachable in exactly ``t`` steps from the anchor in sample ``q``."""

    anchor: int
    horizon: int
    sets: tuple

    def union(self, t: int) -> list[int]:
        out = set()
        for per_sample in self.sets:
            out |= per_sample[t]
        return sorted(out)


def _successors(sample: MdpSample, s: int) -> np.ndarray:
    A = sample.n_actions
    return sample.indices[sample.indptr[s * A]:sample.indptr[(s + 1) * A]]


def reachable_sets(umdp: Umdp, anchor: int, n: int) -> ReachableSets:
    if n < 1:
        raise ValueError("n must be >= 1")
    goal = umdp.goal_mask
    per_sample = []
    for smp in umdp.samples:
        layers = [frozenset([anchor])]
        for _ in range(n - 1):
            nxt = set()
            for s in layers[-1]:
                if goal[s]:
                    nxt.add(s)
                else:
                    nxt.update(int(x) for x in _successors(smp, s))
            layers.append(frozenset(nxt))
        per_sample.append(tuple(layers))
    return ReachableSets(anchor, n, tuple(per_sample))


def backward_induction(sample: MdpSample, option: OptionPolicy, reg: np.ndarray, v_star: np.ndarray,
                       anchor: int | None = None, n: int | None = None, *,
                       stage_costs: np.ndarray | None = None, continuation: np.ndarray | None = None):
    """Exact ``(V^n_q(s̄, 0), c_q(s̄, 0))`` for one sample by memoised recursion.

    ``stage_costs`` (S, A) defaults to ``C̄_q``; ``continuation`` (S,) defaults to
    ``reg + V*_q``.  Goals contribute zero to both terms.
    """
    anchor = option.anchor if anchor is None else anchor
    n = option.horizon if n is None else n
    goal = sample.goal_mask
    g = sample.cbar if stage_costs is None else stage_costs
    h = (np.asarray(reg) + np.asarray(v_star)) if continuation is None else np.asarray(continuation)
    memo: dict = {}

    def visit(s, t):
        if goal[s]:
            return 0.0, 0.0
        key = (s, t)
        if key in memo:
            return memo[key]
        a = option.action(s, t)
        succ, p, _ = sample.row(s, a)
        vn = float(g[s, a])
        if t == n - 1:
            c = float(np.dot(p, np.where(goal[succ], 0.0, h[succ])))
        else:
            c = 0.0
            for j, pj in zip(succ, p):
                v_j, c_j = visit(int(j), t + 1)
                vn += pj * v_j
                c += pj * c_j
        memo[key] = (vn, c)
        return vn, c

    return visit(anchor, 0)


def option_rollout(sample: MdpSample, option: OptionPolicy, on_uncovered: str = "error"):
    """Forward pass: expected ``n``-step cost and end-state distribution.

    With ``on_uncovered="terminate"`` the option stops at a state its table does
    not cover (after the first step) instead of raising :class:`CoverageError`.
    """
    goal = sample.goal_mask
    dist = {option.anchor: 1.0}
    end = np.zeros(sample.n_states)
    vn = 0.0
    for t in range(option.horizon):
        nxt: dict = defaultdict(float)
        for s, m in dist.items():
            if goal[s]:
                end[s] += m
                continue
            a = option.table.get((s, t))
            if a is None:
                if on_uncovered == "terminate" and t > 0:
                    end[s] += m
                    continue
                raise CoverageError(option.anchor, s, t)
            succ, p, c = sample.row(s, a)
            vn += m * float(np.dot(p, c))
            for j, pj in zip(succ, p):
                nxt[int(j)] += m * pj
        dist = nxt
    for s, m in dist.items():
        end[s] += m
    return vn, end


def option_cost_and_transition(sample: MdpSample, option: OptionPolicy, v_star: np.ndarray | None = None,
                               on_uncovered: str = "error"):
    """Option-level cost ``C^o`` and transition ``T^o`` (dense over states) in one sample."""
    if v_star is None:
        from .solve import optimal_values
        v_star, _ = optimal_values(sample)
    vn, end = option_rollout(sample, option, on_uncovered)
    cost = vn + float(end @ v_star) - float(v_star[option.anchor])
    return cost, end


class AnchorProblem:
    """Inner minimax problem for one anchor, compiled for repeated solves.

    The reachable structure (slot layers, sparse successor lists) depends only
    on the UMDP, so it is built once and reused across value-iteration sweeps.
    Slots are ordered by ascending step then ascending state index.
    """

    def __init__(self, umdp: Umdp, anchor: int, n: int):
        self.anchor, self.n = anchor, n
        self.n_samples = Q = umdp.n_samples
        A = self.n_actions = umdp.n_actions
        goal = umdp.goal_mask
        self.is_goal = bool(goal[anchor])
        rs = reachable_sets(umdp, anchor, n)
        self.layers = [np.array([s for s in rs.union(t) if not goal[s]], dtype=np.int64) for t in range(n)]
        term = set()
        for q, smp in enumerate(umdp.samples):
            for s in rs.sets[q][n - 1]:
                if not goal[s]:
                    term.update(int(x) for x in _successors(smp, s))
        self.terminal = np.array(sorted(s for s in term if not goal[s]), dtype=np.int64)
        avail = umdp.available
        self.avail = [[np.flatnonzero(avail[s]) for s in layer] for layer in self.layers]
        self.reach, self.cost, self.gap, self.edges = [], [], [], []
        for t, layer in enumerate(self.layers):
            cols = self.layers[t + 1] if t < n - 1 else self.terminal
            colmap = {int(s): j for j, s in enumerate(cols)}
            L = layer.size
            reach = np.zeros((Q, L), dtype=bool)
            for q in range(Q):
                members = rs.sets[q][t]
                reach[q] = [int(s) in members for s in layer]
            self.reach.append(reach)
            self.cost.append(np.stack([smp.cbar[layer] for smp in umdp.samples]) if L else np.zeros((Q, 0, A)))
            self.gap.append(np.stack([smp.cbar[layer] - smp.cbar_star[layer, None] for smp in umdp.samples])
                            if L else np.zeros((Q, 0, A)))
            qi, ii, ai, ci, pi = [], [], [], [], []
            for q, smp in enumerate(umdp.samples):
                for i, s in enumerate(layer):
                    for a in self.avail[t][i]:
                        r = s * A + a
                        lo, hi = smp.indptr[r], smp.indptr[r + 1]
                        for k in range(lo, hi):
                            j = colmap.get(int(smp.indices[k]))
                            if j is not None:
                                qi.append(q), ii.append(i), ai.append(a), ci.append(j), pi.append(smp.probs[k])
            qi, ii, ai, ci = (np.array(x, dtype=np.int64) for x in (qi, ii, ai, ci))
            self.edges.append(dict(q=qi, i=ii, a=ai, col=ci, p=np.array(pi, dtype=float),
                                   seg=(qi * L + ii) * A + ai, ncols=cols.size))

    @property
    def slots(self) -> list[tuple[int, int]]:
        return [(int(s), t) for t, layer in enumerate(self.layers) for s in layer]

    # -- dynamic programming helpers --------------------------------------

    def _backup(self, t: int, w_next: np.ndarray) -> np.ndarray:
        """``Σ_s' P_q(s,a,s') w_next_q(s')`` for layer ``t`` as a (Q, L, A) array."""
        e = self.edges[t]
        L, A, Q = self.layers[t].size, self.n_actions, self.n_samples
        flat = np.bincount(e["seg"], weights=e["p"] * w_next[e["q"], e["col"]], minlength=Q * L * A)
        return flat.reshape(Q, L, A)

    def _advance(self, t: int, occ: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Occupancy over layer ``t+1`` (or terminal states) under ``actions``."""
        e = self.edges[t]
        sel = actions[e["i"]] == e["a"]
        q, col = e["q"][sel], e["col"][sel]
        w = e["p"][sel] * occ[q, e["i"][sel]]
        ncols = e["ncols"]
        return np.bincount(q * ncols + col, weights=w, minlength=self.n_samples * ncols).reshape(
            self.n_samples, ncols)

    def _tables(self, stage: str, cont_term: np.ndarray):
        stage_arr = self.cost if stage == "cost" else self.gap
        qv, wmin = [None] * self.n, [None] * self.n
        w = cont_term
        for t in reversed(range(self.n)):
            qv[t] = stage_arr[t] + self._backup(t, w)
            wmin[t] = qv[t].min(axis=2) if self.layers[t].size else np.zeros((self.n_samples, 0))
            w = wmin[t]
        return stage_arr, qv, wmin

    def _stage_sum(self, stage_arr, t, occ, actions):
        L = self.layers[t].size
        if not L:
            return np.zeros(self.n_samples)
        g = stage_arr[t][:, np.arange(L), actions]
        return (occ * np.where(occ > 0, g, 0.0)).sum(axis=1)

    def _evaluate(self, stage_arr, cont_term, offset, actions) -> np.ndarray:
        occ = np.ones((self.n_samples, 1))
        total = -np.asarray(offset, dtype=float).copy()
        for t in range(self.n):
            total = total + self._stage_sum(stage_arr, t, occ, actions[t])
            occ = self._advance(t, occ, actions[t])
        return total + (occ * cont_term).sum(axis=1)

    def _table(self, actions) -> dict:
        return {(int(s), t): int(a) for t, layer in enumerate(self.layers) for s, a in zip(layer, actions[t])}

    def _actions_from_table(self, table, default):
        return [np.array([table.get((int(s), t), d) for s, d in zip(layer, default[t])], dtype=np.int64)
                for t, layer in enumerate(self.layers)]

    # -- public entry points ------------------------------------------------

    def objective_of(self, table: dict, stage: str, cont_term, offset, kappa: float = 0.0) -> float:
        stage_arr = self.cost if stage == "cost" else self.gap
        actions = [np.array([table[(int(s), t)] for s in layer], dtype=np.int64)
                   for t, layer in enumerate(self.layers)]
        return float(self._evaluate(stage_arr, np.asarray(cont_term, float), offset, actions).max()) + kappa

    def node_bound(self, assigned: dict, stage: str, cont_term, offset, kappa: float = 0.0) -> float:
        """Lower bound over all completions of a partial assignment.

        Layers are processed in order; the first layer that is not fully
        assigned uses the per-sample optimal completion for its free slots.
        """
        stage_arr, qv, wmin = self._tables(stage, np.asarray(cont_term, float))
        occ = np.ones((self.n_samples, 1))
        total = -np.asarray(offset, dtype=float).copy()
        for t, layer in enumerate(self.layers):
            keys = [(int(s), t) for s in layer]
            if all(k in assigned for k in keys):
                acts = np.array([assigned[k] for k in keys], dtype=np.int64)
                total = total + self._stage_sum(stage_arr, t, occ, acts)
                occ = self._advance(t, occ, acts)
                continue
            for i, k in enumerate(keys):
                val = qv[t][:, i, assigned[k]] if k in assigned else wmin[t][:, i]
                total = total + occ[:, i] * np.where(occ[:, i] > 0, val, 0.0)
            return float(total.max()) + kappa
        return float((total + (occ * cont_term).sum(axis=1)).max()) + kappa

    def solve(self, stage: str, cont_term: np.ndarray, offset: np.ndarray, kappa: float = DEFAULT_KAPPA,
              node_budget: int = DEFAULT_NODE_BUDGET, warm: OptionPolicy | None = None):
        """Exact minimax option table by depth-first branch-and-bound.

        Returns ``(OptionPolicy, objective)`` where the objective includes
        ``kappa``.  Slots with zero occupancy in every sample under the partial
        policy do not affect the objective and receive a default action.
        """
        if self.is_goal:
            return OptionPolicy(self.anchor, self.n, {}, 0.0), 0.0
        cont_term = np.asarray(cont_term, dtype=float)
        offset = np.asarray(offset, dtype=float)
        stage_arr, qv, wmin = self._tables(stage, cont_term)
        n = self.n

        default = []
        for t in range(n):
            d = np.empty(self.layers[t].size, dtype=np.int64)
            for i, av in enumerate(self.avail[t]):
                r = self.reach[t][:, i]
                worst = qv[t][r][:, i, av].max(axis=0) if r.any() else qv[t][:, i, av].max(axis=0)
                d[i] = av[int(np.argmin(worst))]
            default.append(d)

        candidates = []
        for q in range(self.n_samples):
            acts = []
            for t in range(n):
                a = np.array([av[int(np.argmin(qv[t][q, i, av]))] for i, av in enumerate(self.avail[t])],
                             dtype=np.int64)
                acts.append(a)
            candidates.append(acts)
        if warm is not None and warm.horizon == n:
            candidates.insert(0, self._actions_from_table(warm.table, default))
        best_val, best = np.inf, None
        for acts in candidates:
            v = float(self._evaluate(stage_arr, cont_term, offset, acts).max())
            if v < best_val:
                best_val, best = v, [a.copy() for a in acts]

        state = {"inc": best_val, "best": best, "nodes": 0}
        chosen = [d.copy() for d in default]

        def layer(t, occ, fixed):
            active = np.flatnonzero(occ.max(axis=0) > 0) if occ.size else np.zeros(0, dtype=np.int64)
            chosen[t][:] = default[t]
            base = fixed + (occ * wmin[t]).sum(axis=1) if occ.size else fixed
            deltas = [occ[:, i, None] * (qv[t][:, i, self.avail[t][i]] - wmin[t][:, i, None]) for i in active]

            def rec(k, bound):
                state["nodes"] += 1
                if state["nodes"] > node_budget:
                    raise SearchBudgetExceeded(
                        f"inner search exceeded {node_budget} nodes at anchor {self.anchor}",
                        table=self._table(state["best"]), objective=state["inc"] + kappa)
                if k == len(active):
                    if t == n - 1:
                        val = float(bound.max())
                        if val < state["inc"]:
                            state["inc"], state["best"] = val, [c.copy() for c in chosen]
                    else:
                        nf = fixed + self._stage_sum(stage_arr, t, occ, chosen[t])
                        layer(t + 1, self._advance(t, occ, chosen[t]), nf)
                    return
                i = active[k]
                cand = bound[:, None] + deltas[k]
                m = cand.max(axis=0)
                av = self.avail[t][i]
                for j in np.argsort(m, kind="stable"):
                    if m[j] >= state["inc"] - 1e-12 * max(1.0, abs(state["inc"])):
                        break
                    chosen[t][i] = av[j]
                    rec(k + 1, cand[:, j])
                chosen[t][i] = default[t][i]

            rec(0, base)

        layer(0, np.ones((self.n_samples, 1)), -offset)
        best = state["best"]
        objective = float(self._evaluate(stage_arr, cont_term, offset, best).max()) + kappa
        self.last_nodes = state["nodes"]
        return OptionPolicy(self.anchor, n, self._table(best), objective), objective


def optimize_option_deterministic(umdp: Umdp, anchor: int, n: int, reg: np.ndarray, v_stars,
                                  kappa: float = DEFAULT_KAPPA, node_budget: int = DEFAULT_NODE_BUDGET,
                                  problem: AnchorProblem | None = None, warm: OptionPolicy | None = None):
    """Deterministic time-indexed option minimising worst-case regret contribution.

    ``v_stars`` is a (Q, S) array of per-sample optimal values.  Returns
    ``(OptionPolicy, objective)``; the objective includes ``kappa``.
    """
    problem = problem or AnchorProblem(umdp, anchor, n)
    v_stars = np.asarray(v_stars, dtype=float)
    cont = np.asarray(reg, dtype=float)[None, problem.terminal] + v_stars[:, problem.terminal]
    return problem.solve("cost", cont, v_stars[:, anchor], kappa, node_budget, warm)
