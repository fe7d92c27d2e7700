"""Evaluating policies and option plans across sample sets."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, ImproperPolicyError
from .model import MdpSample, StationaryPolicy, Umdp, goal_reachable
from .options import option_rollout
from .planners import OptionPlan
from .solve import _linear_solve, evaluate_policy, optimal_values, policy_matrix

VALUE_TOL = 1e-10


def _plan_chain(plan: OptionPlan, sample: MdpSample, on_uncovered: str):
    """Option-level cost vector and transition matrix over anchors reachable from the start."""
    S = sample.n_states
    goal = sample.goal_mask
    cost = np.zeros(S)
    P = np.zeros((S, S))
    seen = {sample.initial}
    stack = [sample.initial]
    while stack:
        s = stack.pop()
        if goal[s]:
            continue
        vn, end = option_rollout(sample, plan.options[s], on_uncovered)
        cost[s], P[s] = vn, end
        for t in np.flatnonzero(end):
            if int(t) not in seen:
                seen.add(int(t))
                stack.append(int(t))
    return cost, P, np.array(sorted(seen))


def evaluate_option_plan(plan: OptionPlan, sample: MdpSample, on_uncovered: str = "error") -> float:
    """Exact expected cost at the initial state of executing ``plan`` in ``sample``.

    Each option runs for its horizon or until a goal; the plan then re-anchors
    at the current state.  Raises :class:`ImproperPolicyError` when the goal is
    not reached with probability one.
    """
    cost, P, _ = _plan_chain(plan, sample, on_uncovered)
    if not _proper_from(P, sample):
        raise ImproperPolicyError("option plan is improper in this sample")
    return float(_linear_solve(P, cost, sample.goal_mask)[sample.initial])


def _proper_from(P: np.ndarray, sample: MdpSample) -> bool:
    """Every state reachable from the start can still reach a goal."""
    reach = goal_reachable(P, sample.goal_mask)
    seen = np.zeros(sample.n_states, dtype=bool)
    seen[sample.initial] = True
    frontier = [sample.initial]
    while frontier:
        s = frontier.pop()
        for t in np.flatnonzero(P[s]):
            if not seen[t]:
                seen[t] = True
                frontier.append(int(t))
    return bool(reach[seen].all())


def policy_value(policy, sample: MdpSample, on_uncovered: str = "error") -> float:
    if isinstance(policy, OptionPlan):
        return evaluate_option_plan(policy, sample, on_uncovered)
    return float(evaluate_policy(sample, policy)[sample.initial])


def sample_regrets(policy, samples, on_uncovered: str = "error") -> np.ndarray:
    """Regret at the initial state in each sample (``inf`` where the policy is improper)."""
    out = np.empty(len(samples))
    for q, smp in enumerate(samples):
        try:
            v = policy_value(policy, smp, on_uncovered)
        except ImproperPolicyError:
            out[q] = np.inf
            continue
        out[q] = v - optimal_values(smp)[0][smp.initial]
    return out


def max_regret(policy, samples, on_uncovered: str = "error") -> tuple[float, int]:
    """``(max_q regret_q, argmax q)``; improper samples count as infinite regret."""
    regs = sample_regrets(policy, samples, on_uncovered)
    q = int(np.argmax(regs))
    return float(regs[q]), q


def block_model(policy, sample: MdpSample, n: int):
    """``n``-step cost ``V^n`` and end-state matrix under a policy, dense (S, S).

    For an :class:`OptionPlan` the blocks are its options (``n`` must match the
    plan's horizon); a stationary policy is run for ``n`` steps from each state.
    Goal rows are zero.
    """
    S = sample.n_states
    goal = sample.goal_mask
    if isinstance(policy, OptionPlan):
        if n != policy.n:
            raise ValueError(f"plan horizon {policy.n} does not match block length {n}")
        vn, M = np.zeros(S), np.zeros((S, S))
        for s, opt in policy.options.items():
            vn[s], M[s] = option_rollout(sample, opt, "error")
        return vn, M
    P, c = policy_matrix(sample, policy)
    P = P.toarray()
    P[goal] = 0.0
    P[goal, goal] = 1.0
    c = np.where(goal, 0.0, c)
    vn, M = np.zeros(S), np.eye(S)
    for _ in range(n):
        vn += M @ c
        M = M @ P
    M[goal] = 0.0
    return vn, M


def adversary_value(policy, umdp: Umdp, n: int = 1, tol: float = VALUE_TOL, max_iter: int = 1_000_000,
                    window: int = 1000) -> float:
    """Regret at the initial state when an adversary re-picks the sample every ``n`` steps.

    Iterates ``W(s) = max_q [C^n_q(s) + Σ M_q(s, s') W(s')]`` from zero, where
    ``C^n_q`` is the block's regret contribution measured against ``V*_q``.
    """
    goal = umdp.goal_mask
    blocks = []
    for smp in umdp.samples:
        vstar = optimal_values(smp)[0]
        vn, M = block_model(policy, smp, n)
        C = vn + M @ vstar - vstar
        C[goal] = 0.0
        blocks.append((C, M))
    W = np.zeros(umdp.n_states)
    best = np.inf
    for it in range(1, max_iter + 1):
        new = np.max([C + M @ W for C, M in blocks], axis=0)
        new[goal] = 0.0
        res = float(np.abs(new - W).max())
        W = new
        if res < tol * max(1.0, float(np.abs(W).max())):
            return float(W[umdp.initial])
        if it % window == 0:
            if not res < best:
                raise ImproperPolicyError(f"adversary value diverges (residual {res:.3g})")
            best = res
    raise ImproperPolicyError(f"adversary value did not converge in {max_iter} iterations")


def option_bellman_value(plan: OptionPlan, umdp: Umdp, kappa: float = 0.0) -> np.ndarray:
    """One option-level backup ``κ + max_q [C^o_q + Σ T^o_q reg]`` of the plan's own table."""
    goal = umdp.goal_mask
    out = np.zeros(umdp.n_states)
    terms = []
    for smp in umdp.samples:
        vstar = optimal_values(smp)[0]
        vn, M = block_model(plan, smp, plan.n)
        terms.append(vn + M @ vstar - vstar + M @ plan.reg)
    out[:] = np.max(terms, axis=0) + kappa
    out[goal] = 0.0
    return out


def adversarial_hitting_time(policy: StationaryPolicy, umdp: Umdp, tol: float = 1e-10,
                             max_iter: int = 1_000_000) -> np.ndarray:
    """Worst-case expected number of steps to a goal when the sample may change every step."""
    goal = umdp.goal_mask
    mats = []
    for smp in umdp.samples:
        P, _ = policy_matrix(smp, policy)
        mats.append(P)
    h = np.zeros(umdp.n_states)
    best = np.inf
    for it in range(1, max_iter + 1):
        new = 1.0 + np.max([P @ h for P in mats], axis=0)
        new[goal] = 0.0
        res = float(np.abs(new - h).max())
        h = new
        if res < tol * max(1.0, float(h.max())):
            return h
        if it % 1000 == 0:
            if not res < best:
                raise DivergenceError("expected hitting time is unbounded under some adversary")
            best = res
    raise DivergenceError("expected hitting time did not converge")


def sample_hitting_times(policy: StationaryPolicy, sample: MdpSample) -> np.ndarray:
    P, _ = policy_matrix(sample, policy)
    return _linear_solve(P, np.ones(sample.n_states), sample.goal_mask)


@dataclass
class BoundConstants:
    delta_c: float
    delta_t: float
    delta_v: float
    c_max: float
    horizon: float
    witnesses: dict = field(default_factory=dict)

    def bound(self) -> float:
        return adversary_gap_bound(self)


def adversary_gap_bound(bc: BoundConstants) -> float:
    """``(δ_C + 2 δ_V* + 2 δ_T C_max H) H``."""
    return (bc.delta_c + 2 * bc.delta_v + 2 * bc.delta_t * bc.c_max * bc.horizon) * bc.horizon


def bound_constants(umdp: Umdp, policy: StationaryPolicy, horizon: float | None = None) -> BoundConstants:
    """Tightest constants over sample pairs, with witness ``(i, j, s, a)`` for each maximum.

    When ``horizon`` is omitted it is the larger of twice the worst per-sample
    expected hitting time and the exact worst case over per-step adversaries.
    """
    avail = umdp.available
    Q = umdp.n_samples
    cb = np.stack([np.where(avail, q.cbar, 0.0) for q in umdp.samples])
    dense = [q.T.toarray().reshape(umdp.n_states, umdp.n_actions, umdp.n_states) for q in umdp.samples]
    vs = np.stack([optimal_values(q)[0] for q in umdp.samples])
    dc = (0.0, (0, 0, 0, 0))
    dt = (0.0, (0, 0, 0, 0))
    dv = (0.0, (0, 0, 0))
    for i in range(Q):
        for j in range(i + 1, Q):
            d = np.abs(cb[i] - cb[j])
            k = np.unravel_index(int(np.argmax(d)), d.shape)
            if d[k] > dc[0]:
                dc = (float(d[k]), (i, j, int(k[0]), int(k[1])))
            d = 0.5 * np.abs(dense[i] - dense[j]).sum(axis=2)
            k = np.unravel_index(int(np.argmax(d)), d.shape)
            if d[k] > dt[0]:
                dt = (float(d[k]), (i, j, int(k[0]), int(k[1])))
            d = np.abs(vs[i] - vs[j])
            k = int(np.argmax(d))
            if d[k] > dv[0]:
                dv = (float(d[k]), (i, j, k))
    k = np.unravel_index(int(np.argmax(cb)), cb.shape)
    c_max = float(cb[k])
    if horizon is None:
        per_sample = max(float(sample_hitting_times(policy, q).max()) for q in umdp.samples)
        worst = float(adversarial_hitting_time(policy, umdp).max())
        horizon = max(2.0 * per_sample, worst)
    return BoundConstants(dc[0], dt[0], dv[0], c_max, float(horizon),
                          {"delta_c": dc[1], "delta_t": dt[1], "delta_v": dv[1],
                           "c_max": (int(k[0]), int(k[1]), int(k[2]))})


def generalization_set(umdp: Umdp, count: int = 100, seed: int = 0) -> list[MdpSample]:
    """Fresh test samples drawn from the generator context recorded in ``umdp.meta``."""
    from .domains import resample

    return resample(umdp, count, seed)


@dataclass
class EvalReport:
    """One method's result on one instance."""

    seed: int
    domain: str
    size: str
    method: str
    n: int
    max_regret_train: float
    max_regret_test: float
    time_s: float
    status: str = "ok"
    normalized: float = float("nan")
    normalized_test: float = float("nan")
    train_regrets: list = field(default_factory=list, repr=False)


def normalize(reports: list[EvalReport]) -> None:
    """Divide each completed method's max regret by the worst completed one on the instance.

    If every completed method has zero max regret all of them score 1.
    """
    done = [r for r in reports if r.status == "ok"]
    for attr, out in (("max_regret_train", "normalized"), ("max_regret_test", "normalized_test")):
        vals = [getattr(r, attr) for r in done if np.isfinite(getattr(r, attr))]
        worst = max(vals) if vals else 0.0
        for r in done:
            v = getattr(r, attr)
            if not np.isfinite(v):
                setattr(r, out, 1.0)
            elif worst <= 0.0:
                setattr(r, out, 1.0)
            else:
                setattr(r, out, v / worst)
