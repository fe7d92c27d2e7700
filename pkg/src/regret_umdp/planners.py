"""Outer planners: minimax-regret value iteration over n-step options and baselines."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, NonConvergenceError, PlannerTimeout, UmdpError
from .model import FactoredUmdp, MdpSample, StationaryPolicy, Umdp
from .options import AnchorProblem, OptionPolicy
from .solve import DEFAULT_MAX_ITER, DEFAULT_TOL, DIVERGENCE_WINDOW, greedy_actions, optimal_values

log = logging.getLogger(__name__)


@dataclass
class PlannerConfig:
    epsilon: float = 1e-6
    kappa: float = 1e-4
    max_sweeps: int = 10_000
    node_budget: int = 10**7
    timeout: float | None = None
    vi_tol: float = DEFAULT_TOL
    vi_max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")

    def deadline(self) -> float | None:
        return None if self.timeout is None else time.monotonic() + self.timeout


@dataclass
class OptionPlan:
    """Chosen option per non-goal state plus the converged value table."""

    n: int
    initial: int
    options: dict
    reg: np.ndarray
    iterations: int = 0
    converged: bool = True
    policy_stable: bool = True
    objective: str = "reg"
    history: list = field(default_factory=list, repr=False)

    @property
    def value(self) -> float:
        return float(self.reg[self.initial])

    def to_stationary(self, n_actions: int) -> StationaryPolicy:
        """The equivalent stationary policy of a one-step plan."""
        if self.n != 1:
            raise ValueError("only one-step plans are stationary")
        acts = np.zeros(self.reg.size, dtype=np.int64)
        for s, opt in self.options.items():
            acts[s] = opt.table[(s, 0)]
        return StationaryPolicy.deterministic(acts, n_actions)


def _option_vi(umdp: Umdp, n: int, cfg: PlannerConfig, mode: str) -> OptionPlan:
    deadline = cfg.deadline()
    Q, S = umdp.n_samples, umdp.n_states
    goal = umdp.goal_mask
    vstars = np.array([optimal_values(q, cfg.vi_tol, cfg.vi_max_iter)[0] for q in umdp.samples])
    values = np.zeros(S)
    problems: dict[int, AnchorProblem] = {}
    options: dict[int, OptionPolicy] = {}
    last_input: dict[int, np.ndarray] = {}
    history = []
    for sweep in range(1, cfg.max_sweeps + 1):
        delta, changed = 0.0, False
        for s in range(S):
            if goal[s]:
                continue
            if deadline is not None and time.monotonic() > deadline:
                raise PlannerTimeout(f"planner exceeded {cfg.timeout} s during sweep {sweep}")
            prob = problems.get(s)
            if prob is None:
                prob = problems[s] = AnchorProblem(umdp, s, n)
            key = values[prob.terminal]
            if s in last_input and np.array_equal(last_input[s], key):
                continue
            last_input[s] = key.copy()
            if mode == "reg":
                cont = key[None, :] + vstars[:, prob.terminal]
                offset, stage = vstars[:, s], "cost"
            else:
                cont = np.broadcast_to(key, (Q, key.size))
                offset, stage = np.zeros(Q), "gap"
            opt, obj = prob.solve(stage, cont, offset, cfg.kappa, cfg.node_budget, warm=options.get(s))
            if not opt.same_table(options.get(s)):
                changed = True
            options[s] = opt
            new = max(obj, 0.0)
            delta = max(delta, abs(new - values[s]))
            values[s] = new
        history.append(delta)
        log.debug("sweep %d: delta %.3g", sweep, delta)
        if delta < cfg.epsilon:
            return OptionPlan(n, umdp.initial, options, values, sweep, True, not changed, mode, history)
    raise NonConvergenceError(f"no convergence after {cfg.max_sweeps} sweeps (last delta {delta:.3g})",
                              delta=delta)


def minimax_regret_vi(umdp: Umdp, n: int = 1, cfg: PlannerConfig | None = None) -> OptionPlan:
    """Gauss-Seidel minimax value iteration on regret with ``n``-step options.

    The returned plan's ``reg`` table holds the converged minimax regret values;
    ``plan.value`` is the value at the initial state.
    """
    return _option_vi(umdp, n, cfg or PlannerConfig(), "reg")


def cemr_minimax_vi(umdp: Umdp, n: int = 1, cfg: PlannerConfig | None = None) -> OptionPlan:
    """Same sweep as :func:`minimax_regret_vi` but accumulating the myopic gap ``C̄ - C̄*``."""
    return _option_vi(umdp, n, cfg or PlannerConfig(), "cemr")


def exact_independent_minimax_regret(factored: FactoredUmdp, cfg: PlannerConfig | None = None,
                                     limit: int = 100_000) -> OptionPlan:
    """One-step minimax regret VI where the adversary ranges over every menu combination."""
    return minimax_regret_vi(factored.to_umdp(limit), 1, cfg)


def robust_vi(umdp: Umdp, cfg: PlannerConfig | None = None):
    """Worst-case expected-cost VI: ``V(s) = min_a max_q [C̄_q + T_q V]``.

    Returns ``(StationaryPolicy, values)``; ties go to the lowest action index.
    """
    cfg = cfg or PlannerConfig()
    goal = umdp.goal_mask
    S, A = umdp.n_states, umdp.n_actions
    cbars = [q.cbar for q in umdp.samples]

    def q_table(V):
        out = np.full((S, A), -np.inf)
        for smp, cb in zip(umdp.samples, cbars):
            out = np.maximum(out, cb + (smp.T @ V).reshape(S, A))
        return out

    V = np.zeros(S)
    window = np.inf
    for it in range(1, cfg.vi_max_iter + 1):
        new = q_table(V).min(axis=1)
        new[goal] = 0.0
        res = float(np.abs(new - V).max())
        V = new
        if res < cfg.epsilon:
            break
        if it % DIVERGENCE_WINDOW == 0:
            if not res < window:
                raise NonConvergenceError(f"robust value iteration stalled (residual {res:.3g})", delta=res)
            window = res
    else:
        raise NonConvergenceError(f"robust value iteration did not converge in {cfg.vi_max_iter} iterations",
                                  delta=res)
    return StationaryPolicy.deterministic(greedy_actions(q_table(V)), A), V


def averaged_sample(umdp: Umdp) -> MdpSample:
    """Arithmetic-mean MDP over the samples with rows renormalised to sum to one.

    Transition probabilities are averaged over all samples (missing entries
    count as zero); transition costs are averaged over the samples that have
    the entry.
    """
    Q = umdp.n_samples
    acc: dict = {}
    for smp in umdp.samples:
        for s, a, t, p, c in smp.triples():
            e = acc.setdefault((s, a, t), [0.0, 0.0, 0])
            e[0] += p
            e[1] += c
            e[2] += 1
    mass: dict = {}
    for (s, a, _), (p, _, _) in acc.items():
        mass[(s, a)] = mass.get((s, a), 0.0) + p / Q
    rows = [(s, a, t, (p / Q) / mass[(s, a)], c / k) for (s, a, t), (p, c, k) in acc.items()]
    return MdpSample.from_triples(umdp.n_states, umdp.n_actions, umdp.initial, umdp.goals, rows)


def averaged_mdp_policy(umdp: Umdp, cfg: PlannerConfig | None = None) -> StationaryPolicy:
    cfg = cfg or PlannerConfig()
    try:
        return optimal_values(averaged_sample(umdp), cfg.vi_tol, cfg.vi_max_iter)[1]
    except DivergenceError as exc:
        raise DivergenceError(f"averaged MDP has no proper policy: {exc}", state=exc.state) from exc


def best_sample_policy(umdp: Umdp, cfg: PlannerConfig | None = None):
    """Among the per-sample optimal policies, the one with the lowest max regret.

    Returns ``(policy, max_regret, sample_index)``; ties go to the lowest index.
    """
    from .evaluation import max_regret

    cfg = cfg or PlannerConfig()
    best = (None, np.inf, -1)
    for q, smp in enumerate(umdp.samples):
        pi = optimal_values(smp, cfg.vi_tol, cfg.vi_max_iter)[1]
        score, worst_q = max_regret(pi, umdp.samples)
        if not np.isfinite(score):
            log.warning("optimal policy of sample %d is improper in sample %d; skipped", q + 1, worst_q + 1)
            continue
        if score < best[1]:
            best = (pi, score, q)
    if best[0] is None:
        raise UmdpError("every per-sample optimal policy is improper in some sample")
    return best
