"""Random instance generators and brute-force reference computations.

These are slow by design and used by the property suite and the tests to
check the fast solvers.
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import ImproperPolicyError
from .model import FactoredUmdp, MdpSample, StationaryPolicy, Umdp
from .options import AnchorProblem, OptionPolicy, backward_induction
from .solve import evaluate_policy, optimal_values


def _random_row(rng, n_states, goal, n_succ, leak):
    succ = rng.choice(n_states, size=min(n_succ, n_states), replace=False)
    if leak and goal not in succ:
        succ = np.append(succ, goal)
    p = rng.dirichlet(np.ones(succ.size))
    if leak:
        # keep a guaranteed route to the goal
        gi = int(np.flatnonzero(succ == goal)[0])
        p = 0.9 * p
        p[gi] += 0.1
    return succ, p / p.sum()


def random_ssp(rng, n_states: int, n_actions: int, max_succ: int = 3, cost_range=(0.1, 2.0)) -> MdpSample:
    """Random SSP with goal ``n_states - 1`` and initial state 0.

    Action 0 always leaks probability 0.1 to the goal, so a proper policy
    exists; all costs are strictly positive so improper policies cost infinity.
    """
    goal = n_states - 1
    rows = [(goal, a, goal, 1.0, 0.0) for a in range(n_actions)]
    for s in range(n_states - 1):
        for a in range(n_actions):
            succ, p = _random_row(rng, n_states, goal, int(rng.integers(1, max_succ + 1)), leak=(a == 0))
            c = rng.uniform(*cost_range, size=succ.size)
            rows.extend(zip([s] * succ.size, [a] * succ.size, succ, p, c))
    return MdpSample.from_triples(n_states, n_actions, 0, (goal,), rows)


def random_proper_policy(rng, sample: MdpSample) -> StationaryPolicy:
    """Random stochastic policy with full support (proper when action 0 leaks to the goal)."""
    probs = np.zeros((sample.n_states, sample.n_actions))
    for s in range(sample.n_states):
        av = np.flatnonzero(sample.available[s])
        probs[s, av] = rng.dirichlet(np.ones(av.size))
    return StationaryPolicy(probs)


def random_umdp(rng, n_states: int, n_actions: int, n_samples: int, max_succ: int = 3,
                jitter: float = 0.5) -> Umdp:
    """Dependent-uncertainty UMDP: one support structure, per-sample probabilities and costs."""
    base = random_ssp(rng, n_states, n_actions, max_succ)
    samples = []
    goal = set(base.goals)
    for _ in range(n_samples):
        rows = []
        for s, a, t, p, c in base.triples():
            rows.append([s, a, t, p, c])
        arr = np.array(rows, dtype=float)
        free = np.array([int(r[0]) not in goal for r in rows])
        arr[free, 3] *= rng.uniform(1 - jitter, 1 + jitter, size=free.sum())
        arr[free, 4] *= rng.uniform(1 - jitter, 1 + jitter, size=free.sum())
        row_id = arr[:, 0] * n_actions + arr[:, 1]
        for r in np.unique(row_id):
            m = row_id == r
            arr[m, 3] /= arr[m, 3].sum()
        samples.append(MdpSample.from_triples(n_states, n_actions, 0, base.goals, arr.tolist()))
    return Umdp.from_samples(samples)


def random_factored(rng, n_states: int = 4, n_actions: int = 2, menu: int = 2,
                    max_succ: int = 2, cost_range=(0.1, 3.0)) -> FactoredUmdp:
    """Independent-uncertainty UMDP with ``menu`` choices per ``(s, a)``; goal is the last state."""
    goal = n_states - 1
    menus = {}
    for s in range(n_states - 1):
        for a in range(n_actions):
            choices = []
            for _ in range(menu):
                succ, p = _random_row(rng, n_states, goal, int(rng.integers(1, max_succ + 1)), leak=(a == 0))
                choices.append((succ, p, rng.uniform(*cost_range, size=succ.size)))
            menus[(s, a)] = choices
    return FactoredUmdp(n_states, n_actions, 0, (goal,), menus)


def deterministic_policies(umdp_or_sample):
    """All deterministic stationary policies over available actions (goal rows fixed to action 0)."""
    avail = umdp_or_sample.available
    goal = umdp_or_sample.goal_mask
    choices = [[0] if goal[s] else list(np.flatnonzero(avail[s])) for s in range(avail.shape[0])]
    for acts in itertools.product(*choices):
        yield StationaryPolicy.deterministic(np.array(acts), avail.shape[1])


def brute_force_minimax_regret(samples) -> tuple[float, StationaryPolicy]:
    """min over deterministic stationary policies of max over samples of regret at the initial state."""
    best, best_pi = np.inf, None
    vstars = [optimal_values(q)[0] for q in samples]
    for pi in deterministic_policies(samples[0]):
        worst = -np.inf
        for q, vs in zip(samples, vstars):
            try:
                v = evaluate_policy(q, pi)
            except ImproperPolicyError:
                worst = np.inf
                break
            worst = max(worst, float(v[q.initial] - vs[q.initial]))
            if worst >= best:
                break
        if worst < best:
            best, best_pi = worst, pi
    return best, best_pi


def option_tables(problem: AnchorProblem, limit: int = 1000):
    """Every deterministic table over the anchor problem's slots (raises if more than ``limit``)."""
    slots = problem.slots
    choices = []
    for t, layer in enumerate(problem.layers):
        choices.extend(list(av) for av in problem.avail[t])
    count = 1
    for c in choices:
        count *= len(c)
    if count > limit:
        raise ValueError(f"{count} candidate option tables exceed the limit {limit}")
    for acts in itertools.product(*choices):
        yield {slot: int(a) for slot, a in zip(slots, acts)}


def count_option_tables(problem: AnchorProblem) -> int:
    count = 1
    for t in range(problem.n):
        for av in problem.avail[t]:
            count *= len(av)
    return count


def enumerate_option_objective(umdp: Umdp, anchor: int, n: int, reg, vstars, kappa: float = 0.0,
                               limit: int = 1000):
    """Exhaustive minimum of the regret option objective using per-sample backward induction."""
    problem = AnchorProblem(umdp, anchor, n)
    if problem.is_goal:
        return 0.0, {}
    best, best_table = np.inf, None
    for table in option_tables(problem, limit):
        val = option_objective(umdp, OptionPolicy(anchor, n, table), reg, vstars)
        if val < best:
            best, best_table = val, table
    return best + kappa, best_table


def option_objective(umdp: Umdp, option: OptionPolicy, reg, vstars, kappa: float = 0.0) -> float:
    """Worst-sample regret option objective of one option, by per-sample backward induction."""
    val = -np.inf
    for q, smp in enumerate(umdp.samples):
        vn, c = backward_induction(smp, option, reg, vstars[q])
        val = max(val, vn + c - vstars[q][option.anchor])
    return val + kappa
