"""Single-sample SSP solvers: optimal values, policy evaluation, regret and CEMR.

All value tables are plain ``(n_states,)`` float arrays and are exactly zero
on goal states.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DivergenceError, ImproperPolicyError
from .model import MdpSample, StationaryPolicy, goal_reachable, union_adjacency

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 100_000
DIVERGENCE_WINDOW = 1000
TIE_TOL = 1e-10


def expected_cost(sample: MdpSample, s: int, a: int) -> float:
    succ, p, c = sample.row(s, a)
    return float(np.dot(p, c))


def bellman_q(sample: MdpSample, values: np.ndarray) -> np.ndarray:
    """``C̄(s,a) + Σ T(s,a,s') V(s')``; ``inf`` for unavailable actions."""
    return sample.cbar + (sample.T @ values).reshape(sample.n_states, sample.n_actions)


def greedy_actions(q: np.ndarray) -> np.ndarray:
    """Argmin per row, breaking near-ties towards the lowest action index."""
    qmin = q.min(axis=1, keepdims=True)
    tol = TIE_TOL * np.maximum(1.0, np.abs(np.where(np.isfinite(qmin), qmin, 0.0)))
    return np.argmax(q <= qmin + tol, axis=1)


def policy_matrix(sample: MdpSample, policy: StationaryPolicy) -> tuple[sp.csr_matrix, np.ndarray]:
    """State-to-state matrix ``P_pi`` and expected cost vector ``c_pi`` of a policy."""
    S, A = sample.n_states, sample.n_actions
    pi = policy.probs
    weights = sp.csr_matrix((pi.reshape(-1), (np.repeat(np.arange(S), A), np.arange(S * A))), shape=(S, S * A))
    P = (weights @ sample.T).tocsr()
    P.eliminate_zeros()
    c = np.where(pi > 0, sample.cbar, 0.0)
    return P, (pi * c).sum(axis=1)


def check_proper(sample: MdpSample, policy: StationaryPolicy) -> bool:
    """True iff every state reaches a goal with probability one under ``policy``."""
    P, _ = policy_matrix(sample, policy)
    return bool(goal_reachable(P, sample.goal_mask).all())


def fixed_point(P: sp.spmatrix, c: np.ndarray, goal_mask: np.ndarray, *, tol=DEFAULT_TOL,
                max_iter=DEFAULT_MAX_ITER, error=DivergenceError, start=None) -> np.ndarray:
    """Iterate ``x <- c + P x`` (goals pinned at 0) until the sup-norm residual < tol.

    Divergence is declared when the residual fails to shrink over a
    1000-iteration window, or when ``max_iter`` is reached.
    """
    c = np.where(goal_mask, 0.0, c)
    x = np.zeros_like(c) if start is None else np.array(start, dtype=float)
    window_res = np.inf
    for it in range(1, max_iter + 1):
        new = c + P @ x
        new[goal_mask] = 0.0
        diff = np.abs(new - x)
        res = diff.max() if diff.size else 0.0
        x = new
        if res < tol:
            return x
        if it % DIVERGENCE_WINDOW == 0:
            if not res < window_res:
                raise error(f"fixed-point iteration stalled (residual {res:.3g})", state=int(diff.argmax()))
            window_res = res
    raise error(f"no convergence within {max_iter} iterations", state=int(diff.argmax()))


def _linear_solve(P: sp.spmatrix, c: np.ndarray, goal_mask: np.ndarray) -> np.ndarray:
    free = np.flatnonzero(~goal_mask)
    out = np.zeros(goal_mask.size)
    if not free.size:
        return out
    M = sp.csr_matrix(P)[free][:, free]
    if free.size <= 1500:
        out[free] = np.linalg.solve(np.eye(free.size) - M.toarray(), c[free])
    else:
        out[free] = spla.spsolve((sp.identity(free.size, format="csc") - M).tocsc(), c[free])
    return out


def evaluate_policy(sample: MdpSample, policy: StationaryPolicy, tol=DEFAULT_TOL,
                    max_iter=DEFAULT_MAX_ITER, method: str = "linear") -> np.ndarray:
    """Value of ``policy`` in ``sample``.

    ``method="linear"`` solves the evaluation equations directly after a
    properness check; ``"iterate"`` runs fixed-point iteration.
    """
    P, c = policy_matrix(sample, policy)
    if method == "iterate":
        return fixed_point(P, c, sample.goal_mask, tol=tol, max_iter=max_iter, error=ImproperPolicyError)
    if not check_proper(sample, policy):
        raise ImproperPolicyError("policy is improper in this sample")
    return _linear_solve(P, c, sample.goal_mask)


def optimal_values(sample: MdpSample, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Optimal value table ``V*`` and a greedy deterministic policy ``π*``.

    Value iteration to the requested residual, followed by policy-iteration
    polishing of the greedy policy so ``V*`` is an exact policy value.
    Results for default arguments are memoised on the sample.
    """
    key = ("optimal", tol, max_iter)
    if key in sample._cache:
        return sample._cache[key]
    goal = sample.goal_mask
    reach = goal_reachable(union_adjacency(sample), goal)
    if not reach.all():
        dead = int(np.flatnonzero(~reach)[0])
        raise DivergenceError(f"state {dead} cannot reach a goal (dead end)", state=dead)
    V = np.zeros(sample.n_states)
    window_res = np.inf
    for it in range(1, max_iter + 1):
        new = bellman_q(sample, V).min(axis=1)
        new[goal] = 0.0
        diff = np.abs(new - V)
        res = diff.max()
        V = new
        if res < tol:
            break
        if it % DIVERGENCE_WINDOW == 0:
            if not res < window_res:
                raise DivergenceError(f"value iteration stalled (residual {res:.3g})", state=int(diff.argmax()))
            window_res = res
    else:
        raise DivergenceError(f"value iteration did not converge in {max_iter} iterations",
                              state=int(diff.argmax()))
    actions = greedy_actions(bellman_q(sample, V))
    for _ in range(100):
        pi = StationaryPolicy.deterministic(actions, sample.n_actions)
        if not check_proper(sample, pi):
            break
        P, c = policy_matrix(sample, pi)
        V_pi = _linear_solve(P, c, goal)
        q = bellman_q(sample, V_pi)
        cur = q[np.arange(sample.n_states), actions]
        improve = q.min(axis=1) < cur - TIE_TOL * np.maximum(1.0, np.abs(cur))
        V = V_pi
        if not improve.any():
            break
        actions = np.where(improve, q.argmin(axis=1), actions)
    actions = greedy_actions(bellman_q(sample, V))
    result = (V, StationaryPolicy.deterministic(actions, sample.n_actions))
    sample._cache[key] = result
    return result


def q_gaps(sample: MdpSample, v_star: np.ndarray) -> np.ndarray:
    """All Q-gaps ``[C̄(s,a) + Σ T V*(s')] - V*(s)`` as an ``(S, A)`` array."""
    return bellman_q(sample, v_star) - v_star[:, None]


def q_gap(sample: MdpSample, v_star: np.ndarray, s: int, a: int) -> float:
    succ, p, _ = sample.row(s, a)
    return expected_cost(sample, s, a) + float(np.dot(p, v_star[succ])) - float(v_star[s])


def _policy_average(policy: StationaryPolicy, table: np.ndarray) -> np.ndarray:
    return (policy.probs * np.where(policy.probs > 0, table, 0.0)).sum(axis=1)


def regret_direct(sample: MdpSample, policy: StationaryPolicy, state: int | None = None) -> float:
    """``V(s0, π) - V(s0, π*)`` from two value evaluations."""
    s = sample.initial if state is None else state
    V = evaluate_policy(sample, policy)
    v_star, _ = optimal_values(sample)
    return float(V[s] - v_star[s])


def _solve_recursion(sample, policy, P, c, tol, max_iter, method):
    if method == "iterate":
        return fixed_point(P, c, sample.goal_mask, tol=tol, max_iter=max_iter, error=ImproperPolicyError)
    if not check_proper(sample, policy):
        raise ImproperPolicyError("policy is improper in this sample")
    return _linear_solve(P, np.where(sample.goal_mask, 0.0, c), sample.goal_mask)


def regret_bellman_eval(sample: MdpSample, policy: StationaryPolicy, v_star=None,
                        tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, method: str = "linear") -> np.ndarray:
    """Regret table from the Q-gap recursion (linear solve or fixed-point iteration)."""
    if v_star is None:
        v_star, _ = optimal_values(sample)
    P, _ = policy_matrix(sample, policy)
    c = _policy_average(policy, q_gaps(sample, v_star))
    return _solve_recursion(sample, policy, P, c, tol, max_iter, method)


def cemr_eval(sample: MdpSample, policy: StationaryPolicy, tol=DEFAULT_TOL,
              max_iter=DEFAULT_MAX_ITER, method: str = "linear") -> np.ndarray:
    """Cumulative expected myopic regret: accumulates ``C̄(s,a) - C̄*(s)``."""
    P, _ = policy_matrix(sample, policy)
    c = _policy_average(policy, sample.cbar - sample.cbar_star[:, None])
    return _solve_recursion(sample, policy, P, c, tol, max_iter, method)
