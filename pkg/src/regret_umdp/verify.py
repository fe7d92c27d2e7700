"""Randomised property checks for the solvers, shared by the CLI and the test-suite."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .evaluation import (adversary_value, bound_constants, max_regret, option_bellman_value, adversary_gap_bound,
                         sample_hitting_times)
from .model import MdpSample, Umdp, validate_umdp
from .options import AnchorProblem, optimize_option_deterministic
from .oracles import (brute_force_minimax_regret, count_option_tables, enumerate_option_objective,
                      option_objective, random_factored, random_proper_policy, random_ssp, random_umdp)
from .planners import PlannerConfig, exact_independent_minimax_regret, minimax_regret_vi, robust_vi
from .solve import evaluate_policy, optimal_values, regret_bellman_eval


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(name, fn, *args, **kw) -> CheckResult:
    t0 = time.perf_counter()
    passed, detail = fn(*args, **kw)
    return CheckResult(name, bool(passed), detail, time.perf_counter() - t0)


def check_regret_bellman(count: int = 200, seed: int = 0, tol: float = 1e-6):
    """Q-gap recursion equals the difference of policy values at every state."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        smp = random_ssp(rng, int(rng.integers(2, 13)), int(rng.integers(1, 5)))
        pi = random_proper_policy(rng, smp)
        vstar = optimal_values(smp)[0]
        gap = np.abs(regret_bellman_eval(smp, pi, vstar) - (evaluate_policy(smp, pi) - vstar))
        worst = max(worst, float(gap.max()))
    return worst <= tol, f"{count} instances, max gap {worst:.2e} (tol {tol:g})"


def check_independent_exact(count: int = 20, seed: int = 0, kappa: float = 1e-6, epsilon: float = 1e-10):
    """One-step minimax VI over a product sample set versus brute force over stationary policies."""
    rng = np.random.default_rng(seed)
    cfg = PlannerConfig(epsilon=epsilon, kappa=kappa)
    tol = kappa * 20 + 1e-6
    worst, bad = 0.0, 0
    for _ in range(count):
        fact = random_factored(rng, int(rng.integers(2, 5)), 2, 2)
        plan = exact_independent_minimax_regret(fact, cfg)
        ref, _ = brute_force_minimax_regret(fact.product_samples())
        err = abs(plan.value - ref)
        worst = max(worst, err)
        bad += err > tol
    return bad == 0, f"{count} instances, {bad} outside tol {tol:.1e}, max gap {worst:.3g}"


def check_inner_exact(count: int = 50, seed: int = 0, limit: int = 1000, tol: float = 1e-10):
    """Branch-and-bound inner objective equals exhaustive enumeration.

    The table found by the search is re-scored with the enumeration's own
    evaluator and must reach the enumerated minimum exactly; the search's
    reported objective may differ only by summation-order rounding (``tol``).
    """
    rng = np.random.default_rng(seed)
    done, worst, missed = 0, 0.0, 0
    while done < count:
        S, A = int(rng.integers(3, 8)), int(rng.integers(2, 4))
        umdp = random_umdp(rng, S, A, int(rng.integers(1, 4)), max_succ=2)
        anchor, n = int(rng.integers(0, S - 1)), int(rng.integers(1, 4))
        problem = AnchorProblem(umdp, anchor, n)
        if not 2 <= count_option_tables(problem) <= limit:
            continue
        vstars = np.array([optimal_values(q)[0] for q in umdp.samples])
        reg = rng.uniform(0, 2, S)
        reg[list(umdp.goals)] = 0.0
        option, obj = optimize_option_deterministic(umdp, anchor, n, reg, vstars, 1e-4, problem=problem)
        ref, _ = enumerate_option_objective(umdp, anchor, n, reg, vstars, 1e-4, limit)
        missed += option_objective(umdp, option, reg, vstars, 1e-4) != ref
        worst = max(worst, abs(obj - ref))
        done += 1
    ok = missed == 0 and worst <= tol
    return ok, f"{count} inner problems, {missed} non-optimal tables, max |bnb - enumeration| {worst:.2e}"


def check_sandwich(count: int = 30, seed: int = 0):
    """0 <= per-step adversary regret - worst single-sample regret <= bound, for the robust policy."""
    rng = np.random.default_rng(seed)
    lo_ok = hi_ok = 0
    worst_ratio = 0.0
    for _ in range(count):
        umdp = random_umdp(rng, int(rng.integers(3, 9)), int(rng.integers(2, 4)), int(rng.integers(2, 5)))
        pi, _ = robust_vi(umdp, PlannerConfig(epsilon=1e-10))
        adv = adversary_value(pi, umdp, 1)
        mr, _ = max_regret(pi, umdp.samples)
        bound = adversary_gap_bound(bound_constants(umdp, pi))
        diff = adv - mr
        lo_ok += diff >= -1e-8
        hi_ok += diff <= bound + 1e-8
        if bound > 0:
            worst_ratio = max(worst_ratio, diff / bound)
    ok = lo_ok == count and hi_ok == count
    return ok, f"{count} instances, lower holds {lo_ok}, upper holds {hi_ok}, max gap/bound {worst_ratio:.3f}"


def check_option_consistency(count: int = 20, seed: int = 0, kappa: float = 1e-4, tol: float = 1e-8):
    """The planner's value at the start equals one option-level backup of its own plan."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        umdp = random_umdp(rng, int(rng.integers(3, 9)), int(rng.integers(2, 4)), int(rng.integers(1, 4)))
        n = int(rng.integers(1, 4))
        plan = minimax_regret_vi(umdp, n, PlannerConfig(epsilon=1e-11, kappa=kappa))
        recomputed = option_bellman_value(plan, umdp, kappa)[umdp.initial]
        worst = max(worst, abs(recomputed - plan.value))
    return worst <= tol, f"{count} instances, max |backup - value| {worst:.2e}"


def check_longer_options(count: int = 10, seed: int = 0, kappa: float = 1e-4):
    """Plan value with 2n-step options is at most the n-step value plus 2 kappa H."""
    rng = np.random.default_rng(seed)
    bad, worst = 0, -np.inf
    cfg = PlannerConfig(epsilon=1e-9, kappa=kappa)
    for _ in range(count):
        umdp = random_umdp(rng, int(rng.integers(3, 8)), 2, int(rng.integers(2, 4)), max_succ=2)
        for n in (1, 2):
            short = minimax_regret_vi(umdp, n, cfg)
            long = minimax_regret_vi(umdp, 2 * n, cfg)
            pi = minimax_regret_vi(umdp, 1, cfg).to_stationary(umdp.n_actions)
            H = 2 * max(float(sample_hitting_times(pi, q)[umdp.initial]) for q in umdp.samples)
            slack = long.value - short.value - 2 * kappa * H
            worst = max(worst, slack)
            bad += slack > 1e-9
    return bad == 0, f"{count} instances x n in (1, 2), {bad} violations, max excess {worst:.2e}"


def check_validator(inject_fault: bool = False, seed: int = 0):
    """Generated instances are valid; an instance with a 0.9-mass row is flagged."""
    rng = np.random.default_rng(seed)
    umdp = random_umdp(rng, 5, 2, 2)
    if inject_fault:
        umdp = _corrupt(umdp)
    clean = validate_umdp(umdp)
    corrupted = validate_umdp(_corrupt(random_umdp(rng, 5, 2, 2)))
    ok = not clean and any("distribution mass 0.9" in v for v in corrupted)
    detail = "valid instance accepted, corrupted row flagged" if ok else f"violations: {clean[:2]}"
    return ok, detail


def _corrupt(umdp: Umdp) -> Umdp:
    """Scale the first non-goal row of sample 1 to total mass 0.9."""
    smp = umdp.samples[0]
    goal = smp.goal_mask
    r = next(r for r in range(smp.n_states * smp.n_actions)
             if smp.indptr[r + 1] > smp.indptr[r] and not goal[r // smp.n_actions])
    probs = smp.probs.copy()
    lo, hi = smp.indptr[r], smp.indptr[r + 1]
    probs[lo:hi] *= 0.9 / probs[lo:hi].sum()
    bad = MdpSample(smp.n_states, smp.n_actions, smp.initial, smp.goals, smp.indptr, smp.indices, probs, smp.costs)
    return umdp.with_samples((bad,) + umdp.samples[1:])


def run_suite(seed: int = 0, quick: bool = False, inject_fault: bool = False) -> list[CheckResult]:
    scale = 0.25 if quick else 1.0
    k = lambda n: max(2, int(round(n * scale)))
    return [
        _timed("validator", check_validator, inject_fault, seed),
        _timed("regret_bellman_equivalence", check_regret_bellman, k(200), seed),
        _timed("independent_uncertainty_exactness", check_independent_exact, k(20), seed),
        _timed("inner_search_vs_enumeration", check_inner_exact, k(50), seed),
        _timed("adversary_bound_sandwich", check_sandwich, k(30), seed),
        _timed("option_backup_consistency", check_option_consistency, k(20), seed),
        _timed("longer_options_monotone", check_longer_options, k(10), seed),
    ]
