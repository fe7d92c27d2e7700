import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from regret_umdp.evaluation import adversary_value, max_regret
from regret_umdp.oracles import brute_force_minimax_regret, random_proper_policy, random_ssp, random_umdp
from regret_umdp.planners import PlannerConfig, minimax_regret_vi, robust_vi
from regret_umdp.solve import cemr_eval, evaluate_policy, optimal_values, regret_bellman_eval

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(2, 10), st.integers(1, 4))
def test_regret_recursion_matches_value_difference(seed, S, A):
    rng = np.random.default_rng(seed)
    smp = random_ssp(rng, S, A)
    pi = random_proper_policy(rng, smp)
    vstar = optimal_values(smp)[0]
    reg = regret_bellman_eval(smp, pi, vstar)
    assert np.allclose(reg, evaluate_policy(smp, pi) - vstar, atol=1e-8)
    assert (reg >= -1e-9).all()
    assert (cemr_eval(smp, pi) >= -1e-9).all()


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(3, 7), st.integers(2, 3), st.integers(1, 3))
def test_plan_regret_is_bounded_by_plan_value(seed, S, A, Q):
    u = random_umdp(np.random.default_rng(seed), S, A, Q)
    plan = minimax_regret_vi(u, 1, PlannerConfig(epsilon=1e-10))
    mr = max_regret(plan, u.samples)[0]
    assert 0.0 <= mr + 1e-9
    assert mr <= adversary_value(plan, u, 1) + 1e-8 <= plan.value + 2e-8


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(3, 5), st.integers(1, 3))
def test_brute_force_is_a_lower_bound_for_every_method(seed, S, Q):
    u = random_umdp(np.random.default_rng(seed), S, 2, Q)
    best, _ = brute_force_minimax_regret(u.samples)
    for policy in (robust_vi(u)[0], minimax_regret_vi(u, 1).to_stationary(2)):
        assert max_regret(policy, u.samples)[0] >= best - 1e-9
