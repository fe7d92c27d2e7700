import numpy as np
import pytest

from conftest import chain_two_actions, deceptive_chain
from regret_umdp.errors import DivergenceError, ImproperPolicyError, StructureError
from regret_umdp.model import MdpSample, StationaryPolicy, Umdp, validate_umdp
from regret_umdp.oracles import random_proper_policy, random_ssp
from regret_umdp.solve import (cemr_eval, check_proper, evaluate_policy, expected_cost, optimal_values, q_gap,
                               q_gaps, regret_bellman_eval, regret_direct)


def det(actions, A=2):
    return StationaryPolicy.deterministic(np.array(actions), A)


def test_valid_minimal_chain(chain):
    assert validate_umdp(Umdp.from_samples([chain])) == []


def test_row_mass_violation_named():
    rows = [(0, 0, 1, 0.9, 1.0), (1, 0, 1, 1.0, 0.0)]
    smp = MdpSample.from_triples(2, 1, 0, (1,), rows)
    assert "sample 1: distribution mass 0.9 at (0,0)" in validate_umdp(Umdp.from_samples([smp]))


def test_unreachable_goal_in_second_sample(chain):
    trap = MdpSample.from_triples(2, 2, 0, (1,), [(0, 0, 0, 1.0, 1.0), (0, 1, 0, 1.0, 1.0),
                                                  (1, 0, 1, 1.0, 0.0), (1, 1, 1, 1.0, 0.0)])
    report = validate_umdp(Umdp.from_samples([chain, trap]))
    assert any(v.startswith("no proper policy in sample 2") for v in report)


def test_negative_cost_and_nonabsorbing_goal_rejected():
    rows = [(0, 0, 1, 1.0, -1.0), (1, 0, 0, 1.0, 0.0)]
    report = validate_umdp(Umdp.from_samples([MdpSample.from_triples(2, 1, 0, (1,), rows)]))
    assert any("negative cost" in v for v in report)
    assert any("not absorbing" in v for v in report)


def test_duplicate_transition_is_structural():
    with pytest.raises(StructureError):
        MdpSample.from_triples(2, 1, 0, (1,), [(0, 0, 1, 0.5, 1.0), (0, 0, 1, 0.5, 1.0)])


def test_expected_cost_by_hand():
    smp = MdpSample.from_triples(3, 1, 0, (1, 2), [(0, 0, 1, 0.5, 2.0), (0, 0, 2, 0.5, 4.0),
                                                   (1, 0, 1, 1.0, 0.0), (2, 0, 2, 1.0, 0.0)])
    assert expected_cost(smp, 0, 0) == 3.0
    assert expected_cost(smp, 1, 0) == 0.0


def test_expected_cost_missing_pair_raises(chain):
    sparse = chain.restrict_actions(np.array([[True, False], [True, True]]))
    with pytest.raises(StructureError):
        expected_cost(sparse, 0, 1)


def test_expected_cost_matches_summation(rng):
    smp = random_ssp(rng, 5, 3)
    for s, a in zip(*np.nonzero(smp.available)):
        succ, p, c = smp.row(s, a)
        assert expected_cost(smp, s, a) == pytest.approx(sum(pi * ci for pi, ci in zip(p, c)), abs=1e-12)


def test_optimal_values_chain(chain):
    V, pi = optimal_values(chain)
    assert V[0] == 1.0 and V[1] == 0.0
    assert pi.actions[0] == 0


def test_optimal_values_path_sum():
    rows = [(0, 0, 1, 1.0, 1.0), (1, 0, 2, 1.0, 1.0), (2, 0, 2, 1.0, 0.0)]
    V, _ = optimal_values(MdpSample.from_triples(3, 1, 0, (2,), rows))
    assert V[0] == pytest.approx(2.0)


def test_optimal_values_match_linear_solve(rng):
    for _ in range(20):
        smp = random_ssp(rng, 6, 3)
        V, pi = optimal_values(smp)
        assert np.allclose(evaluate_policy(smp, pi), V, atol=1e-8)
        # greedy in its own values: Bellman residual small
        q = smp.cbar + (smp.T @ V).reshape(6, 3)
        assert np.abs(np.where(smp.goal_mask, 0, q.min(axis=1)) - V).max() < 1e-8


def test_optimal_values_dead_end_names_state():
    rows = [(0, 0, 1, 1.0, 1.0), (1, 0, 1, 1.0, 1.0), (2, 0, 2, 1.0, 0.0)]
    with pytest.raises(DivergenceError) as exc:
        optimal_values(MdpSample.from_triples(3, 1, 0, (2,), rows))
    assert exc.value.state == 0


def test_evaluate_policy_examples(chain):
    assert evaluate_policy(chain, det([0, 0]))[0] == 1.0
    assert evaluate_policy(chain, det([1, 0]))[0] == 2.0
    mixed = StationaryPolicy([[0.5, 0.5], [1.0, 0.0]])
    assert evaluate_policy(chain, mixed)[0] == pytest.approx(1.5)


def test_evaluate_improper_policy_raises():
    rows = [(0, 0, 0, 1.0, 1.0), (0, 1, 1, 1.0, 1.0), (1, 0, 1, 1.0, 0.0), (1, 1, 1, 1.0, 0.0)]
    smp = MdpSample.from_triples(2, 2, 0, (1,), rows)
    with pytest.raises(ImproperPolicyError):
        evaluate_policy(smp, det([0, 0]))
    with pytest.raises(ImproperPolicyError):
        evaluate_policy(smp, det([0, 0]), method="iterate", max_iter=5000)


def test_check_proper_cases(chain):
    assert check_proper(chain, det([0, 0]))
    loop = MdpSample.from_triples(2, 2, 0, (1,), [(0, 0, 0, 1.0, 1.0), (0, 1, 1, 1.0, 1.0),
                                                  (1, 0, 1, 1.0, 0.0), (1, 1, 1, 1.0, 0.0)])
    assert not check_proper(loop, det([0, 0]))
    rows = [(g, 0, g, 1.0, 0.0) for g in (3,)]
    for s in range(3):
        rows += [(s, 0, (s + 1) % 3, 0.9, 1.0), (s, 0, 3, 0.1, 1.0)]
    assert check_proper(MdpSample.from_triples(4, 1, 0, (3,), rows), det([0, 0, 0, 0], 1))


def test_q_gap_examples(chain, rng):
    V, _ = optimal_values(chain)
    assert q_gap(chain, V, 0, 0) == 0.0
    assert q_gap(chain, V, 0, 1) == 1.0
    smp = random_ssp(rng, 7, 3)
    g = q_gaps(smp, optimal_values(smp)[0])
    assert g.min() >= -1e-8
    assert np.abs(g.min(axis=1)).max() <= 1e-8


def test_regret_examples(chain):
    assert regret_direct(chain, det([0, 0])) == 0.0
    assert regret_direct(chain, det([1, 0])) == 1.0
    assert np.all(regret_bellman_eval(chain, det([0, 0])) == 0.0)
    assert regret_bellman_eval(chain, det([1, 0]))[0] == pytest.approx(1.0)


def test_regret_bellman_matches_direct(rng):
    for _ in range(30):
        smp = random_ssp(rng, 6, 3)
        pi = random_proper_policy(rng, smp)
        reg = regret_bellman_eval(smp, pi)
        iterated = regret_bellman_eval(smp, pi, method="iterate", tol=1e-12)
        for s in range(smp.n_states):
            assert reg[s] == pytest.approx(regret_direct(smp, pi, s), abs=1e-6)
        assert np.allclose(reg, iterated, atol=1e-6)
        assert reg[smp.goal_mask].tolist() == [0.0]


def test_cemr_examples(chain):
    assert cemr_eval(chain, det([0, 0]))[0] == 0.0
    assert cemr_eval(chain, det([1, 0]))[0] == pytest.approx(1.0)


def test_cemr_differs_from_regret_on_deceptive_chain():
    smp = deceptive_chain()
    greedy = det([0, 0, 0, 0])  # cheapest first step
    assert cemr_eval(smp, greedy)[0] == pytest.approx(0.0)
    assert regret_direct(smp, greedy) == pytest.approx(10.1 - 1.0)


def test_goal_values_are_exact_zero(rng):
    smp = random_ssp(rng, 8, 2)
    pi = random_proper_policy(rng, smp)
    for table in (optimal_values(smp)[0], evaluate_policy(smp, pi), regret_bellman_eval(smp, pi),
                  cemr_eval(smp, pi)):
        assert np.all(table[smp.goal_mask] == 0.0)


def test_policy_check_reports_bad_rows(chain):
    bad = StationaryPolicy([[0.5, 0.4], [1.0, 0.0]])
    assert bad.check(chain.available)
