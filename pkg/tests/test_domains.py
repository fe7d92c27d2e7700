import numpy as np
import pytest

from regret_umdp.domains import generate, prune_actions, resample
from regret_umdp.domains.disaster import BASE_COST, build_sample as disaster_sample
from regret_umdp.domains.glider import GliderSpec, build_sample as glider_sample, gen_glider, synthetic_current_field
from regret_umdp.domains.medical import MedicalSpec, gen_medical, state_index, terminal_cost
from regret_umdp.domains.sampling import parameter_vectors, select_indices
from regret_umdp.model import validate_umdp
from regret_umdp.solve import optimal_values


def row_dict(smp, s, a):
    succ, p, c = smp.row(s, a)
    return {int(t): (float(pp), float(cc)) for t, pp, cc in zip(succ, p, c)}


def test_disaster_interior_move():
    smp = disaster_sample(5, 5, 24, 0, {}, set())
    row = row_dict(smp, 12, 0)  # centre cell, heading east
    assert {t: p for t, (p, _) in row.items()} == pytest.approx({13: 0.8, 18: 0.1, 8: 0.1})
    assert all(c == BASE_COST for _, c in row.values())


def test_disaster_obstacle_and_swamp():
    smp = disaster_sample(5, 5, 24, 0, {13: 1.5}, {18})
    row = row_dict(smp, 12, 0)
    assert row[13] == pytest.approx((0.8, 1.5))
    assert row[18][0] == pytest.approx(0.05)
    assert row[12][0] == pytest.approx(0.05)


def test_disaster_samples_differ_only_in_regions():
    u = generate("disaster", seed=4, n_samples=5)
    regions = set()
    for r in u.meta["swamp_regions"] + u.meta["obstacle_regions"]:
        regions.update(r)
    for smp in u.samples[1:]:
        for s in range(u.n_states):
            for a in range(u.n_actions):
                a0, a1 = row_dict(u.samples[0], s, a), row_dict(smp, s, a)
                if a0 != a1:
                    assert (set(a0) | set(a1) | {s}) & regions
    assert not validate_umdp(u)


def test_medical_structure():
    spec = MedicalSpec(seed=2, n_samples=3)
    u = gen_medical(spec)
    assert u.n_states == 1 + 20 * 7 and u.n_actions == 3
    assert terminal_cost(19) == 0.0 and terminal_cost(0) == pytest.approx(2.95)
    last = state_index(0, 6, spec)
    assert row_dict(u.samples[0], last, 1) == {0: (1.0, pytest.approx(2.95))}
    mass = u.samples[1].row_mass
    assert np.allclose(mass[mass > 0], 1.0)
    assert u.initial == state_index(10, 0, spec)
    assert not validate_umdp(u)


def test_glider_mean_drift_is_480m_east():
    spec = GliderSpec(width=5, height=5, sigma=1.0, seed=0)
    u = gen_glider(spec, np.zeros((1, 5, 5, 2)))
    # 0.6 m/s for 800 s is 480 m, about one 500 m cell east of the centre
    s = next(c for c in (11, 6, 16) if c != u.meta["goal"])
    row = row_dict(u.samples[0], s, 0)
    assert list(row) == [s + 1] and row[s + 1][0] == pytest.approx(1.0)


def test_glider_rows_sum_to_one():
    u = generate("glider", seed=1, size=6, n_samples=3, epochs=4)
    mass = u.samples[0].row_mass
    assert np.allclose(mass[mass > 0], 1.0)
    assert not validate_umdp(u)


def test_current_field_properties():
    f1 = synthetic_current_field(3, (8, 8), epochs=5)
    assert np.array_equal(f1, synthetic_current_field(3, (8, 8), epochs=5))
    assert f1.shape == (5, 8, 8, 2)
    assert np.linalg.norm(f1, axis=3).max() == pytest.approx(0.25)
    step = np.abs(np.diff(f1, axis=1)).max()
    assert step < 0.25
    assert not synthetic_current_field(3, (8, 8), n_kernels=0).any()


def test_select_indices():
    v = np.arange(6, dtype=float)[:, None]
    assert select_indices(v, 6) == list(range(6))
    clusters = np.array([[0.0], [0.01], [5.0], [5.01], [10.0], [10.01]])
    picks = select_indices(clusters, 3)
    assert sorted(int(clusters[i, 0] // 5) for i in picks) == [0, 1, 2]
    dup = np.zeros((4, 2))
    assert len(set(select_indices(dup, 2))) == 2
    with pytest.raises(ValueError):
        select_indices(v, 7)


def test_coverage_selection_reduces_pool():
    u = generate("disaster", seed=1, n_samples=4, n_candidates=12)
    assert u.n_samples == 4
    assert parameter_vectors(list(u.samples)).shape[0] == 4


def test_prune_keeps_optimal_actions(rng):
    u = generate("disaster", seed=2, n_samples=4)
    p = prune_actions(u)
    assert p.available.sum() < u.available.sum()
    for smp, small in zip(u.samples, p.samples):
        assert optimal_values(small)[0] == pytest.approx(optimal_values(smp)[0], abs=1e-9)


@pytest.mark.parametrize("domain", ["disaster", "medical", "glider"])
def test_resample_is_valid_and_seeded(domain):
    kw = {"size": 5, "epochs": 3} if domain == "glider" else {}
    u = generate(domain, seed=0, n_samples=3, **kw)
    test = resample(u, 4, seed=1)
    assert len(test) == 4
    assert not validate_umdp(u.with_samples(test))
    again = resample(u, 4, seed=1)
    assert all(np.array_equal(a.probs, b.probs) and np.array_equal(a.costs, b.costs) for a, b in zip(test, again))
