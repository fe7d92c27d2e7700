import numpy as np
import pytest

from regret_umdp.experiment import ExperimentConfig, MethodSpec, read_results, run_experiment


def small_config(**kw):
    base = dict(domain="disaster", sizes=[4], seeds=[0, 1], n_samples=3, test_samples=5,
                methods=["reg:1", "robust"], timeout=None)
    base.update(kw)
    return ExperimentConfig.from_dict(base)


def test_method_parse():
    assert MethodSpec.parse("reg:2").label == "reg(n=2)"
    assert MethodSpec.parse({"name": "robust"}).label == "robust"
    with pytest.raises(ValueError):
        MethodSpec.parse("nope")


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"domian": "disaster"})
    assert ExperimentConfig.from_dict({"seeds": 3}).seeds == [0, 1, 2]


def test_single_method_normalizes_to_one():
    reports, summary = run_experiment(small_config(methods=["reg:1"]))
    assert all(r.normalized == 1.0 for r in reports)
    assert summary["normalized"]["reg(n=1)"]["mean"] == 1.0


def test_outputs_round_trip(tmp_path):
    reports, summary = run_experiment(small_config(), tmp_path)
    rows = read_results(tmp_path / "results.csv")
    assert len(rows) == len(reports) == 4
    for row, r in zip(rows, reports):
        assert row["method"] == r.method and row["max_regret_train"] == r.max_regret_train
        assert max(row["normalized"], 0) <= 1.0
    assert (tmp_path / "timings.csv").exists() and (tmp_path / "summary.json").exists()
    assert set(summary["methods"]) == {"reg(n=1)", "robust"}


def test_runs_are_deterministic(tmp_path):
    run_experiment(small_config(), tmp_path / "a")
    run_experiment(small_config(), tmp_path / "b", threads=2)
    assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()


def test_medical_ignores_sizes():
    reports, _ = run_experiment(small_config(domain="medical", sizes=[4, 5], seeds=[0], test_samples=0))
    assert [r.size for r in reports] == ["-", "-"]
    assert all(np.isnan(r.max_regret_test) for r in reports)
