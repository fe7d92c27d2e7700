"""Acceptance suite: one PASS/FAIL line per criterion, printed to the terminal.

Run with ``pytest tests/test_acceptance.py -v`` (lines appear inline) or as a
script with ``python3 tests/test_acceptance.py``.
"""

import json
import time

import numpy as np
import pytest

from regret_umdp import verify
from regret_umdp.cli import main as cli_main
from regret_umdp.domains import generate, prune_actions
from regret_umdp.evaluation import EvalReport, max_regret, normalize, sample_hitting_times
from regret_umdp.experiment import MethodSpec, plan_with
from regret_umdp.planners import PlannerConfig
from regret_umdp.stats import welch_t_test

KAPPA = 1e-4
DISASTER_SEEDS = range(25)
TREND_SEEDS = range(10)
PRUNE_SEEDS = range(10)
MEDICAL_SEEDS = range(25)
DISASTER_METHODS = ["reg:1", "reg:2", "cemr:1", "robust", "avg", "best"]


def report(request, name: str, passed: bool, detail: str, seconds: float | None = None):
    took = f" ({seconds:.1f}s)" if seconds is not None else ""
    line = f"{'PASS' if passed else 'FAIL'} {name}: {detail}{took}"
    capman = request.config.pluginmanager.getplugin("capturemanager") if request else None
    if capman:
        with capman.global_and_fixture_disabled():
            print("\n" + line)
    else:
        print(line)
    assert passed, line


def run_check(request, name, fn, *args, limit=None, **kw):
    t0 = time.perf_counter()
    ok, detail = fn(*args, **kw)
    took = time.perf_counter() - t0
    if limit is not None and took >= limit:
        ok, detail = False, f"{detail}; runtime {took:.1f}s over {limit}s"
    report(request, name, ok, detail, took)


@pytest.fixture(scope="session")
def disaster_runs():
    """Plans and train max regrets for every method on 25 disaster 6x6 instances."""
    cfg = PlannerConfig(kappa=KAPPA, timeout=600)
    runs = []
    for seed in DISASTER_SEEDS:
        umdp = generate("disaster", seed=seed, n_samples=15, n_candidates=45, size=6)
        pruned = prune_actions(umdp)
        plans, reports = {}, []
        for item in DISASTER_METHODS:
            method = MethodSpec.parse(item)
            t0 = time.perf_counter()
            plans[method.label] = plan_with(method, umdp, pruned, cfg)
            mr = max_regret(plans[method.label], umdp.samples)[0]
            reports.append(EvalReport(seed, "disaster", "6", method.name, method.n, mr, float("nan"),
                                      time.perf_counter() - t0, "ok"))
        normalize(reports)
        runs.append({"seed": seed, "umdp": umdp, "plans": plans,
                     "raw": {MethodSpec(r.method, r.n).label: r.max_regret_train for r in reports},
                     "norm": {MethodSpec(r.method, r.n).label: r.normalized for r in reports}})
    return runs


def test_criterion_01_regret_bellman(request):
    run_check(request, "criterion 1 regret recursion equals value difference", verify.check_regret_bellman, 200,
              limit=10)


def test_criterion_02_independent_exactness(request):
    run_check(request, "criterion 2 independent-uncertainty planner equals brute force",
              verify.check_independent_exact, 20, kappa=1e-6, limit=60)


def test_criterion_03_inner_exactness(request):
    run_check(request, "criterion 3 inner search equals enumeration", verify.check_inner_exact, 50,
              limit=60)


def test_criterion_04_sandwich(request):
    run_check(request, "criterion 4 adversary regret sandwich", verify.check_sandwich, 30, limit=60)


def test_criterion_05_option_consistency(request):
    run_check(request, "criterion 5 plan value equals option-level backup", verify.check_option_consistency, 20)


def test_criterion_06_longer_options(request, disaster_runs):
    violations, worst = 0, -np.inf
    for run in disaster_runs[:len(TREND_SEEDS)]:
        one, two = run["plans"]["reg(n=1)"], run["plans"]["reg(n=2)"]
        pi = one.to_stationary(run["umdp"].n_actions)
        H = max(float(sample_hitting_times(pi, q)[run["umdp"].initial]) for q in run["umdp"].samples)
        excess = two.value - one.value - 2 * KAPPA * H
        worst = max(worst, excess)
        violations += excess > 0
    norm1 = np.mean([r["norm"]["reg(n=1)"] for r in disaster_runs[:len(TREND_SEEDS)]])
    norm2 = np.mean([r["norm"]["reg(n=2)"] for r in disaster_runs[:len(TREND_SEEDS)]])
    ok = violations == 0 and norm2 <= norm1 + 0.02
    report(request, "criterion 6 two-step options do not worsen", ok,
           f"{len(TREND_SEEDS)} instances, {violations} plan-value violations (max excess {worst:.2e}); "
           f"mean normalized max regret n=1 {norm1:.3f}, n=2 {norm2:.3f}")


def test_criterion_07_medical_ordering(request):
    t0 = time.perf_counter()
    cfg = PlannerConfig(kappa=KAPPA, timeout=600)
    reg, cemr = [], []
    for seed in MEDICAL_SEEDS:
        umdp = generate("medical", seed=seed, n_samples=15, n_candidates=45)
        pruned = prune_actions(umdp)
        reg.append(max_regret(plan_with(MethodSpec("reg", 1), umdp, pruned, cfg), umdp.samples)[0])
        cemr.append(max_regret(plan_with(MethodSpec("cemr", 1), umdp, pruned, cfg), umdp.samples)[0])
    took = time.perf_counter() - t0
    p = welch_t_test(reg, cemr)
    ok = np.mean(reg) < np.mean(cemr) and p < 0.05 and took < 600
    report(request, "criterion 7 regret planner beats myopic-regret planner (medical)", ok,
           f"{len(reg)} instances, mean max regret reg {np.mean(reg):.4f} vs cemr {np.mean(cemr):.4f}, "
           f"p={p:.2g}", took)


def test_criterion_08_robust_conservatism(request, disaster_runs):
    reg = [r["raw"]["reg(n=2)"] for r in disaster_runs]
    rob = [r["raw"]["robust"] for r in disaster_runs]
    p = welch_t_test(reg, rob)
    ok = np.mean(reg) < np.mean(rob) and p < 0.05
    report(request, "criterion 8 two-step regret planner beats robust policy (disaster)", ok,
           f"{len(reg)} instances, mean max regret reg(n=2) {np.mean(reg):.3f} vs robust {np.mean(rob):.3f}, "
           f"p={p:.2g}")


def test_criterion_09_pruning_fidelity(request, disaster_runs):
    cfg = PlannerConfig(kappa=KAPPA, timeout=600)
    pruned, full = [], []
    for run in disaster_runs[:len(PRUNE_SEEDS)]:
        umdp = run["umdp"]
        pruned.append(run["raw"]["reg(n=1)"])
        full.append(max_regret(plan_with(MethodSpec("reg", 1), umdp, umdp, cfg), umdp.samples)[0])
    rel = abs(np.mean(pruned) - np.mean(full)) / np.mean(full)
    report(request, "criterion 9 action pruning keeps max regret", rel < 0.10,
           f"{len(full)} seeds, mean max regret pruned {np.mean(pruned):.3f} vs unpruned {np.mean(full):.3f}, "
           f"relative difference {rel:.1%}")


def test_criterion_10_sweep_determinism(request, tmp_path):
    cfg = {"domain": "disaster", "sizes": [5], "seeds": [0, 1], "n_samples": 5, "test_samples": 10,
           "methods": ["reg:1", "reg:2", "robust", "best"], "threads": 2}
    (tmp_path / "config.json").write_text(json.dumps(cfg))
    for out in ("a", "b"):
        assert cli_main(["sweep", str(tmp_path / "config.json"), "--out", str(tmp_path / out)]) == 0
    files = ("results.csv", "summary.json")
    same = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files)
    report(request, "criterion 10 repeated sweeps give identical output", same,
           "results.csv and summary.json byte-identical" if same else "outputs differ")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
