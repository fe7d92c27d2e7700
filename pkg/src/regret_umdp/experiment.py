"""Batch experiments: plan with several methods on generated instances and compare."""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .domains import generate, prune_actions, resample
from .errors import NonConvergenceError, PlannerTimeout, SearchBudgetExceeded
from .evaluation import EvalReport, max_regret, normalize, sample_regrets
from .planners import (PlannerConfig, averaged_mdp_policy, best_sample_policy, cemr_minimax_vi,
                       minimax_regret_vi, robust_vi)
from .stats import welch_t_test

log = logging.getLogger(__name__)

RESULT_FIELDS = ("seed", "domain", "size", "method", "n", "max_regret_train", "max_regret_test",
                 "normalized", "normalized_test", "status")
TIMING_FIELDS = ("seed", "domain", "size", "method", "n", "time_s")
OPTION_METHODS = ("reg", "cemr")
ALL_METHODS = ("reg", "cemr", "robust", "avg", "best")


@dataclass
class MethodSpec:
    name: str
    n: int = 1

    @property
    def label(self) -> str:
        return f"{self.name}(n={self.n})" if self.name in OPTION_METHODS else self.name

    @classmethod
    def parse(cls, item) -> "MethodSpec":
        if isinstance(item, str):
            name, _, n = item.partition(":")
            spec = cls(name, int(n) if n else 1)
        else:
            spec = cls(item["name"], int(item.get("n", 1)))
        if spec.name not in ALL_METHODS:
            raise ValueError(f"unknown method {spec.name!r}")
        return spec


@dataclass
class ExperimentConfig:
    domain: str = "disaster"
    sizes: list = field(default_factory=lambda: [6])
    seeds: list = field(default_factory=lambda: list(range(5)))
    n_samples: int = 15
    n_candidates: int | None = None
    test_samples: int = 100
    methods: list = field(default_factory=lambda: ["reg:1", "reg:2", "cemr:1", "robust", "avg", "best"])
    prune: bool = True
    epsilon: float = 1e-6
    kappa: float = 1e-4
    timeout: float | None = 600.0
    domain_args: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        unknown = set(d) - set(known) - {"threads"}
        if unknown:
            raise ValueError(f"unknown experiment config keys: {sorted(unknown)}")
        if "seeds" in known and isinstance(known["seeds"], int):
            known["seeds"] = list(range(known["seeds"]))
        return cls(**known)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def method_specs(self) -> list[MethodSpec]:
        return [MethodSpec.parse(m) for m in self.methods]

    def planner(self) -> PlannerConfig:
        return PlannerConfig(epsilon=self.epsilon, kappa=self.kappa, timeout=self.timeout)


def plan_with(method: MethodSpec, umdp, pruned, cfg: PlannerConfig):
    """Policy-like object for one method; option methods plan on the pruned UMDP."""
    if method.name == "reg":
        return minimax_regret_vi(pruned, method.n, cfg)
    if method.name == "cemr":
        return cemr_minimax_vi(pruned, method.n, cfg)
    if method.name == "robust":
        return robust_vi(umdp, cfg)[0]
    if method.name == "avg":
        return averaged_mdp_policy(umdp, cfg)
    if method.name == "best":
        return best_sample_policy(umdp, cfg)[0]
    raise ValueError(f"unknown method {method.name!r}")


def run_instance(config: ExperimentConfig, seed: int, size) -> list[EvalReport]:
    """All methods on one generated instance, normalised within the instance."""
    kw = dict(config.domain_args)
    if size is not None and config.domain != "medical":
        kw["size"] = size
    umdp = generate(config.domain, seed=seed, n_samples=config.n_samples, n_candidates=config.n_candidates, **kw)
    pruned = prune_actions(umdp) if config.prune else umdp
    test = resample(umdp, config.test_samples, seed) if config.test_samples else []
    cfg = config.planner()
    reports = []
    for method in config.method_specs():
        t0 = time.perf_counter()
        status = "ok"
        try:
            policy = plan_with(method, umdp, pruned, cfg)
        except PlannerTimeout:
            status, policy = "timeout", None
        except (NonConvergenceError, SearchBudgetExceeded) as exc:
            status, policy = "failed", None
            log.warning("%s on seed %s: %s", method.label, seed, exc)
        elapsed = time.perf_counter() - t0
        train = test_val = float("nan")
        regs = []
        if policy is not None:
            regs = sample_regrets(policy, umdp.samples).tolist()
            train = max(regs)
            if test:
                test_val = max_regret(policy, test, on_uncovered="terminate")[0]
        reports.append(EvalReport(seed, config.domain, str(size if size is not None else "-"), method.name,
                                  method.n if method.name in OPTION_METHODS else 0, train, test_val, elapsed,
                                  status, train_regrets=regs))
    normalize(reports)
    return reports


def _run_instance_args(args):
    return run_instance(*args)


def run_experiment(config: ExperimentConfig, out_dir=None, threads: int = 1) -> tuple[list[EvalReport], dict]:
    """Run every (size, seed) instance and write ``results.csv``, ``timings.csv``, ``summary.json``.

    Rows are ordered by size, seed and the configured method order, so output
    files depend only on the configuration.
    """
    sizes = config.sizes if config.domain != "medical" else [None]
    jobs = [(config, seed, size) for size in sizes for seed in config.seeds]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_run_instance_args, jobs))
    else:
        chunks = [run_instance(*job) for job in jobs]
    reports = [r for chunk in chunks for r in chunk]
    summary = summarize(reports, config)
    if out_dir is not None:
        write_outputs(reports, summary, out_dir)
    return reports, summary


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_outputs(reports: list[EvalReport], summary: dict, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_FIELDS)
        for r in reports:
            d = asdict(r)
            w.writerow([_fmt(d[k]) for k in RESULT_FIELDS])
    with open(out / "timings.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TIMING_FIELDS)
        for r in reports:
            d = asdict(r)
            w.writerow([_fmt(d[k]) for k in TIMING_FIELDS])
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_results(path) -> list[dict]:
    """Load ``results.csv`` back into typed rows."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            row["seed"] = int(row["seed"])
            row["n"] = int(row["n"])
            for k in ("max_regret_train", "max_regret_test", "normalized", "normalized_test"):
                row[k] = float(row[k])
            rows.append(row)
    return rows


def _label(r: EvalReport) -> str:
    return f"{r.method}(n={r.n})" if r.method in OPTION_METHODS else r.method


def summarize(reports: list[EvalReport], config: ExperimentConfig | None = None) -> dict:
    """Means and SDs per method plus one-sided Welch p-values between methods.

    ``p_values[a][b]`` tests whether method ``a`` has lower mean normalised max
    regret than ``b``; it is only reported when ``a``'s mean is lower.
    """
    labels = []
    for r in reports:
        if _label(r) not in labels:
            labels.append(_label(r))
    scores = {m: [r.normalized for r in reports if _label(r) == m and r.status == "ok"] for m in labels}
    tests = {m: [r.normalized_test for r in reports if _label(r) == m and r.status == "ok"] for m in labels}
    raw = {m: [r.max_regret_train for r in reports if _label(r) == m and r.status == "ok"] for m in labels}
    dropped = sorted({(r.seed, r.size) for r in reports if r.status != "ok"})

    def stat(xs):
        xs = [x for x in xs if np.isfinite(x)]
        if not xs:
            return {"mean": None, "sd": None, "count": 0}
        return {"mean": float(np.mean(xs)), "sd": float(np.std(xs, ddof=1)) if len(xs) > 1 else 0.0,
                "count": len(xs)}

    pvals = {}
    for a in labels:
        pvals[a] = {}
        for b in labels:
            if a == b or len(scores[a]) < 2 or len(scores[b]) < 2 or not np.mean(scores[a]) < np.mean(scores[b]):
                pvals[a][b] = None
                continue
            try:
                pvals[a][b] = welch_t_test(scores[a], scores[b])
            except ValueError:
                pvals[a][b] = None
    return {
        "domain": config.domain if config else (reports[0].domain if reports else None),
        "methods": labels,
        "normalized": {m: stat(scores[m]) for m in labels},
        "normalized_test": {m: stat(tests[m]) for m in labels},
        "max_regret": {m: stat(raw[m]) for m in labels},
        "p_values": pvals,
        "instances_with_dropouts": [list(x) for x in dropped],
    }


def default_threads() -> int:
    return os.cpu_count() or 1
