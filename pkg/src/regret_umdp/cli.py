"""Command-line interface: generate, plan, evaluate, sweep and verify."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from .domains import DOMAINS, generate, prune_actions
from .errors import (CoverageError, DivergenceError, NonConvergenceError, PlannerTimeout, SearchBudgetExceeded,
                     StructureError, ValidationError)
from .evaluation import adversary_value, max_regret, sample_regrets
from .experiment import ExperimentConfig, MethodSpec, default_threads, plan_with, run_experiment
from .io import dump_policy, dump_umdp, load_policy, load_umdp
from .planners import OptionPlan, PlannerConfig

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED, EXIT_TIMEOUT = 0, 1, 2, 3
log = logging.getLogger("regret_umdp")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--threads", type=int, default=None)


def _planner_flags(p: argparse.ArgumentParser):
    p.add_argument("--method", choices=("reg", "cemr", "robust", "avg", "best"), default="reg")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--kappa", type=float, default=1e-4)
    p.add_argument("--timeout", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regret-umdp", description="Minimax-regret planning for sampled UMDPs.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a benchmark UMDP as JSON")
    g.add_argument("--domain", choices=DOMAINS, required=True)
    g.add_argument("--size", type=int, default=None, help="grid side for disaster/glider")
    g.add_argument("--samples", type=int, default=15)
    g.add_argument("--candidates", type=int, default=None, help="pool size for coverage-based selection")
    g.add_argument("--field", default="synthetic", help="glider current field: 'synthetic' or a JSON file")
    _common(g)

    p = sub.add_parser("plan", help="compute a policy for a UMDP file")
    p.add_argument("umdp")
    p.add_argument("--prune", action="store_true", help="prune actions before option planning")
    _planner_flags(p)
    _common(p)

    e = sub.add_parser("evaluate", help="max regret of a policy on UMDP samples")
    e.add_argument("policy")
    e.add_argument("umdp")
    e.add_argument("--adversary", type=int, default=None, metavar="N",
                   help="also report the value against an adversary switching every N steps")
    _common(e)

    w = sub.add_parser("sweep", help="run an experiment from a JSON config")
    w.add_argument("config")
    w.add_argument("--epsilon", type=float, default=None, help="override the config value")
    w.add_argument("--kappa", type=float, default=None, help="override the config value")
    w.add_argument("--timeout", type=float, default=None, help="override the config value")
    _common(w)

    v = sub.add_parser("verify", help="run the randomised property suite")
    v.add_argument("--quick", action="store_true")
    v.add_argument("--inject-fault", action="store_true")
    _common(v)
    return parser


def _out(path, payload: dict):
    text = json.dumps(payload, indent=1)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def cmd_generate(args) -> int:
    kw = {}
    if args.domain == "glider":
        kw["field"] = args.field
    umdp = generate(args.domain, seed=args.seed, n_samples=args.samples, n_candidates=args.candidates,
                    size=args.size, **kw)
    path = args.out or f"{args.domain}_{args.seed}.json"
    dump_umdp(umdp, path)
    print(f"wrote {path}: {umdp.n_states} states, {umdp.n_actions} actions, {umdp.n_samples} samples")
    return EXIT_OK


def cmd_plan(args) -> int:
    umdp = load_umdp(args.umdp)
    cfg = PlannerConfig(epsilon=args.epsilon, kappa=args.kappa, timeout=args.timeout)
    method = MethodSpec(args.method, args.n)
    pruned = prune_actions(umdp) if args.prune else umdp
    t0 = time.perf_counter()
    policy = plan_with(method, umdp, pruned, cfg)
    elapsed = time.perf_counter() - t0
    if isinstance(policy, OptionPlan):
        print(f"{method.label}: value at start {policy.value:.10g} after {policy.iterations} sweeps "
              f"(policy stable: {policy.policy_stable})")
    mr, q = max_regret(policy, umdp.samples)
    print(f"max regret {mr:.10g} (sample {q + 1}); planning time {elapsed:.3f}s")
    dump_policy(policy, args.out or "policy.json")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    umdp = load_umdp(args.umdp)
    policy = load_policy(args.policy)
    regs = sample_regrets(policy, umdp.samples)
    q = int(np.argmax(regs))
    print(f"max regret {regs[q]:.10g} (sample {q + 1})")
    payload = {"max_regret": float(regs[q]), "argmax_sample": q + 1, "regrets": regs.tolist()}
    if args.adversary:
        payload["adversary_value"] = adversary_value(policy, umdp, args.adversary)
        print(f"adversary value (switch every {args.adversary} steps) {payload['adversary_value']:.10g}")
    _out(args.out, payload)
    return EXIT_OK


def cmd_sweep(args) -> int:
    with open(args.config) as fh:
        raw = json.load(fh)
    config = ExperimentConfig.from_dict(raw)
    for key in ("epsilon", "kappa", "timeout"):
        if getattr(args, key) is not None:
            setattr(config, key, getattr(args, key))
    threads = args.threads or raw.get("threads") or default_threads()
    out = args.out or "sweep_out"
    _, summary = run_experiment(config, out, threads)
    for m in summary["methods"]:
        s = summary["normalized"][m]
        mean = "n/a" if s["mean"] is None else f"{s['mean']:.3f}; {s['sd']:.3f}"
        print(f"{m:>12}  normalised max regret {mean}  ({s['count']} instances)")
    print(f"wrote {out}/results.csv, {out}/timings.csv, {out}/summary.json")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_suite

    results = run_suite(args.seed, args.quick, args.inject_fault)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} properties passed")
    return EXIT_OK if not failed else EXIT_INVALID


COMMANDS = {"generate": cmd_generate, "plan": cmd_plan, "evaluate": cmd_evaluate, "sweep": cmd_sweep,
            "verify": cmd_verify}


def main(argv=None) -> int:
    level = os.environ.get("REGRET_UMDP_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        for v in exc.violations:
            print(f"invalid: {v}", file=sys.stderr)
        return EXIT_INVALID
    except (StructureError, CoverageError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NonConvergenceError, SearchBudgetExceeded, DivergenceError) as exc:
        print(f"did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except PlannerTimeout as exc:
        print(f"timeout: {exc}", file=sys.stderr)
        return EXIT_TIMEOUT


if __name__ == "__main__":
    sys.exit(main())
