"""JSON interchange for UMDPs and policies."""

from __future__ import annotations

import json

import numpy as np

from .errors import StructureError, ValidationError
from .model import MdpSample, StationaryPolicy, Umdp, validate_umdp
from .options import OptionPolicy
from .planners import OptionPlan


def _plain(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def umdp_to_dict(umdp: Umdp) -> dict:
    out = {
        "states": list(umdp.state_labels) if umdp.state_labels else umdp.n_states,
        "actions": list(umdp.action_labels) if umdp.action_labels else umdp.n_actions,
        "initial": umdp.initial,
        "goals": list(umdp.goals),
        "samples": [{"transitions": [[s, a, t, p, c] for s, a, t, p, c in smp.triples()]}
                    for smp in umdp.samples],
    }
    if umdp.meta:
        out["meta"] = _plain(umdp.meta)
    return out


def _space(spec, what):
    if isinstance(spec, int):
        return spec, None
    if isinstance(spec, list):
        return len(spec), tuple(str(x) for x in spec)
    raise StructureError(f"'{what}' must be a count or a list of labels")


def umdp_from_dict(d: dict, validate: bool = True) -> Umdp:
    """Build a UMDP; probabilities may be numbers or decimal strings."""
    try:
        S, state_labels = _space(d["states"], "states")
        A, action_labels = _space(d["actions"], "actions")
        initial, goals = int(d["initial"]), tuple(int(g) for g in d["goals"])
        raw = d["samples"]
    except KeyError as exc:
        raise StructureError(f"UMDP document is missing {exc.args[0]!r}") from None
    samples = []
    for q, smp in enumerate(raw, start=1):
        rows = [(int(s), int(a), int(t), float(p), float(c)) for s, a, t, p, c in smp["transitions"]]
        try:
            samples.append(MdpSample.from_triples(S, A, initial, goals, rows))
        except StructureError as exc:
            raise ValidationError([f"sample {q}: {exc}"]) from None
    umdp = Umdp(S, A, initial, goals, tuple(samples), state_labels, action_labels, dict(d.get("meta", {})))
    if validate:
        problems = validate_umdp(umdp)
        if problems:
            raise ValidationError(problems)
    return umdp


def load_umdp(path, validate: bool = True) -> Umdp:
    with open(path) as fh:
        return umdp_from_dict(json.load(fh), validate)


def dump_umdp(umdp: Umdp, path) -> None:
    with open(path, "w") as fh:
        json.dump(umdp_to_dict(umdp), fh, separators=(",", ":"))
        fh.write("\n")


def policy_to_dict(policy) -> dict:
    if isinstance(policy, OptionPlan):
        return {
            "type": "option_plan", "n": policy.n, "initial": policy.initial, "objective": policy.objective,
            "reg": policy.reg.tolist(), "iterations": policy.iterations, "converged": policy.converged,
            "policy_stable": policy.policy_stable,
            "options": [{"anchor": o.anchor, "n": o.horizon, "table": o.rows(), "objective": o.objective}
                        for _, o in sorted(policy.options.items())],
        }
    if isinstance(policy, StationaryPolicy):
        if policy.is_deterministic:
            return {"type": "stationary", "n_actions": policy.probs.shape[1], "actions": policy.actions.tolist()}
        return {"type": "stationary", "probs": policy.probs.tolist()}
    raise TypeError(f"cannot serialise {type(policy).__name__}")


def policy_from_dict(d: dict):
    kind = d.get("type")
    if kind == "stationary":
        if "probs" in d:
            return StationaryPolicy(d["probs"])
        return StationaryPolicy.deterministic(np.asarray(d["actions"], dtype=np.int64), int(d["n_actions"]))
    if kind == "option_plan":
        options = {}
        for o in d["options"]:
            table = {(int(s), int(t)): int(a) for s, t, a in o["table"]}
            options[int(o["anchor"])] = OptionPolicy(int(o["anchor"]), int(o["n"]), table, o.get("objective"))
        return OptionPlan(int(d["n"]), int(d["initial"]), options, np.asarray(d["reg"], dtype=float),
                          int(d.get("iterations", 0)), bool(d.get("converged", True)),
                          bool(d.get("policy_stable", True)), d.get("objective", "reg"))
    raise StructureError(f"unknown policy type {kind!r}")


def load_policy(path):
    with open(path) as fh:
        return policy_from_dict(json.load(fh))


def dump_policy(policy, path) -> None:
    with open(path, "w") as fh:
        json.dump(policy_to_dict(policy), fh, indent=1)
        fh.write("\n")
