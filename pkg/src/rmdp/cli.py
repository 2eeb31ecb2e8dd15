"""``rmdp`` command-line front end.

Exit status: 0 on success (report written), 1 on domain errors such as an
instance that is not an RMDP, 2 on malformed input.  Errors are printed to
stdout as ``{"error": {"kind", "detail", "location"}}`` and never leave a
partial report behind.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field

from . import config
from .errors import InvalidConfig, InvalidInput, NotRmdp, RmdpError
from .factorize import factorize_biconnected, factorize_general, generate_instance
from .gff import gff_covariance, pinned_green, ray_knight_check
from .io import emit_report, instance_to_dict, load_instance, load_policy, _load_json
from .mdp_core import Policy, is_rmdp
from .rng import default_seed
from .solve import (
    brute_force_optimal,
    dp_check,
    gain,
    policy_iterate_biconnected,
    policy_iterate_hybrid,
    policy_iterate_standard,
)
from .structure import block_decomposition, canonical_graph, is_tree

SCHEMAS = """\
JSON schemas
  instance: {"states": [str, ...], "actions": [str, ...],
             "kernels": {action: n x n row-stochastic array},
             "rewards": n x m array (rows = states, columns = actions)}
  policy:   {"weights": n x m array} or {"deterministic": [action per state]}
  generator config: {"mode": "weighted"|"blocks", "n": int, "m": int, ...};
             see rmdp.factorize.generate_instance for optional keys.

environment
  RMDP_SEED  default seed for stochastic commands
"""

STOCHASTIC = {"ray-knight", "generate"}


@dataclass
class RunConfig:
    command: str
    instance: str | None = None
    output: str | None = None
    seed: int | None = None
    tol: float = config.BALANCE_TOL
    cap: int = config.ENUMERATION_CAP
    extra: dict = field(default_factory=dict)
    pending: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.command in STOCHASTIC and self.seed is None:
            raise InvalidConfig(f"'{self.command}' needs --seed (or RMDP_SEED)")
        if self.seed is not None and not 0 <= self.seed < 2**64:
            raise InvalidConfig("seed must be an unsigned 64-bit integer")
        if not self.tol > 0.0:
            raise InvalidConfig("tolerances must be positive")
        if self.cap < 1:
            raise InvalidConfig("enumeration cap must be positive")


def _labels(inst, idx):
    return [inst.states[i] for i in idx]


def _state_index(inst, label) -> int:
    if label in inst.states:
        return inst.states.index(label)
    raise InvalidInput(f"unknown state {label!r}", location={"state": label})


def cmd_validate(cfg: RunConfig):
    inst = load_instance(cfg.instance)
    verdict = is_rmdp(inst, tol=cfg.tol, cap=cfg.cap)
    if not verdict:
        witness = {inst.states[i]: inst.actions[u] for i, u in enumerate(verdict.witness)}
        raise NotRmdp(
            f"policy {witness} gives a chain that is {verdict.violation}",
            location={"witness": witness, "violation": verdict.violation},
        )
    return {"rmdp": True, "policies_checked": verdict.checked}


def cmd_decompose(cfg: RunConfig):
    inst = load_instance(cfg.instance)
    g = canonical_graph(inst)
    bs = block_decomposition(g)
    return {
        "edges": [_labels(inst, e) for e in g.edges],
        "blocks": [_labels(inst, b) for b in bs.blocks],
        "articulation_points": _labels(inst, bs.articulation_points),
        "biconnected": len(bs.blocks) == 1,
        "tree": is_tree(g),
    }


def cmd_factorize(cfg: RunConfig):
    inst = load_instance(cfg.instance)
    f = factorize_general(inst)
    bs = f.structure
    nu = {}
    for a, per_block in f.branch_weights().items():
        nu[inst.states[a]] = {str(b): {inst.actions[u]: w[u] for u in range(inst.m)} for b, w in per_block.items()}
    return {
        "states": list(inst.states),
        "actions": list(inst.actions),
        "blocks": [
            {"index": b, "vertices": _labels(inst, bk.block), "kernel": bk.matrix, "psi": bk.psi}
            for b, bk in enumerate(f.block_kernels)
        ],
        "articulation_points": _labels(inst, bs.articulation_points),
        "rho": {inst.states[i]: {inst.actions[u]: f.rho[i, u] for u in range(inst.m)} for i in range(inst.n)},
        "nu": nu,
    }


def _trace_dict(inst, trace):
    act = lambda seq: [inst.actions[u] for u in seq]  # noqa: E731
    return {
        "variant": trace.variant,
        "start": act(trace.start),
        "initial_gain": trace.initial_gain,
        "steps": [
            {
                "state": inst.states[s.state],
                "old_action": inst.actions[s.old_action],
                "new_action": inst.actions[s.new_action],
                "gain": s.gain,
                "rule": s.rule,
            }
            for s in trace.steps
        ],
        "terminal": act(trace.terminal),
        "terminal_gain": trace.terminal_gain,
    }


def cmd_solve(cfg: RunConfig):
    inst = load_instance(cfg.instance)
    variant = cfg.extra["variant"]
    start = load_policy(inst, cfg.extra["start"]) if cfg.extra.get("start") else None
    trace = None
    if variant == "brute":
        pol, best = brute_force_optimal(inst, cap=cfg.cap)
        actions = pol.actions
    else:
        if variant == "standard":
            trace = policy_iterate_standard(inst, start)
        elif variant == "biconnected":
            P0, rho = factorize_biconnected(inst)
            trace = policy_iterate_biconnected(inst, P0, rho, start)
        elif variant == "hybrid":
            trace = policy_iterate_hybrid(inst, factorize_general(inst), start)
        else:
            raise InvalidConfig(f"unknown variant {variant!r}")
        actions = trace.terminal
        pol = Policy.deterministic(actions, inst.m)
        best = gain(inst, pol)
    report = {
        "variant": variant,
        "policy": {inst.states[i]: inst.actions[u] for i, u in enumerate(actions)},
        "gain": best,
        "optimal": dp_check(inst, pol).optimal,
        "steps": None if trace is None else len(trace.steps),
    }
    if trace is not None and cfg.extra.get("trace"):
        # written by run() only after the main report succeeds
        cfg.pending.append((_trace_dict(inst, trace), cfg.extra["trace"]))
    return report


def cmd_gff(cfg: RunConfig):
    inst = load_instance(cfg.instance)
    pol = load_policy(inst, cfg.extra["policy"])
    cov = gff_covariance(inst, pol)
    out = {"states": list(inst.states), "stationary": cov.stationary, "covariance": cov.c}
    if cfg.extra.get("pin") is not None:
        k = _state_index(inst, cfg.extra["pin"])
        out["pin"] = inst.states[k]
        out["green"] = pinned_green(inst, pol, k).full()
    return out


def cmd_ray_knight(cfg: RunConfig):
    inst = load_instance(cfg.instance)
    pol = load_policy(inst, cfg.extra["policy"])
    k = _state_index(inst, cfg.extra["pin"])
    rep = ray_knight_check(
        inst, pol, k, cfg.extra["level"], cfg.extra["count"], cfg.seed,
        z_threshold=cfg.extra["z"], workers=cfg.extra["workers"],
    )
    d = rep.to_dict()
    d["pin"] = inst.states[k]
    for row in d["states"]:
        row["state"] = inst.states[row["state"]]
    return d


def cmd_generate(cfg: RunConfig):
    gen_cfg = dict(_load_json(cfg.extra["config"])) if cfg.extra.get("config") else {}
    if cfg.extra.get("mode"):
        gen_cfg["mode"] = cfg.extra["mode"]
    return instance_to_dict(generate_instance(gen_cfg, cfg.seed))


COMMANDS = {
    "validate": cmd_validate,
    "decompose": cmd_decompose,
    "factorize": cmd_factorize,
    "solve": cmd_solve,
    "gff": cmd_gff,
    "ray-knight": cmd_ray_knight,
    "generate": cmd_generate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rmdp",
        description="Reversible Markov decision processes: validation, structure, solving, free field.",
        epilog=SCHEMAS,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, instance=True):
        if instance:
            sp.add_argument("instance", help="instance JSON file")
        sp.add_argument("-o", "--output", help="write the report here instead of stdout")
        sp.add_argument("--tol", type=float, default=config.BALANCE_TOL, help="detailed-balance tolerance")
        sp.add_argument("--cap", type=int, default=config.ENUMERATION_CAP,
                        help="max deterministic policies to enumerate (raise to override)")
        sp.add_argument("--seed", type=lambda s: int(s, 0), default=None,
                        help="64-bit seed (default: $RMDP_SEED)")
        return sp

    common(sub.add_parser("validate", help="check the RMDP property by enumeration", epilog=SCHEMAS,
                          formatter_class=argparse.RawDescriptionHelpFormatter))
    common(sub.add_parser("decompose", help="canonical graph and block structure"))
    common(sub.add_parser("factorize", help="block kernels, rho and branch weights"))
    sp = common(sub.add_parser("solve", help="average-reward optimal policy"))
    sp.add_argument("--variant", choices=["standard", "biconnected", "hybrid", "brute"], default="standard")
    sp.add_argument("--start", help="starting deterministic policy JSON")
    sp.add_argument("--trace", help="write the iteration trace JSON here")
    sp = common(sub.add_parser("gff", help="free-field covariance and pinned Green function"))
    sp.add_argument("--policy", required=True)
    sp.add_argument("--pin", help="state label to pin")
    sp = common(sub.add_parser("ray-knight", help="Monte Carlo check of the Ray-Knight identity"))
    sp.add_argument("--policy", required=True)
    sp.add_argument("--pin", required=True)
    sp.add_argument("--level", type=float, required=True)
    sp.add_argument("--count", type=int, default=200_000)
    sp.add_argument("--z", type=float, default=config.Z_THRESHOLD)
    sp.add_argument("--workers", type=int, default=1)
    sp = common(sub.add_parser("generate", help="random RMDP instance"), instance=False)
    sp.add_argument("--mode", choices=["weighted", "blocks"])
    sp.add_argument("--config", help="generator config JSON")
    return p


def _config_from_args(args) -> RunConfig:
    extra = {
        k: v
        for k, v in vars(args).items()
        if k not in {"command", "instance", "output", "seed", "tol", "cap"}
    }
    return RunConfig(
        command=args.command,
        instance=getattr(args, "instance", None),
        output=args.output,
        seed=args.seed if args.seed is not None else default_seed(),
        tol=args.tol,
        cap=args.cap,
        extra=extra,
    )


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        result = COMMANDS[cfg.command](cfg)
        text = emit_report(result, cfg.output)
        for extra_result, path in cfg.pending:
            emit_report(extra_result, path)
        if cfg.output is None:
            stdout.write(text)
        return 0
    except RmdpError as exc:
        stdout.write(json.dumps({"error": exc.to_dict()}, sort_keys=True, default=str) + "\n")
        return exc.exit_status
    except (OSError, ValueError) as exc:
        err = {"kind": type(exc).__name__, "detail": str(exc), "location": None}
        stdout.write(json.dumps({"error": err}, sort_keys=True) + "\n")
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
