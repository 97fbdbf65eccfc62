"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 an invariant violation
(failed membership check, or a regret above its overlay bound).
"""
from __future__ import annotations

import argparse
import itertools
import sys
from pathlib import Path

import yaml

from .algorithm import KometoConfig, run as run_kometo
from .fidelity import FidelityEnvironment, FidelitySchedule, model_from_dict, model_to_dict
from .harness import ConfigError, emit_svg, load_config, parse_config, parse_csv, run_experiment
from .instances import (BranchRule, SmoothnessProfile, TreeInstance, make_depth_limited_instance,
                        make_width_limited_family, verify_membership)
from .theory import BoundQuery, CaseError, corollary4_rate, lemma6_bound, theorem1_lower, theorem3_bound

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION = 0, 2, 3

ALGO_ALIASES = {
    "kometo": "kometo", "sequool": "sequool",
    "sqrt": "sqrt", "modifiedsqrt": "sqrt", "modified-sqrt": "sqrt",
    "log": "log", "modifiedlog": "log", "modified-log": "log",
}


def _kv(text: str) -> dict:
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in part:
            raise ConfigError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = float(v)
    return out


def parse_model(text: str):
    """``poly:A=1,alpha=1``, ``exp:B=1,sigma=1,beta=1`` or ``cutoff:a=1``."""
    kind, _, rest = text.partition(":")
    try:
        return model_from_dict({"kind": kind.strip(), **_kv(rest)})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model {text!r}: {exc}") from None


def parse_profiles(text: str) -> list[SmoothnessProfile]:
    """Inline ``nu=1,rho=0.5,d=0,C=2,K=2`` or a YAML file; list values in the file form a grid."""
    path = Path(text)
    if path.suffix in (".yaml", ".yml", ".json") or path.is_file():
        try:
            data = yaml.safe_load(path.read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
    else:
        data = _kv(text)
    items = data if isinstance(data, list) else [data]
    out = []
    for item in items:
        if not isinstance(item, dict):
            raise ConfigError("profile entries must be mappings")
        keys = list(item)
        grids = [v if isinstance(v, list) else [v] for v in item.values()]
        for combo in itertools.product(*grids):
            kw = dict(zip(keys, combo))
            if "K" in kw:
                kw["K"] = int(kw["K"])
            try:
                if "C" in kw:
                    out.append(SmoothnessProfile(**kw))
                else:
                    out.append(SmoothnessProfile.with_min_constant(**kw))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"profile {kw}: {exc}") from None
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    result = run_experiment(cfg)
    print(f"{len(result.traces)} runs -> {cfg.output.csv}")
    bad = result.violations()
    for t in bad:
        print(f"VIOLATION {t.algorithm} {t.instance} budget={t.budget:g}: regret {t.regret:.6g} "
              f"> bound {result.overlay[(t.instance, t.budget)]:.6g}")
    return EXIT_VIOLATION if bad else EXIT_OK


def cmd_bench(args) -> int:
    try:
        algos = [ALGO_ALIASES[a.lower()] for a in args.algos]
    except KeyError as exc:
        raise ConfigError(f"unknown algorithm {exc}; choose from {', '.join(sorted(ALGO_ALIASES))}") from None
    out = Path(args.out)
    data = {
        "instance": {"benchmark": args.name, "max_cost": args.max_cost},
        "algorithms": [{"name": a, "label": lbl} for a, lbl in zip(algos, args.algos)],
        "budgets": args.budgets,
        "budget_unit": "top_cost",
        "output": {"csv": str(out / f"{args.name}.csv"), "svg": str(out / f"{args.name}.svg")},
    }
    if args.model:
        data["instance"]["model"] = model_to_dict(parse_model(args.model))
    cfg = parse_config(data)
    result = run_experiment(cfg)
    print(f"{'algorithm':<12} {'budget':>10} {'spent':>10} {'regret':>12}")
    for t in result.traces:
        print(f"{t.algorithm:<12} {t.budget:>10g} {t.spent:>10g} {t.regret:>12.4e}")
    print(f"wrote {cfg.output.csv} and {cfg.output.svg}")
    return EXIT_OK


def cmd_bounds(args) -> int:
    profiles = parse_profiles(args.profile)
    models = [parse_model(m) for m in args.model]
    print(f"{'nu':>5} {'rho':>5} {'d':>5} {'C':>7} {'K':>2} {'model':<8} {'budget':>9} {'eff':>7} "
          f"{'regime':<6} {'h':>9} {'upper':>11} {'lower':>11} {'lower from':>10}  rate")
    for p, m, lam in itertools.product(profiles, models, args.budgets):
        q = BoundQuery.from_budget(p, m, lam)
        ub = theorem3_bound(q)
        rate = corollary4_rate(q)
        try:
            lb = theorem1_lower(p, m, lam)
            low, valid = f"{lb.value:11.4e}", f"{lb.valid_above:10.4g}"
        except CaseError:
            low, valid = f"{'-':>11}", f"{'-':>10}"
        print(f"{p.nu:5g} {p.rho:5g} {p.d:5g} {p.C:7.4g} {p.K:2d} {m.kind:<8} {lam:9g} {q.eff_budget:7d} "
              f"{ub.regime:<6} {ub.h:9.4g} {ub.regret_bound:11.4e} {low} {valid}  {rate.tag}")
    return EXIT_OK


def cmd_adversarial(args) -> int:
    if args.C is None:
        profile = SmoothnessProfile.with_min_constant(args.nu, args.rho, args.d, args.K)
    else:
        profile = SmoothnessProfile(args.nu, args.rho, args.d, args.C, args.K)
    model = parse_model(args.model)
    try:
        if args.variant == "a":
            family = make_width_limited_family(profile, args.h, args.s, model)
        else:
            rule = BranchRule("random", seed=args.seed) if args.random_branch else BranchRule("constant", 0)
            family = [make_depth_limited_instance(profile, args.h, rule, model)]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    horizon = args.horizon or args.h + 5
    failed = 0
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    worst = 0.0
    for k, inst in enumerate(family):
        rep = verify_membership(inst, horizon)
        failed += not rep.passed
        if out:
            inst.save(out / f"{args.variant}-{k:03d}.json")
        if args.budget:
            env = FidelityEnvironment(inst, FidelitySchedule(model), args.budget)
            worst = max(worst, run_kometo(KometoConfig(args.budget, profile.K), env).regret)
    print(f"{len(family)} instance(s), {len(family) - failed} verified at horizon {horizon}")
    if args.budget:
        print(f"lower bound ({args.variant}) at budget {args.budget:g}: "
              f"{lemma6_bound(profile, model, args.budget, args.variant):.6g}")
        print(f"worst optimizer regret over the family: {worst:.6g}")
    return EXIT_VIOLATION if failed else EXIT_OK


def cmd_verify(args) -> int:
    try:
        inst = TreeInstance.load(args.instance)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    rep = verify_membership(inst, args.horizon)
    print(rep)
    return EXIT_OK if rep.passed else EXIT_VIOLATION


def cmd_plot(args) -> int:
    traces = [t for p in args.csv for t in parse_csv(p)]
    emit_svg(traces, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kometo", description="Multi-fidelity tree search experiments and bounds")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config (YAML or JSON)")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="sweep one benchmark")
    p.add_argument("name")
    p.add_argument("--budgets", type=float, nargs="+", default=[10, 50, 100, 200, 400],
                   help="multiples of the top-fidelity cost")
    p.add_argument("--algos", nargs="+", default=["kometo", "sqrt", "sequool"])
    p.add_argument("--max-cost", type=float, default=100.0)
    p.add_argument("--model", help="cost-to-bias model, e.g. poly:A=1,alpha=1 (default: calibrated)")
    p.add_argument("--out", default="results")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("bounds", help="tabulate upper and lower regret bounds")
    p.add_argument("profile", help="nu=1,rho=0.5,d=0[,C=..,K=..] or a YAML file (lists form a grid)")
    p.add_argument("--model", nargs="+", default=["poly:A=1,alpha=1", "exp:B=1,sigma=1,beta=1", "cutoff:a=1"])
    p.add_argument("--budgets", type=float, nargs="+", default=[1e2, 1e3, 1e4, 1e5, 1e6])
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("adversarial", help="build and check the width/depth-limited instance families")
    p.add_argument("--variant", choices=["a", "b"], required=True)
    p.add_argument("--h", type=int, default=3)
    p.add_argument("--s", type=int, default=0)
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--d", type=float, default=0.0)
    p.add_argument("--C", type=float)
    p.add_argument("--K", type=int, default=2)
    p.add_argument("--model", default="cutoff:a=1")
    p.add_argument("--random-branch", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=int)
    p.add_argument("--budget", type=float, help="also run the optimizer and the lower bound at this budget")
    p.add_argument("--out", help="directory for the instance files")
    p.set_defaults(func=cmd_adversarial)

    p = sub.add_parser("verify", help="check a saved tree instance")
    p.add_argument("instance")
    p.add_argument("--horizon", type=int, default=20)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plot", help="plot CSV traces (including external ones) to SVG")
    p.add_argument("csv", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
