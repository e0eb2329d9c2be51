"""``updrift`` command-line front end.

Exit codes: 0 ok or consistent, 1 inconsistent verdict, 2 usage or config
error, 3 verdict withheld.  Output is written only after a command has
finished successfully.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import bounds as B
from . import ea as E
from . import verify as V
from ._rng import DEFAULT_SEED, trial_rng
from ._stats import ProportionEstimate
from .io import ExperimentConfig, read_config, render, write_output
from .potential import SizeError
from .processes import DEFAULT_CAP, DomainError, FreshStart, Kind, ProcessSpec, ZeroLaw

EXIT_OK, EXIT_INCONSISTENT, EXIT_USAGE, EXIT_WITHHELD = 0, 1, 2, 3
COMMON = ("command", "trials", "cap", "seed", "out", "format", "config", "func")
STATUS_EXIT = {"consistent": EXIT_OK, "inconsistent": EXIT_INCONSISTENT, "withheld": EXIT_WITHHELD}


class UsageError(Exception):
    pass


# parameter parsing helpers

def parse_zero_law(text: str) -> ZeroLaw:
    """``point:V``, ``binomial:K:P`` or ``table:p0,p1,...``."""
    kind, _, rest = text.partition(":")
    try:
        if kind == "point":
            return ZeroLaw.point(int(rest))
        if kind == "binomial":
            k, p = rest.split(":")
            return ZeroLaw.binomial(int(k), float(p))
        if kind == "table":
            return ZeroLaw.tabulated([float(v) for v in rest.split(",")])
    except ValueError as exc:
        raise UsageError(f"bad zero law {text!r}: {exc}") from exc
    raise UsageError(f"unknown zero law kind {kind!r}")


def parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def spec_from_params(p: dict) -> ProcessSpec:
    kind = Kind(p["kind"])
    zero = parse_zero_law(p["zero_law"]) if p.get("zero_law") else None
    fresh = None
    if kind is Kind.BINOMIAL_FRESH_START:
        if p.get("xmin") is None or p.get("p_fresh") is None:
            raise UsageError("binomial_fresh_start needs --xmin and --p-fresh")
        fresh = FreshStart(p["xmin"], p["p_fresh"])
    x0 = p.get("x0")
    if x0 is None:
        x0 = 0 if kind in (Kind.BINOMIAL_WITH_ZERO, Kind.BINOMIAL_FRESH_START) else 1
    return ProcessSpec(kind, p["delta"], p["n"], p.get("k"), p.get("gamma0"), zero, fresh, x0)


def ea_config_from_params(p: dict, n: int, lam: int) -> E.EaConfig:
    return E.EaConfig(n, lam, E.Selection(p["selection"]), pmut_for(p, n),
                      E.Fitness(p["fitness"]), p.get("mu"), p.get("c"))


def pmut_for(p: dict, n: int) -> float:
    """Explicit ``--pmut`` wins; otherwise ``pmut_coef / n**pmut_exp``."""
    if p.get("pmut") is not None:
        return p["pmut"]
    return p["pmut_coef"] / n ** p["pmut_exp"]


def lam_for(p: dict, n: int) -> int:
    rule = p["lam_rule"]
    if rule == "fixed":
        if p.get("lam") is None:
            raise UsageError("--lam is required with --lam-rule fixed")
        return p["lam"]
    if rule == "nlnn":
        return math.ceil(n * math.log(n))
    probe = ea_config_from_params(p, n, p.get("lam") or 1)
    lam = E.suggest_ea_lambda(probe, p.get("gamma0"))
    if lam is None:
        raise UsageError(f"no population-size fixed point found for n={n}")
    return lam


# command handlers: params -> (result, rows or None, exit code)

def bound_report(p: dict) -> B.BoundReport:
    thm = p["theorem"]

    def need(*names):
        missing = [f"--{x.replace('_', '-')}" for x in names if p.get(x) is None]
        if missing:
            raise UsageError(f"bound {thm} requires {', '.join(missing)}")
        return [p[x] for x in names]

    if thm == "thm1":
        return B.thm1_bound(*need("delta", "n", "gamma0", "k"))
    if thm == "thm2":
        return B.thm2_bound(*need("delta", "n", "gamma0", "k", "e0"))
    if thm == "thm3":
        return B.thm3_bound(*need("delta", "n", "k", "xmin", "p"))
    if thm == "nodrift":
        d0, g0 = need("d0", "gamma0")
        return B.nodrift_bound(d0, g0, p.get("k"))
    if thm == "dip":
        delta, D = need("delta", "D")
        return B.dip_bound(delta, D, p.get("n"))
    if thm == "climb":
        delta, D = need("delta", "D")
        return B.climb_floor(delta, D, p.get("n"))
    model = level_model_from_params(p)
    if thm == "level-new":
        return B.level_new_bound(model)
    if thm == "level-large":
        return B.level_large_delta_bound(model)
    if thm == "level-old":
        return B.level_old_bound(model)
    raise UsageError(f"unknown theorem {thm!r}")


def level_model_from_params(p: dict) -> B.LevelModel:
    missing = [f"--{x}" for x in ("m", "delta", "gamma0", "lam") if p.get(x) is None]
    if missing:
        raise UsageError(f"bound {p['theorem']} requires {', '.join(missing)}")
    if p.get("z") is None:
        raise UsageError("level bounds need --z (one value, or m-1 comma-separated values)")
    z = parse_floats(p["z"])
    if len(z) == 1 and p["m"] > 2:
        z = z * (p["m"] - 1)
    return B.LevelModel(p["m"], tuple(z), p["delta"], p["gamma0"], p["lam"])


def cmd_bound(p: dict, cfg: ExperimentConfig):
    report = bound_report(p)
    result = report.to_dict()
    if p["theorem"].startswith("level-"):
        model = level_model_from_params(p)
        large = p["theorem"] == "level-large"
        result["suggested_lambda"] = B.suggest_lambda(model, large_delta=large)
        if p["theorem"] == "level-new":
            result["comparison"] = B.compare_level_bounds(model)
    return result, None, EXIT_OK


def cmd_simulate(p: dict, cfg: ExperimentConfig):
    spec = spec_from_params(p)
    summary = V.estimate_hitting_time(spec, cfg.trials, cfg.cap, cfg.seed, p["workers"])
    result = {"spec": spec.to_dict(), "summary": summary.to_dict(),
              "precondition_violations": spec.violations()}
    if p.get("oracle"):
        result["exact"] = V.exact_hitting_time_markov(spec)
    return result, None, EXIT_OK


def cmd_verify(p: dict, cfg: ExperimentConfig):
    spec = spec_from_params(p)
    check = p["check"]
    workers = p["workers"]
    if check == "hitting":
        report = V.bound_for_spec(spec)
        if p.get("bound_override") is not None:
            report.bound = p["bound_override"]
            report.notes.append("bound overridden on the command line")
        if not report.valid:
            raise UsageError(f"{report.theorem_id} hypotheses fail: "
                             f"{', '.join(report.violated_preconditions)}")
        summary = V.estimate_hitting_time(spec, cfg.trials, cfg.cap, cfg.seed, workers)
        verdict = V.check_theorem(report, summary, V.Direction.UPPER_BOUNDS_MEAN)
        extra = {"bound_report": report.to_dict()}
    elif check == "return":
        verdict = V.return_probability_check(spec, cfg.trials, cfg.seed, hi=p.get("hi"),
                                             lo=p.get("lo"), cap=cfg.cap, workers=workers)
        extra = {}
    else:
        if p.get("D") is None:
            raise UsageError(f"--D is required for the {check} check")
        fn = V.dip_probability_check if check == "dip" else V.climb_success_check
        verdict = fn(spec, p["D"], cfg.trials, cfg.seed, workers)
        extra = {}
    if check != "hitting" and p.get("bound_override") is not None:
        verdict = _override_verdict(verdict, p["bound_override"])
    result = {"check": check, "spec": spec.to_dict(), "verdict": verdict.to_dict(), **extra}
    return result, None, STATUS_EXIT[verdict.status]


def _override_verdict(verdict: V.Verdict, value: float) -> V.Verdict:
    report = B.BoundReport("override", {}, value, unit="probability",
                           violated_preconditions=list(verdict.flags))
    return V.check_theorem(report, verdict.empirical, verdict.direction, require_valid=False)


def _ea_rows(p: dict, cfg: ExperimentConfig):
    rows = []
    for n in p["n"]:
        lam = lam_for(p, n)
        config = ea_config_from_params(p, n, lam)
        records = [E.ea_run(config, cfg.cap, trial_rng(cfg.seed, i, n)) for i in range(cfg.trials)]
        evals = [r.evaluations if r.hit else None for r in records]
        summary = V.summarize_times(evals, cfg.seed)
        row = {"n": n, "lam": lam, "pmut": config.pmut, "runs": cfg.trials,
               "hits": sum(r.hit for r in records), "censored": summary.censored,
               "mean_evaluations": summary.mean, "stderr": summary.stderr,
               "mean_generations": float(np.mean([r.generations for r in records]))}
        if config.fitness is not E.Fitness.ONEMAX_PARTIAL:
            report = E.level_bound_for(config, p.get("gamma0"))
            row.update({"bound": report.bound, "bound_theorem": report.theorem_id,
                        "lambda_min": report.auxiliary.get("lambda_min"),
                        "lambda_below_min": any(v.startswith("population size") for v in report.violated_preconditions),
                        "bound_valid": report.valid})
        rows.append(row)
    return rows


def cmd_ea(p: dict, cfg: ExperimentConfig):
    rows = _ea_rows(p, cfg)
    result = {"rows": rows}
    means = [(r["n"], r["mean_evaluations"]) for r in rows if r["censored"] == 0]
    if len(means) >= 2:
        xs, ys = np.log([m[0] for m in means]), np.log([m[1] for m in means])
        result["loglog_slope"] = float(np.polyfit(xs, ys, 1)[0])
    return result, rows, EXIT_OK


def _population(n: int, lam: int, value: int, upper: float, fitness: E.Fitness) -> np.ndarray:
    """``lam`` strings of fitness ``value`` with a fraction ``upper`` raised to ``value+1``."""
    pop = np.zeros((lam, n), dtype=np.uint8)
    pop[:, :value] = 1
    raised = int(round(upper * lam))
    if raised and value < n:
        pop[:raised, value] = 1
    return pop


def cmd_levels(p: dict, cfg: ExperimentConfig):
    n, lam = p["n"][0], p.get("lam")
    if lam is None:
        raise UsageError("--lam is required for levels")
    config = ea_config_from_params(p, n, lam)
    value = n if p.get("fitness_value") is None else p["fitness_value"]
    if not 0 <= value <= n:
        raise UsageError("--fitness-value must lie in [0, n]")
    upper = p["upper_fraction"]
    j = p.get("level_target")
    if j is None:
        j = min(n, value + 1)
    pop = _population(n, lam, value, upper, config.fitness)
    est: ProportionEstimate = E.estimate_level_params(config, pop, j, cfg.trials,
                                                      trial_rng(cfg.seed, 0))
    copy = (1 - config.pmut) ** n
    floors = {}
    if value >= j:
        floors["copy_probability"] = copy
    elif value == j - 1 and upper == 0 and config.fitness is not E.Fitness.ONEMAX_PARTIAL:
        model = E.level_model_for(config, p.get("gamma0")).model
        floors["z_j"] = model.z[j - 1]
    elif value == j - 1 and upper > 0 and config.fitness is not E.Fitness.ONEMAX_PARTIAL:
        model = E.level_model_for(config, p.get("gamma0")).model
        floors["growth"] = (1 + model.delta) * upper
    checks = {name: est.phat + V.MARGIN_SE * est.stderr >= f for name, f in floors.items()}
    result = {"config": config.to_dict(), "population": {"fitness_value": value,
              "upper_fraction": upper}, "target_fitness": j, "estimate": est.to_dict(),
              "floors": floors, "floor_checks": checks}
    return result, None, EXIT_OK


SWEEP_PARAMS = ("n", "delta", "k", "gamma0")


def cmd_sweep(p: dict, cfg: ExperimentConfig):
    rows = []
    for raw in parse_floats(p["values"]):
        q = dict(p)
        key = p["param"]
        q[key] = int(raw) if key in ("n", "k") else raw
        spec = spec_from_params(q)
        summary = V.estimate_hitting_time(spec, cfg.trials, cfg.cap, cfg.seed, p["workers"])
        row = {key: q[key], "mean": summary.mean, "stderr": summary.stderr,
               "censored": summary.censored, "trials": summary.trials}
        try:
            report = V.bound_for_spec(spec)
            row.update({"bound": report.bound, "bound_valid": report.valid})
        except ValueError:
            row.update({"bound": None, "bound_valid": None})
        if p.get("oracle"):
            row["exact"] = V.exact_hitting_time_markov(spec)
        rows.append(row)
    return {"rows": rows}, rows, EXIT_OK


# parser

def _process_flags(sp: argparse.ArgumentParser, *, n_required: bool = True) -> None:
    sp.add_argument("--kind", required=True, choices=[k.value for k in Kind])
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--n", type=int, required=n_required)
    sp.add_argument("--k", type=int)
    sp.add_argument("--gamma0", type=float)
    sp.add_argument("--x0", type=int)
    sp.add_argument("--zero-law", help="point:V, binomial:K:P or table:p0,p1,...")
    sp.add_argument("--xmin", type=int)
    sp.add_argument("--p-fresh", type=float)
    sp.add_argument("--workers", type=int, default=1)


def _run_flags(sp: argparse.ArgumentParser, trials: int, cap: int) -> None:
    sp.add_argument("--trials", type=int, default=trials)
    sp.add_argument("--cap", type=int, default=cap)
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)


def _ea_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--n", type=int, nargs="+", required=True)
    sp.add_argument("--lam", type=int)
    sp.add_argument("--lam-rule", choices=["fixed", "nlnn", "suggest"], default="fixed")
    sp.add_argument("--selection", choices=[s.value for s in E.Selection], required=True)
    sp.add_argument("--fitness", choices=[f.value for f in E.Fitness], default="onemax")
    sp.add_argument("--pmut", type=float)
    sp.add_argument("--pmut-coef", type=float, default=1.0)
    sp.add_argument("--pmut-exp", type=float, default=1.0)
    sp.add_argument("--mu", type=int)
    sp.add_argument("--c", type=float)
    sp.add_argument("--gamma0", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="updrift", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="replay the config stored in a previous output file")
    sub = parser.add_subparsers(dest="command")

    def add(name, func, help_, fmt="kv"):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--out")
        sp.add_argument("--format", choices=["kv", "csv"], default=fmt)
        sp.set_defaults(func=func)
        return sp

    sp = add("bound", cmd_bound, "evaluate a run-time or probability bound")
    sp.add_argument("theorem", choices=["thm1", "thm2", "thm3", "nodrift", "dip", "climb",
                                        "level-new", "level-large", "level-old"])
    for name, typ in (("delta", float), ("n", int), ("gamma0", float), ("k", int),
                      ("e0", float), ("xmin", int), ("p", float), ("d0", int), ("D", int),
                      ("m", int), ("lam", int)):
        sp.add_argument(f"--{name}", type=typ)
    sp.add_argument("--z", help="upgrade floors: one value or m-1 comma-separated values")
    sp.set_defaults(trials=None, cap=None, seed=DEFAULT_SEED)

    sp = add("simulate", cmd_simulate, "Monte Carlo hitting time of a process")
    _process_flags(sp)
    _run_flags(sp, 1000, DEFAULT_CAP)
    sp.add_argument("--oracle", action="store_true", help="also solve the exact Markov chain")

    sp = add("verify", cmd_verify, "compare simulation with a theorem")
    _process_flags(sp)
    _run_flags(sp, 1000, DEFAULT_CAP)
    sp.add_argument("--check", choices=["hitting", "dip", "climb", "return"], default="hitting")
    sp.add_argument("--D", type=int)
    sp.add_argument("--hi", type=int)
    sp.add_argument("--lo", type=int)
    sp.add_argument("--bound-override", type=float)

    sp = add("ea", cmd_ea, "run an EA batch per problem size", fmt="kv")
    _ea_flags(sp)
    _run_flags(sp, 20, 100_000)

    sp = add("levels", cmd_levels, "estimate upgrade and growth probabilities on a built population")
    _ea_flags(sp)
    sp.add_argument("--fitness-value", type=int)
    sp.add_argument("--upper-fraction", type=float, default=0.0)
    sp.add_argument("--level-target", type=int, help="estimate Pr[f(offspring) >= this]")
    _run_flags(sp, 10_000, 0)
    sp.set_defaults(cap=None)

    sp = add("sweep", cmd_sweep, "hitting-time table over one parameter", fmt="csv")
    _process_flags(sp, n_required=False)
    _run_flags(sp, 1000, DEFAULT_CAP)
    sp.add_argument("--param", choices=SWEEP_PARAMS, required=True)
    sp.add_argument("--values", required=True, help="comma-separated values")
    sp.add_argument("--oracle", action="store_true")
    return parser


HANDLERS = {"bound": cmd_bound, "simulate": cmd_simulate, "verify": cmd_verify,
            "ea": cmd_ea, "levels": cmd_levels, "sweep": cmd_sweep}


def run_config(cfg: ExperimentConfig) -> tuple[str, int]:
    """Execute a config; returns the rendered document and the exit code."""
    if cfg.command not in HANDLERS:
        raise UsageError(f"unknown command {cfg.command!r}")
    result, rows, code = HANDLERS[cfg.command](cfg.params, cfg)
    return render(cfg, result, rows), code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config:
            if args.command:
                parser.error("--config replays a stored command; give no subcommand")
            cfg = read_config(args.config)
        elif not args.command:
            parser.error("a subcommand is required")
        else:
            ns = vars(args)
            params = {k: v for k, v in ns.items() if k not in COMMON}
            cfg = ExperimentConfig(args.command, params, ns.get("trials"), ns.get("cap"),
                                   ns.get("seed", DEFAULT_SEED), ns.get("out"), ns["format"])
            if cfg.trials is not None and cfg.trials < 1 and cfg.command != "bound":
                raise UsageError("--trials must be at least 1")
        text, code = run_config(cfg)
    except (UsageError, DomainError, SizeError, V.InvalidBoundError, ValueError, KeyError) as exc:
        print(f"updrift: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    write_output(text, cfg.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
