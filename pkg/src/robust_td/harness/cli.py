"""``robust-td`` command line.

Exit codes: 0 success, 1 runtime failure (divergence, infeasible RUMEM plan,
I/O), 2 malformed configuration or arguments.
"""

import argparse
import logging
import math
import sys

import numpy as np

from ..hardness import build_instance, verify_indistinguishability
from ..learners import DivergenceError, InfeasiblePlanError
from ..mrp import mrp_to_text, save_mrp
from ..rumem import RumemConfig, RumemSchedule, estimate
from .config import ConfigError, dump_config, load_config, resolve
from .experiment import build_learner, run_experiment
from .instances import generate_instance

log = logging.getLogger("robust_td")

FAITHFUL_T = 1_000_000
FAITHFUL_STRIDE = 5


def _common(p):
    p.add_argument("--seed", type=int, default=None, help="base seed override")
    p.add_argument("--out", default=None, help="output path override")
    p.add_argument("--log-stride", type=int, default=None, help="logging cadence override (steps)")


def build_parser():
    parser = argparse.ArgumentParser(prog="robust-td", description="TD(0) / Robust-TD experiments under Huber-contaminated rewards.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config and write trials.csv / aggregate.csv")
    p.add_argument("config")
    _common(p)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--T", type=int, default=None, help="horizon override")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--faithful", action="store_true",
                   help=f"raise T to {FAITHFUL_T} (robust_td stride {FAITHFUL_STRIDE} unless set in the config)")

    p = sub.add_parser("validate", help="validate a config and print it fully resolved")
    p.add_argument("config")
    _common(p)

    p = sub.add_parser("gen-instance", help="generate a random MRP and print or save it")
    p.add_argument("--num-states", type=int, default=100)
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--reward-lo", type=float, default=0.0)
    p.add_argument("--reward-hi", type=float, default=5.0)
    _common(p)

    p = sub.add_parser("lower-bound", help="build and check the two-instance lower-bound construction")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--samples", type=int, default=100_000)
    _common(p)

    p = sub.add_parser("rumem-coverage", help="Monte-Carlo coverage of the RUMEM error bound on i.i.d. data")
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--N", type=int, default=100_000)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--C", type=float, default=8.0)
    p.add_argument("--outlier", type=float, default=1e6)
    p.add_argument("--schedule", choices=("analysis", "practical"), default="analysis")
    _common(p)
    return parser


def _load(args):
    cfg = load_config(args.config)
    cfg = cfg.with_overrides(base_seed=args.seed, log_stride=args.log_stride,
                             trials=getattr(args, "trials", None), T=getattr(args, "T", None))
    if getattr(args, "faithful", False):
        over = {"T": max(cfg.T, FAITHFUL_T)}
        data = cfg.model_dump(by_alias=True)
        if data["learner"]["kind"] == "robust_td" and data["learner"]["estimation_stride"] == 1:
            data["learner"]["estimation_stride"] = FAITHFUL_STRIDE
        data.update(over)
        cfg = type(cfg).model_validate(data)
    return cfg


def cmd_run(args):
    cfg = _load(args)
    res = run_experiment(cfg, workers=args.workers, out=args.out)
    for rec in res.trials:
        log.info("trial %d seed %d: d_T=%.6g resets=%d (%.2fs)",
                 rec.trial_index, rec.seed, rec.d_series[-1], rec.reset_events.size, rec.wall_time)
    k = max(1, int(round(0.1 * res.mse_mean.size)))
    print(f"wrote {res.out_dir / 'trials.csv'} and {res.out_dir / 'aggregate.csv'}")
    print(f"final mse: {res.mse_mean[-1]:.6g}  plateau mse (last 10%): {res.mse_mean[-k:].mean():.6g}")
    return 0


def cmd_validate(args):
    cfg = _load(args)
    mrp, noise, attack = resolve(cfg)
    _, _, report = build_learner(cfg, mrp, noise, attack)
    sys.stdout.write(dump_config(cfg))
    print("# resolved learner parameters:")
    for k, v in report.items():
        print(f"#   {k}: {v}")
    return 0


def cmd_gen_instance(args):
    seed = 0 if args.seed is None else args.seed
    mrp = generate_instance(args.num_states, args.K, args.gamma, args.reward_lo, args.reward_hi, seed)
    if args.out:
        save_mrp(mrp, args.out)
        print(f"wrote {args.out}")
    else:
        print(mrp_to_text(mrp))
    return 0


def cmd_lower_bound(args):
    inst = build_instance(args.rho, args.eps, args.gamma)
    seed = 0 if args.seed is None else args.seed
    rep = verify_indistinguishability(inst, args.samples, seed)
    atoms = ", ".join(f"{a:.6g}" for a in inst.mixture1.support)
    masses = ", ".join(f"{p:.6g}" for p in inst.mixture1.probs)
    print(f"mixture atoms: ({atoms}) masses: ({masses})")
    print(f"R1 = {inst.R1:.6g}, R2 = {inst.R2:.6g}")
    print(f"gap |V1 - V2| = {inst.value_gap:.6f}")
    print(f"mixtures identical: {str(rep.mixtures_identical).lower()}")
    print(f"estimator outputs identical: {str(rep.outputs_identical).lower()}")
    print(f"empirical mean worst-case error {rep.worst_error:.6g} vs threshold {rep.threshold:.6g}: "
          f"{'exceeds' if rep.exceeds_threshold else 'below'}")
    if args.out:
        save_mrp(inst.as_mrp(1), args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_rumem_coverage(args):
    cfg = RumemConfig(delta=args.delta, eps=args.eps, schedule=RumemSchedule.from_name(args.schedule))
    seed = 0 if args.seed is None else args.seed
    children = np.random.SeedSequence(seed).spawn(args.reps)
    hits = 0
    bound = None
    for child in children:
        rng = np.random.Generator(np.random.Philox(child))
        x = rng.standard_normal(args.N)
        bad = rng.random(args.N) < args.eps
        x[bad] = args.outlier * rng.choice([-1.0, 1.0], size=int(bad.sum()))
        out = estimate(x, cfg, strict=False)
        bound = args.C * (math.sqrt(args.eps) + math.sqrt(out.plan.tau / args.N * math.log(args.N / args.delta)))
        hits += abs(out.estimate) <= bound
    p = out.plan
    print(f"plan: tau={p.tau} n={p.n} L={p.L} bucket_size={p.bucket_size} feasible={str(p.feasible).lower()}")
    print(f"bound {bound:.6g}; coverage {hits}/{args.reps} = {hits / args.reps:.4f}")
    return 0


COMMANDS = {
    "run": cmd_run,
    "validate": cmd_validate,
    "gen-instance": cmd_gen_instance,
    "lower-bound": cmd_lower_bound,
    "rumem-coverage": cmd_rumem_coverage,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error:\n{exc}", file=sys.stderr)
        return 2
    except (DivergenceError, InfeasiblePlanError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
