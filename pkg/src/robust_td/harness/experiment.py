"""Multi-trial seeded runs and CSV export.

Trial ``i`` uses seed ``base_seed + i``. Trials run in a process pool, one
trial per task; results are gathered, sorted by trial index and written by
the parent process only, so outputs do not depend on the worker count.
"""

import csv
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..learners import RobustTdConfig, Td0Config, run_robust_td, run_td0, finite_time_schedule
from ..mrp import mixing_time, steady_state
from ..rumem import RumemSchedule
from .config import ConfigError, default_sigma1, resolve

__all__ = ["OUTPUT_ENV", "TrialRecord", "ExperimentResult", "build_learner", "run_trial", "run_experiment", "output_dir",
           "write_tables", "read_trials"]

OUTPUT_ENV = "ROBUST_TD_OUTPUT_DIR"


@dataclass(frozen=True, eq=False)
class TrialRecord:
    trial_index: int
    seed: int
    times: np.ndarray
    d_series: np.ndarray
    reset_events: np.ndarray
    wall_time: float

    def resets_per_row(self):
        """Resets in ``(t_prev, t]`` for each logged time ``t``."""
        idx = np.searchsorted(self.times, self.reset_events, side="left")
        return np.bincount(idx, minlength=self.times.size)[: self.times.size]


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    times: np.ndarray
    mse_mean: np.ndarray
    mse_std: np.ndarray
    trials: list
    learner_params: dict
    out_dir: Path = None


def build_learner(cfg, mrp, noise, attack):
    """``(kind, learner config, resolved-parameter report)`` for ``cfg``."""
    spec = cfg.learner
    if spec.kind == "td0":
        return "td0", Td0Config(spec.step.build(), cfg.T), {"step": spec.step.model_dump()}
    ss = steady_state(mrp)
    tau_mix = mixing_time(mrp.transition) if spec.tau_mix == "auto" else spec.tau_mix
    eps = attack.eps if spec.eps == "auto" else spec.eps
    s1 = default_sigma1(mrp, noise) if spec.sigma1 == "auto" else spec.sigma1
    report = {"tau_mix": tau_mix, "eps": eps, "sigma1": s1}
    alpha, burn_in = spec.alpha, spec.burn_in
    if alpha == "finite_time" or burn_in == "finite_time":
        a3, b3, rep = finite_time_schedule(mrp, cfg.T, tau_mix, spec.c1, spec.c2, ss=ss)
        alpha = a3 if alpha == "finite_time" else alpha
        burn_in = b3 if burn_in == "finite_time" else burn_in
        report["finite_time"] = rep
    report.update(alpha=alpha, burn_in=burn_in)
    try:
        rcfg = RobustTdConfig(
            alpha=alpha, T=cfg.T, burn_in=burn_in, sigma1=s1, K=mrp.num_features, eps=eps,
            tau_mix=tau_mix, constant_C=spec.constant_C, estimation_stride=spec.estimation_stride,
            schedule=RumemSchedule.from_name(spec.schedule), strict=spec.strict,
        )
    except ValueError as exc:
        raise ConfigError(f"learner: {exc}") from None
    return "robust_td", rcfg, report


def run_trial(args):
    """One trial; picklable entry point for the work pool."""
    cfg, trial_index = args
    mrp, noise, attack = resolve(cfg)
    kind, lcfg, _ = build_learner(cfg, mrp, noise, attack)
    seed = cfg.base_seed + trial_index
    t0 = time.perf_counter()
    if kind == "td0":
        trace = run_td0(mrp, noise, attack, lcfg, seed, start=cfg.start, record_every=cfg.log_stride)
    else:
        if cfg.start != "stationary":
            raise ConfigError("start: robust_td runs start from the stationary distribution")
        trace = run_robust_td(mrp, noise, attack, lcfg, seed, record_every=cfg.log_stride)
    return TrialRecord(trial_index, seed, trace.times, trace.d_series, trace.reset_events,
                       time.perf_counter() - t0)


def output_dir(cfg, out=None):
    """``out`` if given, else ``cfg.output`` under ``$ROBUST_TD_OUTPUT_DIR`` (when set)."""
    if out is not None:
        return Path(out)
    base = os.environ.get(OUTPUT_ENV)
    p = Path(cfg.output)
    return p if base is None or p.is_absolute() else Path(base) / p


def _fmt(x):
    return format(float(x), ".17g")


def write_tables(result, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "trials.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "t", "d_t", "reset"])
        for rec in result.trials:
            resets = rec.resets_per_row()
            for t, d, r in zip(rec.times, rec.d_series, resets):
                w.writerow([rec.trial_index, int(t), _fmt(d), int(r)])
    with open(out_dir / "aggregate.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "mse_mean", "mse_std", "n_trials"])
        n = len(result.trials)
        for t, m, s in zip(result.times, result.mse_mean, result.mse_std):
            w.writerow([int(t), _fmt(m), _fmt(s), n])


def run_experiment(cfg, workers=None, out=None, write=True):
    """Run every trial of ``cfg``, aggregate ``d_t`` and (optionally) write the tables.

    Raises
    ------
    ConfigError
        If the configuration cannot be turned into a learner.
    DivergenceError, InfeasiblePlanError
        If any trial fails.
    """
    mrp, noise, attack = resolve(cfg)
    _, _, report = build_learner(cfg, mrp, noise, attack)
    jobs = [(cfg, i) for i in range(cfg.trials)]
    workers = 1 if workers is None else int(workers)
    if workers <= 1 or cfg.trials == 1:
        records = [run_trial(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, cfg.trials)) as pool:
            records = list(pool.map(run_trial, jobs))
    records.sort(key=lambda r: r.trial_index)
    D = np.vstack([r.d_series for r in records])
    result = ExperimentResult(
        times=records[0].times, mse_mean=D.mean(axis=0), mse_std=D.std(axis=0),
        trials=records, learner_params=report,
    )
    if write:
        d = output_dir(cfg, out)
        write_tables(result, d)
        result = ExperimentResult(result.times, result.mse_mean, result.mse_std, records, report, d)
    return result


def read_trials(path):
    """``{trial: (times, d_series)}`` from a ``trials.csv`` file."""
    out = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(int(row["trial"]), ([], []))
            out[int(row["trial"])][0].append(int(row["t"]))
            out[int(row["trial"])][1].append(float(row["d_t"]))
    return {k: (np.array(t), np.array(d)) for k, (t, d) in out.items()}
