"""Seeded training runs, metric files, cross-seed aggregation and the analysis sweep."""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import complexity
from .environments import make_env, write_trajectory_csv
from .policy_net import DEFAULT_HIDDEN, init_params, load_checkpoint, save_checkpoint
from .reinforce import (AdamState, RiskObjective, SaturationError, adam_update,
                        estimate_gradient_stats, grad_norm, sample_trajectories)

log = logging.getLogger(__name__)

METRICS_COLUMNS = ("iter", "mean_return", "mean_disc_return", "grad_norm",
                   "saturations", "ms")
ANALYZE_COLUMNS = ("beta", "alpha_min", "L", "L_beta", "n", "n_beta", "ratio",
                   "in_range")

__all__ = [
    "ConfigError", "NumericalFailure", "ExperimentConfig", "RunRecord",
    "AggregateTable", "PRESETS", "parse_config_text", "load_study",
    "run_experiment", "run_study", "aggregate_runs", "load_run", "analyze",
    "analyze_csv", "save_checkpoint", "load_checkpoint",
]


class ConfigError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    env: str = "cartpole"
    beta: float = 0.0
    iterations: int = 2000
    trajectories: int = 10
    horizon: int = 200
    gamma: float = 0.99
    lr: float = 1e-3
    hidden: tuple = DEFAULT_HIDDEN
    seeds: tuple = tuple(range(10))
    out_dir: str = "runs"

    def __post_init__(self):
        if min(self.iterations, self.trajectories, self.horizon) < 1:
            raise ConfigError("iters, traj and horizon must all be >= 1")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not self.lr > 0:
            raise ConfigError("lr must be positive")
        if not math.isfinite(self.beta):
            raise ConfigError("beta must be finite")
        if len(self.hidden) != 3 or min(self.hidden) < 1:
            raise ConfigError("hidden must list three positive widths")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        try:
            make_env(self.env)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def objective(self) -> RiskObjective:
        return RiskObjective.from_beta(self.beta)

    @property
    def label(self) -> str:
        return f"{self.env}_{self.objective.label()}"

    def run_dir(self, seed) -> Path:
        return Path(self.out_dir) / self.label / f"seed{seed}"

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in _to_keyvals(self).items())


_KEYS = {
    "env": "env", "beta": "beta", "iters": "iterations", "traj": "trajectories",
    "horizon": "horizon", "gamma": "gamma", "lr": "lr", "hidden": "hidden",
    "seeds": "seeds", "out": "out_dir",
}


def _to_keyvals(cfg):
    d = asdict(cfg)
    return {
        "env": d["env"], "beta": repr(float(d["beta"])), "iters": d["iterations"],
        "traj": d["trajectories"], "horizon": d["horizon"], "gamma": repr(d["gamma"]),
        "lr": repr(d["lr"]), "hidden": ",".join(map(str, d["hidden"])),
        "seeds": ",".join(map(str, d["seeds"])), "out": d["out_dir"],
    }


def parse_seeds(text) -> tuple:
    """``"0..9"`` (inclusive) or a comma list ``"1,4,7"``."""
    seeds = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..")
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    return tuple(seeds)


def _parse_floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def parse_config_text(text) -> dict:
    """Parse ``key=value`` lines into raw strings; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS and key != "betas":
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


PRESETS = {
    "cartpole-paper": "env=cartpole\nbetas=0,-0.01,-0.1,-1,-10\niters=2000\ntraj=10\n"
                      "horizon=200\ngamma=0.99\nlr=0.001\nseeds=0..9\n",
    "cartpole-quick": "env=cartpole\nbetas=0\niters=600\ntraj=10\nhorizon=200\n"
                      "gamma=0.99\nlr=0.001\nseeds=0..9\n",
    "holonomic-paper": "env=holonomic\nbetas=0,-0.5,-1,-5\niters=10000\ntraj=10\n"
                       "horizon=500\ngamma=0.99\nlr=0.001\nseeds=0..9\n",
    "gridnav-paper": "env=gridnav\nbetas=0,-0.1,-0.5,-10\niters=8000\ntraj=10\n"
                     "horizon=200\ngamma=0.99\nlr=0.001\nseeds=0..4\n",
}


def load_study(config=None, **overrides) -> list:
    """Build one :class:`ExperimentConfig` per beta from a preset name or file.

    ``overrides`` use the file keys (``iters``, ``traj``, ``beta``, ...); a
    ``beta`` override replaces the preset's beta list.
    """
    raw = {}
    if config is not None:
        if config in PRESETS:
            raw = parse_config_text(PRESETS[config])
        else:
            path = Path(config)
            if not path.is_file():
                raise ConfigError(f"no preset or config file named {config!r}")
            raw = parse_config_text(path.read_text())
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in _KEYS and key != "betas":
            raise ConfigError(f"unknown override {key!r}")
        raw[key] = str(value)
    if "beta" in overrides and overrides["beta"] is not None:
        raw.pop("betas", None)

    try:
        betas = _parse_floats(raw.pop("betas")) if "betas" in raw else None
        kw = {}
        for key, value in raw.items():
            name = _KEYS[key]
            if name in ("iterations", "trajectories", "horizon"):
                kw[name] = int(value)
            elif name in ("beta", "gamma", "lr"):
                kw[name] = float(value)
            elif name == "hidden":
                kw[name] = tuple(int(v) for v in value.split(","))
            elif name == "seeds":
                kw[name] = parse_seeds(value)
            else:
                kw[name] = value
    except ValueError as exc:
        raise ConfigError(f"bad config value: {exc}") from None
    if betas is None:
        betas = [kw.pop("beta", 0.0)]
    kw.pop("beta", None)
    return [ExperimentConfig(beta=b, **kw) for b in betas]


@dataclass(eq=False)
class RunRecord:
    config: ExperimentConfig
    seed: int
    mean_return: np.ndarray
    mean_disc_return: np.ndarray
    grad_norm: np.ndarray
    saturations: np.ndarray
    ms: np.ndarray = None
    checkpoint_path: Path = None

    def __post_init__(self):
        n = len(self.mean_return)
        if any(len(a) != n for a in (self.mean_disc_return, self.grad_norm, self.saturations)):
            raise ValueError("metric series must have equal length")
        if self.ms is None:
            self.ms = np.full(n, np.nan)

    @property
    def iterations(self):
        return len(self.mean_return)

    def metrics_csv(self, with_timing=False) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(METRICS_COLUMNS)
        for i in range(self.iterations):
            ms = f"{self.ms[i]:.3f}" if with_timing else ""
            w.writerow([i, repr(float(self.mean_return[i])),
                        repr(float(self.mean_disc_return[i])),
                        repr(float(self.grad_norm[i])), int(self.saturations[i]), ms])
        return buf.getvalue()


def _write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def run_experiment(config: ExperimentConfig, seed, out_dir=None, write=True,
                   with_timing=False, dump_iterations=()) -> RunRecord:
    """Train one policy; the seed alone fixes initialisation and every rollout.

    Files written under ``config.run_dir(seed)`` (or ``out_dir``):
    ``metrics.csv``, ``timing.csv``, ``config.txt`` and ``policy.txt``.
    ``metrics.csv`` leaves the ``ms`` column empty unless ``with_timing``
    so that replays are byte-identical.
    """
    env = make_env(config.env, horizon=config.horizon, gamma=config.gamma)
    objective = config.objective
    rng = np.random.default_rng(seed)
    sizes = (env.spec.obs_dim, *config.hidden, env.spec.action_count)
    params = init_params(sizes, rng)
    adam = AdamState.zeros(params.param_count, lr=config.lr)
    run_dir = Path(out_dir) if out_dir is not None else config.run_dir(seed)
    dump_iterations = set(dump_iterations)

    T = config.iterations
    rets, disc, norms = np.empty(T), np.empty(T), np.empty(T)
    sats = np.zeros(T, dtype=np.int64)
    ms = np.empty(T)
    for it in range(T):
        t0 = time.perf_counter()
        trajs = sample_trajectories(params, env, config.trajectories, config.horizon, rng)
        try:
            grad, n_sat = estimate_gradient_stats(params, trajs, config.gamma, objective)
        except SaturationError as exc:
            raise NumericalFailure(f"{config.label} seed {seed} iter {it}: {exc}") from exc
        if not np.all(np.isfinite(grad)):
            raise NumericalFailure(f"{config.label} seed {seed} iter {it}: non-finite gradient")
        rets[it] = np.mean([tr.undiscounted_return for tr in trajs])
        disc[it] = np.mean([tr.discounted_return(config.gamma) for tr in trajs])
        norms[it] = grad_norm(grad)
        sats[it] = n_sat
        if write and it in dump_iterations:
            for i, tr in enumerate(trajs):
                write_trajectory_csv(tr.states, tr.actions, tr.rewards, tr.dones,
                                     _mkparent(run_dir / "trajectories" / f"iter{it:05d}_traj{i}.csv"))
        params, adam = adam_update(params, grad, adam)
        ms[it] = (time.perf_counter() - t0) * 1e3

    record = RunRecord(config, seed, rets, disc, norms, sats, ms)
    if write:
        _write(run_dir / "config.txt", replace(config, seeds=(seed,)).to_text())
        _write(run_dir / "metrics.csv", record.metrics_csv(with_timing))
        _write(run_dir / "timing.csv",
               "iter,ms\n" + "".join(f"{i},{v:.3f}\n" for i, v in enumerate(ms)))
        record.checkpoint_path = save_checkpoint(params, run_dir / "policy.txt")
    log.info("%s seed %d: final mean return %.2f", config.label, seed, rets[-1])
    return record


def _mkparent(path):
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _run_one(args):
    config, seed, kw = args
    return run_experiment(config, seed, **kw)


def run_study(configs, jobs=1, **kw) -> list:
    """Run every (config, seed) pair; with ``jobs > 1`` seeds fan out to processes."""
    tasks = [(cfg, seed, kw) for cfg in configs for seed in cfg.seeds]
    if jobs <= 1:
        return [_run_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, tasks))


def load_run(run_dir) -> RunRecord:
    """Rebuild a :class:`RunRecord` from a directory written by :func:`run_experiment`."""
    run_dir = Path(run_dir)
    cfg = load_study(run_dir / "config.txt")[0]
    cols = {c: [] for c in METRICS_COLUMNS}
    with open(run_dir / "metrics.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            for c in METRICS_COLUMNS:
                cols[c].append(row[c])
    if [int(i) for i in cols["iter"]] != list(range(len(cols["iter"]))):
        raise ValueError(f"{run_dir}: iteration column is not contiguous")
    ms = np.array([float(v) if v else np.nan for v in cols["ms"]])
    ckpt = run_dir / "policy.txt"
    return RunRecord(cfg, cfg.seeds[0],
                     np.array(cols["mean_return"], dtype=float),
                     np.array(cols["mean_disc_return"], dtype=float),
                     np.array(cols["grad_norm"], dtype=float),
                     np.array(cols["saturations"], dtype=np.int64), ms,
                     ckpt if ckpt.exists() else None)


AGG_METRICS = ("mean_return", "mean_disc_return", "grad_norm", "saturations")


@dataclass(eq=False)
class AggregateTable:
    label: str
    n_runs: int
    mean: dict = field(default_factory=dict)
    std: dict = field(default_factory=dict)

    @property
    def iterations(self):
        return len(next(iter(self.mean.values())))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", *(f"{m}_{s}" for m in AGG_METRICS for s in ("mean", "std"))])
        for i in range(self.iterations):
            w.writerow([i, *(repr(float(d[m][i])) for m in AGG_METRICS
                             for d in (self.mean, self.std))])
        return buf.getvalue()


def _signature(cfg):
    return {f.name: getattr(cfg, f.name) for f in fields(cfg)
            if f.name not in ("seeds", "out_dir")}


def aggregate_runs(records) -> AggregateTable:
    """Per-iteration mean and sample standard deviation across seeds."""
    records = list(records)
    if not records:
        raise ValueError("no runs to aggregate")
    sig = _signature(records[0].config)
    for r in records[1:]:
        if _signature(r.config) != sig:
            raise ValueError(
                f"cannot aggregate {r.config.label} with {records[0].config.label}: "
                "configs differ beyond the seed")
        if r.iterations != records[0].iterations:
            raise ValueError("runs have different iteration counts")
    table = AggregateTable(records[0].config.label, len(records))
    for m in AGG_METRICS:
        data = np.stack([np.asarray(getattr(r, m), dtype=float) for r in records])
        table.mean[m] = data.mean(axis=0)
        table.std[m] = data.std(axis=0, ddof=1) if len(records) > 1 else np.zeros(data.shape[1])
    return table


def analyze(inputs: complexity.ComplexityInputs, betas) -> list:
    """One row per beta comparing risk-neutral and risk-sensitive iteration bounds."""
    L = complexity.lipschitz_neutral(inputs.gamma, inputs.r_max, inputs.F1, inputs.F2)
    n = complexity.iterations_lower_bound(inputs.delta0, L, inputs.A, inputs.B,
                                          inputs.C, inputs.epsilon)
    rng_ = complexity.beta_admissible_range(inputs.gamma, inputs.r_max)
    rows = []
    for beta in betas:
        a = complexity.alpha_min(beta)
        L_beta = complexity.lipschitz_sensitive(L, a)
        n_beta = complexity.iterations_lower_bound(inputs.delta0, L_beta, inputs.A,
                                                   inputs.B, inputs.C, inputs.epsilon)
        rows.append({"beta": beta, "alpha_min": a, "L": L, "L_beta": L_beta,
                     "n": n, "n_beta": n_beta, "ratio": n_beta / n,
                     "in_range": rng_.contains(beta)})
    return rows


def analyze_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ANALYZE_COLUMNS)
    for r in rows:
        w.writerow([repr(float(r[c])) if c != "in_range" else str(r[c]).lower()
                    for c in ANALYZE_COLUMNS])
    return buf.getvalue()
