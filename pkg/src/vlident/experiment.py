"""Fixed- versus variable-parameter VL identification trials.

Each trial draws a model structure at random, fits it by least squares and
records the SSE. In ``fixed`` mode one degree N, one order R and one time
scale a are drawn per trial and shared by every input and term. In
``variable`` mode every N_i, R_{n,i} and a_{n,i} is drawn independently.
Draws whose coefficient count exceeds the number of fitting rows are redrawn.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .laguerre import LaguerreSeriesSpec
from .model import ModelStructure, coefficient_count
from .regressor import Dataset, resolve_window
from .tuner import objective, split_rows

MODES = ("fixed", "variable")
# SeedSequence spawn keys; one independent substream family per arm
_ARM_KEYS = {"fixed": 0, "variable": 1}


@dataclass(frozen=True)
class ExperimentConfig:
    trials: int = 200
    degree_domain: tuple = (1, 5)
    order_domain: tuple = (2, 4)
    timescale_domain: tuple = (0.005, 100.0)
    mode: str = "variable"
    seed: int = 0
    memory: int = 20
    rows: int = None
    start: int = None
    ridge: float = 0.0
    validation_split: float = 0.0
    max_resamples: int = 1000

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        for name in ("degree_domain", "order_domain", "timescale_domain"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ConfigError(f"{name} is empty: [{lo}, {hi}]")
        if self.degree_domain[0] < 1 or self.order_domain[0] < 1 or self.timescale_domain[0] <= 0:
            raise ConfigError("domains must be positive")

    def with_mode(self, mode: str) -> "ExperimentConfig":
        return ExperimentConfig(**{**self.__dict__, "mode": mode})


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    mode: str
    params: dict
    sse: float
    resamples: int


def trial_rng(seed: int, mode: str, trial: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(_ARM_KEYS[mode], trial))
    return np.random.Generator(np.random.PCG64(ss))


def sample_structure(rng: np.random.Generator, config: ExperimentConfig, input_names,
                     output_name="y") -> ModelStructure:
    """One random draw of N_i, R_{n,i} and a_{n,i} for the configured mode."""
    n_lo, n_hi = config.degree_domain
    r_lo, r_hi = config.order_domain
    a_lo, a_hi = config.timescale_domain
    num_inputs = len(input_names)
    if config.mode == "fixed":
        degree = int(rng.integers(n_lo, n_hi + 1))
        spec = LaguerreSeriesSpec(int(rng.integers(r_lo, r_hi + 1)), float(rng.uniform(a_lo, a_hi)))
        degrees = (degree,) * num_inputs
        specs = {(n, i): spec for i in range(num_inputs) for n in range(1, degree + 1)}
    else:
        degrees = tuple(int(rng.integers(n_lo, n_hi + 1)) for _ in range(num_inputs))
        specs = {}
        for i, degree in enumerate(degrees):
            for n in range(1, degree + 1):
                specs[(n, i)] = LaguerreSeriesSpec(int(rng.integers(r_lo, r_hi + 1)),
                                                   float(rng.uniform(a_lo, a_hi)))
    return ModelStructure(config.memory, degrees, specs, tuple(input_names), output_name)


def structure_params(structure: ModelStructure) -> dict:
    return {"inputs": [
        {"name": name, "degree": structure.degrees[i],
         "terms": [{"R": structure.specs[(n, i)].order_count, "a": structure.specs[(n, i)].time_scale}
                   for n in range(1, structure.degrees[i] + 1)]}
        for i, name in enumerate(structure.input_names)]}


def _fit_rows(dataset: Dataset, config: ExperimentConfig) -> int:
    _, rows = resolve_window(len(dataset), config.memory, config.start, config.rows)
    return split_rows(rows, config.validation_split)[0]


def run_trial(dataset: Dataset, config: ExperimentConfig, trial: int) -> TrialRecord:
    rng = trial_rng(config.seed, config.mode, trial)
    fit_rows = _fit_rows(dataset, config)
    resamples = 0
    while True:
        try:
            structure = sample_structure(rng, config, dataset.input_names, dataset.output_name)
            feasible = coefficient_count(structure) <= fit_rows
        except ValueError:
            feasible = False
        if feasible:
            break
        resamples += 1
        if resamples > config.max_resamples:
            raise ConfigError(f"trial {trial}: no feasible structure after {config.max_resamples} draws")
    sse = objective(dataset, structure, config.start, config.rows, config.ridge,
                    config.validation_split)
    return TrialRecord(trial, config.mode, structure_params(structure), sse, resamples)


def run_experiment(config: ExperimentConfig, dataset: Dataset) -> list:
    """Trial table ordered by trial index; deterministic for a given seed.

    Trials use independent substreams keyed by (arm, trial), so running them
    concurrently or re-running one arm never changes any other draw.
    """
    if dataset.output is None:
        raise ConfigError("experiment dataset has no output column")
    env = os.environ.get("VL_IDENT_THREADS")
    workers = max(1, min(int(env) if env else 1, config.trials))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda t: run_trial(dataset, config, t), range(config.trials)))
    return [run_trial(dataset, config, t) for t in range(config.trials)]


@dataclass(frozen=True)
class SweepResult:
    orders: dict  # (n, i) -> R
    sse: float


def sweep_orders(dataset: Dataset, structure: ModelStructure, grid, k=None, rows=None,
                 ridge: float = 0.0, validation_split: float = 0.0) -> list:
    """Exhaustive search over basis sizes with the time scales held fixed.

    ``grid`` is either one sequence of R values tried for every (n, i) series or a
    mapping from ``(n, i)`` to its own sequence. Results are sorted by SSE, ties by
    the order tuple; infeasible combinations keep an SSE of ``inf``.
    """
    keys = structure.timescale_keys()
    if isinstance(grid, dict):
        missing = [key for key in keys if key not in grid]
        if missing:
            raise ConfigError(f"order grid has no entry for series {missing}")
        choices = [tuple(grid[key]) for key in keys]
    else:
        choices = [tuple(grid)] * len(keys)
    if any(len(c) == 0 for c in choices):
        raise ConfigError("order grid is empty")
    results = []
    for combo in itertools.product(*choices):
        try:
            specs = {key: LaguerreSeriesSpec(R, structure.specs[key].time_scale)
                     for key, R in zip(keys, combo)}
            candidate = replace(structure, specs=specs)
        except ValueError:
            sse = math.inf
        else:
            sse = objective(dataset, candidate, k, rows, ridge, validation_split)
        results.append(SweepResult(dict(zip(keys, combo)), sse))
    return sorted(results, key=lambda r: (r.sse, tuple(r.orders.values())))


def _stats(sse: np.ndarray) -> dict:
    return {
        "count": int(sse.size),
        "mean": float(np.mean(sse)),
        "median": float(np.median(sse)),
        "std": float(np.std(sse, ddof=1)) if sse.size > 1 else 0.0,
        "min": float(np.min(sse)),
        "max": float(np.max(sse)),
    }


def summarize(table, bins: int = 30) -> dict:
    """Per-arm statistics, means normalized by the global minimum SSE, and shared histogram bins.

    Trials with a rejected (infinite) SSE are counted but excluded from the statistics.
    """
    if not table:
        raise ConfigError("cannot summarize an empty trial table")
    arms = {}
    for rec in table:
        arms.setdefault(rec.mode, []).append(rec.sse)
    finite = np.array([s for rec in table for s in [rec.sse] if math.isfinite(s)])
    if finite.size == 0:
        raise ConfigError("no trial produced a finite SSE")
    global_min = float(finite.min())
    lo, hi = float(finite.min()), float(finite.max())
    edges = np.linspace(lo, hi if hi > lo else lo + 1.0, bins + 1)
    summary = {"global_min_sse": global_min, "bin_edges": edges.tolist(), "arms": {}}
    for mode in sorted(arms):
        values = np.array(arms[mode])
        ok = values[np.isfinite(values)]
        stats = _stats(ok) if ok.size else {"count": 0}
        stats["rejected"] = int(values.size - ok.size)
        if ok.size:
            stats["normalized_mean"] = stats["mean"] / global_min if global_min > 0 else float("inf")
            counts, _ = np.histogram(ok, bins=edges)
            stats["histogram"] = counts.tolist()
        summary["arms"][mode] = stats
    return summary
