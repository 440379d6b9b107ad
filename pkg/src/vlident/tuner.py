"""Derivative-free tuning of the Laguerre time scales a_{n,i}.

Each (n, i) series contributes one coordinate. The search runs a bounded
Nelder-Mead simplex in log(a) from several quasi-random starting points and
keeps the candidate with the lowest SSE. Every objective call is recorded in
the trace and the total number of calls never exceeds the configured budget.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .errors import InvalidParameterError, TuningFailedError, VLError
from .model import ModelStructure
from .regressor import Dataset, assemble, solve_least_squares

log = logging.getLogger(__name__)

REJECTED = math.inf


@dataclass(frozen=True)
class TuneConfig:
    bounds: tuple = (0.005, 100.0)
    multistart_count: int = 8
    max_evaluations: int = 2000
    tolerance: float = 1e-8       # relative SSE spread across the simplex
    xtol: float = 1e-7            # simplex diameter in log(a)
    seed: int = 0
    validation_split: float = 0.0
    ridge: float = 0.0

    def __post_init__(self):
        lo, hi = (float(b) for b in self.bounds)
        object.__setattr__(self, "bounds", (lo, hi))
        if not (0 < lo < hi and math.isfinite(hi)):
            raise InvalidParameterError(f"bounds must satisfy 0 < a_min < a_max, got {self.bounds}")
        if self.multistart_count < 1 or self.max_evaluations < 1:
            raise InvalidParameterError("multistart_count and max_evaluations must be positive")
        if not self.tolerance > 0 or not self.xtol > 0:
            raise InvalidParameterError("tolerances must be positive")
        if not 0 <= self.validation_split < 1:
            raise InvalidParameterError(f"validation_split must be in [0, 1), got {self.validation_split}")


@dataclass(frozen=True)
class TraceEntry:
    start: int
    iteration: int
    time_scales: tuple
    sse: float


@dataclass(frozen=True, eq=False)
class TuneResult:
    structure: ModelStructure
    sse: float
    trace: list = field(repr=False)
    evaluations: int = 0


def split_rows(rows: int, validation_split: float):
    """Contiguous train/validation split: ``(train_rows, validation_rows)``."""
    n_val = int(math.floor(rows * validation_split))
    return rows - n_val, n_val


def objective(dataset: Dataset, structure: ModelStructure, k=None, rows=None,
              ridge: float = 0.0, validation_split: float = 0.0) -> float:
    """SSE of the least-squares fit for a candidate structure.

    With ``validation_split > 0`` the model is fitted on the leading rows and
    the SSE is measured on the contiguous tail. Any failure yields ``inf``.
    """
    try:
        design = assemble(dataset, structure, k, rows)
        X = design.rows
        y = dataset.output[design.row_times]
        n_train, n_val = split_rows(X.shape[0], validation_split)
        if n_train < 1:
            return REJECTED
        theta, _, _ = solve_least_squares(X[:n_train], y[:n_train], ridge)
        if n_val:
            resid = y[n_train:] - X[n_train:] @ theta
        else:
            resid = y - X @ theta
        sse = float(resid @ resid)
    except (VLError, ValueError, np.linalg.LinAlgError, FloatingPointError) as exc:
        log.debug("candidate rejected: %s", exc)
        return REJECTED
    return sse if math.isfinite(sse) else REJECTED


class _BudgetExhausted(Exception):
    pass


def _nelder_mead(func, x0, lo, hi, step, ftol, xtol):
    """Bounded Nelder-Mead (reflection 1, expansion 2, contraction 1/2, shrink 1/2).

    Points are clipped to ``[lo, hi]``. Returns ``(x_best, f_best)``; stops on
    tolerance or when ``func`` raises :class:`_BudgetExhausted`.
    """
    dim = x0.size
    simplex = [x0.copy()]
    for j in range(dim):
        v = x0.copy()
        v[j] = v[j] + step if v[j] + step <= hi[j] else v[j] - step
        simplex.append(np.clip(v, lo, hi))
    simplex = np.array(simplex)
    fvals = np.full(dim + 1, REJECTED)
    best = (x0.copy(), REJECTED)

    def evaluate(x):
        nonlocal best
        fx = func(x)
        if fx < best[1]:
            best = (x.copy(), fx)
        return fx

    try:
        for j in range(dim + 1):
            fvals[j] = evaluate(simplex[j])
        while True:
            order = np.argsort(fvals, kind="stable")
            simplex, fvals = simplex[order], fvals[order]
            diameter = np.max(np.abs(simplex[1:] - simplex[0]))
            finite = math.isfinite(fvals[-1])
            spread = fvals[-1] - fvals[0] if finite else REJECTED
            if diameter <= xtol or (finite and spread <= ftol * max(abs(fvals[0]), 1e-300)):
                break
            centroid = simplex[:-1].mean(axis=0)
            xr = np.clip(2 * centroid - simplex[-1], lo, hi)
            fr = evaluate(xr)
            if fr < fvals[0]:
                xe = np.clip(3 * centroid - 2 * simplex[-1], lo, hi)
                fe = evaluate(xe)
                simplex[-1], fvals[-1] = (xe, fe) if fe < fr else (xr, fr)
            elif fr < fvals[-2]:
                simplex[-1], fvals[-1] = xr, fr
            else:
                if fr < fvals[-1]:
                    xc = np.clip(centroid + 0.5 * (xr - centroid), lo, hi)
                else:
                    xc = np.clip(centroid + 0.5 * (simplex[-1] - centroid), lo, hi)
                fc = evaluate(xc)
                if fc < min(fr, fvals[-1]):
                    simplex[-1], fvals[-1] = xc, fc
                else:
                    for j in range(1, dim + 1):
                        simplex[j] = simplex[0] + 0.5 * (simplex[j] - simplex[0])
                        fvals[j] = evaluate(simplex[j])
    except _BudgetExhausted:
        pass
    return best


def start_points(dim: int, count: int, bounds, seed) -> np.ndarray:
    """Scrambled Halton points in ``[log a_min, log a_max]^dim``, shape ``(count, dim)``."""
    lo, hi = math.log(bounds[0]), math.log(bounds[1])
    sampler = qmc.Halton(d=dim, scramble=True, seed=np.random.default_rng(seed))
    return lo + (hi - lo) * sampler.random(count)


def _worker_count(jobs: int) -> int:
    env = os.environ.get("VL_IDENT_THREADS")
    cap = int(env) if env else 1
    return max(1, min(cap, jobs))


def tune_time_scales(dataset: Dataset, structure: ModelStructure, config: TuneConfig = TuneConfig(),
                     k=None, rows=None) -> TuneResult:
    """Search every a_{n,i} of ``structure`` to minimize :func:`objective`.

    The evaluation budget is split evenly across starts (earlier starts get the
    remainder), so results do not depend on how starts are scheduled.
    Ties between starts are broken by start index.
    """
    keys = structure.timescale_keys()
    dim = len(keys)
    lo_log, hi_log = math.log(config.bounds[0]), math.log(config.bounds[1])
    lo, hi = np.full(dim, lo_log), np.full(dim, hi_log)
    starts = start_points(dim, config.multistart_count, config.bounds, config.seed)
    base, extra = divmod(config.max_evaluations, config.multistart_count)
    budgets = [base + (1 if s < extra else 0) for s in range(config.multistart_count)]
    step = 0.05 * (hi_log - lo_log)

    def run(s):
        trace = []

        def func(x):
            if len(trace) >= budgets[s]:
                raise _BudgetExhausted
            a = np.clip(np.exp(x), config.bounds[0], config.bounds[1])
            sse = objective(dataset, structure.with_time_scales(a), k, rows,
                            config.ridge, config.validation_split)
            trace.append(TraceEntry(s, len(trace), tuple(float(v) for v in a), sse))
            return sse

        if budgets[s] == 0:
            return trace, None, REJECTED
        x, fx = _nelder_mead(func, starts[s], lo, hi, step, config.tolerance, config.xtol)
        return trace, x, fx

    workers = _worker_count(config.multistart_count)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(config.multistart_count)))
    else:
        results = [run(s) for s in range(config.multistart_count)]

    trace = [entry for r in results for entry in r[0]]
    ranked = sorted((r[2], s) for s, r in enumerate(results) if math.isfinite(r[2]))
    if not ranked:
        raise TuningFailedError("every candidate time scale was rejected", trace)
    best_sse, best_start = ranked[0]
    x = results[best_start][1]
    a = np.clip(np.exp(x), config.bounds[0], config.bounds[1])
    log.info("tuned %d time scale(s): sse=%.6g from start %d", dim, best_sse, best_start)
    return TuneResult(structure.with_time_scales(a), best_sse, trace, len(trace))
