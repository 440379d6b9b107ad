"""Synthetic plants, excitation signals, metrics and differencing.

Plants are sums of single-input branches. A branch is either a finite
discrete Volterra model (symmetric kernels ``h_n`` of side ``M+1``) or a Wiener
model (FIR filter followed by a static polynomial). Pre-record history is
taken as zero, so the first ``M`` output samples are warm-up.

Random numbers come from numpy's PCG64 bit generator seeded through
``SeedSequence``; the algorithm name is exported as :data:`PRNG_ALGORITHM`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import DataRangeError, InvalidParameterError
from .regressor import Dataset, build_lag_matrix, predict

PRNG_ALGORITHM = "numpy.PCG64/SeedSequence"


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


@dataclass(frozen=True, eq=False)
class PlantBranch:
    """One input's contribution to the plant output.

    ``kind="volterra"``: ``kernels`` maps order ``n`` to an array of shape ``(M+1,)*n``.
    ``kind="wiener"``: ``impulse_response`` of length ``M+1`` feeds the polynomial
    ``sum_k polynomial[k] * z^k`` (ascending powers, constant term first).
    """

    input: int
    kind: str
    kernels: Mapping = field(default_factory=dict)
    impulse_response: Optional[np.ndarray] = None
    polynomial: Sequence = ()

    def __post_init__(self):
        if self.kind == "volterra":
            if not self.kernels:
                raise InvalidParameterError("volterra branch needs at least one kernel")
            kernels = {}
            sides = set()
            for n, h in self.kernels.items():
                n = int(n)
                h = np.asarray(h, dtype=float)
                if n < 1 or h.ndim != n or len(set(h.shape)) != 1:
                    raise InvalidParameterError(f"kernel of order {n} must be a cube of rank {n}, got {h.shape}")
                for axes in _transpositions(n):
                    if not np.allclose(h, np.transpose(h, axes), rtol=1e-12, atol=1e-15):
                        raise InvalidParameterError(f"kernel of order {n} is not symmetric")
                kernels[n] = h
                sides.add(h.shape[0])
            if len(sides) != 1:
                raise InvalidParameterError(f"kernels have different memory lengths {sorted(sides)}")
            object.__setattr__(self, "kernels", dict(sorted(kernels.items())))
        elif self.kind == "wiener":
            g = np.asarray(self.impulse_response, dtype=float).ravel()
            if g.size == 0:
                raise InvalidParameterError("wiener branch needs an impulse response")
            object.__setattr__(self, "impulse_response", g)
            object.__setattr__(self, "polynomial", tuple(float(c) for c in self.polynomial))
            if not self.polynomial:
                raise InvalidParameterError("wiener branch needs polynomial coefficients")
        else:
            raise InvalidParameterError(f"unknown branch kind {self.kind!r}")

    @property
    def memory(self) -> int:
        if self.kind == "volterra":
            return next(iter(self.kernels.values())).shape[0] - 1
        return self.impulse_response.size - 1


def _transpositions(n):
    for j in range(1, n):
        axes = list(range(n))
        axes[0], axes[j] = axes[j], axes[0]
        yield tuple(axes)


@dataclass(frozen=True, eq=False)
class SyntheticPlant:
    branches: tuple
    noise_std: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        if not self.branches:
            raise InvalidParameterError("plant has no branches")
        if not (self.noise_std >= 0 and math.isfinite(self.noise_std)):
            raise InvalidParameterError(f"noise_std must be >= 0, got {self.noise_std}")

    @property
    def memory(self) -> int:
        return max(b.memory for b in self.branches)

    @property
    def num_inputs(self) -> int:
        return max(b.input for b in self.branches) + 1


def exponential_response(pole: float, memory: int, gain: float = 1.0) -> np.ndarray:
    """FIR taps ``gain * exp(-pole * j)`` for j = 0..memory."""
    return gain * np.exp(-pole * np.arange(memory + 1))


@dataclass(frozen=True, eq=False)
class SimulationResult:
    output: np.ndarray
    warmup: int


def _volterra_term(lags: np.ndarray, h: np.ndarray) -> np.ndarray:
    # sum over i1..in of h[i1..in] u(t-i1)..u(t-in), one axis at a time
    acc = np.tensordot(lags, h, axes=([1], [0]))
    while acc.ndim > 1:
        acc = np.einsum("dj...,dj->d...", acc, lags)
    return acc


def _branch_output(branch: PlantBranch, lags: np.ndarray) -> np.ndarray:
    if branch.kind == "volterra":
        return sum(_volterra_term(lags[:, :h.shape[0]], h) for h in branch.kernels.values())
    z = lags[:, :branch.impulse_response.size] @ branch.impulse_response
    return np.polynomial.polynomial.polyval(z, branch.polynomial)


def simulate_plant(plant: SyntheticPlant, inputs, seed=0) -> SimulationResult:
    """Forward-evaluate the plant with zero pre-record history plus Gaussian noise."""
    u = np.asarray(inputs, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.shape[1] < plant.num_inputs:
        raise InvalidParameterError(f"plant uses {plant.num_inputs} inputs, got {u.shape[1]}")
    memory = plant.memory
    length = u.shape[0]
    if length < memory + 1:
        raise DataRangeError(f"need at least {memory + 1} samples for memory {memory}, got {length}")
    y = np.zeros(length)
    for branch in plant.branches:
        padded = np.concatenate([np.zeros(memory), u[:, branch.input]])
        lags = build_lag_matrix(padded, memory, length, memory)
        y += _branch_output(branch, lags)
    if plant.noise_std > 0:
        y += make_rng(seed).normal(0.0, plant.noise_std, length)
    return SimulationResult(y, memory)


def generate_inputs(kind: str, length: int, num_inputs: int = 1, seed=0, *,
                    levels=(-1.0, 1.0), dwell: int = 5, max_dwell: Optional[int] = None,
                    gain: float = 1.0, pole: float = 0.9, band=(0.01, 0.2),
                    tones: int = 8) -> np.ndarray:
    """Excitation sequences of shape ``(length, num_inputs)``; each column has its own substream.

    kind
        ``"two-level"``: alternates between ``levels`` with hold times drawn
        uniformly from ``[dwell, max_dwell]`` (default ``2*dwell``).
        ``"filtered-noise"``: white Gaussian noise through ``(1-pole)/(1 - pole q^-1)``, times ``gain``.
        ``"multisine"``: ``tones`` random-phase sines with frequencies (cycles/sample)
        uniform in ``band``, scaled to RMS ``gain``.
    """
    if length < 0:
        raise InvalidParameterError("length must be nonnegative")
    streams = np.random.SeedSequence(seed).spawn(num_inputs)
    out = np.empty((length, num_inputs))
    for col, ss in enumerate(streams):
        rng = np.random.Generator(np.random.PCG64(ss))
        if kind == "two-level":
            hi = 2 * dwell if max_dwell is None else max_dwell
            if dwell < 1 or hi < dwell:
                raise InvalidParameterError(f"invalid dwell range [{dwell}, {hi}]")
            lo_val, hi_val = levels
            level = rng.integers(2)
            pos = 0
            while pos < length:
                run = int(rng.integers(dwell, hi + 1))
                out[pos:pos + run, col] = hi_val if level else lo_val
                level = 1 - level
                pos += run
        elif kind == "filtered-noise":
            e = rng.standard_normal(length)
            out[:, col] = gain * lfilter([1.0 - pole], [1.0, -pole], e)
        elif kind == "multisine":
            t = np.arange(length)
            freqs = rng.uniform(band[0], band[1], tones)
            phases = rng.uniform(0.0, 2 * np.pi, tones)
            x = np.sin(2 * np.pi * np.outer(t, freqs) + phases).sum(axis=1)
            rms = np.sqrt(np.mean(x ** 2)) if length else 1.0
            out[:, col] = gain * x / rms if rms > 0 else 0.0
        else:
            raise InvalidParameterError(f"unknown excitation kind {kind!r}")
    return out


@dataclass(frozen=True)
class Metrics:
    sse: float
    mse: float
    normalized_sse: float  # nan when the output has zero energy
    normalized_defined: bool
    rows: int


def metrics_from_residuals(y, y_hat) -> Metrics:
    y = np.asarray(y, dtype=float)
    resid = y - np.asarray(y_hat, dtype=float)
    sse = float(resid @ resid)
    energy = float(y @ y)
    defined = energy > 0.0
    return Metrics(sse, sse / max(y.size, 1), sse / energy if defined else float("nan"),
                   defined, int(y.size))


def evaluate(model, dataset: Dataset, k=None, rows=None) -> Metrics:
    """SSE, MSE and SSE/sum(y^2) over rows ``k .. k+D-1`` (default: after the model memory)."""
    y_hat = predict(model, dataset, k, rows)
    start = model.structure.memory_length if k is None else k
    return metrics_from_residuals(dataset.output[start:start + y_hat.size], y_hat)


def difference_transform(signal) -> np.ndarray:
    """``d(t) = y(t) - y(t-1)``; one sample shorter than the input."""
    y = np.asarray(signal, dtype=float).ravel()
    if y.size < 2:
        raise DataRangeError(f"differencing needs at least 2 samples, got {y.size}")
    return np.diff(y)


def inverse_cumulate(initial: float, diff) -> np.ndarray:
    """Rebuild ``y`` from ``y(0)`` and its first differences."""
    d = np.asarray(diff, dtype=float).ravel()
    return np.cumsum(np.concatenate([[float(initial)], d]))
