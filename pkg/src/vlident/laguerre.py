"""Orthonormal Laguerre functions on [0, inf) and projections onto them.

The functions used throughout the toolkit are

    l_n(t) = sqrt(2a) * exp(-a t) * L_n(2 a t),    t >= 0
    l_n(t) = 0,                                     t < 0

where ``L_n`` is the ordinary Laguerre polynomial
``L_n(x) = sum_k (-1)^k C(n, k) x^k / k!``. With this normalization the set
is orthonormal on [0, inf) for every a > 0.

A frequently reproduced closed form carries an extra ``2^(n-k)`` factor inside
the sum. That variant is *not* normalized: for n = 1 it evaluates to
``sqrt(2a) (4at - 1) exp(-at)`` whose squared integral is 5. The test suite
keeps a numerical check of that discrepancy.

Time ``t`` is measured in samples, so ``a`` is a rate per sample and ``1/a``
is the filter time constant in samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import laguerre as _npl
from scipy.integrate import trapezoid

from .errors import InvalidParameterError


def _check_time_scale(a: float) -> float:
    try:
        a = float(a)
    except (TypeError, ValueError):
        raise InvalidParameterError(f"time scale must be a real number, got {a!r}") from None
    if not math.isfinite(a) or a <= 0.0:
        raise InvalidParameterError(f"time scale must be positive and finite, got {a!r}")
    return a


def _check_order(n) -> int:
    if isinstance(n, bool) or int(n) != n or n < 0:
        raise InvalidParameterError(f"Laguerre order must be a nonnegative integer, got {n!r}")
    return int(n)


@dataclass(frozen=True)
class LaguerreSeriesSpec:
    """Number of basis functions ``order_count`` (orders 0..R-1) and time scale ``time_scale``."""

    order_count: int
    time_scale: float

    def __post_init__(self):
        if isinstance(self.order_count, bool) or int(self.order_count) != self.order_count \
                or self.order_count < 1:
            raise InvalidParameterError(
                f"order_count must be a positive integer, got {self.order_count!r}")
        object.__setattr__(self, "order_count", int(self.order_count))
        object.__setattr__(self, "time_scale", _check_time_scale(self.time_scale))

    def with_time_scale(self, a: float) -> "LaguerreSeriesSpec":
        return LaguerreSeriesSpec(self.order_count, a)


def laguerre_polynomials(x, max_order: int) -> np.ndarray:
    """Evaluate ``L_0 .. L_max_order`` at ``x`` by the three-term recurrence.

    Returns an array of shape ``(max_order + 1,) + x.shape``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((max_order + 1,) + x.shape)
    out[0] = 1.0
    if max_order >= 1:
        out[1] = 1.0 - x
    for n in range(1, max_order):
        out[n + 1] = ((2 * n + 1 - x) * out[n] - n * out[n - 1]) / (n + 1)
    return out


def laguerre_functions(t, max_order: int, a: float) -> np.ndarray:
    """``l_0 .. l_max_order`` at times ``t``, shape ``(max_order + 1,) + t.shape``; no validation."""
    t = np.asarray(t, dtype=float)
    tc = np.where(t >= 0.0, t, 0.0)
    polys = laguerre_polynomials(2.0 * a * tc, max_order)
    vals = math.sqrt(2.0 * a) * np.exp(-a * tc) * polys
    return np.where(t >= 0.0, vals, 0.0)


def eval_laguerre(n: int, t, a: float):
    """Evaluate the order-``n`` Laguerre function at time ``t`` (scalar or array).

    Raises
    ------
    InvalidParameterError
        If ``a`` is not positive and finite or ``n`` is not a nonnegative integer.
    """
    n = _check_order(n)
    a = _check_time_scale(a)
    vals = laguerre_functions(t, n, a)[n]
    if np.ndim(vals) == 0:
        return float(vals)
    return vals


@dataclass(frozen=True, eq=False)
class BasisMatrix:
    """Sampled basis: ``samples[t, r] = l_r(t)`` for t = 0..M, r = 0..R-1."""

    samples: np.ndarray = field(repr=False)
    memory_length: int
    spec: LaguerreSeriesSpec

    @property
    def shape(self):
        return self.samples.shape


def build_basis_matrix(spec: LaguerreSeriesSpec, memory_length: int) -> BasisMatrix:
    if isinstance(memory_length, bool) or int(memory_length) != memory_length or memory_length < 0:
        raise InvalidParameterError(f"memory_length must be a nonnegative integer, got {memory_length!r}")
    memory_length = int(memory_length)
    t = np.arange(memory_length + 1, dtype=float)
    samples = laguerre_functions(t, spec.order_count - 1, spec.time_scale).T.copy()
    if not np.all(np.isfinite(samples)):
        raise InvalidParameterError(f"non-finite basis samples for {spec}")
    samples.setflags(write=False)
    return BasisMatrix(samples, memory_length, spec)


def continuous_orthonormality_defect(m: int, n: int, a: float, dt: float, horizon: float) -> float:
    """``|int_0^T l_m l_n dt - delta_mn|`` by the trapezoid rule on a uniform grid.

    The horizon should be long compared with ``1/a`` (``40/a`` is ample).
    """
    m, n = _check_order(m), _check_order(n)
    a = _check_time_scale(a)
    if not dt > 0:
        raise InvalidParameterError(f"dt must be positive, got {dt!r}")
    steps = int(round(horizon / dt))
    t = np.arange(steps + 1) * dt
    vals = laguerre_functions(t, max(m, n), a)
    integral = trapezoid(vals[m] * vals[n], dx=dt)
    return abs(integral - (1.0 if m == n else 0.0))


@dataclass(frozen=True, eq=False)
class Projection:
    coefficients: np.ndarray
    residual_sse: float
    rank_deficient: bool


def project_onto_basis(signal, spec: LaguerreSeriesSpec) -> Projection:
    """Least-squares expansion of a sampled signal on ``t = 0..M`` in the sampled basis.

    The basis samples are not assumed orthonormal on the integer grid, so the
    coefficients come from a minimum-norm least-squares solve and
    ``residual_sse`` is the minimized sum of squared errors.
    """
    signal = np.asarray(signal, dtype=float)
    if signal.ndim != 1:
        raise InvalidParameterError("signal must be one-dimensional")
    memory = signal.size - 1
    if memory + 1 < spec.order_count:
        raise InvalidParameterError(
            f"need at least {spec.order_count} samples for {spec.order_count} basis functions, "
            f"got {signal.size}")
    basis = build_basis_matrix(spec, memory).samples
    coef, _, rank, _ = np.linalg.lstsq(basis, signal, rcond=None)
    resid = signal - basis @ coef
    return Projection(coef, float(resid @ resid), bool(rank < spec.order_count))


@dataclass(frozen=True, eq=False)
class ContinuousProjection:
    coefficients: np.ndarray
    energy: float  # quadrature estimate of int_0^inf f(t)^2 dt


def project_continuous(func, spec: LaguerreSeriesSpec, nodes: int = 64) -> ContinuousProjection:
    """Inner-product coefficients ``c_r = int_0^inf f(t) l_r(t) dt`` of a callable ``f``.

    Integrals are taken with ``nodes``-point Gauss-Laguerre quadrature after the
    substitution ``x = 2 a t``. The quadrature is exact for products of two basis
    functions up to order ``nodes - 1``, so the discrete basis is orthonormal to
    rounding error and Bessel's inequality ``sum c_r^2 <= energy`` holds exactly
    in floating point up to roundoff.
    """
    if spec.order_count > nodes:
        raise InvalidParameterError(f"nodes ({nodes}) must be at least order_count ({spec.order_count})")
    a = spec.time_scale
    x, w = _npl.laggauss(nodes)
    # sqrt(w_j) * exp(x_j / 2) without overflow
    scale = np.exp(0.5 * (np.log(w) + x))
    f = np.asarray(func(x / (2.0 * a)), dtype=float)
    h = scale * f / math.sqrt(2.0 * a)
    q = np.sqrt(w) * laguerre_polynomials(x, spec.order_count - 1)
    return ContinuousProjection(q @ h, float(h @ h))
