"""Model structure, coefficient bookkeeping and parameter counts.

A generalized Volterra-Laguerre (VL) model for one output and ``I`` inputs has,
for every Volterra term ``n`` and input ``i`` with ``n <= N_i``, its own
Laguerre series (``R_{n,i}`` basis functions with time scale ``a_{n,i}``).
Term ``n`` of the regressor is the reduced Kronecker power of the filtered
inputs of all inputs active at that term.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .errors import InvalidParameterError, SchemaError
from .laguerre import LaguerreSeriesSpec


class CoefficientIndex(NamedTuple):
    """Identity of one coefficient: Volterra term ``term`` and a sorted multiset
    of ``(input, basis_order)`` factors. ``term == 0`` marks the optional constant."""

    term: int
    factors: tuple


def _is_int(x) -> bool:
    return not isinstance(x, bool) and isinstance(x, (int, np.integer))


@dataclass(frozen=True)
class ModelStructure:
    """Per-input degrees and per-(term, input) Laguerre series for one output.

    ``specs`` is keyed by ``(n, i)`` with ``n`` the 1-based Volterra term and
    ``i`` the 0-based input position.
    """

    memory_length: int
    degrees: tuple
    specs: Mapping
    input_names: tuple = ()
    output_name: str = "y"
    sample_interval: float = 1.0
    constant_column: bool = False

    def __post_init__(self):
        degrees = tuple(self.degrees)
        object.__setattr__(self, "degrees", degrees)
        if not degrees:
            raise SchemaError("at least one input is required", "inputs")
        names = tuple(self.input_names) or tuple(f"u{i + 1}" for i in range(len(degrees)))
        object.__setattr__(self, "input_names", names)
        if len(names) != len(degrees):
            raise SchemaError(f"{len(names)} input names for {len(degrees)} inputs", "inputs")
        if len(set(names)) != len(names):
            raise SchemaError("input names must be unique", "inputs")
        if self.output_name in names:
            raise SchemaError(f"output {self.output_name!r} is also listed as an input", "output")
        if not _is_int(self.memory_length) or self.memory_length < 0:
            raise SchemaError(f"must be a nonnegative integer, got {self.memory_length!r}", "memory")
        object.__setattr__(self, "memory_length", int(self.memory_length))
        if not (math.isfinite(self.sample_interval) and self.sample_interval > 0):
            raise SchemaError(f"must be positive, got {self.sample_interval!r}", "sample_interval")
        for i, deg in enumerate(degrees):
            if not _is_int(deg) or deg < 1:
                raise SchemaError(f"degree must be an integer >= 1, got {deg!r}", f"inputs[{i}].degree")

        specs = dict(self.specs)
        expected = {(n, i) for i, deg in enumerate(degrees) for n in range(1, deg + 1)}
        for key in sorted(expected - specs.keys()):
            raise SchemaError("missing Laguerre series", f"inputs[{key[1]}].terms[{key[0] - 1}]")
        for key in sorted(specs.keys() - expected):
            raise SchemaError(f"series given for term {key[0]} beyond the input's degree",
                              f"inputs[{key[1]}].terms[{key[0] - 1}]")
        for (n, i), spec in specs.items():
            if not isinstance(spec, LaguerreSeriesSpec):
                raise SchemaError("expected a LaguerreSeriesSpec", f"inputs[{i}].terms[{n - 1}]")
            # M+1 lags carry at most M+1 independent basis columns
            if spec.order_count > self.memory_length + 1:
                raise SchemaError(
                    f"R={spec.order_count} exceeds the {self.memory_length + 1} available lags",
                    f"inputs[{i}].terms[{n - 1}].R")
        object.__setattr__(self, "specs", {k: specs[k] for k in sorted(specs)})

    @property
    def num_inputs(self) -> int:
        return len(self.degrees)

    @property
    def max_degree(self) -> int:
        return max(self.degrees)

    def active_inputs(self, n: int) -> list:
        return [i for i, deg in enumerate(self.degrees) if deg >= n]

    def timescale_keys(self) -> list:
        """``(n, i)`` pairs in canonical order (term-major), one per Laguerre series."""
        return list(self.specs)

    def time_scales(self) -> np.ndarray:
        return np.array([self.specs[k].time_scale for k in self.timescale_keys()])

    def with_time_scales(self, values) -> "ModelStructure":
        keys = self.timescale_keys()
        values = list(values)
        if len(values) != len(keys):
            raise InvalidParameterError(f"expected {len(keys)} time scales, got {len(values)}")
        specs = {k: self.specs[k].with_time_scale(v) for k, v in zip(keys, values)}
        return ModelStructure(self.memory_length, self.degrees, specs, self.input_names,
                              self.output_name, self.sample_interval, self.constant_column)


def uniform_structure(num_inputs: int, memory_length: int, degree: int, order_count: int,
                      time_scale: float, **kwargs) -> ModelStructure:
    """Structure with the same N, R and a for every input and term."""
    spec = LaguerreSeriesSpec(order_count, time_scale)
    specs = {(n, i): spec for i in range(num_inputs) for n in range(1, degree + 1)}
    return ModelStructure(memory_length, (degree,) * num_inputs, specs, **kwargs)


def reduced_kronecker_indices(length: int, power: int) -> np.ndarray:
    """Index tuples ``j1 <= j2 <= ... <= jn`` in lexicographic order, shape ``(C, power)``."""
    if length < 1:
        raise InvalidParameterError("reduced Kronecker product of an empty vector")
    if power < 1:
        raise InvalidParameterError(f"power must be >= 1, got {power}")
    idx = list(itertools.combinations_with_replacement(range(length), power))
    return np.array(idx, dtype=np.intp).reshape(len(idx), power)


def reduced_kronecker(v, n: int) -> np.ndarray:
    """All degree-``n`` monomials of ``v`` with each unordered combination once.

    ``v`` may also be 2-D, in which case the product is taken row by row.

    >>> reduced_kronecker([1.0, 2.0, 3.0], 2)
    array([1., 2., 3., 4., 6., 9.])
    """
    v = np.asarray(v, dtype=float)
    if v.size == 0 or v.shape[-1] == 0:
        raise InvalidParameterError("reduced Kronecker product of an empty vector")
    if n == 1:
        return v.copy()
    idx = reduced_kronecker_indices(v.shape[-1], n)
    return np.prod(v[..., idx], axis=-1)


def coefficient_count(structure: ModelStructure) -> int:
    """Number of VL coefficients, ``sum_n C(rho_n + n - 1, n)`` with ``rho_n`` the
    total basis size of inputs active at term ``n``."""
    total = 1 if structure.constant_column else 0
    for n in range(1, structure.max_degree + 1):
        rho = sum(structure.specs[(n, i)].order_count for i in structure.active_inputs(n))
        total += math.comb(rho + n - 1, n)
    return total


def coefficient_index(structure: ModelStructure) -> list:
    """Coefficient identities in design-matrix column order."""
    index = [CoefficientIndex(0, ())] if structure.constant_column else []
    for n in range(1, structure.max_degree + 1):
        labels = [(i, r) for i in structure.active_inputs(n)
                  for r in range(structure.specs[(n, i)].order_count)]
        for combo in itertools.combinations_with_replacement(labels, n):
            index.append(CoefficientIndex(n, tuple(combo)))
    return index


def volterra_param_count(degree: int, memory: int) -> int:
    """Exact coefficient count of a finite Volterra model with kernels h_0..h_N:
    ``sum_{n=0}^{N} (M+1)^n = ((M+1)^(N+1) - 1) / M`` (arbitrary precision)."""
    if not _is_int(degree) or degree < 0:
        raise InvalidParameterError(f"degree must be a nonnegative integer, got {degree!r}")
    if not _is_int(memory) or memory < 1:
        raise InvalidParameterError(f"memory must be an integer >= 1, got {memory!r}")
    num = (memory + 1) ** (degree + 1) - 1
    assert num % memory == 0
    return num // memory


def volterra_param_count_approx(degree: int, memory: int) -> int:
    """Leading-order approximation ``M^N`` of the Volterra coefficient count."""
    if not _is_int(degree) or degree < 0:
        raise InvalidParameterError(f"degree must be a nonnegative integer, got {degree!r}")
    if not _is_int(memory) or memory < 1:
        raise InvalidParameterError(f"memory must be an integer >= 1, got {memory!r}")
    return int(memory) ** int(degree)


def vl_param_count_power(degree: int, order: int) -> int:
    """Tabulated VL count ``R^N``.

    This over-counts the distinct coefficients of a symmetric kernel expansion;
    see :func:`vl_param_count_exact` for the number actually fitted.
    """
    if not _is_int(degree) or degree < 1:
        raise InvalidParameterError(f"degree must be an integer >= 1, got {degree!r}")
    if not _is_int(order) or order < 1:
        raise InvalidParameterError(f"order must be an integer >= 1, got {order!r}")
    return int(order) ** int(degree)


def vl_param_count_exact(degree: int, order: int) -> int:
    """Distinct SISO VL coefficients, ``sum_{n=1}^{N} C(R + n - 1, n)``."""
    return sum(math.comb(order + n - 1, n) for n in range(1, degree + 1))


@dataclass(frozen=True, eq=False)
class FitStats:
    sse: float
    num_rows: int
    condition_estimate: float
    rank: int = 0
    underdetermined: bool = False
    ridge: float = 0.0


@dataclass(frozen=True, eq=False)
class FittedModel:
    structure: ModelStructure
    theta: np.ndarray
    index: Sequence
    fit_stats: FitStats
    # column name -> initial value, for outputs/inputs that were differenced before fitting
    differenced: Mapping = field(default_factory=dict)

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "index", [CoefficientIndex(int(t), tuple(tuple(f) for f in fs))
                                           for t, fs in self.index])
        if theta.ndim != 1 or theta.size != len(self.index):
            raise SchemaError(f"theta has {theta.size} entries but the index has {len(self.index)}",
                              "theta")
        if theta.size != coefficient_count(self.structure):
            raise SchemaError(
                f"theta has {theta.size} entries, structure needs {coefficient_count(self.structure)}",
                "theta")
        if list(self.index) != coefficient_index(self.structure):
            raise SchemaError("coefficient index does not match the structure's canonical order",
                              "index")
