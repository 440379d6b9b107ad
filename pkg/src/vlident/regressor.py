"""Generalized VL design matrix and least-squares identification.

For each Volterra term ``n`` the lagged inputs of every input with ``N_i >= n``
are filtered by that (n, i) Laguerre basis, concatenated, and expanded by the
reduced Kronecker power ``n``. Term blocks are concatenated left to right and
the coefficient vector is found by linear least squares.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Mapping, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DataError, DataRangeError, InvalidParameterError, SchemaError
from .laguerre import build_basis_matrix
from .model import (FitStats, FittedModel, ModelStructure, coefficient_index,
                    reduced_kronecker)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Uniformly sampled multi-input records, ``inputs`` has shape ``(T, I)``."""

    inputs: np.ndarray
    output: Optional[np.ndarray]
    input_names: tuple
    output_name: str = "y"
    sample_interval: float = 1.0

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=float)
        if inputs.ndim == 1:
            inputs = inputs[:, None]
        if inputs.ndim != 2:
            raise DataError("inputs must be a (T, I) array")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "input_names", tuple(self.input_names))
        if len(self.input_names) != inputs.shape[1]:
            raise DataError(f"{len(self.input_names)} names for {inputs.shape[1]} input columns")
        if not np.all(np.isfinite(inputs)):
            raise DataError("inputs contain non-finite values")
        if self.output is not None:
            output = np.asarray(self.output, dtype=float).ravel()
            if output.size != inputs.shape[0]:
                raise DataError(f"output length {output.size} != input length {inputs.shape[0]}")
            if not np.all(np.isfinite(output)):
                raise DataError("output contains non-finite values")
            object.__setattr__(self, "output", output)

    def __len__(self):
        return self.inputs.shape[0]

    def column(self, name: str) -> np.ndarray:
        if name in self.input_names:
            return self.inputs[:, self.input_names.index(name)]
        if name == self.output_name and self.output is not None:
            return self.output
        raise SchemaError(f"dataset has no column {name!r}")

    def select(self, names) -> np.ndarray:
        missing = [n for n in names if n not in self.input_names]
        if missing:
            raise SchemaError(f"dataset lacks input column(s) {missing}; has {list(self.input_names)}")
        return self.inputs[:, [self.input_names.index(n) for n in names]]


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    rows: np.ndarray
    row_times: np.ndarray
    column_index: list
    structure: ModelStructure = field(repr=False)

    @property
    def shape(self):
        return self.rows.shape


def build_lag_matrix(signal, k: int, rows: int, memory: int) -> np.ndarray:
    """Row ``d`` is ``[u(k+d), u(k+d-1), ..., u(k+d-M)]``.

    >>> build_lag_matrix([0, 1, 2, 3, 4], k=2, rows=2, memory=2)
    array([[2., 1., 0.],
           [3., 2., 1.]])
    """
    u = np.asarray(signal, dtype=float).ravel()
    if memory < 0 or rows < 0:
        raise InvalidParameterError("memory and row count must be nonnegative")
    if k - memory < 0:
        raise DataRangeError(f"start k={k} leaves {k} samples of history, memory M={memory} needs {memory}")
    if k + rows > u.size:
        raise DataRangeError(f"rows end at index {k + rows - 1} but the signal ends at {u.size - 1}")
    windows = sliding_window_view(u[k - memory:k + rows], memory + 1)
    return windows[:, ::-1].copy()


def resolve_window(n_samples: int, memory: int, k, rows):
    k = memory if k is None else int(k)
    rows = n_samples - k if rows is None else int(rows)
    if rows < 1:
        raise DataRangeError(f"no rows available: {n_samples} samples, start {k}")
    return k, rows


def assemble_with_bases(dataset: Dataset, structure: ModelStructure, bases: Mapping,
                        k=None, rows=None) -> DesignMatrix:
    """Assemble the design matrix with caller-supplied ``(M+1) x R`` basis matrices per (n, i).

    Column bookkeeping follows ``bases[(n, i)].shape[1]``; :func:`assemble` passes
    the sampled Laguerre bases of ``structure``.
    """
    memory = structure.memory_length
    k, rows = resolve_window(len(dataset), memory, k, rows)
    u = dataset.select(structure.input_names)
    lags = {}
    blocks = []
    index = []
    if structure.constant_column:
        blocks.append(np.ones((rows, 1)))
        index.append((0, ()))
    for n in range(1, structure.max_degree + 1):
        filtered = []
        labels = []
        for i in structure.active_inputs(n):
            if i not in lags:
                lags[i] = build_lag_matrix(u[:, i], k, rows, memory)
            basis = np.asarray(bases[(n, i)], dtype=float)
            assert basis.shape[0] == memory + 1, "basis rows must equal M+1"
            filtered.append(lags[i] @ basis)
            labels.extend((i, r) for r in range(basis.shape[1]))
        block = reduced_kronecker(np.hstack(filtered), n)
        blocks.append(block)
        index.extend((n, combo) for combo in combinations_with_replacement(labels, n))
    X = np.hstack(blocks)
    return DesignMatrix(X, np.arange(k, k + rows), index, structure)


def assemble(dataset: Dataset, structure: ModelStructure, k=None, rows=None) -> DesignMatrix:
    """VL design matrix for rows ``k .. k+D-1`` (defaults: ``k = M``, all remaining rows)."""
    bases = {key: build_basis_matrix(spec, structure.memory_length).samples
             for key, spec in structure.specs.items()}
    design = assemble_with_bases(dataset, structure, bases, k, rows)
    index = coefficient_index(structure)
    assert design.rows.shape[1] == len(index)
    return DesignMatrix(design.rows, design.row_times, index, structure)


def solve_least_squares(X, y, ridge: float = 0.0):
    """Minimum-norm (ridge-regularized) least squares via SVD.

    Returns ``(theta, rank, condition_estimate)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if ridge < 0:
        raise InvalidParameterError(f"ridge must be nonnegative, got {ridge}")
    p = X.shape[1]
    if ridge > 0:
        X = np.vstack([X, np.sqrt(ridge) * np.eye(p)])
        y = np.concatenate([y, np.zeros(p)])
    theta, _, rank, sv = np.linalg.lstsq(X, y, rcond=None)
    if sv.size == 0 or sv[-1] == 0.0 or sv.size < p:
        cond = float("inf")
    else:
        cond = float(sv[0] / sv[-1])
    return theta, int(rank), cond


def fit(design: DesignMatrix, y, ridge: float = 0.0, differenced=None) -> FittedModel:
    """Fit theta minimizing ``||y - X theta||^2 + ridge ||theta||^2``.

    ``y`` must be aligned with ``design.row_times``. With ``ridge == 0`` and a
    rank-deficient design the minimum-norm solution is returned.
    """
    X = design.rows
    y = np.asarray(y, dtype=float).ravel()
    if y.size != X.shape[0]:
        raise DataError(f"output has {y.size} rows, design matrix has {X.shape[0]}")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise DataError("non-finite values in design matrix or output")
    num_rows, p = X.shape
    underdetermined = ridge == 0 and num_rows < p
    if underdetermined:
        warnings.warn(f"{num_rows} rows for {p} coefficients; returning the minimum-norm solution",
                      RuntimeWarning, stacklevel=2)
    theta, rank, cond = solve_least_squares(X, y, ridge)
    resid = y - X @ theta
    stats = FitStats(float(resid @ resid), num_rows, cond, rank, underdetermined, float(ridge))
    return FittedModel(design.structure, theta, design.column_index, stats, dict(differenced or {}))


def fit_dataset(dataset: Dataset, structure: ModelStructure, k=None, rows=None,
                ridge: float = 0.0) -> FittedModel:
    """Assemble and fit in one call using ``dataset.output``."""
    if dataset.output is None:
        raise SchemaError("dataset has no output column")
    design = assemble(dataset, structure, k, rows)
    return fit(design, dataset.output[design.row_times], ridge)


def predict(model: FittedModel, dataset: Dataset, k=None, rows=None) -> np.ndarray:
    """Model output for rows ``k .. k+D-1``."""
    missing = [n for n in model.structure.input_names if n not in dataset.input_names]
    if missing:
        raise SchemaError(f"dataset lacks the model's input column(s) {missing}")
    design = assemble(dataset, model.structure, k, rows)
    return design.rows @ model.theta
