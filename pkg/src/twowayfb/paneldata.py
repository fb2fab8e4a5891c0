"""Balanced-panel data container, CSV ingestion, and two-way demeaning.

The panel is strictly balanced: every (unit, period) cell must be present
exactly once and hold finite numeric values. Unbalanced input is a hard
error, not something to be imputed around.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "PanelDataset",
    "PanelDataError",
    "UnbalancedPanelError",
    "DuplicateCellError",
    "MissingValueError",
    "CsvParseError",
    "load_csv",
    "demean_two_way",
]


class PanelDataError(Exception):
    """Base class for panel construction errors."""


class UnbalancedPanelError(PanelDataError):
    """Some unit is missing one or more periods."""


class DuplicateCellError(PanelDataError):
    """A (unit, period) key appears more than once."""


class MissingValueError(PanelDataError):
    """A required cell is empty."""


class CsvParseError(PanelDataError):
    """A cell could not be parsed; the message carries the row/column location."""


def _natural_sort(labels: Sequence) -> list:
    """Sort labels numerically when they all parse as numbers, else lexically."""
    try:
        keyed = sorted(labels, key=lambda s: float(s))
        return keyed
    except (TypeError, ValueError):
        return sorted(labels, key=str)


@dataclass(frozen=True)
class PanelDataset:
    """Immutable balanced N x T panel of an outcome and k regressors.

    Attributes
    ----------
    y : np.ndarray
        Outcome, shape (N, T).
    X : np.ndarray
        Regressors, shape (N, T, k).
    unit_labels : tuple
        N distinct unit identifiers, in storage order.
    time_labels : tuple
        T distinct period identifiers, strictly increasing under their
        natural order (numeric if all labels parse as numbers).
    regressor_names : tuple of str
        One name per regressor column.
    intercept_col : int or None
        Index of the constant column, if one is present.
    """

    y: np.ndarray
    X: np.ndarray
    unit_labels: tuple = field(default=())
    time_labels: tuple = field(default=())
    regressor_names: tuple = field(default=())
    intercept_col: int | None = None

    def __post_init__(self):
        y = np.ascontiguousarray(np.asarray(self.y, dtype=float))
        X = np.ascontiguousarray(np.asarray(self.X, dtype=float))
        if y.ndim != 2:
            raise PanelDataError(f"y must be (N, T), got shape {y.shape}")
        if X.ndim != 3 or X.shape[:2] != y.shape:
            raise PanelDataError(f"X must be (N, T, k) matching y, got {X.shape}")
        n, t, k = X.shape
        if n < 1 or t < 1 or k < 1:
            raise PanelDataError("panel needs at least one unit, period, and regressor")
        if not (np.isfinite(y).all() and np.isfinite(X).all()):
            raise MissingValueError("panel contains non-finite values")
        units = tuple(self.unit_labels) if self.unit_labels else tuple(range(n))
        times = tuple(self.time_labels) if self.time_labels else tuple(range(t))
        names = tuple(self.regressor_names) if self.regressor_names else tuple(
            f"x{j}" for j in range(k)
        )
        if len(units) != n or len(set(units)) != n:
            raise PanelDataError("unit_labels must be N distinct identifiers")
        if len(times) != t or len(set(times)) != t:
            raise PanelDataError("time_labels must be T distinct identifiers")
        if list(times) != _natural_sort(times):
            raise PanelDataError("time_labels must be increasing under their natural order")
        if len(names) != k:
            raise PanelDataError("regressor_names must have one entry per column")
        if self.intercept_col is not None:
            j = self.intercept_col
            if not 0 <= j < k:
                raise PanelDataError(f"intercept_col {j} out of range for k={k}")
            if not np.all(X[:, :, j] == 1.0):
                raise PanelDataError("intercept column must be identically 1")
        y.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "unit_labels", units)
        object.__setattr__(self, "time_labels", times)
        object.__setattr__(self, "regressor_names", names)

    @property
    def n_units(self) -> int:
        return self.y.shape[0]

    @property
    def n_periods(self) -> int:
        return self.y.shape[1]

    @property
    def n_regressors(self) -> int:
        return self.X.shape[2]

    @property
    def has_intercept(self) -> bool:
        return self.intercept_col is not None


def load_csv(
    path,
    schema: Mapping[str, object],
    add_intercept: bool = True,
    delimiter: str = ",",
) -> PanelDataset:
    """Read a balanced panel from a delimited text file.

    Parameters
    ----------
    path : str or path-like
        File with a header row.
    schema : mapping
        Column mapping with keys ``unit``, ``time``, ``y``, and ``x``
        (``x`` is a sequence of regressor column names).
    add_intercept : bool
        Prepend a constant column named ``const``.
    delimiter : str
        Field delimiter, default comma.

    Returns
    -------
    PanelDataset
        Sorted by (unit, time) under the labels' natural order.

    Raises
    ------
    CsvParseError
        Missing schema column, or a cell that does not parse as a number
        (the message names the row and column).
    MissingValueError, DuplicateCellError, UnbalancedPanelError
        Balance violations, located as precisely as possible.
    """
    for key in ("unit", "time", "y", "x"):
        if key not in schema:
            raise CsvParseError(f"schema is missing the '{key}' entry")
    x_names = list(schema["x"])
    if not x_names:
        raise CsvParseError("schema 'x' must name at least one regressor column")

    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(f"{path}: empty file, header row required") from None
        header = [c.strip() for c in header]
        col_idx = {}
        for name in [schema["unit"], schema["time"], schema["y"], *x_names]:
            if name not in header:
                raise CsvParseError(f"column '{name}' not found in header of {path}")
            col_idx[name] = header.index(name)

        cells: dict[tuple, tuple] = {}
        for rownum, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue

            def cell(name: str) -> str:
                idx = col_idx[name]
                if idx >= len(row):
                    raise CsvParseError(f"row {rownum}: too few fields (need column '{name}')")
                return row[idx].strip()

            unit = cell(schema["unit"])
            time = cell(schema["time"])
            if not unit or not time:
                raise MissingValueError(f"row {rownum}: empty unit or time label")
            values = []
            for name in [schema["y"], *x_names]:
                raw = cell(name)
                if raw == "":
                    raise MissingValueError(f"row {rownum}, column '{name}': empty cell")
                try:
                    values.append(float(raw))
                except ValueError:
                    raise CsvParseError(
                        f"row {rownum}, column '{name}': cannot parse '{raw}' as a number"
                    ) from None
            key = (unit, time)
            if key in cells:
                raise DuplicateCellError(f"duplicate cell for unit '{unit}', period '{time}'")
            cells[key] = tuple(values)

    if not cells:
        raise CsvParseError(f"{path}: no data rows")

    units = _natural_sort({u for u, _ in cells})
    times = _natural_sort({t for _, t in cells})
    for u in units:
        for t in times:
            if (u, t) not in cells:
                raise UnbalancedPanelError(f"unit '{u}' is missing period '{t}'")

    n, t_len, k = len(units), len(times), len(x_names)
    y = np.empty((n, t_len))
    X = np.empty((n, t_len, k))
    for i, u in enumerate(units):
        for j, tt in enumerate(times):
            vals = cells[(u, tt)]
            y[i, j] = vals[0]
            X[i, j, :] = vals[1:]

    names = tuple(x_names)
    intercept = None
    if add_intercept:
        X = np.concatenate([np.ones((n, t_len, 1)), X], axis=2)
        names = ("const",) + names
        intercept = 0
    return PanelDataset(
        y=y,
        X=X,
        unit_labels=tuple(units),
        time_labels=tuple(times),
        regressor_names=names,
        intercept_col=intercept,
    )


def demean_two_way(data: PanelDataset) -> PanelDataset:
    """Remove unit and period means from the outcome and every regressor.

    Each series z is replaced by z - mean_i(z) - mean_t(z) + mean(z), the
    closed-form equivalent of partialling out a full set of unit and period
    indicators. The intercept column, if any, is dropped (it is annihilated
    by the transform).
    """

    def dd(z: np.ndarray) -> np.ndarray:
        return z - z.mean(axis=1, keepdims=True) - z.mean(axis=0, keepdims=True) + z.mean()

    keep = [j for j in range(data.n_regressors) if j != data.intercept_col]
    if not keep:
        raise PanelDataError("demeaning drops the intercept; no regressors would remain")
    X = np.stack([dd(data.X[:, :, j]) for j in keep], axis=2)
    return PanelDataset(
        y=dd(data.y),
        X=X,
        unit_labels=data.unit_labels,
        time_labels=data.time_labels,
        regressor_names=tuple(data.regressor_names[j] for j in keep),
        intercept_col=None,
    )
