"""Regularly sampled multivariate log-price panels and their increments.

The panel convention: ``values[i, r]`` is the log price of asset r at time
``i * delta_n`` with ``delta_n`` measured in trading days (1 day = 1.0), so
the horizon is ``t_total = n * delta_n`` days.  Sampling must be regular and
complete; missing data is rejected, not imputed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

__all__ = ["LogPriceGrid", "IncrementSeries", "load_csv", "save_csv", "increments"]


@dataclass(frozen=True)
class LogPriceGrid:
    """An n-by-d panel of log prices on a regular time grid.

    Immutable after construction; the value array is marked read-only so
    instances are safe to share across threads.
    """

    values: np.ndarray
    delta_n: float
    labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.ndim != 2:
            raise DataError(f"log-price panel must be 2-D, got shape {vals.shape}")
        n, d = vals.shape
        if n < 2:
            raise DataError(f"need at least 2 observations, got {n}")
        if not np.all(np.isfinite(vals)):
            raise DataError("log-price panel contains non-finite entries")
        if not (0.0 < self.delta_n < 1.0):
            raise DataError(
                f"delta_n must lie in (0, 1) day units, got {self.delta_n}"
            )
        labels = self.labels
        if not labels:
            labels = tuple(f"A{r}" for r in range(d))
        if len(labels) != d:
            raise DataError(
                f"{len(labels)} labels for {d} columns"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "labels", tuple(str(x) for x in labels))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def t_total(self) -> float:
        """Horizon in days: n * delta_n."""
        return self.n * self.delta_n


@dataclass(frozen=True)
class IncrementSeries:
    """First differences of a log-price panel: row i is Y[i+1] - Y[i]."""

    values: np.ndarray
    delta_n: float

    def __post_init__(self) -> None:
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        if vals.ndim != 2:
            raise DataError(f"increment panel must be 2-D, got shape {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n_incr(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def increments(grid: LogPriceGrid) -> IncrementSeries:
    """First differences along time; row i-1 holds Y_i - Y_{i-1}."""
    return IncrementSeries(values=np.diff(grid.values, axis=0), delta_n=grid.delta_n)


def load_csv(path: str, delta_n: float, raw_prices: bool = False) -> LogPriceGrid:
    """Read a log-price panel from CSV.

    Expected format: a header line of asset labels, then one comma-separated
    row of decimal values per timestamp.  Prices are taken as already logged
    unless ``raw_prices`` is set, in which case the natural log is applied
    elementwise (requiring strictly positive entries).
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header:
            raise DataError(f"{path}: empty file")
        labels = tuple(h.strip() for h in header.split(","))
        try:
            vals = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise DataError(f"{path}: malformed or ragged CSV rows ({exc})") from exc
    if vals.size == 0:
        raise DataError(f"{path}: no data rows")
    if vals.shape[1] != len(labels):
        raise DataError(
            f"{path}: header has {len(labels)} columns, data has {vals.shape[1]}"
        )
    if raw_prices:
        if not np.all(np.isfinite(vals)):
            raise DataError(f"{path}: non-finite raw prices")
        if np.any(vals <= 0.0):
            raise DataError(f"{path}: raw prices must be positive to take logs")
        vals = np.log(vals)
    return LogPriceGrid(values=vals, delta_n=delta_n, labels=labels)


def save_csv(grid: LogPriceGrid, path: str) -> None:
    """Write a panel back to the CSV format accepted by :func:`load_csv`."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(grid.labels) + "\n")
        np.savetxt(fh, grid.values, delimiter=",", fmt="%.17g")
