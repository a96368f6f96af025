"""Daily count series anchored to a calendar date."""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Iterator

import numpy as np


@dataclass(frozen=True, eq=False)
class DateSeries:
    """Contiguous daily values starting at ``start``.

    ``observed`` flags which days carry data; unobserved days are missing
    (excluded from likelihoods), which is not the same as a zero count.
    """

    start: date
    values: np.ndarray
    observed: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).copy()
        if values.ndim != 1:
            raise ValueError("DateSeries values must be one-dimensional")
        if self.observed is None:
            observed = np.ones(values.shape, dtype=bool)
        else:
            observed = np.asarray(self.observed, dtype=bool).copy()
            if observed.shape != values.shape:
                raise ValueError("observed mask must match values in length")
        values.setflags(write=False)
        observed.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "observed", observed)

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DateSeries):
            return NotImplemented
        return (
            self.start == other.start
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.observed, other.observed)
        )

    @property
    def end(self) -> date:
        """Last date covered (inclusive)."""
        return self.start + timedelta(days=len(self) - 1)

    @property
    def dates(self) -> list[date]:
        return [self.start + timedelta(days=i) for i in range(len(self))]

    def offset(self, day: date) -> int:
        """Index of ``day`` relative to the series start (may be out of range)."""
        return (day - self.start).days

    def value_at(self, day: date) -> float:
        i = self.offset(day)
        if not 0 <= i < len(self):
            raise KeyError(day)
        return float(self.values[i])

    def observed_items(self) -> Iterator[tuple[date, float]]:
        for i in np.flatnonzero(self.observed):
            yield self.start + timedelta(days=int(i)), float(self.values[i])

    def total(self) -> float:
        """Sum over observed days only."""
        return float(self.values[self.observed].sum())

    def reindex(self, start: date, end: date) -> "DateSeries":
        """Project onto ``[start, end]``; days outside the source become missing."""
        n = (end - start).days + 1
        if n < 0:
            raise ValueError("end precedes start")
        values = np.zeros(n)
        observed = np.zeros(n, dtype=bool)
        shift = (self.start - start).days
        lo = max(0, shift)
        hi = min(n, shift + len(self))
        if lo < hi:
            values[lo:hi] = self.values[lo - shift : hi - shift]
            observed[lo:hi] = self.observed[lo - shift : hi - shift]
        values[~observed] = 0.0
        return DateSeries(start, values, observed)

    def mask_before(self, day: date) -> "DateSeries":
        """Flag every day strictly before ``day`` as missing."""
        observed = self.observed.copy()
        k = max(0, min(len(self), self.offset(day)))
        observed[:k] = False
        values = self.values.copy()
        values[~observed] = 0.0
        return DateSeries(self.start, values, observed)

    @classmethod
    def from_mapping(cls, counts: dict[date, float]) -> "DateSeries":
        """Build from a sparse date->value mapping; gaps become missing days."""
        if not counts:
            raise ValueError("cannot build a DateSeries from an empty mapping")
        start, end = min(counts), max(counts)
        n = (end - start).days + 1
        values = np.zeros(n)
        observed = np.zeros(n, dtype=bool)
        for day, v in counts.items():
            i = (day - start).days
            values[i] = v
            observed[i] = True
        return cls(start, values, observed)
