"""Run-off triangle containers and the new-claims / decrease decomposition.

Claims are tracked in three aligned square arrays indexed by accident year
``i`` and development year ``j`` (both 1-based, as is conventional for
run-off data): the new-claims amounts ``N``, the decreases of previously
reported amounts ``D``, and the cumulative reported amount ``C``.  They are
linked by the recursion

    C[i, 1] = N[i, 1],
    C[i, j+1] = C[i, j] + N[i, j+1] - D[i, j+1],

with ``D[i, 1] = 0`` for every accident year (there is nothing to revise in
the year a cohort opens).  In an observed data set only the upper-left
anti-triangle ``i + j <= n + 1`` is populated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DataError",
    "Triangle",
    "ClaimsData",
    "observed_mask",
    "build_cumulative",
    "decompose_cumulative",
]


class DataError(ValueError):
    """Raised when input triangles or exposures violate a structural rule."""


def observed_mask(n: int) -> np.ndarray:
    """Boolean mask of the observed cells ``i + j <= n + 1`` of an n x n square."""
    i, j = np.indices((n, n))
    return (i + j) <= (n - 1)


class Triangle:
    """Square run-off array with an explicit populated-cell mask.

    Parameters
    ----------
    values : array_like
        ``(n, n)`` float array.  Entries outside ``mask`` are ignored.
    mask : array_like of bool, optional
        Which cells are populated.  Defaults to the observed upper-left
        anti-triangle ``i + j <= n + 1``.

    Notes
    -----
    Cell access is 1-based: ``tri[i, j]`` is accident year ``i``,
    development year ``j``.  Reading an unpopulated cell raises
    :class:`DataError`.  Instances are immutable; completion of a triangle
    (e.g. by simulation) produces a new instance via :meth:`with_cells`.
    """

    __slots__ = ("_values", "_mask")

    def __init__(self, values, mask=None):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DataError(f"triangle values must be square, got shape {values.shape}")
        n = values.shape[0]
        if mask is None:
            mask = observed_mask(n)
        else:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != values.shape:
                raise DataError("mask shape does not match values")
        values = np.where(mask, values, np.nan)
        if not np.isfinite(values[mask]).all():
            raise DataError("populated triangle cells must be finite")
        values.setflags(write=False)
        mask = mask.copy()
        mask.setflags(write=False)
        self._values = values
        self._mask = mask

    @classmethod
    def from_rows(cls, rows) -> "Triangle":
        """Build an observed triangle from ragged rows (row i has n+1-i cells)."""
        n = len(rows)
        values = np.full((n, n), np.nan)
        for i, row in enumerate(rows):
            if len(row) != n - i:
                raise DataError(
                    f"accident year {i + 1}: expected {n - i} observed cells, got {len(row)}"
                )
            values[i, : n - i] = row
        return cls(values)

    @property
    def n(self) -> int:
        return self._values.shape[0]

    @property
    def values(self) -> np.ndarray:
        """Dense ``(n, n)`` array, NaN outside the populated mask (read-only)."""
        return self._values

    @property
    def mask(self) -> np.ndarray:
        return self._mask

    def is_populated(self, i: int, j: int) -> bool:
        self._check_range(i, j)
        return bool(self._mask[i - 1, j - 1])

    def __getitem__(self, ij) -> float:
        i, j = ij
        self._check_range(i, j)
        if not self._mask[i - 1, j - 1]:
            raise DataError(f"cell (i={i}, j={j}) is not populated")
        return float(self._values[i - 1, j - 1])

    def _check_range(self, i: int, j: int) -> None:
        n = self.n
        if not (1 <= i <= n and 1 <= j <= n):
            raise DataError(f"cell (i={i}, j={j}) outside 1..{n} x 1..{n}")

    def row(self, i: int) -> np.ndarray:
        """Populated values of accident year ``i`` in development order."""
        self._check_range(i, 1)
        r = self._values[i - 1]
        return r[self._mask[i - 1]]

    def last_observed(self, i: int) -> float:
        """Latest populated value of accident year ``i``."""
        self._check_range(i, 1)
        cols = np.nonzero(self._mask[i - 1])[0]
        if cols.size == 0:
            raise DataError(f"accident year {i} has no populated cells")
        return float(self._values[i - 1, cols[-1]])

    def with_cells(self, updates: dict[tuple[int, int], float]) -> "Triangle":
        """Return a copy with additional cells populated (1-based keys)."""
        values = self._values.copy()
        mask = self._mask.copy()
        for (i, j), v in updates.items():
            self._check_range(i, j)
            values[i - 1, j - 1] = v
            mask[i - 1, j - 1] = True
        return Triangle(values, mask)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Triangle):
            return NotImplemented
        if self.n != other.n or not np.array_equal(self._mask, other._mask):
            return False
        a, b = self._values[self._mask], other._values[other._mask]
        return np.array_equal(a, b)

    def __repr__(self) -> str:
        return f"Triangle(n={self.n}, populated={int(self._mask.sum())})"


@dataclass(frozen=True)
class ClaimsData:
    """Aligned new-claims, decrease and cumulative triangles plus exposures.

    Attributes
    ----------
    new : Triangle
        New-claims amounts ``N[i, j]``.
    dec : Triangle
        Decreases ``D[i, j]`` of previously reported amounts; first column
        is identically zero.
    cum : Triangle
        Cumulative reported amounts ``C[i, j]`` satisfying the recursion.
    exposure : numpy.ndarray
        Positive premium/exposure measure per accident year, ``exposure[i-1]``
        belonging to accident year ``i``.
    """

    new: Triangle
    dec: Triangle
    cum: Triangle
    exposure: np.ndarray = field(repr=False)

    def __post_init__(self):
        exposure = np.asarray(self.exposure, dtype=float)
        n = self.new.n
        if self.dec.n != n or self.cum.n != n:
            raise DataError("triangles must share the same dimension")
        if exposure.shape != (n,):
            raise DataError(f"exposure must have length {n}, got shape {exposure.shape}")
        if not np.isfinite(exposure).all() or (exposure <= 0).any():
            raise DataError("exposures must be finite and strictly positive")
        exposure.setflags(write=False)
        object.__setattr__(self, "exposure", exposure)

    @property
    def n(self) -> int:
        return self.new.n


def build_cumulative(new: Triangle, dec: Triangle) -> Triangle:
    """Assemble the cumulative triangle from new-claims and decrease triangles.

    Parameters
    ----------
    new, dec : Triangle
        Must share dimension and mask; the first column of ``dec`` must be
        exactly zero.

    Returns
    -------
    Triangle
        Cumulative amounts under the recursion
        ``C[i, j+1] = C[i, j] + N[i, j+1] - D[i, j+1]``.

    Raises
    ------
    DataError
        On mask mismatch, nonzero opening decreases, or a negative
        cumulative cell (reported amounts cannot drop below zero).
    """
    n = new.n
    if dec.n != n or not np.array_equal(new.mask, dec.mask):
        raise DataError("new and dec triangles must share dimension and mask")
    first = dec.values[:, 0][dec.mask[:, 0]]
    if first.size and not (first == 0.0).all():
        raise DataError("decrease triangle must have a zero first column")
    values = np.full((n, n), np.nan)
    for i0 in range(n):
        acc = 0.0
        for j0 in range(n):
            if not new.mask[i0, j0]:
                continue
            acc = acc + new.values[i0, j0] - dec.values[i0, j0]
            if acc < 0:
                raise DataError(
                    f"cumulative amount negative at (i={i0 + 1}, j={j0 + 1}): {acc}"
                )
            values[i0, j0] = acc
    return Triangle(values, new.mask)


def decompose_cumulative(cum: Triangle, new: Triangle) -> Triangle:
    """Recover the decrease triangle implied by cumulative and new-claims data.

    Inverse of :func:`build_cumulative`:
    ``D[i, 1] = 0`` and ``D[i, j+1] = C[i, j] + N[i, j+1] - C[i, j+1]``.
    """
    n = cum.n
    if new.n != n or not np.array_equal(cum.mask, new.mask):
        raise DataError("cum and new triangles must share dimension and mask")
    values = np.full((n, n), np.nan)
    for i0 in range(n):
        prev = None
        for j0 in range(n):
            if not cum.mask[i0, j0]:
                continue
            if prev is None:
                if cum.values[i0, j0] != new.values[i0, j0]:
                    raise DataError(
                        f"accident year {i0 + 1}: opening cumulative amount differs "
                        "from the opening new-claims amount"
                    )
                values[i0, j0] = 0.0
            else:
                values[i0, j0] = prev + new.values[i0, j0] - cum.values[i0, j0]
            prev = cum.values[i0, j0]
    return Triangle(values, cum.mask)
