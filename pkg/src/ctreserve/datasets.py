"""Bundled reference data.

The package ships the classic seven-year industrial-fire portfolio published
by Schnieper (1991), the standard worked example for reserving models that
split incurred movements into true-IBNR (new claims) and IBNER (revision of
known claims).  Amounts are in millions; exposures are premium volumes.
"""

from __future__ import annotations

from .triangle import ClaimsData, Triangle, build_cumulative

__all__ = ["schnieper_dataset"]

_NEW_ROWS = [
    [7.5, 18.3, 28.5, 23.4, 18.6, 0.7, 5.1],
    [1.6, 12.6, 18.2, 16.1, 14.0, 10.6],
    [13.8, 22.7, 4.0, 12.4, 12.1],
    [2.9, 9.7, 16.4, 11.6],
    [2.9, 6.9, 37.1],
    [1.9, 27.5],
    [19.1],
]

_DEC_ROWS = [
    [0.0, -3.1, 4.8, -8.5, 23.0, 3.9, 2.5],
    [0.0, -0.6, 0.9, 8.6, -1.4, 5.6],
    [0.0, -5.9, 10.1, -4.6, -31.1],
    [0.0, -1.4, -2.1, -2.8],
    [0.0, 0.0, -5.8],
    [0.0, 0.0],
    [0.0],
]

_EXPOSURE = [10224.0, 12752.0, 14875.0, 17365.0, 19410.0, 17617.0, 18129.0]


def schnieper_dataset() -> ClaimsData:
    """Return the Schnieper (1991) run-off data as a :class:`ClaimsData`.

    The cumulative triangle is rebuilt from the new-claims and decrease
    triangles rather than stored, so the recursion holds by construction.
    """
    new = Triangle.from_rows(_NEW_ROWS)
    dec = Triangle.from_rows(_DEC_ROWS)
    return ClaimsData(new=new, dec=dec, cum=build_cumulative(new, dec), exposure=_EXPOSURE)
