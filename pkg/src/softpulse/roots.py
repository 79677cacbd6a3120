"""Sign-change scanning used ahead of the scipy root finders."""

from __future__ import annotations

import math
from typing import Callable, Iterable


def brackets(f: Callable[[float], float], grid: Iterable[float]):
    """
    Yield ``(lo, hi, f_lo, f_hi)`` for each sign change of ``f`` on ``grid``.

    A grid point where ``f`` is exactly zero is yielded as ``(x, x, 0, 0)``.
    Points where ``f`` is not finite are skipped.
    """
    prev = None
    for x in grid:
        fx = f(x)
        if not math.isfinite(fx):
            prev = None
            continue
        if fx == 0.0:
            yield x, x, 0.0, 0.0
        elif prev is not None and prev[1] != 0.0 and (prev[1] < 0) != (fx < 0):
            yield prev[0], x, prev[1], fx
        prev = (x, fx)
