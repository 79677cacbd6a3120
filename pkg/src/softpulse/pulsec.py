"""
From Cartan parameters to rotating-frame control segments.

A segment (a, b, gen) stands for exp(-i(a ZZ + b gen)): ``a`` is the drift
area and ``b`` the control area.  A pure drift segment has ``gen=None`` and
``b=0``.  Products are always read left to right, same as the factor word.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .matcore import (
    COMMUTATOR_DIRECTIONS,
    ONE_SPIN,
    Generator,
    expm_oracle,
    gen_exp,
    ordered_product,
)
from .su2kit import euler_of_matrix
from .su4cartan import CartanParams

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi
DROP_TOL = 1e-13
COS_ZERO_TOL = 1e-12
CHUNK_MARGIN = 1e-6
MAX_CHUNKS = 10_000_000

# sandwich around the three ZZ factors: (generator, time) per slot
_SANDWICH_A = ((Generator.Y1, math.pi / 4), (Generator.Y2, math.pi / 4))
_SANDWICH_B = (
    (Generator.Y1, 7 * math.pi / 4),
    (Generator.Y2, 7 * math.pi / 4),
    (Generator.X1, 7 * math.pi / 4),
    (Generator.X2, 7 * math.pi / 4),
)
_SANDWICH_C = ((Generator.X1, math.pi / 4), (Generator.X2, math.pi / 4))


class InvalidBound(ValueError):
    pass


class IdentityNotFound(RuntimeError):
    pass


@dataclass(frozen=True)
class Factor:
    gen: Generator
    t: float

    def matrix(self) -> np.ndarray:
        return gen_exp(self.gen, self.t)


@dataclass
class FactorWord:
    factors: list[Factor] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.factors)

    def __iter__(self):
        return iter(self.factors)

    def product(self) -> np.ndarray:
        return ordered_product(f.matrix() for f in self.factors)


def free_time(theta: float) -> float:
    """Nonnegative drift time realizing exp(-i theta ZZ)."""
    if theta >= 0:
        return theta
    t = TWO_PI + theta
    return 0.0 if t >= TWO_PI else t


def _to_neg_convention(angle: float) -> float:
    # exp(+i D s) == exp(-i t s) with t = 2pi - D, reduced to [0, 2pi)
    t = math.fmod(TWO_PI - angle, TWO_PI)
    if t < 0:
        t += TWO_PI
    return 0.0 if t >= TWO_PI else t


def _euler_factors(k: np.ndarray, x: Generator, y: Generator) -> list[Factor]:
    d, e, f = euler_of_matrix(k)
    return [Factor(x, _to_neg_convention(d)), Factor(y, _to_neg_convention(e)),
            Factor(x, _to_neg_convention(f))]


def _zz_time(theta: float) -> float:
    return free_time(math.fmod(theta, TWO_PI))


def word_from_cartan(parts: Iterable[CartanParams]) -> FactorWord:
    """Flatten Cartan parameter sets into one factor word, dropping zero-time factors."""
    out: list[Factor] = []
    for p in parts:
        seq = _euler_factors(p.k1, Generator.X1, Generator.Y1)
        seq += _euler_factors(p.k2, Generator.X2, Generator.Y2)
        seq += [Factor(g, t) for g, t in _SANDWICH_A]
        seq.append(Factor(Generator.ZZ, _zz_time(p.theta1)))
        seq += [Factor(g, t) for g, t in _SANDWICH_B]
        seq.append(Factor(Generator.ZZ, _zz_time(p.theta2)))
        seq += [Factor(g, t) for g, t in _SANDWICH_C]
        seq.append(Factor(Generator.ZZ, _zz_time(p.theta3)))
        seq += _euler_factors(p.k3, Generator.X1, Generator.Y1)
        seq += _euler_factors(p.k4, Generator.X2, Generator.Y2)
        out.extend(f for f in seq if f.t >= DROP_TOL)
    return FactorWord(out)


# conjugation table


def _search_identity(gen: Generator) -> tuple[float, Generator, float, int]:
    samples = np.linspace(-2.9, 3.7, 8)
    quarter = [k * math.pi / 4 for k in (7, 5, 3, 1)]
    zz = Generator.ZZ.matrix
    for pre in quarter:
        for post in quarter[::-1]:
            for mid in COMMUTATOR_DIRECTIONS:
                for sign in (1, -1):
                    ok = True
                    for lval in samples:
                        lhs = expm_oracle(gen.matrix, lval)
                        rhs = (
                            expm_oracle(zz, pre)
                            @ expm_oracle(mid.matrix, sign * lval)
                            @ expm_oracle(zz, post)
                        )
                        if np.linalg.norm(lhs - rhs) > 1e-12:
                            ok = False
                            break
                    if ok:
                        return pre, mid, post, sign
    raise IdentityNotFound(f"no drift conjugation found for {gen.value}")


_CONJUGATION = {g: _search_identity(g) for g in ONE_SPIN}


def conjugation_identity(gen: Generator) -> tuple[float, Generator, float, int]:
    """
    ``(pre, mid, post, sign)`` with
    exp(-iL gen) = exp(-i pre ZZ) exp(-i sign L mid) exp(-i post ZZ) for all L.
    """
    try:
        return _CONJUGATION[gen]
    except KeyError:
        raise ValueError(f"{gen} is not a one-spin generator") from None


# segments


@dataclass(frozen=True)
class Segment:
    a: float
    b: float = 0.0
    gen: Generator | None = None

    @property
    def is_drift(self) -> bool:
        return self.gen is None or self.b == 0.0

    @property
    def ratio(self) -> float:
        """|b/a|, the rotating-frame amplitude ratio (inf when a = 0 < |b|)."""
        if self.b == 0.0:
            return 0.0
        return abs(self.b / self.a) if self.a != 0.0 else math.inf


def segment_propagator(s: Segment) -> np.ndarray:
    """exp(-i(a ZZ + b G)) in closed form (ZZ and G anticommute)."""
    if s.gen is None or s.b == 0.0:
        c, sn = math.cos(s.a), math.sin(s.a)
        return np.diag([complex(c, -sn), complex(c, sn), complex(c, sn), complex(c, -sn)])
    lam = math.hypot(s.a, s.b)
    h = s.a * Generator.ZZ.matrix + s.b * s.gen.matrix
    return math.cos(lam) * np.eye(4) - 1j * (math.sin(lam) / lam) * h


@dataclass
class RotSchedule:
    segments: list[Segment] = field(default_factory=list)
    c_bound: float = math.inf
    d_bound: float = math.inf

    def product(self) -> np.ndarray:
        return ordered_product(segment_propagator(s) for s in self.segments)

    def summary(self) -> dict:
        segs = self.segments
        return {
            "segment_count": len(segs),
            "min_a": min((s.a for s in segs), default=0.0),
            "max_abs_b": max((abs(s.b) for s in segs), default=0.0),
            "max_ratio": max((s.ratio for s in segs), default=0.0),
            "total_area": math.fsum(s.a for s in segs),
        }

    def constraint_flags(self, slack: float = 1e-12) -> dict[str, bool]:
        segs = self.segments
        return {
            "o1_positive_drift": all(s.a > 0 for s in segs),
            "o2_area": all(abs(s.b) <= self.c_bound + slack for s in segs),
            "amplitude": all(s.ratio <= self.d_bound + slack for s in segs),
        }


def _check_bounds(c_bound: float, d_bound: float) -> None:
    if not (c_bound > 0 and d_bound > 0):
        raise InvalidBound(f"bounds must be positive, got C={c_bound!r}, D={d_bound!r}")


def _chunk_ok(lk: float, c_bound: float, d_bound: float, r: int) -> bool:
    if r >= 2 and abs(lk) >= HALF_PI - CHUNK_MARGIN:
        return False
    c = math.cos(lk)
    if abs(c) < COS_ZERO_TOL:
        return HALF_PI / math.sqrt(2) <= c_bound and d_bound >= 1.0
    return HALF_PI * abs(math.sin(lk)) <= c_bound and abs(math.tan(lk)) <= d_bound


def chunk_count(angle: float, c_bound: float, d_bound: float) -> int:
    """Smallest r such that angle/r meets the area and amplitude bounds."""
    _check_bounds(c_bound, d_bound)
    if _chunk_ok(angle, c_bound, d_bound, 1):
        return 1
    # for r >= 2 the chunk lies in (-pi/2, pi/2), where both tests are
    # monotone in |L/r|, so the answer is within one of this estimate
    widest = min(math.asin(min(1.0, c_bound / HALF_PI)), math.atan(d_bound), HALF_PI - CHUNK_MARGIN)
    r = max(2, math.ceil(abs(angle) / widest) - 1)
    while r <= MAX_CHUNKS:
        if _chunk_ok(angle / r, c_bound, d_bound, r):
            return r
        r += 1
    raise InvalidBound(f"cannot split L={angle!r} within {MAX_CHUNKS} chunks")


def theorem_segments(angle: float, gen: Generator) -> list[Segment]:
    """
    Segments whose product is exp(-i angle gen), every one with a >= 0,
    by the case analysis on cos(angle).
    """
    pre, _, post, _ = conjugation_identity(gen)
    c, s = math.cos(angle), math.sin(angle)
    if abs(c) < COS_ZERO_TOL:
        a1 = a2 = HALF_PI / math.sqrt(2)
        if s > 0:
            mid = [Segment(a1, -a1, gen), Segment(a2, a2, gen)]
        else:
            mid = [Segment(a1, a1, gen), Segment(a2, -a2, gen)]
    elif c > 0:
        mid = [Segment(3 * HALF_PI), Segment(HALF_PI * c, -HALF_PI * s, gen)]
    else:
        mid = [Segment(-HALF_PI * c, -HALF_PI * s, gen), Segment(HALF_PI)]
    return [Segment(pre)] + mid + [Segment(post)]


def merge_drifts(segments: Sequence[Segment]) -> list[Segment]:
    """Merge neighbouring drift segments modulo 2pi and drop vanishing ones."""
    out: list[Segment] = []
    pending: list[float] = []

    def flush():
        if pending:
            a = math.fmod(math.fsum(pending), TWO_PI)
            if DROP_TOL <= a <= TWO_PI - DROP_TOL:
                out.append(Segment(a))
            pending.clear()

    for seg in segments:
        if seg.is_drift:
            pending.append(seg.a)
        else:
            flush()
            out.append(seg)
    flush()
    return out


def compile_rotation(angle: float, gen: Generator, c_bound: float, d_bound: float) -> RotSchedule:
    """Bounded segment schedule for exp(-i angle gen), gen one-spin."""
    if not gen.is_one_spin:
        raise ValueError(f"{gen.value} is not a one-spin generator")
    r = chunk_count(angle, c_bound, d_bound)
    piece = theorem_segments(angle / r, gen)
    return RotSchedule(merge_drifts(piece * r), c_bound, d_bound)


def compile_word(word: FactorWord, c_bound: float, d_bound: float) -> RotSchedule:
    _check_bounds(c_bound, d_bound)
    segs: list[Segment] = []
    cache: dict[tuple[Generator, float], list[Segment]] = {}
    for f in word:
        if f.gen is Generator.ZZ:
            segs.append(Segment(f.t))
            continue
        key = (f.gen, f.t)
        if key not in cache:
            cache[key] = compile_rotation(f.t, f.gen, c_bound, d_bound).segments
        segs.extend(cache[key])
    return RotSchedule(merge_drifts(segs), c_bound, d_bound)
