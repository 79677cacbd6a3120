"""
Physical units: rotating-frame segments become laboratory pulses.

The lab model is V' = -(i/2)(A + u1 B1 + u2 B2) V with
A = w1 Z1 + w2 Z2 + J ZZ, and the rotating frame is U(t) = exp(tF) V(t)
with F = (i/2)(w1 Z1 + w2 Z2).  A drive u1 = c cos(w t + phi),
u2 = c sin(w t + phi) on the resonant spin turns into a constant
(c b_spin / 2) X (phi = 0) or (c b_spin / 2) Y (phi = pi/2) in the
rotating frame, with no rotating-wave approximation needed.

Times are kept as exact rationals (sums of float durations) where they feed
a carrier phase, so that phases at t ~ 1e3 s are not spoiled by roundoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import mpmath
import numpy as np
from scipy.optimize import brentq

from .matcore import Generator
from .pulsec import RotSchedule, Segment
from .roots import brackets

_GEN_TO_DRIVE = {
    Generator.X1: (1, 0.0),
    Generator.Y1: (1, math.pi / 2),
    Generator.X2: (2, 0.0),
    Generator.Y2: (2, math.pi / 2),
}
_DRIVE_TO_GEN = {v: k for k, v in _GEN_TO_DRIVE.items()}

RESIDUAL_TOL = 1e-9
_MP_DPS = 40


class NoBracket(RuntimeError):
    pass


@dataclass(frozen=True)
class SystemParams:
    j: float = 1.0
    omega1: float = 20.0
    omega2: float = 30.0
    b1: float = 1.0
    b2: float = 1.0
    c_bound: float = 0.2
    d_bound: float = 1.0

    def __post_init__(self):
        if not self.j > 0:
            raise ValueError(f"coupling j must be positive, got {self.j!r}")
        if self.omega1 == self.omega2:
            raise ValueError("omega1 and omega2 must differ for selective addressing")
        if self.b1 == 0 or self.b2 == 0:
            raise ValueError("control couplings b1, b2 must be nonzero")
        if not (self.c_bound > 0 and self.d_bound > 0):
            raise ValueError("c_bound and d_bound must be positive")

    def b_spin(self, spin: int) -> float:
        return self.b1 if spin == 1 else self.b2

    def omega(self, spin: int) -> float:
        return self.omega1 if spin == 1 else self.omega2


@dataclass(frozen=True)
class LabSegment:
    t_start: float
    duration: float
    amplitude: float
    spin: int = 1
    phase: float = 0.0

    @property
    def is_free(self) -> bool:
        return self.amplitude == 0.0


@dataclass
class LabSchedule:
    segments: list[LabSegment] = field(default_factory=list)
    total_time: float = 0.0

    def exact_starts(self) -> list[Fraction]:
        """Segment start times as exact sums of the float durations."""
        out, t = [], Fraction(0)
        for s in self.segments:
            out.append(t)
            t += Fraction(s.duration)
        return out

    def exact_total(self) -> Fraction:
        return sum((Fraction(s.duration) for s in self.segments), Fraction(0))


def segment_to_lab(seg: Segment, p: SystemParams) -> tuple[float, float, int, float]:
    """(duration, amplitude, spin, phase) of one rotating-frame segment."""
    duration = 2.0 * seg.a / p.j
    if seg.is_drift:
        return duration, 0.0, 1, 0.0
    spin, phase = _GEN_TO_DRIVE[seg.gen]
    amplitude = (p.j / p.b_spin(spin)) * (seg.b / seg.a)
    return duration, amplitude, spin, phase


def lab_to_segment(ls: LabSegment, p: SystemParams) -> Segment:
    a = 0.5 * p.j * ls.duration
    if ls.is_free:
        return Segment(a)
    b = 0.5 * ls.amplitude * p.b_spin(ls.spin) * ls.duration
    return Segment(a, b, _DRIVE_TO_GEN[(ls.spin, ls.phase)])


def to_lab_schedule(rs: RotSchedule, p: SystemParams) -> LabSchedule:
    """
    Lab pulses for a rotating-frame schedule.

    The product M1 M2 ... Mn is realized by applying Mn first, so the lab
    schedule runs through the segments in reverse.
    """
    segments, t = [], Fraction(0)
    for seg in reversed(rs.segments):
        duration, amp, spin, phase = segment_to_lab(seg, p)
        segments.append(LabSegment(float(t), duration, amp, spin, phase))
        t += Fraction(duration)
    return LabSchedule(segments, float(t))


def rot_schedule_from_lab(ls: LabSchedule, p: SystemParams) -> RotSchedule:
    return RotSchedule([lab_to_segment(s, p) for s in reversed(ls.segments)], p.c_bound, p.d_bound)


# frame map


def _frame_rates(p: SystemParams) -> np.ndarray:
    # diagonal of -iF, i.e. F = i * diag(rates)
    w1, w2 = p.omega1, p.omega2
    return 0.5 * np.array([w1 + w2, w1 - w2, -w1 + w2, -w1 - w2])


def frame_generator(p: SystemParams) -> np.ndarray:
    return np.diag(1j * _frame_rates(p))


def reduced_phase(rate: float, t, offset: float = 0.0) -> float:
    """(rate * t + offset) mod 2pi, evaluated in extended precision; t may be a Fraction."""
    with mpmath.workdps(_MP_DPS):
        if isinstance(t, Fraction):
            tm = mpmath.mpf(t.numerator) / t.denominator
        else:
            tm = mpmath.mpf(t)
        x = mpmath.mpf(rate) * tm + mpmath.mpf(offset)
        return float(mpmath.fmod(x, 2 * mpmath.pi))


def frame_exp(t, p: SystemParams) -> np.ndarray:
    """exp(t F), with the phases reduced in extended precision."""
    return np.diag([complex(math.cos(ph), math.sin(ph)) for ph in
                    (reduced_phase(r, t) for r in _frame_rates(p))])


def lab_target(s_rot: np.ndarray, total_time, p: SystemParams) -> np.ndarray:
    """exp(-T_S F) S, the unitary realized in lab coordinates."""
    if isinstance(total_time, Fraction):
        neg = -total_time
    else:
        neg = -float(total_time)
    return frame_exp(neg, p) @ np.asarray(s_rot)


# frame correction


def preset_residual(t0: float, total_time: float, p: SystemParams) -> float:
    """
    Residual of the published frame-correction equation for the
    preparation of exp(T0 F) with its fixed pulse count:

        T0 - (pi/J)(cos w1 T0 + cos w2 T0) - ((21/2 + 1/sqrt 2) pi + T_S)/J
    """
    return (
        t0
        - (math.pi / p.j) * (math.cos(p.omega1 * t0) + math.cos(p.omega2 * t0))
        - ((10.5 + 1 / math.sqrt(2)) * math.pi + total_time) / p.j
    )


def preset_time_of(total_time: float, p: SystemParams) -> Callable[[float], float]:
    """time_of(T0) matching :func:`preset_residual` in fixed-point form."""

    def time_of(t0: float) -> float:
        return t0 - total_time - preset_residual(t0, total_time, p)

    return time_of


def frame_correction_time(
    total_time: float,
    p: SystemParams,
    time_of: Callable[[float], float],
    tol: float = RESIDUAL_TOL,
    max_k: int = 10_000,
) -> float:
    """
    Smallest T0 >= T_S (on a fine scan) with time_of(T0) + T_S = T0.

    The search window [T_S, T_S + K 2pi / min(w1, w2, j)] grows through
    K = 1, 10, ..., max_k; the first sign change is refined with Brent's method
    until |residual| < tol.
    """

    def r(t0: float) -> float:
        return t0 - total_time - time_of(t0)

    r0 = r(total_time)
    if abs(r0) < tol:
        return float(total_time)
    rates = [abs(p.omega1), abs(p.omega2), p.j]
    step = 2 * math.pi / (16 * max(rates))
    unit = 2 * math.pi / min(x for x in rates if x > 0)
    start, k = float(total_time), 1
    while k <= max_k:
        stop = total_time + k * unit
        n = max(2, math.ceil((stop - start) / step) + 1)
        grid = np.linspace(start, stop, n)
        for lo, hi, f_lo, f_hi in brackets(r, grid):
            t0 = lo if lo == hi else brentq(r, lo, hi, xtol=1e-14, rtol=1e-15)
            if abs(r(t0)) < tol:
                return float(t0)
        start, k = stop, k * 10
    raise NoBracket(f"no fixed point found within K={max_k} periods of T_S={total_time!r}")
