"""
Verification engines.

``propagate_rotating`` multiplies closed-form segment propagators.
``propagate_lab`` integrates the driven lab-frame model with classical
fixed-step RK4 and polar re-projection after every segment.

Free-evolution segments have a constant diagonal Hamiltonian, and n RK4
steps on y' = z y multiply y by R(hz)^n with R the RK4 stability
polynomial.  Those segments are advanced by that power directly, which is
the same numerical method without 1e5 loop iterations.
Driven segments are stepped one by one in a compiled kernel.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import mpmath
import numba
import numpy as np

from .frame import LabSchedule, SystemParams, lab_target, reduced_phase
from .matcore import frob_dist, nearest_unitary
from .pulsec import RotSchedule

STEP_GUARD = 0.05


class StepTooLarge(ValueError):
    pass


@dataclass
class VerificationReport:
    rot_error: float
    lab_error: float
    constraints_ok: dict
    segment_count: int
    total_time: float
    removed_global_phase: float = 0.0
    max_projection: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def propagate_rotating(rs: RotSchedule) -> np.ndarray:
    return rs.product()


def lab_diagonal(p: SystemParams) -> np.ndarray:
    w1, w2, j = p.omega1, p.omega2, p.j
    return np.array([w1 + w2 + j, w1 - w2 - j, -w1 + w2 - j, -w1 - w2 + j])


def max_step(ls: LabSchedule, p: SystemParams) -> float:
    amp = max((abs(s.amplitude) for s in ls.segments), default=0.0)
    return STEP_GUARD / max(abs(p.omega1), abs(p.omega2), p.j, amp)


@numba.njit(cache=True, inline="always")
def _deriv(out, src, diag, p0, q0, p1, q1, e):
    ec = e.conjugate()
    for c in range(4):
        for r in range(4):
            out[r, c] = diag[r] * src[r, c]
        out[p0, c] += e * src[q0, c]
        out[q0, c] += ec * src[p0, c]
        out[p1, c] += e * src[q1, c]
        out[q1, c] += ec * src[p1, c]
        for r in range(4):
            out[r, c] *= -0.5j


@numba.njit(cache=True)
def _rk4_driven(v, comp, diag, pairs, coupling, psi, omega, h, n):
    """
    Advance v (4x4) through n RK4 steps of

        v' = -(i/2)(diag(d) + drive(t)) v,

    drive(t) having entries coupling*e^{-i(psi + omega t)} at (p, q) and the
    conjugate at (q, p) for both (p, q) in ``pairs``.  The solution update is
    Kahan-compensated through ``comp``.
    """
    k1 = np.empty((4, 4), np.complex128)
    k2 = np.empty((4, 4), np.complex128)
    k3 = np.empty((4, 4), np.complex128)
    k4 = np.empty((4, 4), np.complex128)
    tmp = np.empty((4, 4), np.complex128)
    p0, q0, p1, q1 = pairs[0], pairs[1], pairs[2], pairs[3]
    e_end = coupling * complex(math.cos(psi), -math.sin(psi))
    for step in range(n):
        e_start = e_end
        ph = psi + omega * ((step + 0.5) * h)
        e_mid = coupling * complex(math.cos(ph), -math.sin(ph))
        ph = psi + omega * ((step + 1) * h)
        e_end = coupling * complex(math.cos(ph), -math.sin(ph))

        _deriv(k1, v, diag, p0, q0, p1, q1, e_start)
        for r in range(4):
            for c in range(4):
                tmp[r, c] = v[r, c] + 0.5 * h * k1[r, c]
        _deriv(k2, tmp, diag, p0, q0, p1, q1, e_mid)
        for r in range(4):
            for c in range(4):
                tmp[r, c] = v[r, c] + 0.5 * h * k2[r, c]
        _deriv(k3, tmp, diag, p0, q0, p1, q1, e_mid)
        for r in range(4):
            for c in range(4):
                tmp[r, c] = v[r, c] + h * k3[r, c]
        _deriv(k4, tmp, diag, p0, q0, p1, q1, e_end)

        for r in range(4):
            for c in range(4):
                inc = (h / 6.0) * (k1[r, c] + 2.0 * k2[r, c] + 2.0 * k3[r, c] + k4[r, c])
                y = inc - comp[r, c]
                s = v[r, c] + y
                # real and imaginary parts are compensated independently
                comp[r, c] = (s - v[r, c]) - y
                v[r, c] = s
    return v


def rk4_power(rate: float, duration: float, n: int) -> complex:
    """
    R(z)^n, R the RK4 stability polynomial and z = -i rate duration / n.

    The accumulated phase n*arg R(z) reaches hundreds of radians, so z and
    the power are formed in extended precision; a float z alone would carry
    a relative error of 1e-16 into that phase.
    """
    with mpmath.workdps(40):
        zm = -1j * mpmath.mpf(rate) * mpmath.mpf(duration) / n
        r = 1 + zm + zm ** 2 / 2 + zm ** 3 / 6 + zm ** 4 / 24
        mag = mpmath.fabs(r) ** n
        ang = mpmath.fmod(mpmath.arg(r) * n, 2 * mpmath.pi)
        return complex(mag * mpmath.cos(ang), mag * mpmath.sin(ang))


_PAIRS = {1: np.array([0, 2, 1, 3]), 2: np.array([0, 1, 2, 3])}


def propagate_lab(
    ls: LabSchedule,
    p: SystemParams,
    step: float,
    return_diagnostics: bool = False,
):
    """
    Integrate the lab-frame model over ``ls`` from V(0) = I.

    Each segment uses n = ceil(duration / step) equal steps.  After every
    segment V is replaced by its unitary polar factor; the largest such
    correction is returned with ``return_diagnostics=True``.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    guard = max_step(ls, p)
    if step > guard:
        raise StepTooLarge(f"step {step:.3e} exceeds the accuracy guard {guard:.3e}")
    diag = lab_diagonal(p)
    v = np.eye(4, dtype=complex)
    comp = np.zeros((4, 4), dtype=complex)
    max_proj = 0.0
    t_start = Fraction(0)
    for seg in ls.segments:
        n = max(1, math.ceil(seg.duration / step))
        h = seg.duration / n
        if seg.is_free:
            factors = np.array([rk4_power(0.5 * d, seg.duration, n) for d in diag])
            v = factors[:, None] * v
        else:
            omega = p.omega(seg.spin)
            psi = reduced_phase(omega, t_start, seg.phase)
            coupling = seg.amplitude * p.b_spin(seg.spin)
            comp[:] = 0
            _rk4_driven(v, comp, diag, _PAIRS[seg.spin], coupling, psi, omega, h, n)
        u = nearest_unitary(v)
        max_proj = max(max_proj, frob_dist(u, v))
        v = u
        t_start += Fraction(seg.duration)
    if return_diagnostics:
        return v, max_proj
    return v


def verify(
    target: np.ndarray,
    rs: RotSchedule,
    ls: LabSchedule,
    p: SystemParams,
    step: float | None = None,
    removed_global_phase: float = 0.0,
) -> VerificationReport:
    """
    Check a compiled schedule against its target.

    ``step=None`` skips lab integration (lab_error is reported as NaN).
    """
    u_rot = propagate_rotating(rs)
    rot_error = frob_dist(u_rot, target)
    lab_error, proj = math.nan, 0.0
    if step is not None:
        v, proj = propagate_lab(ls, p, step, return_diagnostics=True)
        lab_error = frob_dist(v, lab_target(target, ls.exact_total(), p))
    return VerificationReport(
        rot_error=rot_error,
        lab_error=lab_error,
        constraints_ok=rs.constraint_flags(),
        segment_count=len(rs.segments),
        total_time=ls.total_time,
        removed_global_phase=removed_global_phase,
        max_projection=proj,
    )
