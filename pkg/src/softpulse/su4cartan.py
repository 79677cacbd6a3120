"""
Cartan parameters (K1..K4 in SU(2), theta1..theta3) for each Givens factor.

A parameter set stands for the product::

    (K1 (x) K2) e^{-i pi/4 Y1} e^{-i pi/4 Y2} e^{-i t1 ZZ}
    e^{-i 7pi/4 Y1} e^{-i 7pi/4 Y2} e^{-i 7pi/4 X1} e^{-i 7pi/4 X2} e^{-i t2 ZZ}
    e^{-i pi/4 X1} e^{-i pi/4 X2} e^{-i t3 ZZ} (K3 (x) K4)

which equals (K1 (x) K2) exp(-i(t1 XX + t2 YY + t3 ZZ)) (K3 (x) K4).

The per-kind recipes work from the Cayley-Klein angles of the factor's core.
Every candidate is checked by reconstruction; a short list of sign/shift/
placement variants is tried, and only if all of them miss does a
least-squares refinement over the fifteen angles take over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq, least_squares, minimize_scalar, root

from .matcore import I2, Generator, gen_exp, kron
from .roots import brackets
from .su2kit import ck_matrix, euler_matrix, euler_of_matrix, to_cayley_klein
from .su4givens import KRON_LEFT, FactorKind, GivensFactor, materialize

RECON_TOL = 1e-8
ACCEPT_TOL = 1e-10
ROOT_TOL = 1e-11

_Q = math.pi / 4
_S = 7 * math.pi / 4
# fixed one-spin factors around each ZZ exponential
_PRE_T1 = gen_exp(Generator.Y1, _Q) @ gen_exp(Generator.Y2, _Q)
_T1_T2 = (
    gen_exp(Generator.Y1, _S) @ gen_exp(Generator.Y2, _S)
    @ gen_exp(Generator.X1, _S) @ gen_exp(Generator.X2, _S)
)
_T2_T3 = gen_exp(Generator.X1, _Q) @ gen_exp(Generator.X2, _Q)


class NoRoot(RuntimeError):
    pass


class CartanFailure(RuntimeError):
    pass


@dataclass
class CartanParams:
    k1: np.ndarray
    k2: np.ndarray
    k3: np.ndarray
    k4: np.ndarray
    theta1: float = 0.0
    theta2: float = 0.0
    theta3: float = 0.0
    branch: str = "recipe"
    fallback_used: bool = False
    residual: float = field(default=math.nan, compare=False)

    @property
    def thetas(self) -> tuple[float, float, float]:
        return self.theta1, self.theta2, self.theta3


class PQRParams(NamedTuple):
    """
    Shorthand for the three ZZ-type angles.

    In the dimensionless convention used here (Pauli matrices without 1/2)
    P = theta1 - theta2, Q = theta3, R = theta1 + theta2.
    """

    p: float
    q: float
    r: float

    def thetas(self) -> tuple[float, float, float]:
        return 0.5 * (self.r + self.p), 0.5 * (self.r - self.p), self.q

    @classmethod
    def from_thetas(cls, t1: float, t2: float, t3: float) -> "PQRParams":
        return cls(t1 - t2, t3, t1 + t2)


def _zz(t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.diag([complex(c, -s), complex(c, s), complex(c, s), complex(c, -s)])


def reconstruct_cartan(p: CartanParams) -> np.ndarray:
    return (
        kron(p.k1, p.k2) @ _PRE_T1 @ _zz(p.theta1) @ _T1_T2 @ _zz(p.theta2)
        @ _T2_T3 @ _zz(p.theta3) @ kron(p.k3, p.k4)
    )


def _err(p: CartanParams, target: np.ndarray) -> float:
    return float(np.linalg.norm(reconstruct_cartan(p) - target))


# KRON (S6)


def cartan_for_kron(f: GivensFactor) -> CartanParams:
    if f.kind is not FactorKind.KRON:
        raise ValueError(f"expected a KRON factor, got {f.kind.value}")
    left = KRON_LEFT if f.left is None else f.left
    return CartanParams(left.copy(), f.core.copy(), I2.copy(), I2.copy())


# PLANE34 / PLANE12 (S5, S3, S1)


def alpha_q_residuals(alpha: float, q: float, alpha5: float, zeta5: float) -> tuple[float, float]:
    """
    Residuals of the pair

        sqrt(cos^2 2Q + cos^2 2a sin^2 2Q) = cos a5
        -cos 2a tan 2Q = tan z5

    The second is returned cross-multiplied (finite at the poles of tan).
    """
    c2a, c2q, s2q = math.cos(2 * alpha), math.cos(2 * q), math.sin(2 * q)
    r1 = math.sqrt(c2q * c2q + c2a * c2a * s2q * s2q) - math.cos(alpha5)
    r2 = -c2a * s2q * math.cos(zeta5) - math.sin(zeta5) * c2q
    return r1, r2


def _q_of_alpha(alpha: float, zeta5: float) -> float:
    # -cos 2a tan 2Q = tan z5 solved for Q
    return 0.5 * math.atan2(-math.sin(zeta5), math.cos(2 * alpha) * math.cos(zeta5))


def solve_alpha_q(alpha5: float, zeta5: float) -> tuple[float, float]:
    """
    Solve the transcendental pair for (alpha, Q), alpha in [0, pi/2].

    First eliminates Q through the tangent equation and scans the remaining
    1-D function of alpha on 65 points of [0, pi/2], polishing each sign change
    by Brent's method; local minima of the scan are refined too, which
    catches double roots (cos a5 = 0).  If that finds nothing (the tangent
    equation degenerates when sin z5 = 0) the pair is solved directly through
    u = cos 2Q, v = cos 2a sin 2Q, and as a last resort scipy's hybrid Powell
    solver is run from a 16x16 grid.
    """
    ca5 = math.cos(alpha5)

    def g(a: float) -> float:
        return alpha_q_residuals(a, _q_of_alpha(a, zeta5), alpha5, zeta5)[0]

    def good(a: float, q: float) -> bool:
        r1, r2 = alpha_q_residuals(a, q, alpha5, zeta5)
        return abs(r1) < ROOT_TOL and abs(r2) < ROOT_TOL

    grid = np.linspace(0.0, 0.5 * math.pi, 65)
    for lo, hi, f_lo, f_hi in brackets(g, grid):
        a = lo if lo == hi else brentq(g, lo, hi, xtol=1e-16, rtol=1e-15)
        q = _q_of_alpha(a, zeta5)
        if good(a, q):
            return float(a), q

    # a double root touches zero without a sign change: search the local minima
    values = [g(a) for a in grid]
    for i, v in enumerate(values):
        lo_i, hi_i = max(i - 1, 0), min(i + 1, len(grid) - 1)
        if v > values[lo_i] or v > values[hi_i] or not math.isfinite(v):
            continue
        res = minimize_scalar(g, bounds=(grid[lo_i], grid[hi_i]), method="bounded",
                              options={"xatol": 1e-15})
        a_min, g_min = float(res.x), g(float(res.x))
        if g_min < 0:
            for edge in (grid[lo_i], grid[hi_i]):
                g_edge = g(edge)
                if g_edge > 0:
                    a = brentq(g, a_min, edge, xtol=1e-16, rtol=1e-15)
                    if good(a, _q_of_alpha(a, zeta5)):
                        return float(a), _q_of_alpha(a, zeta5)
        if good(a_min, _q_of_alpha(a_min, zeta5)):
            return a_min, _q_of_alpha(a_min, zeta5)

    s5, c5 = math.sin(zeta5), math.cos(zeta5)
    # near-singular roots (cos 2a ~ 0 with cos a5 ~ 0) stall iterative solvers.
    # With u = cos 2Q, v = cos 2a sin 2Q the pair says (u, v) = +-cos a5 (cos z5, -sin z5).
    for sign in (1.0, -1.0):
        u = max(-1.0, min(1.0, sign * ca5 * c5))
        v = -sign * ca5 * s5
        for q in (0.5 * math.acos(u), -0.5 * math.acos(u)):
            s2q = math.sin(2 * q)
            if s2q == 0.0:
                if abs(v) > ROOT_TOL:
                    continue
                a = 0.0
            else:
                a = 0.5 * math.acos(max(-1.0, min(1.0, v / s2q)))
            if good(a, q):
                return a, q

    def fun(x):
        a, q = x
        c2a, c2q, s2q = math.cos(2 * a), math.cos(2 * q), math.sin(2 * q)
        return np.array([
            c2q * c2q + c2a * c2a * s2q * s2q - ca5 * ca5,
            -c2a * s2q * c5 - s5 * c2q,
        ])

    def jac(x):
        a, q = x
        c2a, s2a = math.cos(2 * a), math.sin(2 * a)
        c2q, s2q = math.cos(2 * q), math.sin(2 * q)
        return np.array([
            [-4 * c2a * s2a * s2q * s2q, -4 * c2q * s2q + 4 * c2a * c2a * s2q * c2q],
            [2 * s2a * s2q * c5, -2 * c2a * c2q * c5 + 2 * s5 * s2q],
        ])

    for a0 in np.linspace(0.0, 0.5 * math.pi, 16):
        for q0 in np.linspace(-0.5 * math.pi, 0.5 * math.pi, 16):
            x = root(fun, (a0, q0), jac=jac, method="hybr", options={"xtol": 1e-15}).x
            a = math.fmod(x[0], math.pi)
            a = a + math.pi if a < 0 else a
            if a > 0.5 * math.pi:
                # cos 2a is symmetric about pi/2
                a = math.pi - a
            if good(a, x[1]):
                return float(a), float(x[1])
    raise NoRoot(f"no root for alpha5={alpha5!r}, zeta5={zeta5!r}")


def cartan_for_plane(f: GivensFactor) -> CartanParams:
    """
    Recipe for a block on {3,4} (S5) or {1,2} (S3, S1).

    K1 = K3 = I, K2 = S(alpha, 0, mu), only theta3 nonzero, K4 the inverse of
    the block of the partial product that must become the identity.
    """
    if f.kind not in (FactorKind.PLANE34, FactorKind.PLANE12):
        raise ValueError(f"expected PLANE34 or PLANE12, got {f.kind.value}")
    target = materialize(f)
    alpha5, zeta5, mu5 = to_cayley_klein(f.core)
    alpha, q = solve_alpha_q(alpha5, zeta5)
    fixed = slice(0, 2) if f.kind is FactorKind.PLANE34 else slice(2, 4)

    candidates = []
    for q_sign in (1, -1):
        for shift in (0.0, 0.5 * math.pi):
            for mu_shift in (0.5 * math.pi, -0.5 * math.pi):
                theta3 = q_sign * q + shift
                k2 = ck_matrix(alpha, 0.0, mu5 + mu_shift)
                partial = CartanParams(I2, k2, I2, I2, 0.0, 0.0, theta3)
                block = reconstruct_cartan(partial)[fixed, fixed]
                k4 = block.conj().T
                label = f"Q*{q_sign:+d}{'+pi/2' if shift else ''},mu5{mu_shift:+.4f}"
                candidates.append(CartanParams(I2.copy(), k2, I2.copy(), k4, 0.0, 0.0, theta3, label))
    return _select(candidates, target)


# PLANE23 / PLANE14 (S2, S4)


def solve_eta(zeta2: float, mu2: float) -> tuple[float, float, float]:
    """
    Solve  e1 + e2 + e3 = 0,  e1 - e2 + e3 = zeta2,  e1 - e2 - e3 = mu2 + pi/2.
    """
    e2 = -0.5 * zeta2
    e3 = 0.5 * (zeta2 - mu2 - 0.5 * math.pi)
    e1 = -e2 - e3
    return e1, e2, e3


def _zrot(eta: float) -> np.ndarray:
    return np.diag([complex(math.cos(eta), math.sin(eta)), complex(math.cos(eta), -math.sin(eta))])


_ETA_SIGNS = ((1, 1, 1), (1, -1, 1), (1, 1, -1), (1, -1, -1),
              (-1, 1, 1), (-1, -1, 1), (-1, 1, -1), (-1, -1, -1))


def cartan_for_mixed(f: GivensFactor) -> CartanParams:
    """
    Recipe for a block on {2,3} (S2: P = Q = 0, R = alpha) or {1,4}
    (S4: Q = R = 0, P = alpha), with diagonal K's exp(i eta sz).
    """
    if f.kind is FactorKind.PLANE23:
        pick = lambda a: PQRParams(0.0, 0.0, a)  # noqa: E731
    elif f.kind is FactorKind.PLANE14:
        pick = lambda a: PQRParams(a, 0.0, 0.0)  # noqa: E731
    else:
        raise ValueError(f"expected PLANE23 or PLANE14, got {f.kind.value}")
    target = materialize(f)
    alpha, zeta, mu = to_cayley_klein(f.core)
    t1, t2, t3 = pick(alpha).thetas()
    eta = solve_eta(zeta, mu)

    candidates = []
    for slot in ("K4", "K3"):
        for signs in _ETA_SIGNS:
            e1, e2, e3 = (s * e for s, e in zip(signs, eta))
            k3, k4 = (I2, _zrot(e3)) if slot == "K4" else (_zrot(e3), I2)
            label = f"eta3->{slot},signs{signs}"
            candidates.append(
                CartanParams(_zrot(e1), _zrot(e2), k3.copy(), k4.copy(), t1, t2, t3, label)
            )
    return _select(candidates, target)


# selection and fallback


def _select(candidates: list[CartanParams], target: np.ndarray) -> CartanParams:
    best, best_err = None, math.inf
    for c in candidates:
        e = _err(c, target)
        if e < best_err:
            best, best_err = c, e
        if e < ACCEPT_TOL:
            break
    best.residual = best_err
    if best_err < ACCEPT_TOL:
        return best
    refined = refine_least_squares(best, target)
    if refined.residual > RECON_TOL:
        raise CartanFailure(f"Cartan reconstruction residual {refined.residual:.3e}")
    return refined


def _pack(p: CartanParams) -> np.ndarray:
    angles = []
    for k in (p.k1, p.k2, p.k3, p.k4):
        angles.extend(euler_of_matrix(k))
    return np.array(angles + [p.theta1, p.theta2, p.theta3])


def _unpack(x: np.ndarray, branch: str) -> CartanParams:
    ks = [euler_matrix(*x[3 * i : 3 * i + 3]) for i in range(4)]
    return CartanParams(*ks, float(x[12]), float(x[13]), float(x[14]), branch, True)


def refine_least_squares(seed: CartanParams, target: np.ndarray) -> CartanParams:
    """Local least-squares polish of all fifteen angles, seeded by ``seed``."""

    def resid(x):
        d = reconstruct_cartan(_unpack(x, "")) - target
        return np.concatenate([d.real.ravel(), d.imag.ravel()])

    sol = least_squares(resid, _pack(seed), xtol=1e-15, ftol=1e-15, gtol=1e-15)
    out = _unpack(sol.x, seed.branch + "+lsq")
    out.residual = _err(out, target)
    return out


def cartan_params(f: GivensFactor) -> CartanParams:
    if f.kind is FactorKind.KRON:
        p = cartan_for_kron(f)
        p.residual = _err(p, materialize(f))
        return p
    if f.kind in (FactorKind.PLANE34, FactorKind.PLANE12):
        return cartan_for_plane(f)
    return cartan_for_mixed(f)
