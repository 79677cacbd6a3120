"""
SU(2) toolkit: Cayley-Klein parameters, x-y-x Euler angles, and the rotation
that sends a 2-vector to the "north" axis (|v|, 0).

Cayley-Klein form::

    S(alpha, zeta, mu) = [[ e^{i zeta} cos(alpha),      e^{i mu} sin(alpha)   ],
                          [ e^{i(pi - mu)} sin(alpha),  e^{-i zeta} cos(alpha) ]]

Euler form::

    S = exp(i D sx) exp(i E sy) exp(i F sx)
"""

from __future__ import annotations

import cmath
import math
from typing import NamedTuple

import numpy as np

TWO_PI = 2.0 * math.pi


class ZeroVector(ValueError):
    pass


class CayleyKlein(NamedTuple):
    alpha: float
    zeta: float
    mu: float


class EulerXYX(NamedTuple):
    d: float
    e: float
    f: float


def _wrap(x: float) -> float:
    x = math.fmod(x, TWO_PI)
    if x < 0:
        x += TWO_PI
    # fmod can land on 2pi after the shift
    return 0.0 if x >= TWO_PI else x


def ck_matrix(alpha: float, zeta: float, mu: float) -> np.ndarray:
    ca, sa = math.cos(alpha), math.sin(alpha)
    return np.array(
        [
            [cmath.exp(1j * zeta) * ca, cmath.exp(1j * mu) * sa],
            [-cmath.exp(-1j * mu) * sa, cmath.exp(-1j * zeta) * ca],
        ]
    )


def to_cayley_klein(s: np.ndarray) -> CayleyKlein:
    """
    Read (alpha, zeta, mu) off the first row of an SU(2) matrix.

    An undefined angle (zeta at alpha = pi/2, mu at alpha = 0) is set to 0.
    """
    a, b = complex(s[0][0]), complex(s[0][1])
    alpha = math.atan2(abs(b), abs(a))
    zeta = _wrap(cmath.phase(a)) if a != 0 else 0.0
    mu = _wrap(cmath.phase(b)) if b != 0 else 0.0
    return CayleyKlein(alpha, zeta, mu)


def _euler_entries(d: float, e: float, f: float) -> tuple[complex, complex]:
    # first row of exp(iD sx) exp(iE sy) exp(iF sx)
    ce, se = math.cos(e), math.sin(e)
    return (
        complex(ce * math.cos(d + f), -se * math.sin(d - f)),
        complex(se * math.cos(d - f), ce * math.sin(d + f)),
    )


def euler_matrix(d: float, e: float, f: float) -> np.ndarray:
    m11, m12 = _euler_entries(d, e, f)
    return np.array([[m11, m12], [-m12.conjugate(), m11.conjugate()]])


def euler_xyx(p: CayleyKlein) -> EulerXYX:
    """
    Euler angles (D, E, F), each in [0, 2pi), of S(alpha, zeta, mu).

    cos E comes from the closed-form modulus relation, so cos E >= 0; the two
    sine relations for D - F and D + F leave two branches each.  The eight
    candidate triples are scored by reconstruction and the best one kept.
    Branches are evaluated with atan2 so that |sin| close to 1 keeps full
    precision.
    """
    alpha, zeta, mu = p
    ca, sa = math.cos(alpha), math.sin(alpha)
    cz, sz = math.cos(zeta), math.sin(zeta)
    cm, sm = math.cos(mu), math.sin(mu)

    cos_e = min(1.0, math.sqrt((cz * ca) ** 2 + (sm * sa) ** 2))
    sin_e = math.sqrt((sz * ca) ** 2 + (cm * sa) ** 2)
    e0 = math.atan2(sin_e, cos_e)

    # sin(D + F) = sin(mu) sin(alpha) / cos E ;  sin(D - F) = sin(zeta) cos(alpha) / |sin E|
    sum_num, sum_cmp = sm * sa, abs(cz * ca)
    dif_num, dif_cmp = sz * ca, abs(cm * sa)
    sums = (math.atan2(sum_num, sum_cmp), math.atan2(sum_num, -sum_cmp))
    difs = (math.atan2(dif_num, dif_cmp), math.atan2(dif_num, -dif_cmp))

    target = (cmath.exp(1j * zeta) * ca, cmath.exp(1j * mu) * sa)
    best, best_err = None, math.inf
    for e in (e0, -e0):
        for s in sums:
            for t in difs:
                d, f = 0.5 * (s + t), 0.5 * (s - t)
                m11, m12 = _euler_entries(d, e, f)
                err = abs(m11 - target[0]) + abs(m12 - target[1])
                if err < best_err:
                    best, best_err = (d, e, f), err
    return EulerXYX(*(_wrap(x) for x in best))


def euler_of_matrix(s: np.ndarray) -> EulerXYX:
    return euler_xyx(to_cayley_klein(s))


def rotation_to_north(v) -> np.ndarray:
    """The SU(2) matrix R with R v = (|v|, 0)."""
    d1, d2 = complex(v[0]), complex(v[1])
    norm = math.hypot(abs(d1), abs(d2))
    if norm < 1e-14:
        raise ZeroVector("cannot rotate a zero vector")
    return np.array([[d1.conjugate(), d2.conjugate()], [-d2, d1]]) / norm
