"""
Six-factor Givens factorization S = S1 S2 S3 S4 S5 S6 of a target in SU(4).

S6 is a Kronecker product exp(i pi/2 sy) (x) K; S5..S1 are SU(2) blocks
embedded in the index planes {3,4}, {1,4}, {1,2}, {2,3}, {1,2} (1-based).

The factors are found by left-multiplying S^dagger, S6 first:

* S6 zeroes entry (2,4) of S^dagger: K sends (d3, d4) of its fourth column north.
* S5 zeroes entry (3,4); S4 then maps the fourth column onto e4.
* S3 zeroes entry (1,3); S2 maps the third column onto e3.
* S1 is the inverse of the remaining top-left SU(2) block.

Each block maps a vector onto (0, |v|), so no residual diagonal phase is left
over for det S = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .matcore import I2, kron
from .su2kit import rotation_to_north

PIVOT_TOL = 1e-13
RECON_TOL = 1e-10

# exp(i pi/2 sy)
KRON_LEFT = np.array([[0, 1], [-1, 0]], dtype=complex)
# sends (r, 0) to (0, r)
_NORTH_TO_SOUTH = np.array([[0, -1], [1, 0]], dtype=complex)


class ReductionFailure(RuntimeError):
    pass


class FactorKind(str, Enum):
    KRON = "KRON"
    PLANE34 = "PLANE34"
    PLANE14 = "PLANE14"
    PLANE12 = "PLANE12"
    PLANE23 = "PLANE23"

    @property
    def plane(self) -> tuple[int, int]:
        """0-based row/column pair of an embedded block."""
        return _PLANES[self]


_PLANES = {
    FactorKind.PLANE34: (2, 3),
    FactorKind.PLANE14: (0, 3),
    FactorKind.PLANE12: (0, 1),
    FactorKind.PLANE23: (1, 2),
}


@dataclass(frozen=True)
class GivensFactor:
    kind: FactorKind
    core: np.ndarray
    left: np.ndarray | None = None  # KRON only

    def matrix(self) -> np.ndarray:
        return materialize(self)


def materialize(f: GivensFactor) -> np.ndarray:
    if f.kind is FactorKind.KRON:
        left = KRON_LEFT if f.left is None else f.left
        return kron(left, f.core)
    i, j = f.kind.plane
    m = np.eye(4, dtype=complex)
    m[i, i], m[i, j] = f.core[0, 0], f.core[0, 1]
    m[j, i], m[j, j] = f.core[1, 0], f.core[1, 1]
    return m


def _south(v) -> np.ndarray:
    """SU(2) block with G v = (0, |v|); identity for a negligible pivot."""
    if math.hypot(abs(v[0]), abs(v[1])) < PIVOT_TOL:
        return I2.copy()
    return _NORTH_TO_SOUTH @ rotation_to_north(v)


def _apply(w: np.ndarray, f: GivensFactor) -> np.ndarray:
    if f.kind is FactorKind.KRON:
        return materialize(f) @ w
    i, j = f.kind.plane
    out = w.copy()
    out[[i, j], :] = f.core @ w[[i, j], :]
    return out


def givens_decompose(s: np.ndarray) -> list[GivensFactor]:
    """
    Factor ``s`` (in SU(4)) as [S1, ..., S6] with S1 @ ... @ S6 == s.

    Raises ReductionFailure if the product misses ``s`` by more than 1e-10.
    """
    s = np.asarray(s, dtype=complex)
    w = s.conj().T

    col4 = w[2:4, 3]
    k = I2.copy() if np.linalg.norm(col4) < PIVOT_TOL else rotation_to_north(col4)
    steps = [GivensFactor(FactorKind.KRON, k, KRON_LEFT)]
    w = _apply(w, steps[-1])

    for kind, col in (
        (FactorKind.PLANE34, 3),
        (FactorKind.PLANE14, 3),
        (FactorKind.PLANE12, 2),
        (FactorKind.PLANE23, 2),
    ):
        i, j = kind.plane
        steps.append(GivensFactor(kind, _south((w[i, col], w[j, col]))))
        w = _apply(w, steps[-1])

    # w is now diag(U, 1, 1) with U in SU(2)
    u = w[:2, :2]
    a, b = u[0, 0].conjugate(), u[1, 0].conjugate()
    n = math.hypot(abs(a), abs(b))
    core = np.array([[a, b], [-b.conjugate(), a.conjugate()]]) / n
    steps.append(GivensFactor(FactorKind.PLANE12, core))

    factors = steps[::-1]
    residual = np.linalg.norm(product(factors) - s)
    if not residual < RECON_TOL:
        raise ReductionFailure(f"Givens reconstruction residual {residual:.3e}")
    return factors


def product(factors: list[GivensFactor]) -> np.ndarray:
    out = np.eye(4, dtype=complex)
    for f in factors:
        out = out @ materialize(f)
    return out
