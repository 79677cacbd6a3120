"""
Fixed-size complex matrix helpers for the two-spin problem.

All matrices are plain ``numpy`` arrays of shape (2, 2) or (4, 4) with dtype
complex128.  Pauli matrices carry no factor 1/2; physical constants are put
back in :mod:`softpulse.frame`.
"""

from __future__ import annotations

import cmath
import math
from enum import Enum

import numpy as np

SU2_TOL = 1e-12
SU4_TOL = 1e-11

I2 = np.eye(2, dtype=complex)
I4 = np.eye(4, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class Generator(str, Enum):
    """Hermitian 4x4 generators. Each squares to the identity."""

    ZZ = "ZZ"
    X1 = "X1"
    Y1 = "Y1"
    X2 = "X2"
    Y2 = "Y2"
    YZ = "YZ"
    XZ = "XZ"
    ZY = "ZY"
    ZX = "ZX"

    @property
    def matrix(self) -> np.ndarray:
        return _GENERATOR_MATRICES[self]

    @property
    def is_one_spin(self) -> bool:
        return self in ONE_SPIN

    @property
    def spin(self) -> int:
        """Spin addressed by a one-spin generator (1 or 2)."""
        if not self.is_one_spin:
            raise ValueError(f"{self.value} is not a one-spin generator")
        return int(self.value[1])


_GENERATOR_MATRICES = {
    Generator.ZZ: np.kron(SIGMA_Z, SIGMA_Z),
    Generator.X1: np.kron(SIGMA_X, I2),
    Generator.Y1: np.kron(SIGMA_Y, I2),
    Generator.X2: np.kron(I2, SIGMA_X),
    Generator.Y2: np.kron(I2, SIGMA_Y),
    Generator.YZ: np.kron(SIGMA_Y, SIGMA_Z),
    Generator.XZ: np.kron(SIGMA_X, SIGMA_Z),
    Generator.ZY: np.kron(SIGMA_Z, SIGMA_Y),
    Generator.ZX: np.kron(SIGMA_Z, SIGMA_X),
}
for _m in _GENERATOR_MATRICES.values():
    _m.setflags(write=False)

ONE_SPIN = (Generator.X1, Generator.Y1, Generator.X2, Generator.Y2)
COMMUTATOR_DIRECTIONS = (Generator.YZ, Generator.XZ, Generator.ZY, Generator.ZX)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def gen_exp(gen: Generator, t: float) -> np.ndarray:
    """exp(-i t G) via G^2 = I."""
    return math.cos(t) * I4 - 1j * math.sin(t) * gen.matrix


def expm_oracle(h: np.ndarray, t: float = 1.0) -> np.ndarray:
    """
    exp(-i t H) for a Hermitian 4x4 ``h`` by eigendecomposition.

    Kept independent of every closed form used elsewhere so it can serve as a
    reference in tests.
    """
    h = np.asarray(h, dtype=complex)
    if np.linalg.norm(h - h.conj().T) > 1e-12 * max(1.0, np.linalg.norm(h)):
        raise ValueError("expm_oracle requires a Hermitian matrix")
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * t * w)) @ v.conj().T


def frob_dist(u: np.ndarray, v: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(u) - np.asarray(v)))


def phase_aligned_dist(u: np.ndarray, v: np.ndarray) -> tuple[float, float]:
    """Return ``(min_phi ||u - e^{i phi} v||, phi)``."""
    overlap = np.vdot(v, u)  # tr(v^dagger u)
    phi = cmath.phase(overlap) if abs(overlap) > 0 else 0.0
    return frob_dist(u, cmath.exp(1j * phi) * np.asarray(v)), phi


def unitarity_error(u: np.ndarray) -> float:
    u = np.asarray(u)
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])))


def is_special_unitary(u: np.ndarray, tol: float | None = None) -> bool:
    u = np.asarray(u)
    if tol is None:
        tol = SU2_TOL if u.shape == (2, 2) else SU4_TOL
    return unitarity_error(u) < tol and abs(np.linalg.det(u) - 1) < tol


def check_special_unitary(u: np.ndarray, tol: float | None = None) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.shape not in ((2, 2), (4, 4)):
        raise ValueError(f"expected a 2x2 or 4x4 matrix, got shape {u.shape}")
    if not is_special_unitary(u, tol):
        raise ValueError(
            f"matrix is not special unitary (unitarity error {unitarity_error(u):.3e}, "
            f"|det-1| = {abs(np.linalg.det(u) - 1):.3e})"
        )
    return u


def normalize_phase(u: np.ndarray) -> tuple[np.ndarray, float]:
    """
    Divide a unitary by the principal root det(u)^(1/n).

    Returns the normalized matrix and the removed global phase (radians), so
    that ``u == exp(1j * phase) * normalized``.
    """
    u = np.asarray(u, dtype=complex)
    n = u.shape[0]
    det = complex(np.linalg.det(u))
    phase = cmath.phase(det) / n
    return u / det ** (1.0 / n), phase


def nearest_unitary(m: np.ndarray) -> np.ndarray:
    """Unitary polar factor of ``m``."""
    w, _, vh = np.linalg.svd(m)
    return w @ vh


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_su2(rng: np.random.Generator) -> np.ndarray:
    return normalize_phase(haar_unitary(2, rng))[0]


def random_su4(rng: np.random.Generator) -> np.ndarray:
    return normalize_phase(haar_unitary(4, rng))[0]


def ordered_product(mats, dim: int = 4) -> np.ndarray:
    """Left-to-right product M1 @ M2 @ ... (identity when empty)."""
    out = np.eye(dim, dtype=complex)
    for m in mats:
        out = out @ m
    return out


def batched_product(stack: np.ndarray) -> np.ndarray:
    """Left-to-right product of an (n, d, d) stack by pairwise reduction."""
    stack = np.asarray(stack, dtype=complex)
    if stack.shape[0] == 0:
        return np.eye(stack.shape[-1], dtype=complex)
    while stack.shape[0] > 1:
        if stack.shape[0] % 2:
            tail = stack[-1:]
            stack = np.concatenate([stack[:-2:2] @ stack[1:-1:2], tail])
        else:
            stack = stack[0::2] @ stack[1::2]
    return stack[0]


# JSON matrix format: {"rows": [[[re, im], ...], ...]}


def matrix_to_json(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"rows": [[[float(z.real), float(z.imag)] for z in row] for row in m]}


def matrix_from_json(obj: dict, size: int | None = None) -> np.ndarray:
    try:
        rows = obj["rows"]
        m = np.array([[complex(float(re), float(im)) for re, im in row] for row in rows])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed matrix JSON: {exc}") from exc
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")
    if size is not None and m.shape != (size, size):
        raise ValueError(f"expected a {size}x{size} matrix, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def read_target(obj: dict, tol: float = 1e-9) -> tuple[np.ndarray, float]:
    """
    Parse a 4x4 target, check unitarity and strip the global phase.

    Returns ``(S, removed_phase)`` with ``det S = 1``.
    """
    m = matrix_from_json(obj, size=4)
    err = unitarity_error(m)
    if err > tol:
        raise ValueError(f"target is not unitary (||U^dag U - I|| = {err:.3e})")
    return normalize_phase(nearest_unitary(m))
