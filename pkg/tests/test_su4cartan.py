import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softpulse.matcore import I2, I4, SIGMA_X, SIGMA_Y, SIGMA_Z, Generator, expm_oracle, kron, random_su2, random_su4
from softpulse.su2kit import ck_matrix, to_cayley_klein
from softpulse.su4cartan import (
    CartanFailure,
    CartanParams,
    NoRoot,
    PQRParams,
    _select,
    alpha_q_residuals,
    cartan_for_kron,
    cartan_for_mixed,
    cartan_for_plane,
    cartan_params,
    reconstruct_cartan,
    refine_least_squares,
    solve_alpha_q,
    solve_eta,
)
from softpulse.su4givens import KRON_LEFT, FactorKind, GivensFactor, givens_decompose, materialize

XX = np.kron(SIGMA_X, SIGMA_X)
YY = np.kron(SIGMA_Y, SIGMA_Y)
ZZ = np.kron(SIGMA_Z, SIGMA_Z)


def literal_product(p: CartanParams):
    q, s = math.pi / 4, 7 * math.pi / 4
    g = {name: Generator[name].matrix for name in ("X1", "X2", "Y1", "Y2", "ZZ")}
    seq = [
        ("Y1", q), ("Y2", q), ("ZZ", p.theta1), ("Y1", s), ("Y2", s), ("X1", s), ("X2", s),
        ("ZZ", p.theta2), ("X1", q), ("X2", q), ("ZZ", p.theta3),
    ]
    out = kron(p.k1, p.k2)
    for name, t in seq:
        out = out @ expm_oracle(g[name], t)
    return out @ kron(p.k3, p.k4)


def ident(**kw):
    return CartanParams(I2, I2, I2, I2, **kw)


def test_all_identity_reconstructs_identity():
    assert np.linalg.norm(reconstruct_cartan(ident()) - I4) < 1e-14


def test_reconstruct_matches_literal_product(rng):
    for _ in range(20):
        ks = [random_su2(rng) for _ in range(4)]
        p = CartanParams(*ks, *rng.uniform(-4, 4, 3))
        assert np.linalg.norm(reconstruct_cartan(p) - literal_product(p)) < 1e-12


def test_sandwich_is_commuting_exponential(rng):
    for t1, t2, t3 in rng.uniform(-4, 4, (20, 3)):
        expect = expm_oracle(t1 * XX + t2 * YY + t3 * ZZ)
        assert np.linalg.norm(reconstruct_cartan(ident(theta1=t1, theta2=t2, theta3=t3)) - expect) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10))
def test_pqr_round_trip(p, q, r):
    back = PQRParams.from_thetas(*PQRParams(p, q, r).thetas())
    assert np.allclose(back, (p, q, r), rtol=0, atol=1e-14)


def test_pqr_block_action():
    # P acts on the {00, 11} block and R on the {01, 10} block
    p, q, r = 0.3, 0.45, -0.8
    u = reconstruct_cartan(ident(**dict(zip(("theta1", "theta2", "theta3"), PQRParams(p, q, r).thetas()))))
    b03 = u[np.ix_([0, 3], [0, 3])]
    b12 = u[np.ix_([1, 2], [1, 2])]
    sx = SIGMA_X
    assert np.allclose(b03, np.exp(-1j * q) * (math.cos(p) * I2 - 1j * math.sin(p) * sx), atol=1e-14)
    assert np.allclose(b12, np.exp(1j * q) * (math.cos(r) * I2 - 1j * math.sin(r) * sx), atol=1e-14)


def test_kron_recipe(rng):
    f = GivensFactor(FactorKind.KRON, I2, KRON_LEFT)
    p = cartan_for_kron(f)
    assert np.array_equal(p.k1, KRON_LEFT) and np.array_equal(p.k2, I2)
    assert p.thetas == (0.0, 0.0, 0.0)
    for core in (ck_matrix(math.pi / 4, 0, 0), random_su2(rng)):
        f = GivensFactor(FactorKind.KRON, core, KRON_LEFT)
        assert np.linalg.norm(reconstruct_cartan(cartan_for_kron(f)) - kron(KRON_LEFT, core)) < 1e-12
    with pytest.raises(ValueError):
        cartan_for_kron(GivensFactor(FactorKind.PLANE12, I2))


def test_solve_alpha_q_examples():
    assert solve_alpha_q(0.0, 0.0) == (0.0, 0.0)
    a, q = solve_alpha_q(0.3, 0.2)
    assert all(abs(r) < 1e-11 for r in alpha_q_residuals(a, q, 0.3, 0.2))


def closed_form_q(alpha5, zeta5):
    # |2Q| from the two equations combined
    return 0.5 * math.acos(math.cos(alpha5) * math.cos(zeta5))


@settings(max_examples=150, deadline=None)
@given(st.floats(0, math.pi / 2), st.floats(0, 2 * math.pi, exclude_max=True))
def test_solve_alpha_q_property(alpha5, zeta5):
    a, q = solve_alpha_q(alpha5, zeta5)
    assert 0 <= a <= math.pi / 2 + 1e-12
    r1, r2 = alpha_q_residuals(a, q, alpha5, zeta5)
    assert abs(r1) < 1e-11 and abs(r2) < 1e-11
    # independent check: cos 2Q is pinned in modulus by the sum of squares
    two_q = 2 * closed_form_q(alpha5, zeta5)
    assert abs(abs(math.cos(2 * q)) - abs(math.cos(two_q))) < 1e-6


def test_solve_alpha_q_no_root():
    with pytest.raises(NoRoot):
        solve_alpha_q(float("nan"), 0.0)


def test_solve_eta_examples():
    assert np.allclose(solve_eta(0.0, -math.pi / 2), (0, 0, 0), atol=1e-15)
    assert np.allclose(solve_eta(math.pi, math.pi / 2), (math.pi / 2, -math.pi / 2, 0), atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10))
def test_solve_eta_residuals(zeta, mu):
    e1, e2, e3 = solve_eta(zeta, mu)
    assert abs(e1 + e2 + e3) < 1e-13
    assert abs(e1 - e2 + e3 - zeta) < 1e-13
    assert abs(e1 - e2 - e3 - (mu + math.pi / 2)) < 1e-13


@pytest.mark.parametrize("kind", [FactorKind.PLANE34, FactorKind.PLANE12])
def test_plane_identity_core(kind):
    p = cartan_for_plane(GivensFactor(kind, I2))
    for k in (p.k1, p.k2, p.k3, p.k4):
        assert np.linalg.norm(k - I2) < 1e-14
    assert p.theta3 == 0 and p.theta1 == p.theta2 == 0


@pytest.mark.parametrize("kind", [FactorKind.PLANE34, FactorKind.PLANE12])
def test_plane_recipe_shape(kind, rng):
    for _ in range(30):
        core = random_su2(rng)
        f = GivensFactor(kind, core)
        p = cartan_for_plane(f)
        assert np.linalg.norm(reconstruct_cartan(p) - materialize(f)) < 1e-8
        assert not p.fallback_used
        assert np.array_equal(p.k1, I2) and np.array_equal(p.k3, I2)
        assert p.theta1 == p.theta2 == 0
        alpha, zeta, mu = to_cayley_klein(p.k2)
        _, _, mu5 = to_cayley_klein(core)
        assert abs(zeta) < 1e-12 or alpha < 1e-12
        # mu is mu5 + pi/2 modulo pi
        if alpha > 1e-9:
            assert abs(math.sin(mu - mu5 - math.pi / 2)) < 1e-9


@pytest.mark.parametrize("kind", [FactorKind.PLANE23, FactorKind.PLANE14])
def test_mixed_recipe(kind, rng):
    ident_p = cartan_for_mixed(GivensFactor(kind, I2))
    assert np.linalg.norm(reconstruct_cartan(ident_p) - I4) < 1e-14
    for _ in range(30):
        f = GivensFactor(kind, random_su2(rng))
        p = cartan_for_mixed(f)
        assert np.linalg.norm(reconstruct_cartan(p) - materialize(f)) < 1e-8
        assert not p.fallback_used
        for k in (p.k1, p.k2, p.k3, p.k4):
            assert abs(k[0, 1]) == 0 and abs(k[1, 0]) == 0  # diagonal z-rotations
        pqr = PQRParams.from_thetas(*p.thetas)
        assert pqr.q == 0
        assert (pqr.p == 0) if kind is FactorKind.PLANE23 else (pqr.r == 0)


def test_wrong_kind_rejected():
    with pytest.raises(ValueError):
        cartan_for_plane(GivensFactor(FactorKind.PLANE23, I2))
    with pytest.raises(ValueError):
        cartan_for_mixed(GivensFactor(FactorKind.PLANE12, I2))


def test_all_factors_of_random_targets(rng):
    for _ in range(40):
        for f in givens_decompose(random_su4(rng)):
            p = cartan_params(f)
            assert np.linalg.norm(reconstruct_cartan(p) - materialize(f)) < 1e-8
            assert p.residual < 1e-10


def test_least_squares_refinement_recovers(rng):
    f = GivensFactor(FactorKind.PLANE34, random_su2(rng))
    good = cartan_for_plane(f)
    target = materialize(f)
    noisy = CartanParams(good.k1, good.k2, good.k3, good.k4, good.theta1, good.theta2, good.theta3 + 1e-3, "seed")
    out = refine_least_squares(noisy, target)
    assert out.fallback_used and out.branch.endswith("+lsq")
    assert out.residual < 1e-10


def test_select_falls_back_and_fails_loudly(rng):
    f = GivensFactor(FactorKind.PLANE23, random_su2(rng))
    target = materialize(f)
    seed = cartan_for_mixed(f)
    off = CartanParams(seed.k1, seed.k2, seed.k3, seed.k4, seed.theta1 + 0.01, seed.theta2, seed.theta3, "off")
    chosen = _select([off], target)
    assert chosen.fallback_used and chosen.residual < 1e-8
    # a non-special-unitary target cannot be reached
    with pytest.raises(CartanFailure):
        _select([ident()], 2 * I4)


@pytest.mark.parametrize("alpha5, zeta5", [
    (1.5707963267948963, 0.0),
    (1.5707963267948963, 1e-11),
    (math.pi / 2, math.pi),
    (0.3, 0.0),
])
def test_solve_alpha_q_singular_roots(alpha5, zeta5):
    a, q = solve_alpha_q(alpha5, zeta5)
    r1, r2 = alpha_q_residuals(a, q, alpha5, zeta5)
    assert abs(r1) < 1e-11 and abs(r2) < 1e-11
