import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from cxhyp.cli import fibonacci_sphere
from cxhyp.errors import BoundaryDegeneracy, DomainViolation, NormViolation
from cxhyp.group_u21 import (C, J, X_TILDE, XI_DELTA, Form, GroupElement, KCoset, a_derivatives,
                             a_explicit, a_proj, batch_a, batch_iwasawa, batch_k, batch_n,
                             cayley, grad_K_A, iwasawa, k_coset, make_a, make_k, make_m, make_n,
                             one_minus_dadt, phi_action, random_k0, su2_exp, uniformization_xi)
from cxhyp.lie_core import dist_to_subgroup, mat_exp

I3 = np.eye(3)
small = st.floats(-1, 1, allow_nan=False)


def _sym_n(x, y, tau):
    z, zb = x + sp.I * y, x - sp.I * y
    return sp.Matrix([[1, sp.sqrt(2) * z, sp.I * tau - z * zb], [0, 1, -sp.sqrt(2) * zb], [0, 0, 1]])


def test_n_group_law_symbolic():
    x1, y1, t1, x2, y2, t2 = sp.symbols("x1 y1 t1 x2 y2 t2", real=True)
    prod = _sym_n(x1, y1, t1) * _sym_n(x2, y2, t2)
    # Im(z1 conj z2) = y1 x2 - x1 y2; the matrix law carries a minus sign
    law = _sym_n(x1 + x2, y1 + y2, t1 + t2 - 2 * (y1 * x2 - x1 * y2))
    assert sp.simplify(prod - law) == sp.zeros(3, 3)


@given(small, small, small, small, small, small)
def test_n_group_law_numeric(x1, y1, t1, x2, y2, t2):
    z1, z2 = x1 + 1j * y1, x2 + 1j * y2
    lhs = make_n(z1, t1).mat @ make_n(z2, t2).mat
    rhs = make_n(z1 + z2, t1 + t2 - 2 * np.imag(z1 * np.conj(z2))).mat
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_make_a():
    assert np.array_equal(make_a(0).mat, I3)
    assert np.allclose(make_a(2).mat, np.diag([np.e, 1, 1 / np.e]))
    assert make_a(2).residual() <= 1e-10
    with pytest.raises(ValueError):
        make_a(np.inf)


@given(small, small)
def test_make_a_subgroup(t1, t2):
    assert np.allclose(make_a(t1).mat @ make_a(t2).mat, make_a(t1 + t2).mat, atol=1e-12)


def test_make_n():
    assert np.array_equal(make_n(0, 0).mat, I3)
    expected = np.array([[1, np.sqrt(2), 0.5j - 1], [0, 1, -np.sqrt(2)], [0, 0, 1]])
    assert np.allclose(make_n(1, 0.5).mat, expected)
    assert make_n(0.3 - 0.2j, 0.7).residual() <= 1e-10


def test_make_k():
    assert np.allclose(make_k(1, 0).mat, I3)
    assert np.allclose(make_k(-1, 0).mat, [[0, 0, -1], [0, -1, 0], [-1, 0, 0]])
    k = make_k(0.6, 0.8j)
    assert k.residual() <= 1e-10 and k.compact_residual() <= 1e-10
    with pytest.raises(NormViolation):
        make_k(1, 0.1)


def test_make_k_homomorphism(rng):
    for _ in range(50):
        c1 = KCoset(*su2_exp(rng.normal(size=3)))
        c2 = KCoset(*su2_exp(rng.normal(size=3)))
        assert np.allclose(make_k(c1).mat @ make_k(c2).mat, make_k(c1.compose(c2)).mat, atol=1e-12)


def test_cayley(rng):
    assert np.allclose(cayley(GroupElement(I3)).mat, I3)
    g = GroupElement(random_k0(rng) @ batch_a(0.7) @ batch_n(0.2 + 0.1j, 0.3))
    assert np.allclose(cayley(cayley(g)).mat, g.mat, atol=1e-14)
    assert cayley(g).form is Form.J1_diag and cayley(g).residual() <= 1e-10
    for k in random_k0(rng, 100):
        m = cayley(GroupElement(k)).mat
        off = np.abs(m[[0, 1, 2, 2], [2, 2, 0, 1]])
        assert off.max() <= 1e-10


def test_iwasawa_examples(rng):
    g = GroupElement(batch_n(0.3 + 0.1j, -0.2) @ batch_a(0.5))
    c = iwasawa(g)
    assert c.z == pytest.approx(0.3 + 0.1j) and c.tau == pytest.approx(-0.2) and c.t == pytest.approx(0.5)
    assert np.allclose(c.k.mat, I3, atol=1e-14)
    k = GroupElement(random_k0(rng))
    c = iwasawa(k)
    assert abs(c.z) < 1e-14 and abs(c.tau) < 1e-14 and abs(c.t) < 1e-14
    assert np.allclose(c.k.mat, k.mat)


def test_iwasawa_roundtrip_and_k_membership(rng):
    n = 10_000
    z = rng.uniform(-2, 2, n) + 1j * rng.uniform(-2, 2, n)
    tau, t = rng.uniform(-2, 2, (2, n))
    g = batch_n(z, tau) @ batch_a(t) @ random_k0(rng, n)
    zz, tt, ss, k = batch_iwasawa(g)
    assert np.max(np.abs(batch_n(zz, tt) @ batch_a(ss) @ k - g)) <= 1e-9
    kh = np.conj(np.swapaxes(k, -1, -2))
    assert np.max(np.abs(kh @ k - I3)) <= 1e-8
    assert np.max(np.abs(kh @ J @ k - J)) <= 1e-8


def test_iwasawa_boundary():
    # third row (1, 0, 1) annihilates the lift (-1, 0, 1) of o
    w = np.array([[1, 0, 0], [0, 1, 0], [1, 0, 1]], dtype=complex)
    with pytest.raises(BoundaryDegeneracy):
        batch_iwasawa(w)
    with pytest.raises(BoundaryDegeneracy):
        a_proj(w)


def test_a_projection_additivity(rng):
    for _ in range(100):
        g = random_k0(rng) @ batch_a(rng.uniform(-1, 1)) @ random_k0(rng)
        z, tau, t0 = complex(*rng.normal(size=2)), rng.normal(), rng.normal()
        assert abs(a_proj(batch_n(z, tau) @ batch_a(t0) @ g) - t0 - a_proj(g)) <= 1e-10


def test_a_proj_explicit_example():
    g = make_k(0.6, 0.8j).mat @ batch_n(0.2, 0.1) @ batch_a(0.3)
    w = (0.6 - 1) / 2 * (-np.exp(0.3) - 0.04 + 0.1j) - 0.8j * 0.2 + (0.6 + 1) / 2
    assert a_proj(g) == pytest.approx(0.3 - np.log(abs(w) ** 2), abs=1e-13)
    assert a_explicit(0.6, 0.8j, 0.2, 0.1, 0.3) == pytest.approx(a_proj(g), abs=1e-13)
    assert a_proj(batch_a(0.37)) == pytest.approx(0.37)


def test_weyl_element():
    w0 = J
    assert a_proj(w0) == pytest.approx(0, abs=1e-15)
    assert np.allclose(iwasawa(GroupElement(w0)).k.mat, w0)
    for t in (0.3, -1.2):
        assert np.allclose(w0 @ batch_a(t) @ np.linalg.inv(w0), batch_a(-t), atol=1e-14)


def test_phi_action(rng):
    k = GroupElement(random_k0(rng))
    assert np.allclose(phi_action(GroupElement(I3), k).mat, k.mat)
    for _ in range(200):
        g, h = (GroupElement(random_k0(rng) @ batch_a(rng.uniform(0, 1)) @ random_k0(rng)) for _ in range(2))
        k = GroupElement(random_k0(rng))
        assert np.allclose(phi_action(g @ h, k).mat, phi_action(h, phi_action(g, k)).mat, atol=1e-9)


def test_a_splitting(rng):
    for _ in range(200):
        k = GroupElement(random_k0(rng))
        y, z = (GroupElement(random_k0(rng) @ batch_a(rng.uniform(0, 1)) @ random_k0(rng)) for _ in range(2))
        p = phi_action(y.inv(), k)
        lhs = a_proj(k @ y.inv() @ z)
        assert abs(lhs - (a_proj(p @ z) - a_proj(p @ y))) <= 1e-9


def test_a_derivatives_values():
    assert a_derivatives(GroupElement(I3)) == pytest.approx((1, 0, 0, 0), abs=1e-15)
    g = GroupElement(make_k(0.6, 0.8j).mat @ batch_n(0.3, 0.2) @ batch_a(0.1))
    # right multiplication by NA changes alpha; the pure k(0.6, 0.8i) case:
    assert a_derivatives(make_k(0.6, 0.8j))[0] == pytest.approx(0.6)
    assert a_derivatives(GroupElement(batch_n(0.3, 0.2) @ batch_a(0.1) @ make_k(0.6, 0.8j).mat))[0] == pytest.approx(0.6)
    assert np.isfinite(a_derivatives(g)).all()


def test_a_derivatives_fd(rng):
    h = 1e-5
    for _ in range(200):
        g = random_k0(rng) @ batch_a(rng.uniform(0, 1.5)) @ random_k0(rng)
        an = np.array(a_derivatives(GroupElement(g)))
        fams = [batch_a, lambda e: batch_n(e, 0.0), lambda e: batch_n(1j * e, 0.0), lambda e: batch_n(0.0, e)]
        fd = np.array([(a_proj(g @ f(h)) - a_proj(g @ f(-h))) / (2 * h) for f in fams])
        assert np.max(np.abs(an - fd)) <= 1e-6


def test_uniformization_limit_and_value():
    X = np.array([0.3, -0.5, 0.8])
    a = uniformization_xi(1e-3, X, 0.2 + 0.1j, 0.1, -0.2)
    b = uniformization_xi(1e-4, X, 0.2 + 0.1j, 0.1, -0.2)
    assert abs(a - b) <= 1e-3 * abs(b)
    assert uniformization_xi(1e-4, [0, 0, 1], 0, 0, 0) == pytest.approx(0.5, abs=1e-6)
    with pytest.raises(DomainViolation):
        uniformization_xi(XI_DELTA * 1.01, X, 0, 0, 0)


def test_one_minus_dadt_matches_direct():
    X = np.array([0.3, -0.5, 0.8]) / np.linalg.norm([0.3, -0.5, 0.8])
    r = 0.11
    g = mat_exp(r * sum(x * Xt for x, Xt in zip(X, X_TILDE))) @ batch_n(0.2 + 0.1j, 0.1) @ batch_a(-0.2)
    assert one_minus_dadt(r, X, 0.2 + 0.1j, 0.1, -0.2) == pytest.approx(1 - a_derivatives(GroupElement(g))[0], abs=1e-13)


def test_grad_K_A():
    z, tau = 0.3j, 0.4
    g = grad_K_A(np.zeros(3), z, tau, 0.25)
    assert np.allclose(g, [2 * z.imag, -2 * z.real, tau], atol=1e-8)
    assert float(np.sum(g ** 2)) == pytest.approx(0.52)


def test_grad_K_A_fd(rng):
    h = 1e-5
    for _ in range(200):
        r = rng.uniform(-0.1, 0.1, 3)
        z, tau, t = complex(*rng.uniform(-0.5, 0.5, 2)), *rng.uniform(-0.5, 0.5, 2)
        fd = []
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            ap, bp = su2_exp(r + e)
            am, bm = su2_exp(r - e)
            fd.append((a_explicit(ap, bp, z, tau, t) - a_explicit(am, bm, z, tau, t)) / (2 * h))
        assert np.max(np.abs(grad_K_A(r, z, tau, t) - np.array(fd))) <= 1e-6


@pytest.fixture(scope="module")
def k_family():
    """(r, X, d(exp(r X), M)) on a small family of K0 directions."""
    out = []
    for X in fibonacci_sphere(6):
        for r in np.linspace(0.1, 1.2, 6):
            k = mat_exp(r * sum(c * Xt for c, Xt in zip(X, X_TILDE)))
            out.append((r, X, dist_to_subgroup(k, "M")))
    return out


@pytest.mark.parametrize("delta0", [0.1, 0.2, 0.4])
def test_uniform_boundedness(delta0, k_family):
    """1 - dA/dt >= sigma(delta0) > 0 for k at distance >= delta0 from M, (z, tau, t) in a box."""
    g = np.linspace(-0.3, 0.3, 7)
    x, y, tau, t = (a.ravel() for a in np.meshgrid(g, g, g, g, indexing="ij"))
    z = x + 1j * y
    sig = [float(np.min(one_minus_dadt(r, X, z, tau, t))) for r, X, d in k_family if d >= delta0]
    assert sig and min(sig) > 0
