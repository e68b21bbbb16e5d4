import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cxhyp.errors import BranchCut, NonFiniteInput, SingularInput
from cxhyp.group_u21 import H, J, X_TILDE, batch_a, batch_k, batch_n, random_k0, su2_exp
from cxhyp.lie_core import (MatrixTolerance, as_mat3, dist, dist_to_subgroup, frobenius,
                            mat_exp, mat_log, mat_mul, subgroup_element)

I3 = np.eye(3)
fin = st.floats(-1, 1, allow_nan=False)


def test_tolerance_positive():
    with pytest.raises(ValueError):
        MatrixTolerance(abs_tol=0)


def test_nonfinite_rejected():
    m = np.eye(3, dtype=complex)
    m[1, 2] = np.nan
    with pytest.raises(NonFiniteInput):
        as_mat3(m)


def test_mat_mul_basics():
    assert np.array_equal(mat_mul(I3, I3), I3)
    assert np.allclose(mat_mul(batch_a(0.3), batch_a(-0.3)), I3, atol=1e-15)


def test_frobenius_values():
    assert frobenius(np.zeros((3, 3))) == 0
    assert frobenius(I3) == pytest.approx(np.sqrt(3))
    assert frobenius(J) == pytest.approx(np.sqrt(3))


def test_exp_of_n_algebra():
    x = batch_n(1.0, 0.5) - I3
    # x is not nilpotent of order 2, so use the algebra element log n(1, 0.5)
    X = mat_log(batch_n(1.0, 0.5))
    assert np.allclose(np.triu(X, 1), X)
    expected = np.array([[1, np.sqrt(2), 0.5j - 1], [0, 1, -np.sqrt(2)], [0, 0, 1]])
    assert np.allclose(mat_exp(X), expected, atol=1e-14)
    assert not np.allclose(x, X)


def test_exp_zero():
    assert np.array_equal(mat_exp(np.zeros((3, 3))), I3)


def test_exp_k_direction():
    r = np.array([0.2, 0.1, -0.3])
    rn = np.sqrt(0.14)
    X = sum(ri * Xi for ri, Xi in zip(r, X_TILDE))
    alpha = np.cos(rn) + 1j * np.sin(rn) / rn * r[2]
    beta = np.sin(rn) / rn * (1j * r[0] - r[1])
    assert np.allclose(mat_exp(X), batch_k(alpha, beta), atol=1e-14)
    assert np.allclose(su2_exp(r), (alpha, beta))


@given(fin, fin, fin)
def test_nilpotent_exact(x, y, tau):
    X = np.zeros((3, 3), dtype=complex)
    X[0, 1], X[1, 2], X[0, 2] = x + 1j * y, tau, 1j * x
    assert np.array_equal(mat_exp(X), I3 + X + (X @ X) / 2)


def test_log_values():
    assert np.allclose(mat_log(I3), 0)
    assert np.allclose(mat_log(batch_a(0.4)), 0.4 * H, atol=1e-15)


def test_log_errors():
    with pytest.raises(SingularInput):
        mat_log(np.diag([1.0, 0.0, 1.0]))
    with pytest.raises(BranchCut):
        mat_log(np.diag([1.0, -1.0, 1.0]))


def test_exp_log_roundtrip(rng):
    worst = 0.0
    for _ in range(1000):
        X = sum(c * Xi for c, Xi in zip(rng.normal(size=3), X_TILDE))
        X = X / max(1.0, frobenius(X)) * rng.uniform(0, 1)
        g = mat_exp(X) @ batch_a(rng.uniform(-0.5, 0.5))
        worst = max(worst, frobenius(mat_exp(mat_log(g)) - g))
    assert worst <= 1e-10


def test_dist_values(rng):
    g = random_k0(rng) @ batch_a(0.3)
    assert dist(g, g) == pytest.approx(0, abs=1e-14)
    assert dist(I3, batch_a(0.6)) == pytest.approx(0.6 * np.sqrt(2) / 2, abs=1e-14)
    assert dist(I3, batch_a(0.6)) == pytest.approx(0.4243, abs=1e-4)


def _near_e(rng):
    X = sum(c * Xi for c, Xi in zip(rng.uniform(-0.3, 0.3, 3), X_TILDE))
    z = complex(*rng.uniform(-0.2, 0.2, 2))
    return mat_exp(X) @ batch_a(rng.uniform(-0.3, 0.3)) @ batch_n(z, rng.uniform(-0.2, 0.2))


def test_dist_left_invariant(rng):
    for _ in range(100):
        x, g, h = (_near_e(rng) for _ in range(3))
        assert abs(dist(x @ g, x @ h) - dist(g, h)) <= 1e-12


def test_dist_to_subgroup_members(rng):
    assert dist_to_subgroup(batch_a(0.3), "MA") <= 1e-8
    assert dist_to_subgroup(np.diag(np.exp(1j * np.array([0.2, -0.5, 0.2]))), "M") <= 1e-8
    for tag, npar in (("M", 2), ("MA", 3)):
        for _ in range(20):
            p = rng.uniform(-1, 1, npar)
            assert dist_to_subgroup(subgroup_element(tag, p), tag) <= 1e-8


def test_dist_to_subgroup_first_order():
    # log n(z, 0) has off-diagonal Frobenius norm 2|z| and no diagonal part
    d = dist_to_subgroup(batch_n(1e-3, 0.0), "MA")
    assert 1.9e-3 <= d <= 2.1e-3
