import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cxhyp.cli import phi_decay_slope
from cxhyp.geometry import dist_A
from cxhyp.group_u21 import KCoset
from cxhyp.harmonic import (Backend, PaleyWienerSpec, RadialFunction, SpectralParam, _panels,
                            b0, build_klambda, cached_klambda, cutoff_b, envelope_constant,
                            hc_transform, helgason_transform, k1_hat, phi_kquad, phi_radial,
                            plancherel_constant, plancherel_density, spherical_phi)


def phi_oracle(s, t):
    """Jacobi-function closed form: phi_s(a(t)) = 2F1(1 + is, 1 - is; 2; -sinh^2(t/2))."""
    return float(mp.re(mp.hyp2f1(1 + 1j * s, 1 - 1j * s, 2, -mp.sinh(t / 2) ** 2)))


@pytest.mark.parametrize("s", [0.5, 3.0, 17.0, 40.0])
@pytest.mark.parametrize("t", [0.3, 1.0, 2.5])
def test_phi_matches_hypergeometric(s, t):
    ref = phi_oracle(s, t)
    assert phi_radial(s, t) == pytest.approx(ref, abs=1e-10)
    assert phi_kquad(s, t) == pytest.approx(ref, abs=1e-10)


def test_phi_at_zero_and_symmetry():
    for s in (0.0, 1.0, 25.0, 50.0):
        assert spherical_phi(s, 0.0) == pytest.approx(1, abs=1e-10)
        assert spherical_phi(s, 0.0, Backend.KQuadrature) == pytest.approx(1, abs=1e-10)
    for s in (1, 5, 20):
        for t in (0.5, 1, 2):
            assert phi_radial(-s, t) == pytest.approx(phi_radial(s, t), abs=1e-8)
            assert phi_kquad(-s, t) == pytest.approx(phi_kquad(s, t), abs=1e-8)
    assert spherical_phi(SpectralParam(3.0), -0.7) == pytest.approx(phi_radial(3.0, 0.7))


def test_spectral_param_finite():
    with pytest.raises(ValueError):
        SpectralParam(np.nan)


def test_backend_agreement():
    for s in (1.0, 10.0, 30.0, 50.0):
        for t in (0.25, 1.0, 3.0):
            assert abs(phi_radial(s, t) - phi_kquad(s, t)) <= 1e-6


def test_phi_bounded_real():
    t = np.linspace(0, 6, 301)
    for s in (0.5, 7.0, 60.0):
        v = phi_radial(s, t)
        assert np.isrealobj(v) and np.max(np.abs(v)) <= 1 + 1e-12


def test_eigen_equation_residual():
    s, t, h = 5.0, 1.0, 0.02
    u = [phi_kquad(s, t + k * h, tol=1e-13) for k in (-2, -1, 0, 1, 2)]
    d1 = (u[0] - 8 * u[1] + 8 * u[3] - u[4]) / (12 * h)
    d2 = (-u[0] + 16 * u[1] - 30 * u[2] + 16 * u[3] - u[4]) / (12 * h * h)
    res = d2 + (1 / np.tanh(t / 2) + 1 / np.tanh(t)) * d1 + (1 + s * s) * u[2]
    assert abs(res) <= 1e-4


def test_phi_decay_slope():
    assert phi_decay_slope() == pytest.approx(-1.5, abs=0.15)


def test_hc_transform_basics():
    assert hc_transform(lambda r: 0 * r, 3.0) == 0.0
    f = lambda r: np.exp(-r ** 2)
    assert hc_transform(f, 4.5) == pytest.approx(hc_transform(f, -4.5), abs=1e-8)


def test_helgason_k_invariant():
    sigma = 0.3
    f = lambda z, tau, t: np.exp(-dist_A(z, tau, t) ** 2 / (2 * sigma ** 2))
    ref = hc_transform(lambda r: np.exp(-r ** 2 / (2 * sigma ** 2)), 3.0, radius=3.0)
    for kc in (KCoset(1, 0), KCoset(0.6, 0.8j), KCoset(0, 1)):
        assert abs(helgason_transform(f, 3.0, kc) - ref) <= 1e-6
    assert helgason_transform(lambda z, tau, t: 0 * t, 3.0, KCoset(1, 0)) == 0


def test_plancherel():
    assert plancherel_constant() == pytest.approx(1 / (8 * np.pi ** 2), rel=1e-6)
    d0 = plancherel_density(0.0)
    assert np.isfinite(d0) and d0 >= 0
    s = np.linspace(10, 100, 91)
    r = plancherel_density(s) / s ** 3
    assert r.max() / r.min() <= 4
    with pytest.raises(ValueError):
        plancherel_density(-1.0)


@pytest.mark.parametrize("sigma", [0.3, 0.45, 0.6])
def test_plancherel_inversion(sigma):
    s, ws = _panels(0.0, 160.0, 4.0, 24)
    fhat = hc_transform(lambda r: np.exp(-r ** 2 / (2 * sigma ** 2)), s, radius=10 * sigma)
    assert float(np.sum(ws * fhat * plancherel_density(s))) == pytest.approx(1.0, abs=1e-3)


def test_paley_wiener_parameters():
    spec = PaleyWienerSpec()
    assert spec.h(0) == 1 and spec.fourier_support == pytest.approx(1 / 3)
    s = np.linspace(-100, 100, 2001)
    assert np.all(spec.h_lambda(s, 40) >= 0)
    with pytest.raises(ValueError):
        PaleyWienerSpec(c=0)
    with pytest.raises(ValueError):
        PaleyWienerSpec(exponent=3)


def test_klambda():
    k = cached_klambda(40.0)
    spec = PaleyWienerSpec()
    assert k.support_radius <= 2 * spec.fourier_support + 1e-12
    s = np.array([39.0, 40.0, 41.0])
    got = hc_transform(k, s)
    assert np.max(np.abs(got / spec.h_lambda(s, 40) - 1)) <= 1e-3
    assert got[1] == pytest.approx(1.0, abs=1e-3)
    K = envelope_constant(k, 40.0)
    assert K == pytest.approx(0.6961, abs=1e-3)
    with pytest.raises(ValueError):
        build_klambda(5.0)


def test_radial_function_csv(tmp_path):
    f = RadialFunction(np.linspace(0, 1, 11), np.linspace(1, 0, 11), support_radius=1.0)
    assert f(-0.5) == pytest.approx(0.5) and f(1.5) == 0
    p = tmp_path / "k.csv"
    f.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "t,value" and len(lines) == 12


def test_cutoffs():
    beta, eps0 = 16.0, 0.1
    d = beta ** (-0.5 + eps0)
    assert cutoff_b(1, beta, eps0, 0.0) == 1.0
    assert cutoff_b(1, beta, eps0, 3 * d) == 0.0
    assert cutoff_b(1, beta, eps0, 0.99 * d) == 1.0
    t = np.linspace(-3, 3, 6001)
    assert np.array_equal(cutoff_b(0, beta, eps0, t) - cutoff_b(1, beta, eps0, t) - cutoff_b(2, beta, eps0, t),
                          np.zeros_like(t))
    assert np.array_equal(b0(t), cutoff_b(0, beta, eps0, t))
    with pytest.raises(ValueError):
        cutoff_b(1, 2.0, eps0, 0.0)
    with pytest.raises(ValueError):
        cutoff_b(1, beta, 0.2, 0.0)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_cutoff_derivative_scale(n):
    """max |b1^(n)| scales like (beta^(1/2 - eps0))^n with one constant across beta."""
    eps0 = 0.1
    consts = []
    for beta in (8.0, 16.0, 32.0):
        d = beta ** (-0.5 + eps0)
        h = d / 4000
        t = np.arange(0, 2.5 * d, h)
        dn = np.diff(cutoff_b(1, beta, eps0, t), n) / h ** n
        consts.append(np.max(np.abs(dn)) * d ** n)
    assert max(consts) / min(consts) <= 1.01


def test_k1_hat():
    lam = 40.0
    top = {b: abs(k1_hat(lam, lam, b, 0.1)) for b in (8.0, 16.0, 32.0)}
    scaled = {b: v * b ** 0.4 for b, v in top.items()}
    assert scaled[8.0] == pytest.approx(2.30, abs=0.01)
    assert scaled[16.0] == pytest.approx(3.03, abs=0.01)
    assert scaled[32.0] == pytest.approx(3.98, abs=0.01)
    assert abs(k1_hat(lam / 4, lam, 8.0, 0.1)) <= 1e-4 * top[8.0]
    assert k1_hat(-25.0, lam, 16.0, 0.1) == pytest.approx(k1_hat(25.0, lam, 16.0, 0.1), abs=1e-8)
