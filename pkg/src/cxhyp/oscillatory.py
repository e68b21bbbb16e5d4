"""Oscillatory integrals over the complex hyperbolic plane and decay fitting.

Conventions: A(g) is the Iwasawa a-projection, dist_A(z, tau, t) the Cartan
radius of n(z, tau) a(t), and phi_s the spherical function from ``harmonic``.
Profiles phi(z, tau, t) live in L^2(dz dtau dt) and are supported in the
cylinder |z|, |tau| <= lambda^{-1/2}.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from scipy.stats import qmc

from .errors import (BudgetExceeded, DegenerateFit, DomainViolation,
                     QuadratureNotConverged)
from .geometry import batch_cartan_radius, dist_A
from .group_u21 import J, X_TILDE, GroupElement, a_explicit, batch_a, batch_n, batch_nak, \
    batch_split_k
from .harmonic import (RadialFunction, _gauss, _panels, _smooth_step, cached_klambda,
                       cutoff_b, phi_radial)
from .lie_core import as_mat3, dist, dist_to_subgroup, mat_exp

NOISE_FLOOR = 1e-14
PHI_TMAX = 6.0


def _mat(g):
    return g.mat if isinstance(g, GroupElement) else as_mat3(g)


# ------------------------------------------------------------ cutoffs

def _bump(t, a=0.0):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = np.abs(t) < 1
    out[m] = np.exp(-a * t[m] ** 2 - 1 / (1 - t[m] ** 2))
    return out


@dataclass(frozen=True)
class CutoffChi:
    """Smooth cutoff supported in [-1, 1] with measured derivative maxima."""
    func: Callable
    name: str = "custom"
    deriv_bounds: tuple = ()

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where(np.abs(t) < 1, self.func(np.clip(t, -1, 1)), 0.0)
        return float(out) if out.ndim == 0 else out

    @classmethod
    def make(cls, func, name="custom", n_grid=4001, deg=400):
        """Record max |chi^(n)|, n = 1..8, from a Chebyshev interpolant on a grid."""
        cheb = C.Chebyshev.interpolate(lambda x: np.where(np.abs(x) < 1, func(x), 0.0), deg)
        x = np.linspace(-1, 1, n_grid)
        bounds, d = [], cheb
        for _ in range(8):
            d = d.deriv()
            bounds.append(float(np.max(np.abs(d(x)))))
        return cls(func, name, tuple(bounds))

    @classmethod
    def bump(cls, a: float = 4.0):
        """exp(-a t^2 - 1/(1 - t^2)); a > 0 keeps the Fourier transform node-free."""
        return cls.make(lambda t: _bump(t, a), name=f"bump(a={a})")

    @classmethod
    def zero(cls):
        return cls(lambda t: np.zeros_like(np.asarray(t, dtype=float)), "zero", (0.0,) * 8)

    def integral(self, n=400) -> float:
        x, w = _gauss(-1, 1, n)
        return float(np.sum(w * self(x)))

    def autocorrelation(self, u, n=400):
        """(chi * chi)(u) = int chi(t) chi(t + u) dt."""
        x, w = _gauss(-1, 1, n)
        u = np.asarray(u, dtype=float)
        return np.sum(w * self(x) * self(x + u[..., None]), axis=-1)


DEFAULT_CHI = None


def default_chi() -> CutoffChi:
    global DEFAULT_CHI
    if DEFAULT_CHI is None:
        DEFAULT_CHI = CutoffChi.bump(4.0)
    return DEFAULT_CHI


# ------------------------------------------------------------ 1-d integrals

def _gauss_adapt(f, a, b, rtol=1e-8, atol=1e-15, n0=64, n_max=4096):
    """Gauss-Legendre with doubling; f must be vectorised."""
    n = n0
    x, w = _gauss(a, b, n)
    prev = np.sum(w * f(x))
    while n < n_max:
        n *= 2
        x, w = _gauss(a, b, n)
        cur = np.sum(w * f(x))
        if abs(cur - prev) <= max(rtol * abs(cur), atol):
            return complex(cur)
        prev = cur
    raise QuadratureNotConverged(f"Gauss doubling did not settle by n = {n_max}")


def _chi_scale(chi0):
    return max(abs(chi0.integral()), 1.0) * NOISE_FLOOR


def int1d_A(chi0: CutoffChi, s: float, s_prime: float, k, z, tau, t) -> complex:
    """int chi0(t') exp(i s' t' - i s A(k n(z, tau) a(t + t'))) dt'."""
    if max(abs(z), abs(tau), abs(t)) >= 1:
        raise DomainViolation("need |z|, |tau|, |t| < 1")
    if s < 10:
        raise DomainViolation("need s >= 10")
    _, _, alpha, beta = batch_split_k(_mat(k))

    def f(tp):
        A = a_explicit(alpha, beta, z, tau, t + tp)
        return chi0(tp) * np.exp(1j * (s_prime * tp - s * A))
    return _gauss_adapt(f, -1, 1, atol=_chi_scale(chi0))


def int1d_phi(chi0: CutoffChi, s: float, s_prime: float, z, tau, t) -> complex:
    """int chi0(t') e^{i s' t'} phi_s(n(z, tau) a(t + t')) dt'."""
    def f(tp):
        return chi0(tp) * np.exp(1j * s_prime * tp) * phi_radial(s, dist_A(z, tau, t + tp), PHI_TMAX)
    return _gauss_adapt(f, -1, 1, atol=_chi_scale(chi0))


# ------------------------------------------------------------ J(s, s1, s2, g)

_RAY_CACHE: dict = {}


def _j_radii(g, n):
    """Cartan radii of a(-t1) g a(t2) on the Gauss grid, cached per (g, n)."""
    key = (np.asarray(g).tobytes(), n)
    if key not in _RAY_CACHE:
        x, w = _gauss(-1, 1, n)
        A = batch_cartan_radius(batch_a(-x)[:, None] @ g @ batch_a(x)[None, :])
        if len(_RAY_CACHE) > 32:
            _RAY_CACHE.clear()
        _RAY_CACHE[key] = (x, w, A)
    return _RAY_CACHE[key]


def integral_J_grid(s, s1s, s2s, g, chi0: CutoffChi | None = None, n: int = 400):
    """J(s, s1, s2, g) for all s1 in s1s (rows) and s2 in s2s (columns)."""
    chi0 = chi0 or default_chi()
    g = _mat(g)
    if dist(np.eye(3), g) > 1.5 + 1e-12:
        raise DomainViolation("need d(g, e) <= 1.5")
    x, w, A = _j_radii(g, n)
    ph = phi_radial(s, A, PHI_TMAX)
    c = w * chi0(x)
    e1 = np.exp(-1j * np.outer(np.atleast_1d(s1s), x)) * c
    e2 = np.exp(1j * np.outer(np.atleast_1d(s2s), x)) * c
    return e1 @ ph @ e2.T


def integral_J(s, s1, s2, g, chi0: CutoffChi | None = None, n: int = 400) -> complex:
    """iint chi0(t1) chi0(t2) e^{-i s1 t1 + i s2 t2} phi_s(a(-t1) g a(t2)) dt1 dt2."""
    return complex(integral_J_grid(s, [s1], [s2], g, chi0, n)[0, 0])


def integral_J_reduced(s, s1, chi0: CutoffChi | None = None, n: int = 800) -> complex:
    """J(s, s1, s1, e) = int e^{i s1 u} phi_s(a(u)) (chi0 * chi0)(u) du."""
    chi0 = chi0 or default_chi()
    u, w = _gauss(-2, 2, n)
    return complex(np.sum(w * np.exp(1j * s1 * u) * phi_radial(s, u, PHI_TMAX) * chi0.autocorrelation(u)))


def hypothesis_radius(s, beta=10.0, eps0=0.1, B0=2.0):
    return B0 * s ** (-0.5 + eps0) * np.sqrt(beta)


def element_at_ma_distance(d_target: float, direction=None, r_max: float = 3.0):
    """g = exp(r X) with X a unit vector in k/m and d(g, MA) = d_target."""
    X = np.asarray(X_TILDE[0] if direction is None else direction, dtype=complex)
    X = X / np.linalg.norm(X)

    def gap(r):
        return dist_to_subgroup(mat_exp(r * X), "MA") - d_target
    r = brentq(gap, 1e-3, r_max, xtol=1e-8)
    return mat_exp(r * X), r


# ------------------------------------------------------------ profiles

class Window(str, Enum):
    InBand = "InBand"
    OutOfBand = "OutOfBand"


def _pulse(t, omega):
    """Inverse Fourier transform of B(xi / omega), B(x) = exp(-1/(1 - x^2)) on (-1, 1)."""
    t = np.asarray(t, dtype=float)
    tmax = float(np.max(np.abs(t))) if t.size else 0.0
    n = max(240, int(omega * tmax / 2) + 120)
    x, w = _gauss(0, 1, n)
    wb = w * _bump(x)
    out = np.empty(t.shape)
    flat, res = t.ravel(), out.reshape(-1)
    for c in range(0, flat.size, 4096):
        res[c:c + 4096] = np.cos(omega * np.outer(flat[c:c + 4096], x)) @ wb
    return (omega / np.pi) * out


def _pulse_norm2(omega):
    # Parseval: ||v||^2 = (1 / 2 pi) int |v^|^2 = (omega / pi) int_0^1 B^2
    x, w = _gauss(0, 1, 240)
    return omega / np.pi * np.sum(w * _bump(x) ** 2)


@dataclass
class WindowedProfile:
    """Separable phi(z, tau, t) = F(|z|) G(tau) v(t) with a band-limited pulse v.

    F, G are bumps supported in 0.9 lambda^{-1/2}.  OutOfBand: v^ is supported
    in |xi| <= lambda - beta.  InBand: v^ is supported in +-[lambda - beta, lambda + beta].
    """
    lam: float
    beta: float
    window: Window
    omega: float = 0.0
    inner: float = 0.9
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.window = Window(self.window)
        if not (self.lam > 0 and 0 < self.beta < self.lam):
            raise DomainViolation("need 0 < beta < lambda")
        if self.window is Window.OutOfBand:
            self.omega = self.omega or (self.lam - self.beta)
            if self.omega > self.lam - self.beta:
                raise DomainViolation("pulse band reaches the excluded window")
        else:
            self.omega = self.beta
        self.radius = self.lam ** -0.5
        self.R = self.inner * self.radius
        xr, wr = _gauss(0, self.R, 200)
        self._f_norm2 = 2 * np.pi * np.sum(wr * xr * _bump(xr / self.R) ** 2)
        xt, wt = _gauss(-self.R, self.R, 200)
        self._g_norm2 = np.sum(wt * _bump(xt / self.R) ** 2)
        v2 = _pulse_norm2(self.omega) * (2 if self.window is Window.InBand else 1)
        self._scale = 1 / np.sqrt(self._f_norm2 * self._g_norm2 * v2)

    # factors: u = F G carries the normalisation
    def F(self, rho):
        return _bump(np.asarray(rho) / self.R)

    def G(self, tau):
        return _bump(np.asarray(tau) / self.R)

    def v(self, t):
        t = np.asarray(t, dtype=float)
        if self.window is Window.OutOfBand:
            return _pulse(t, self.omega)
        return 2 * np.cos(self.lam * t) * _pulse(t, self.omega)

    def u(self, z, tau):
        return self._scale * self.F(np.abs(z)) * self.G(tau)

    def __call__(self, z, tau, t):
        return self.u(z, tau) * self.v(t)

    def band_mask(self, xi):
        a = np.abs(xi)
        inside = (a >= self.lam - self.beta) & (a <= self.lam + self.beta)
        return inside if self.window is Window.InBand else ~inside

    def leakage(self, T=80.0, dt=0.01) -> float:
        """Energy fraction of v outside its allowed frequency set (FFT on [-T, T])."""
        t = np.arange(-T, T, dt)
        spec = np.fft.fft(self.v(t))
        xi = 2 * np.pi * np.fft.fftfreq(t.size, dt)
        e = np.abs(spec) ** 2
        return float(np.sum(e[~self.band_mask(xi)]) / np.sum(e))

    def l2_norm(self, T=80.0, dt=0.005) -> float:
        t = np.arange(-T, T, dt)
        v2 = np.sum(self.v(t) ** 2) * dt
        return float(np.sqrt(self._scale ** 2 * self._f_norm2 * self._g_norm2 * v2))

    @classmethod
    def zero_like(cls, other: "WindowedProfile"):
        p = cls(other.lam, other.beta, other.window, other.omega, other.inner)
        p._scale = 0.0
        return p


@dataclass(frozen=True)
class TubeCutoff:
    """b(z, tau, t) = b_z(z, tau) b_t(t); b_z = 1 on the 0.9-cylinder, b_t = 1 on [-0.9, 0.9]."""
    lam: float
    flat: float = 0.9

    def bt(self, t):
        a = np.abs(np.asarray(t, dtype=float))
        return _smooth_step((1 - a) / (1 - self.flat))

    def bz(self, z, tau):
        r = self.lam ** -0.5
        sz = _smooth_step((1 - np.abs(z) / r) / (1 - self.flat))
        st = _smooth_step((1 - np.abs(tau) / r) / (1 - self.flat))
        return sz * st

    def __call__(self, z, tau, t):
        return self.bz(z, tau) * self.bt(t)

    def max_radius(self) -> float:
        """Largest Cartan radius of n(z, tau) a(t) over the support."""
        r = self.lam ** -0.5
        return float(max(dist_A(r, r, 1.0), dist_A(r, r, -1.0)))


# ------------------------------------------------------------ I(lambda, phi, g)

@dataclass(frozen=True)
class Estimate:
    value: complex
    std_err: float
    n_eval: int = 0
    method: str = ""

    def __complex__(self):
        return complex(self.value)

    def __abs__(self):
        return abs(self.value)


def _pairing_e(phi: WindowedProfile, b: TubeCutoff, kernels, support: float, level: int = 0):
    """Pairings int conj(b phi) b phi k(relative) 16 e^{-2t1 - 2t2} at g = e.

    Reduced form (Heisenberg translation plus rotation in z):
      16 int dt1 du w(t1) w(t1 + u) e^{-4 t1 - 2 u}
         2 pi int rho drho dsigma k(dist_A(e^{-t1/2} rho, e^{-t1} sigma, u)) C0(rho, sigma)
    with C0(rho, sigma) = int u(z, tau) u(z + rho, tau + sigma - 2 rho Im z) dz dtau.
    Returns one value per kernel.
    """
    R = phi.R
    npan = 10 + 2 * level
    rho, wrho = _panels(0, 2 * R, 2 * R / 4, npan)
    smax = 2 * R + 4 * R * R
    sig, wsig = _panels(-smax, smax, smax / 5, npan)
    # C0 on the (rho, sigma) nodes; G autocorrelation tabulated then splined
    xg, wg = _gauss(-R, R, 160)
    a_grid = np.linspace(-2 * R, 2 * R, 2001)
    gc = np.sum(wg * phi.G(xg) * phi.G(xg + a_grid[:, None]), axis=-1)
    gcs = CubicSpline(a_grid, gc)
    rr, wr = _gauss(0, R, 32 + 8 * level)
    th = np.arange(64) * (2 * np.pi / 64)
    z1 = (rr[:, None] * np.exp(1j * th)).ravel()
    wz = (np.outer(wr * rr, np.full(64, 2 * np.pi / 64))).ravel()
    f1 = phi.F(np.abs(z1)) * wz
    c0 = np.empty((rho.size, sig.size))
    for i, p in enumerate(rho):
        f2 = phi.F(np.abs(z1 + p))
        arg = sig[None, :] - 2 * p * z1.imag[:, None]
        vals = np.where(np.abs(arg) < 2 * R, gcs(np.clip(arg, -2 * R, 2 * R)), 0.0)
        c0[i] = (f1 * f2) @ vals
    c0 *= phi._scale ** 2
    cw = 2 * np.pi * (wrho * rho)[:, None] * wsig[None, :] * c0
    # time nodes
    t1, wt1 = _panels(-1, 1, 0.25, npan)
    w1 = b.bt(t1) * phi.v(t1)
    keep = np.abs(w1) > 1e-14 * np.abs(w1).max()
    U = min(support, 2.0)
    u, wu = _panels(-U, U, 0.1, npan)
    out = np.zeros(len(kernels), dtype=complex)
    n_eval = 0
    for t, wt, wv in zip(t1[keep], wt1[keep], w1[keep]):
        w2 = b.bt(t + u) * phi.v(t + u)
        m = np.abs(w2) > 0
        if not np.any(m):
            continue
        A = dist_A(np.exp(-t / 2) * rho[None, :, None], np.exp(-t) * sig[None, None, :],
                   u[m][:, None, None])
        n_eval += A.size
        outer = 16 * wt * np.conj(wv) * np.exp(-4 * t) * wu[m] * w2[m] * np.exp(-2 * u[m])
        for j, ker in enumerate(kernels):
            kv = ker(A)
            out[j] += np.sum(outer * np.einsum("uab,ab->u", kv, cw))
    return out, n_eval


def kernel_support(lam: float) -> float:
    k = cached_klambda(float(lam))
    return float(k.support_radius)


def pairing_e(lam, phi, kernels, b=None, support=None):
    """Reduced g = e pairings for a list of radial kernels with a refinement error."""
    b = b or TubeCutoff(lam)
    support = support if support is not None else kernel_support(lam)
    v0, n0 = _pairing_e(phi, b, kernels, support, 0)
    v1, n1 = _pairing_e(phi, b, kernels, support, 1)
    return [Estimate(complex(a), float(abs(a - c)), n0 + n1, "reduced-tensor") for a, c in zip(v1, v0)]


def _points_6d(R, m, seed, rep):
    eng = qmc.Sobol(d=6, scramble=True, seed=np.random.default_rng([seed, rep]))
    x = (2 * eng.random_base2(m) - 1) * R
    z1 = x[:, 0] + 1j * x[:, 1]
    z2 = x[:, 3] + 1j * x[:, 4]
    return z1, x[:, 2], z2, x[:, 5], (2 * R) ** 6


def _vanishing_bound(lam, b, support):
    return support + 2 * b.max_radius()


def integral_I(lam: float, phi: WindowedProfile, g, b: TubeCutoff | None = None,
               kernel: RadialFunction | None = None, n_t: int = 24, m: int = 12,
               replicates: int = 8, target_se: float | None = None, max_m: int = 17,
               seed: int = 0) -> Estimate:
    """I(lambda, phi, g) by tensor Gauss in (t1, t2) and scrambled Sobol in the 6 cylinder variables.

    The standard error is the spread of independent scrambles.  When target_se
    is set the point count doubles until it is met; BudgetExceeded past 2^max_m.
    """
    if lam > 80:
        raise BudgetExceeded("lambda above the desk bound 80")
    b = b or TubeCutoff(lam)
    kernel = kernel or cached_klambda(float(lam))
    g = _mat(g)
    if phi._scale == 0:
        return Estimate(0j, 0.0, 0, "zero-profile")
    if float(batch_cartan_radius(g)) > _vanishing_bound(lam, b, kernel.support_radius):
        return Estimate(0j, 0.0, 0, "kernel-support")
    return _integral_I_qmc(phi, g, b, kernel, n_t, m, replicates, target_se, max_m, seed)


def _integral_I_qmc(phi, g, b, kernel, n_t, m, replicates, target_se, max_m, seed):
    t, wt = _gauss(-1, 1, n_t)
    w = wt * b.bt(t) * phi.v(t) * 4 * np.exp(-2 * t)
    vt = np.stack([-np.exp(t / 2), np.exp(-t / 2)], -1)  # components 0 and 2 of a(t) o
    R = phi.R
    while True:
        reps = []
        n_eval = 0
        for rep in range(replicates):
            z1, s1, z2, s2, vol = _points_6d(R, m, seed, rep)
            amp = np.conj(phi.u(z1, s1)) * phi.u(z2, s2)
            nz = amp != 0
            P = batch_n(-z1[nz], -s1[nz]) @ g @ batch_n(z2[nz], s2[nz])
            Q = (J @ P)[:, ::2, ::2]
            acc = 0j
            for c0 in range(0, Q.shape[0], 2048):
                q = Q[c0:c0 + 2048]
                val = np.einsum("ai,pij,bj->pab", vt, q, vt)
                A = 2 * np.arccosh(np.maximum(np.abs(val) / 2, 1.0))
                kv = kernel(A)
                acc += np.sum(amp[nz][c0:c0 + 2048] * np.einsum("a,pab,b->p", np.conj(w), kv, w))
                n_eval += A.size
            reps.append(acc * vol / z1.size)
        reps = np.array(reps)
        se = float(np.std(reps, ddof=1) / np.sqrt(replicates)) if replicates > 1 else float("nan")
        est = Estimate(complex(np.mean(reps)), se, n_eval, f"qmc-2^{m}x{replicates}")
        if target_se is None or se <= target_se:
            return est
        m += 1
        if m > max_m:
            raise BudgetExceeded(f"standard error {se:.3g} above target at 2^{max_m} points")


@dataclass(frozen=True)
class SplitResult:
    I1: Estimate
    I2: Estimate
    total: Estimate

    @property
    def additivity_gap(self) -> float:
        return abs(self.I1.value + self.I2.value - self.total.value)

    @property
    def additivity_tol(self) -> float:
        return self.I1.std_err + self.I2.std_err + self.total.std_err + 1e-12 * abs(self.total.value)


def split_I(lam: float, beta: float, eps0: float, phi: WindowedProfile, g=None,
            b: TubeCutoff | None = None) -> SplitResult:
    """I(lambda, phi, e) = I1 + I2 with kernels b1 k_lambda and b2 k_lambda."""
    if g is not None and not np.allclose(_mat(g), np.eye(3), atol=1e-12):
        raise DomainViolation("split_I is defined at g = e")
    k = cached_klambda(float(lam))
    kernels = [
        lambda A: cutoff_b(1, beta, eps0, A) * k(A),
        lambda A: cutoff_b(2, beta, eps0, A) * k(A),
        k,
    ]
    e1, e2, e0 = pairing_e(lam, phi, kernels, b, k.support_radius)
    return SplitResult(e1, e2, e0)


def integral_J2(phi: WindowedProfile, s: float, lam: float, beta: float, eps0: float,
                b: TubeCutoff | None = None) -> Estimate:
    """J2(phi, s): the g = e pairing with kernel b2(A) phi_s(A)."""
    if abs(s - lam) > beta / 2:
        raise DomainViolation("need |s - lambda| <= beta / 2")
    if phi._scale == 0:
        return Estimate(0j, 0.0, 0, "zero-profile")
    support = 2.0  # b2 = b0 - b1 and b0 vanishes beyond 2

    def ker(A):
        return cutoff_b(2, beta, eps0, A) * phi_radial(s, A, PHI_TMAX)
    return pairing_e(lam, phi, [ker], b, support)[0]


# ------------------------------------------------------------ phase certificate

def b1_box(beta: float, eps0: float):
    d = 2 * beta ** (-0.5 + eps0)
    return ((-d, d),) * 4


def phase_gradient(k, rho, x, y, tau, t):
    """Gradient in (x, y, tau, t) of A(k n(x + iy, tau) a(t)) - rho t."""
    km = _mat(k)
    g = km @ batch_n(np.asarray(x) + 1j * np.asarray(y), tau) @ batch_a(t)
    *_, alpha, beta = batch_nak(g)
    et = np.exp(-np.asarray(t, dtype=float))
    eh = np.exp(-np.asarray(t, dtype=float) / 2)
    ia = np.imag(alpha)
    return np.stack([
        eh * 2 * np.real(beta) + 2 * np.asarray(y) * et * ia,
        eh * 2 * np.imag(beta) - 2 * np.asarray(x) * et * ia,
        et * ia,
        np.real(alpha) - rho,
    ], -1)


def phase_gradient_certificate(k, rho: float, box=None, n: int = 16, beta: float = 16.0,
                               eps0: float = 0.1) -> float:
    """min over an n^4 grid of the box of |grad(A(k n(x+iy, tau) a(t)) - rho t)|."""
    if abs(rho) > 2 / 3 + 1e-12:
        raise DomainViolation("need |rho| <= 2/3")
    box = box or b1_box(beta, eps0)
    axes = [np.linspace(lo, hi, n) for lo, hi in box]
    X, Y, T, S = (a.ravel() for a in np.meshgrid(*axes, indexing="ij"))
    best = np.inf
    for c in range(0, X.size, 65536):
        gr = phase_gradient(k, rho, X[c:c + 65536], Y[c:c + 65536], T[c:c + 65536], S[c:c + 65536])
        best = min(best, float(np.min(np.linalg.norm(gr, axis=-1))))
    return best


# ------------------------------------------------------------ decay fitting

@dataclass
class DecayReport:
    grid: list
    fitted_slope: float
    threshold_pass: bool
    std_err: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        s = [p[0] for p in self.grid]
        if any(b <= a for a, b in zip(s, s[1:])):
            raise ValueError("grid must be strictly increasing in s")

    def to_csv(self, path):
        errs = self.std_err or [0.0] * len(self.grid)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "abs_value", "std_err"])
            for (s, v), e in zip(self.grid, errs):
                w.writerow([repr(float(s)), repr(float(v)), repr(float(e))])

    def to_json(self) -> dict:
        slope = None if not np.isfinite(self.fitted_slope) else float(self.fitted_slope)
        return {"grid": [[float(s), float(v)] for s, v in self.grid],
                "std_err": [float(e) for e in self.std_err],
                "fitted_slope": slope, "threshold_pass": bool(self.threshold_pass),
                "flags": {k: bool(v) if isinstance(v, (bool, np.bool_)) else v
                          for k, v in self.flags.items()}}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def fit_decay(points, max_slope: float | None = None, target: tuple | None = None,
              std_err=None) -> DecayReport:
    """Least-squares slope of log|value| against log s.

    max_slope: pass iff slope <= max_slope.  target=(center, tol): pass iff
    |slope - center| <= tol.  DegenerateFit when every value is below 1e-14.
    """
    pts = sorted((float(s), abs(float(v))) for s, v in points)
    if len(pts) < 3:
        raise ValueError("need at least 3 points")
    s = np.array([p[0] for p in pts])
    v = np.array([p[1] for p in pts])
    if np.all(v < NOISE_FLOOR):
        raise DegenerateFit("all values below the noise floor; decay is unobservable")
    if np.any(v <= 0) or np.any(s <= 0):
        raise ValueError("s and values must be positive")
    slope = float(np.polyfit(np.log(s), np.log(v), 1)[0])
    ok = True
    flags = {}
    if max_slope is not None:
        flags["slope_le_threshold"] = slope <= max_slope
        ok &= flags["slope_le_threshold"]
    if target is not None:
        flags["slope_in_band"] = abs(slope - target[0]) <= target[1]
        ok &= flags["slope_in_band"]
    return DecayReport(pts, slope, bool(ok), list(std_err or []), flags)


def envelope_points(s, values):
    """Local maxima of |values| along s (for oscillating decay)."""
    from scipy.signal import argrelmax
    v = np.abs(np.asarray(values))
    i = argrelmax(v)[0]
    return list(zip(np.asarray(s)[i], v[i]))
