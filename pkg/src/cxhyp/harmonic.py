"""Spherical functions and spherical transforms on the complex hyperbolic plane.

phi_s(a(t)) = int_{K0} exp((1 + is) A(k a(t))) dk is computed two ways:

* ``RadialODE``: u'' + (coth(t/2) + coth t) u' + (1 + s^2) u = 0, u(0) = 1,
  started from a t^4 series and continued with DOP853.
* ``KQuadrature``: Euler-angle product rule on SU(2) ~ M\\K0, using the closed
  form of A(k(alpha, beta) a(t)).

The Plancherel density is C_nu s^3 coth(pi s) (rank one, root multiplicities
2 and 1); C_nu is fixed by an inversion calibration.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .errors import QuadratureNotConverged, SupportOverflow
from .geometry import polar_constant, haar_weight, dist_A
from .group_u21 import a_explicit


class Backend(str, Enum):
    KQuadrature = "KQuadrature"
    RadialODE = "RadialODE"


@dataclass(frozen=True)
class SpectralParam:
    s: float

    def __post_init__(self):
        if not np.isfinite(self.s):
            raise ValueError("spectral parameter must be finite")


def _sval(s):
    return s.s if isinstance(s, SpectralParam) else float(s)


@dataclass(frozen=True)
class PaleyWienerSpec:
    """h(s) = (sin(c s) / (c s))^exponent; Fourier support [-exponent c, exponent c]."""
    c: float = 1 / 12
    exponent: int = 4

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be positive")
        if self.exponent < 4 or self.exponent % 2:
            raise ValueError("exponent must be an even integer >= 4")

    def h(self, s):
        return np.sinc(self.c * np.asarray(s, dtype=float) / np.pi) ** self.exponent

    def h0(self, s, lam):
        return self.h(np.asarray(s) - lam) + self.h(-np.asarray(s) - lam)

    def h_lambda(self, s, lam):
        return self.h0(s, lam) ** 2

    @property
    def fourier_support(self) -> float:
        return self.exponent * self.c


@dataclass
class RadialFunction:
    """Even function of the Cartan radius, tabulated on [0, support_radius'] and splined."""
    t: np.ndarray
    values: np.ndarray
    support_radius: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        # spline on the symmetric grid so the even extension is smooth at 0
        tt = np.concatenate([-self.t[:0:-1], self.t])
        vv = np.concatenate([self.values[:0:-1], self.values])
        self._spl = CubicSpline(tt, vv)
        self._tmax = self.t[-1]

    def __call__(self, t):
        a = np.abs(np.asarray(t, dtype=float))
        out = np.where(a <= self.support_radius, self._spl(np.minimum(a, self._tmax)), 0.0)
        return float(out) if out.ndim == 0 else out

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "value"])
            for a, b in zip(self.t, self.values):
                w.writerow([repr(float(a)), repr(float(b))])


# ------------------------------------------------------------ radial ODE

def _series_start(mu, t0):
    a = -mu / 8
    b = mu * (1 + mu) / 192
    return 1 + a * t0 ** 2 + b * t0 ** 4, 2 * a * t0 + 4 * b * t0 ** 3


def phi_ode_grid(s, t_eval, rtol=1e-11, atol=1e-13):
    """phi_s(a(t)) for every s in ``s`` and t in ``t_eval``; shape (len(s), len(t))."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    t_eval = np.atleast_1d(np.abs(np.asarray(t_eval, dtype=float)))
    order = np.argsort(t_eval)
    ts = t_eval[order]
    mu = 1 + s ** 2
    t0 = min(1e-3, 0.05 / np.sqrt(mu.max()))
    out = np.empty((s.size, ts.size))
    near = ts <= t0
    if np.any(near):
        out[:, near] = _series_start(mu[:, None], ts[near][None, :])[0]
    far = ~near
    if np.any(far):
        u0, v0 = _series_start(mu, t0)
        n = s.size

        def rhs(t, y):
            u, v = y[:n], y[n:]
            return np.concatenate([v, -(1 / np.tanh(t / 2) + 1 / np.tanh(t)) * v - mu * u])

        sol = solve_ivp(rhs, (t0, ts[-1]), np.concatenate([u0, v0]), method="DOP853",
                        t_eval=ts[far], rtol=rtol, atol=atol)
        if not sol.success:
            raise QuadratureNotConverged(f"radial ODE failed: {sol.message}")
        out[:, far] = sol.y[:n]
    res = np.empty_like(out)
    res[:, order] = out
    return res


@lru_cache(maxsize=64)
def _phi_dense(s: float, tmax: float):
    mu = 1 + s * s
    t0 = min(1e-3, 0.05 / np.sqrt(mu))

    def rhs(t, y):
        return [y[1], -(1 / np.tanh(t / 2) + 1 / np.tanh(t)) * y[1] - mu * y[0]]

    u0, v0 = _series_start(mu, t0)
    sol = solve_ivp(rhs, (t0, tmax), [u0, v0], method="DOP853", dense_output=True,
                    rtol=1e-11, atol=1e-13)
    if not sol.success:
        raise QuadratureNotConverged(f"radial ODE failed: {sol.message}")
    return sol.sol, t0, mu


def phi_radial(s, t, tmax: float = 6.0):
    """phi_s(a(t)) by the radial ODE with a cached dense solution on [0, tmax]."""
    s = abs(_sval(s))
    a = np.abs(np.asarray(t, dtype=float))
    if np.any(a > tmax):
        raise ValueError(f"|t| must be <= {tmax}")
    sol, t0, mu = _phi_dense(s, float(tmax))
    out = np.where(a <= t0, _series_start(mu, a)[0], sol(np.maximum(a, t0).ravel())[0].reshape(a.shape))
    return float(out) if out.ndim == 0 else out


# ------------------------------------------------------------ K quadrature

def _euler_rule(n):
    """Product rule on SU(2): Gauss in cos(theta), trapezoid in the angle of alpha.

    With alpha = cos(theta/2) e^{i(ph+ps)/2}, beta = sin(theta/2) e^{i(ph-ps)/2},
    the integrand A(k(alpha, beta) a(t)) only sees alpha, so the psi average is
    exact with one node and (ph + ps)/2 is sampled by 2n trapezoid nodes.
    """
    x, w = np.polynomial.legendre.leggauss(n)
    ang = np.arange(2 * n) * (np.pi / n)
    absa = np.sqrt((1 + x) / 2)
    alpha = absa[:, None] * np.exp(1j * ang[None, :])
    beta = np.sqrt((1 - x) / 2)[:, None] * np.ones_like(ang)[None, :]
    wts = (w / 2)[:, None] * np.full(ang.shape, 1 / ang.size)[None, :]
    return alpha, beta, wts


def phi_kquad(s, t, orders=(16, 32, 64, 128, 256, 512, 1024, 2048), tol=1e-8):
    """phi_s(a(t)) as an SU(2) integral with order escalation."""
    s = _sval(s)
    t = float(t)
    prev = None
    for n in orders:
        alpha, beta, w = _euler_rule(n)
        val = np.sum(w * np.exp((1 + 1j * s) * a_explicit(alpha, beta, 0.0, 0.0, t)))
        if prev is not None and abs(val - prev) <= tol:
            return float(val.real)
        prev = val
    raise QuadratureNotConverged(f"K quadrature did not settle for s={s}, t={t}")


def spherical_phi(s, t, backend: Backend | str = Backend.RadialODE):
    """phi_s(a(t)); real for real s and even in both s and t."""
    backend = Backend(backend)
    if abs(float(np.max(np.abs(t)))) > 6:
        raise ValueError("|t| <= 6 required")
    if backend is Backend.RadialODE:
        return phi_radial(s, t)
    if np.ndim(t) == 0:
        return phi_kquad(s, t)
    return np.array([phi_kquad(s, x) for x in np.ravel(t)]).reshape(np.shape(t))


# ------------------------------------------------------------ transforms

def _gauss(a, b, n):
    x, w = np.polynomial.legendre.leggauss(n)
    return (b - a) / 2 * x + (a + b) / 2, (b - a) / 2 * w


def _panels(a, b, width, n):
    k = max(1, int(np.ceil((b - a) / width)))
    edges = np.linspace(a, b, k + 1)
    xs, ws = zip(*(_gauss(lo, hi, n) for lo, hi in zip(edges[:-1], edges[1:])))
    return np.concatenate(xs), np.concatenate(ws)


def hc_transform(f, s, radius: float | None = None, n: int = 400):
    """f^(s) = int f(x) phi_{-s}(x) dVol, in polar coordinates.

    ``f`` is a RadialFunction or a callable of the radius; ``radius`` bounds its support.
    Vectorised over ``s``.
    """
    if radius is None:
        radius = f.support_radius if isinstance(f, RadialFunction) else 3.0
    sv = np.atleast_1d(np.asarray([_sval(x) for x in np.atleast_1d(s)], dtype=float))
    r, w = _gauss(0.0, radius, n)
    fr = np.asarray(f(r), dtype=float)
    if not np.any(fr):
        return 0.0 if np.ndim(s) == 0 else np.zeros(sv.shape)
    phi = phi_ode_grid(np.abs(sv), r)
    out = phi @ (w * fr * polar_constant() * np.sinh(r / 2) ** 2 * np.sinh(r))
    return float(out[0]) if np.ndim(s) == 0 and not isinstance(s, (list, tuple)) else out


def plancherel_shape(s):
    s = np.abs(np.asarray(s, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(s > 1e-8, s ** 3 / np.tanh(np.pi * s), s ** 2 / np.pi)
    return out


def _calibration_bump(r, sigma=0.35):
    return np.exp(-np.asarray(r) ** 2 / (2 * sigma ** 2))


@lru_cache(maxsize=None)
def plancherel_constant() -> float:
    """C_nu with f(o) = int_0^inf f^(s) C_nu s^3 coth(pi s) ds (Gaussian calibration bump)."""
    sigma = 0.35
    s, ws = _panels(0.0, 120.0, 4.0, 24)
    fhat = hc_transform(lambda r: _calibration_bump(r, sigma), s, radius=4.0, n=400)
    return 1.0 / float(np.sum(ws * fhat * plancherel_shape(s)))


def plancherel_density(s):
    s = _sval(s) if isinstance(s, SpectralParam) else s
    if np.any(np.asarray(s) < 0):
        raise ValueError("s >= 0 required")
    out = plancherel_constant() * plancherel_shape(s)
    return float(out) if np.ndim(out) == 0 else out


def inverse_hc(hfun: Callable, t, s_max: float, width: float = 4.0, n: int = 24):
    """k(t) = int_0^s_max h(s) phi_s(a(t)) dnu(s) on an array of radii."""
    s, ws = _panels(0.0, s_max, width, n)
    phi = phi_ode_grid(s, t)
    return (ws * hfun(s) * plancherel_density(s)) @ phi


def helgason_transform(f, s, kcoset, radius: float = 3.0, n: int = 40, n_angle: int = 32):
    """f^(s, k) = int f(x) exp((1 - is) A(k x)) dVol(x) over Iwasawa coordinates.

    ``f(z, tau, t)`` is a function on Iwasawa coordinates supported in the ball
    of the given radius about o.
    """
    s = _sval(s)
    alpha, beta = kcoset.alpha, kcoset.beta
    xg, wg = np.polynomial.legendre.leggauss(n)
    ch = np.cosh(radius)
    t = radius * xg
    wt = radius * wg
    a2 = 0.5 * np.exp(-t)
    b1 = 1 + np.exp(-t)
    c0 = np.cosh(t) - ch
    umax = (-b1 + np.sqrt(b1 ** 2 - 4 * a2 * c0)) / (2 * a2)
    u = umax[:, None] * (xg[None, :] + 1) / 2
    wu = umax[:, None] * wg[None, :] / 2
    slack = -(a2[:, None] * u ** 2 + b1[:, None] * u + c0[:, None])
    taumax = np.sqrt(np.maximum(2 * np.exp(t)[:, None] * slack, 0))
    ang = np.arange(n_angle) * (2 * np.pi / n_angle)
    # axes: t, u, angle, tau
    z = np.sqrt(u)[:, :, None, None] * np.exp(1j * ang)[None, None, :, None]
    tau = taumax[:, :, None, None] * xg[None, None, None, :]
    w = (wt * haar_weight(t))[:, None, None, None] * (wu / 2)[:, :, None, None] \
        * (2 * np.pi / n_angle) * (taumax[:, :, None, None] * wg[None, None, None, :])
    T = t[:, None, None, None]
    vals = f(z, tau, T)
    ker = np.exp((1 - 1j * s) * a_explicit(alpha, beta, z, tau, T))
    return complex(np.sum(w * vals * ker))


# ------------------------------------------------------------ kernels

def build_klambda(lam: float, spec: PaleyWienerSpec | None = None, n_t: int = 801,
                  s_tail: float = 400.0):
    """k_lambda with Harish-Chandra transform h_lambda = (h^0_lambda)^2.

    Computed by Plancherel inversion of h_lambda, which equals the radial group
    self-convolution of k^0_lambda.  Returns a RadialFunction with metadata.
    """
    spec = spec or PaleyWienerSpec()
    if lam < 10:
        raise ValueError("lambda >= 10 required")
    pred = 2 * spec.fourier_support
    tmax = 1.25 * pred
    t = np.linspace(0.0, tmax, n_t)
    vals = inverse_hc(lambda s: spec.h_lambda(s, lam), t, lam + s_tail)
    peak = np.max(np.abs(vals))
    above = np.nonzero(np.abs(vals) > 1e-6 * peak)[0]
    measured = float(t[above[-1]]) if above.size else 0.0
    if measured > 1.05 * pred:
        raise SupportOverflow(f"support {measured:.4f} exceeds prediction {pred:.4f} by > 5%")
    keep = t <= pred
    k = RadialFunction(t[keep], vals[keep], support_radius=pred,
                       meta={"lambda": lam, "c": spec.c, "exponent": spec.exponent,
                             "measured_support": measured})
    # renormalise against the transform at s = lambda
    target = spec.h_lambda(lam, lam)
    got = hc_transform(k, lam, radius=pred)
    scale = target / got
    k = RadialFunction(k.t, k.values * scale, support_radius=pred, meta=dict(k.meta, renorm=scale))
    return k


def envelope_constant(k: RadialFunction, lam: float, t_lo=None, t_hi=1.0, n=4000):
    """max |k(a(t))| / (lam^3 (1 + lam t)^{-3/2}) over [1/lam, t_hi]."""
    t = np.linspace(t_lo or 1 / lam, t_hi, n)
    return float(np.max(np.abs(k(t)) / (lam ** 3 * (1 + lam * t) ** -1.5)))


def _smooth_step(x):
    """0 for x <= 0, 1 for x >= 1, C-infinity in between."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1 / np.where(x > 0, x, 1)), 0.0)
        b = np.where(x < 1, np.exp(-1 / np.where(x < 1, 1 - x, 1)), 0.0)
    return a / (a + b)


def b0(t):
    """Even cutoff: 1 on [-1, 1], 0 outside [-2, 2]."""
    return _smooth_step(2 - np.abs(np.asarray(t, dtype=float)))


def cutoff_b(i: int, beta: float, eps0: float, t):
    """b0, b1(t) = b0(beta^{1/2 - eps0} t) and b2 = b0 - b1."""
    if i not in (0, 1, 2):
        raise ValueError("i must be 0, 1 or 2")
    if beta < 4 or not 0 < eps0 < 1 / 8:
        raise ValueError("need beta >= 4 and 0 < eps0 < 1/8")
    if i == 0:
        out = b0(t)
    else:
        b1 = b0(beta ** (0.5 - eps0) * np.asarray(t, dtype=float))
        out = b1 if i == 1 else b0(t) - b1
    return float(out) if np.ndim(out) == 0 else out


@lru_cache(maxsize=16)
def cached_klambda(lam: float, spec: PaleyWienerSpec | None = None) -> RadialFunction:
    return build_klambda(float(lam), spec or PaleyWienerSpec())


def k1_hat_from_kernel(s, k: RadialFunction, beta: float, eps0: float, n: int = 600):
    """Transform of b1 k at s (vectorised over s)."""
    support = min(k.support_radius, 2 * beta ** (-0.5 + eps0))
    f = RadialFunction(k.t, k.values * cutoff_b(1, beta, eps0, k.t), support_radius=support)
    return hc_transform(f, s, radius=support, n=n)


def k1_hat(s, lam: float, beta: float, eps0: float, spec: PaleyWienerSpec | None = None,
           n: int = 600):
    """Transform of b1 k_lambda at s, building (and caching) k_lambda."""
    return k1_hat_from_kernel(s, cached_klambda(float(lam), spec), beta, eps0, n)
