"""Siegel domain model of the complex hyperbolic plane.

Points are (z1, z2) with 2 Re z1 + |z2|^2 < 0, lifted to (z1, z2, 1); the origin
is o = (-1, 0).  Iwasawa coordinates: n(z, tau) a(t) . o = (-e^t - |z|^2 + i tau,
-sqrt2 conj(z)).  The Cartan radius of n(z, tau) a(t) is

    cosh A(z, tau, t) = cosh t + e^{-t} (|z|^4 + 2|z|^2 + tau^2) / 2 + |z|^2.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import BoundaryDegeneracy, ConePoint
from .group_u21 import BOUNDARY_EPS, SQ2, GroupElement, batch_a, batch_n

CONE_EPS = 1e-8


@dataclass(frozen=True)
class SiegelPoint:
    z1: complex
    z2: complex

    def __post_init__(self):
        object.__setattr__(self, "z1", complex(self.z1))
        object.__setattr__(self, "z2", complex(self.z2))
        if not 2 * self.z1.real + abs(self.z2) ** 2 < 0:
            raise ValueError("point is not in the Siegel domain")

    def lift(self) -> np.ndarray:
        return np.array([self.z1, self.z2, 1.0], dtype=complex)


ORIGIN = SiegelPoint(-1.0, 0.0)


@dataclass(frozen=True)
class TubeSpec:
    center: GroupElement
    lam: float

    def __post_init__(self):
        if not self.lam >= 1:
            raise ValueError("lambda must be >= 1")


def _herm(z, w):
    """<z, w> = z1 conj(w3) + z2 conj(w2) + z3 conj(w1)."""
    return z[..., 0] * np.conj(w[..., 2]) + z[..., 1] * np.conj(w[..., 1]) \
        + z[..., 2] * np.conj(w[..., 0])


def batch_act(g, z1, z2):
    """Projective action of matrices g on lifted points; returns (z1', z2')."""
    v = np.stack(np.broadcast_arrays(np.asarray(z1, dtype=complex),
                                     np.asarray(z2, dtype=complex),
                                     np.ones_like(np.asarray(z1), dtype=complex)), -1)
    w = np.einsum("...ij,...j->...i", g, v)
    if np.any(np.abs(w[..., 2]) < BOUNDARY_EPS):
        raise BoundaryDegeneracy("third homogeneous coordinate vanishes")
    return w[..., 0] / w[..., 2], w[..., 1] / w[..., 2]


def act(g: GroupElement, p: SiegelPoint) -> SiegelPoint:
    z1, z2 = batch_act(g.mat, p.z1, p.z2)
    return SiegelPoint(complex(z1), complex(z2))


def batch_bergman(p1, p2, q1, q2):
    lp = np.stack(np.broadcast_arrays(np.asarray(p1, complex), np.asarray(p2, complex),
                                      np.ones_like(np.asarray(p1), dtype=complex)), -1)
    lq = np.stack(np.broadcast_arrays(np.asarray(q1, complex), np.asarray(q2, complex),
                                      np.ones_like(np.asarray(q1), dtype=complex)), -1)
    num = np.abs(_herm(lp, lq)) ** 2
    den = np.real(_herm(lp, lp)) * np.real(_herm(lq, lq))
    c2 = np.maximum(num / den, 1.0)
    # d = 2 arccosh(sqrt(c2)) written through sinh^2(d/2) = c2 - 1
    return 2 * np.arcsinh(np.sqrt(c2 - 1.0))


def bergman_dist(p: SiegelPoint, q: SiegelPoint) -> float:
    return float(batch_bergman(p.z1, p.z2, q.z1, q.z2))


def batch_cartan_radius(g):
    z1, z2 = batch_act(g, -1.0, 0.0)
    return batch_bergman(-1.0, 0.0, z1, z2)


def cartan_radius(g: GroupElement) -> float:
    return float(batch_cartan_radius(g.mat))


def _cosh_minus_one(z, tau, t):
    r2 = np.abs(z) ** 2
    return 2 * np.sinh(np.asarray(t) / 2) ** 2 + 0.5 * np.exp(-np.asarray(t)) * (r2 ** 2 + 2 * r2 + np.asarray(tau) ** 2) + r2


def dist_A(z, tau, t):
    """Cartan radius of n(z, tau) a(t) from the closed form."""
    u = _cosh_minus_one(z, tau, t)
    out = 2 * np.arcsinh(np.sqrt(u / 2))
    return float(out) if np.ndim(out) == 0 else out


def _acosh_derivs(x, xm1):
    """Derivatives 1..4 of arccosh at x, with x - 1 supplied separately."""
    d = xm1 * (x + 1)  # x^2 - 1
    s = np.sqrt(d)
    g1 = 1 / s
    g2 = -x / (d * s)
    g3 = (2 * x ** 2 + 1) / (d ** 2 * s)
    g4 = -(6 * x ** 3 + 9 * x) / (d ** 3 * s)
    return g1, g2, g3, g4


def dist_A_dt(z, tau, t, order: int = 1):
    """d^n/dt^n of A(z, tau, t) for n = 1..4 via Faa di Bruno on arccosh(F(t))."""
    if order not in (1, 2, 3, 4):
        raise ValueError("order must be in 1..4")
    z = np.asarray(z, dtype=complex)
    tau = np.asarray(tau, dtype=float)
    t = np.asarray(t, dtype=float)
    r2 = np.abs(z) ** 2
    q = r2 ** 2 + 2 * r2 + tau ** 2
    xm1 = _cosh_minus_one(z, tau, t)
    if np.any(2 * np.arcsinh(np.sqrt(xm1 / 2)) <= CONE_EPS):
        raise ConePoint("distance function is not smooth at the cone point")
    x = 1 + xm1
    f1 = np.sinh(t) - 0.5 * np.exp(-t) * q
    f2 = np.cosh(t) + 0.5 * np.exp(-t) * q
    f3, f4 = f1, f2
    g1, g2, g3, g4 = _acosh_derivs(x, xm1)
    if order == 1:
        out = g1 * f1
    elif order == 2:
        out = g2 * f1 ** 2 + g1 * f2
    elif order == 3:
        out = g3 * f1 ** 3 + 3 * g2 * f1 * f2 + g1 * f3
    else:
        out = g4 * f1 ** 4 + 6 * g3 * f1 ** 2 * f2 + g2 * (3 * f2 ** 2 + 4 * f1 * f3) + g1 * f4
    return float(out) if np.ndim(out) == 0 else out


def relative_coords(z1, tau1, t1, z2, tau2, t2):
    """(z, tau) with (n(z1,tau1) a(t1))^-1 n(z2,tau2) a(t2) = n(z, tau) a(t2 - t1)."""
    z1 = np.asarray(z1, dtype=complex)
    z2 = np.asarray(z2, dtype=complex)
    z = np.exp(-np.asarray(t1) / 2) * (z2 - z1)
    tau = np.exp(-np.asarray(t1)) * (np.asarray(tau2) - tau1 + 2 * np.imag(z1 * np.conj(z2)))
    return z, tau


def iwasawa_coords_of_point(z1, z2):
    """(z, tau, t) with n(z, tau) a(t) . o = (z1, z2)."""
    z1 = np.asarray(z1, dtype=complex)
    z2 = np.asarray(z2, dtype=complex)
    return -np.conj(z2) / SQ2, z1.imag, np.log(-z1.real - np.abs(z2) ** 2 / 2)


def haar_weight(t):
    return 4 * np.exp(-2 * np.asarray(t, dtype=float))


def iwasawa_integral(f, R=6.0, n=64):
    """Integral of a K0-invariant profile f(A) against 4 e^{-2t} dz dtau dt.

    f must be negligible beyond radius R.  For each t the |z|^2 range and then
    the tau range are cut where cosh A reaches cosh R; Gauss-Legendre throughout.
    """
    xg, wg = np.polynomial.legendre.leggauss(n)
    ch = np.cosh(R)
    t = R * xg
    wt = R * wg
    # |z|^2 = u <= umax(t) from e^{-t} u^2 / 2 + (1 + e^{-t}) u + cosh t - cosh R = 0
    a2 = 0.5 * np.exp(-t)
    b1 = 1 + np.exp(-t)
    c0 = np.cosh(t) - ch
    umax = (-b1 + np.sqrt(b1 ** 2 - 4 * a2 * c0)) / (2 * a2)
    u = umax[:, None] * (xg[None, :] + 1) / 2
    wu = umax[:, None] * wg[None, :] / 2
    slack = -(a2[:, None] * u ** 2 + b1[:, None] * u + c0[:, None])
    taumax = np.sqrt(np.maximum(2 * np.exp(t)[:, None] * slack, 0))
    tau = taumax[..., None] * xg
    wtau = taumax[..., None] * wg
    vals = f(dist_A(np.sqrt(u)[..., None], tau, t[:, None, None]))
    inner = np.sum(wtau * vals, axis=-1)
    # dz = pi d(|z|^2) for radial integrands
    return float(np.sum(wt * haar_weight(t) * np.sum(wu * np.pi * inner, axis=-1)))


def polar_integral(f, R=6.0, n=256, c=None):
    x, w = np.polynomial.legendre.leggauss(n)
    r = R * (x + 1) / 2
    w = R * w / 2
    c = polar_constant() if c is None else c
    return float(c * np.sum(w * f(r) * np.sinh(r / 2) ** 2 * np.sinh(r)))


@lru_cache(maxsize=None)
def polar_constant() -> float:
    """c in dVol = c sinh^2(t/2) sinh(t) dt dk, calibrated against Iwasawa quadrature."""
    def f(a):
        return np.exp(-a ** 2)
    return iwasawa_integral(f, 5.5, 160) / polar_integral(f, 5.5, c=1.0)


def polar_density(t):
    t = np.asarray(t, dtype=float)
    out = polar_constant() * np.sinh(t / 2) ** 2 * np.sinh(t)
    return float(out) if out.ndim == 0 else out


def in_cylinder(z, tau, lam) -> bool:
    r = lam ** -0.5
    return bool(abs(z) < r and abs(tau) < r)


def in_tube(p: SiegelPoint, spec: TubeSpec) -> bool:
    q = act(spec.center.inv(), p)
    z, tau, t = iwasawa_coords_of_point(q.z1, q.z2)
    r = spec.lam ** -0.5
    return bool(abs(z) <= r and abs(tau) <= r and abs(t) <= 0.5)
