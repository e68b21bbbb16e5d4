"""Structure theory of G0 = U(2,1).

Conventions: the Hermitian form is J (antidiagonal ones), H = diag(1/2, 0, -1/2),
a(t) = exp(tH), n(z, tau) is the Heisenberg unipotent and K0 is the stabiliser
of o = (-1, 0) in the Siegel domain.  Every g factors as

    g = n(z, tau) a(t) k,    k = m k(alpha, beta),

with m = diag(e^{i th}, e^{i ps}, e^{i th}) in M and k(alpha, beta) the image of
[[alpha, beta], [-conj(beta), conj(alpha)]] in SU(2).  ``A(g) = t``.

Functions prefixed with ``batch_`` work on stacks of matrices.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import BoundaryDegeneracy, DomainViolation, NormViolation
from .lie_core import as_mat3, frobenius

SQ2 = np.sqrt(2.0)

J = np.array([[0, 0, 1], [0, 1, 0], [1, 0, 0]], dtype=complex)
J1 = np.diag([1, 1, -1]).astype(complex)
H = np.diag([0.5, 0.0, -0.5]).astype(complex)
C = np.array([[1, 0, 1], [0, SQ2, 0], [1, 0, -1]], dtype=complex) / SQ2
W0 = np.array([[0, 0, -1], [0, -1, 0], [-1, 0, 0]], dtype=complex)

# basis of k/m matching exp(r . X) = k(cos r + i sin(r) r3 / r, sin(r)(i r1 - r2) / r)
X_TILDE = (
    np.array([[0, 1j, 0], [1j, 0, 1j], [0, 1j, 0]]) / SQ2,
    np.array([[0, -1, 0], [1, 0, 1], [0, -1, 0]], dtype=complex) / SQ2,
    np.array([[1j, 0, 1j], [0, -2j, 0], [1j, 0, 1j]]) / 2,
)

O_LIFT = np.array([-1.0, 0.0, 1.0], dtype=complex)
BOUNDARY_EPS = 1e-13
XI_DELTA = 0.15


class Form(str, Enum):
    J_antidiag = "J_antidiag"
    J1_diag = "J1_diag"


_FORM_MAT = {Form.J_antidiag: J, Form.J1_diag: J1}


@dataclass(frozen=True, eq=False)
class GroupElement:
    mat: np.ndarray
    form: Form = Form.J_antidiag

    def __post_init__(self):
        m = as_mat3(self.mat, "GroupElement.mat").copy()
        if m.ndim != 2:
            raise ValueError("GroupElement holds a single 3x3 matrix")
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)
        object.__setattr__(self, "form", Form(self.form))

    def residual(self) -> float:
        """||g* J g - J|| for the tagged form."""
        Jf = _FORM_MAT[self.form]
        return float(frobenius(self.mat.conj().T @ Jf @ self.mat - Jf))

    def compact_residual(self) -> float:
        return float(frobenius(self.mat.conj().T @ self.mat - np.eye(3)))

    def __matmul__(self, other):
        if isinstance(other, GroupElement):
            if other.form != self.form:
                raise ValueError("cannot multiply elements tagged with different forms")
            return GroupElement(self.mat @ other.mat, self.form)
        return NotImplemented

    def inv(self):
        Jf = _FORM_MAT[self.form]
        # g^-1 = J g* J since J^2 = I
        return GroupElement(Jf @ self.mat.conj().T @ Jf, self.form)

    def __repr__(self):
        return f"GroupElement(form={self.form.value}, mat={np.array2string(self.mat, precision=4)})"


@dataclass(frozen=True)
class KCoset:
    alpha: complex
    beta: complex

    def __post_init__(self):
        a, b = complex(self.alpha), complex(self.beta)
        if not (np.isfinite(a) and np.isfinite(b)):
            raise NormViolation("non-finite KCoset coordinates")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    @property
    def norm_defect(self) -> float:
        return abs(abs(self.alpha) ** 2 + abs(self.beta) ** 2 - 1.0)

    def su2(self) -> np.ndarray:
        a, b = self.alpha, self.beta
        return np.array([[a, b], [-np.conj(b), np.conj(a)]])

    @classmethod
    def from_su2(cls, u):
        return cls(u[0, 0], u[0, 1])

    def compose(self, other: "KCoset") -> "KCoset":
        return KCoset.from_su2(self.su2() @ other.su2())


@dataclass(frozen=True)
class IwasawaCoords:
    z: complex
    tau: float
    t: float
    k: GroupElement

    def reconstruct(self) -> GroupElement:
        return GroupElement(batch_n(self.z, self.tau) @ batch_a(self.t) @ self.k.mat)


# ---------------------------------------------------------------- builders

def batch_a(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape + (3, 3), dtype=complex)
    out[..., 0, 0] = np.exp(t / 2)
    out[..., 1, 1] = 1.0
    out[..., 2, 2] = np.exp(-t / 2)
    return out


def batch_n(z, tau):
    z, tau = np.broadcast_arrays(np.asarray(z, dtype=complex), np.asarray(tau, dtype=float))
    out = np.zeros(z.shape + (3, 3), dtype=complex)
    out[..., 0, 0] = out[..., 1, 1] = out[..., 2, 2] = 1.0
    out[..., 0, 1] = SQ2 * z
    out[..., 0, 2] = 1j * tau - np.abs(z) ** 2
    out[..., 1, 2] = -SQ2 * np.conj(z)
    return out


def batch_k(alpha, beta):
    a, b = np.broadcast_arrays(np.asarray(alpha, dtype=complex), np.asarray(beta, dtype=complex))
    out = np.empty(a.shape + (3, 3), dtype=complex)
    bc = np.conj(b)
    out[..., 0, 0] = out[..., 2, 2] = (a + 1) / 2
    out[..., 0, 2] = out[..., 2, 0] = (a - 1) / 2
    out[..., 0, 1] = out[..., 2, 1] = b / SQ2
    out[..., 1, 0] = out[..., 1, 2] = -bc / SQ2
    out[..., 1, 1] = np.conj(a)
    return out


def batch_m(theta, psi):
    th, ps = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(psi, dtype=float))
    out = np.zeros(th.shape + (3, 3), dtype=complex)
    out[..., 0, 0] = out[..., 2, 2] = np.exp(1j * th)
    out[..., 1, 1] = np.exp(1j * ps)
    return out


def make_a(t: float) -> GroupElement:
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    return GroupElement(batch_a(t))


def make_n(z: complex, tau: float) -> GroupElement:
    if not (np.isfinite(z) and np.isfinite(tau)):
        raise ValueError("z, tau must be finite")
    return GroupElement(batch_n(z, tau))


def make_m(theta: float, psi: float) -> GroupElement:
    return GroupElement(batch_m(theta, psi))


def make_k(c, beta=None) -> GroupElement:
    """k(alpha, beta) in K0; accepts a KCoset or (alpha, beta)."""
    if beta is not None:
        c = KCoset(c, beta)
    if c.norm_defect > 1e-8:
        raise NormViolation(f"|alpha|^2 + |beta|^2 - 1 = {c.norm_defect:.3e}")
    return GroupElement(batch_k(c.alpha, c.beta))


def cayley(g: GroupElement) -> GroupElement:
    """C g C with the form tag flipped (C^-1 = C)."""
    other = Form.J1_diag if g.form is Form.J_antidiag else Form.J_antidiag
    return GroupElement(C @ g.mat @ C, other)


def su2_exp(r):
    """(alpha, beta) with exp(r1 X1 + r2 X2 + r3 X3) = k(alpha, beta)."""
    r = np.asarray(r, dtype=float)
    rn = np.sqrt(np.sum(r ** 2, axis=-1))
    s = np.sinc(rn / np.pi)
    alpha = np.cos(rn) + 1j * s * r[..., 2]
    beta = s * (1j * r[..., 0] - r[..., 1])
    return alpha, beta


def random_su2(rng, size=None):
    """Haar-random (alpha, beta) on the unit 3-sphere."""
    shape = (4,) if size is None else (size, 4)
    v = rng.standard_normal(shape)
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    return v[..., 0] + 1j * v[..., 1], v[..., 2] + 1j * v[..., 3]


def random_k0(rng, size=None):
    """Haar-random matrices of K0 = M k(SU(2))."""
    alpha, beta = random_su2(rng, size)
    shape = () if size is None else (size,)
    th, ps = rng.uniform(0, 2 * np.pi, (2,) + shape)
    return batch_m(th, ps) @ batch_k(alpha, beta)


# ---------------------------------------------------------- decompositions

def batch_iwasawa(g):
    """(z, tau, t, k) for a stack of matrices, read off from g . o."""
    g = as_mat3(g)
    w = g @ O_LIFT
    if np.any(np.abs(w[..., 2]) < BOUNDARY_EPS):
        raise BoundaryDegeneracy("third homogeneous coordinate of g.o vanishes")
    z1 = w[..., 0] / w[..., 2]
    z2 = w[..., 1] / w[..., 2]
    z = -np.conj(z2) / SQ2
    tau = z1.imag
    t = np.log(-z1.real - np.abs(z2) ** 2 / 2)
    k = batch_a(-t) @ batch_n(-z, -tau) @ g
    return z, tau, t, k


def iwasawa(g: GroupElement) -> IwasawaCoords:
    z, tau, t, k = batch_iwasawa(g.mat)
    return IwasawaCoords(complex(z), float(tau), float(t), GroupElement(k))


def a_proj(g) -> float:
    """A(g), the log of the A-component in g = n a k."""
    m = g.mat if isinstance(g, GroupElement) else as_mat3(g)
    w = m @ O_LIFT
    if np.any(np.abs(w[..., 2]) < BOUNDARY_EPS):
        raise BoundaryDegeneracy("third homogeneous coordinate of g.o vanishes")
    z1 = w[..., 0] / w[..., 2]
    z2 = w[..., 1] / w[..., 2]
    t = np.log(-z1.real - np.abs(z2) ** 2 / 2)
    return float(t) if np.ndim(t) == 0 else t


def kappa(g: GroupElement) -> GroupElement:
    return iwasawa(g).k


def phi_action(g: GroupElement, k: GroupElement) -> GroupElement:
    """Phi_g(k) = kappa(k g); a right action: Phi_{gh} = Phi_h o Phi_g."""
    return kappa(k @ g)


def batch_split_k(k):
    """k = m(theta, psi) k(alpha, beta); the factorisation is unique."""
    k = np.asarray(k, dtype=complex)
    e_th = k[..., 0, 0] - k[..., 0, 2]
    e_th = e_th / np.abs(e_th)
    alpha = np.conj(e_th) * (k[..., 0, 0] + k[..., 0, 2])
    beta = SQ2 * np.conj(e_th) * k[..., 0, 1]
    # row two of m k(alpha, beta) is e^{i psi} (-conj(beta)/sqrt2, conj(alpha), -conj(beta)/sqrt2)
    row = k[..., 1, :]
    ref = np.stack([-np.conj(beta) / SQ2, np.conj(alpha), -np.conj(beta) / SQ2], -1)
    e_ps = np.sum(row * np.conj(ref), axis=-1)
    e_ps = e_ps / np.abs(e_ps)
    return np.angle(e_th), np.angle(e_ps), alpha, beta


def batch_nak(g):
    """(z, tau, t0, theta, psi, alpha, beta) with g = n a(t0) m k(alpha, beta)."""
    z, tau, t, k = batch_iwasawa(g)
    th, ps, alpha, beta = batch_split_k(k)
    return z, tau, t, th, ps, alpha, beta


def k_coset(k: GroupElement) -> KCoset:
    _, _, alpha, beta = batch_split_k(k.mat)
    return KCoset(complex(alpha), complex(beta))


def a_explicit(alpha, beta, z, tau, t, t0=0.0):
    """A(g n(z, tau) a(t)) for g = n a(t0) m k(alpha, beta), in closed form."""
    alpha = np.asarray(alpha, dtype=complex)
    beta = np.asarray(beta, dtype=complex)
    z = np.asarray(z, dtype=complex)
    w = ((alpha - 1) / 2) * (-np.exp(t) - np.abs(z) ** 2 + 1j * np.asarray(tau)) \
        - beta * np.conj(z) + (alpha + 1) / 2
    return t0 + np.asarray(t) - np.log(np.abs(w) ** 2)


def a_derivatives(g: GroupElement):
    """(dA/dt, dA/dx, dA/dy, dA/dtau) of A(g x) at x = e along a(t), n(x), n(iy), n(0, tau).

    Equal to (Re alpha, 2 Re beta, 2 Im beta, Im alpha) for g = n a m k(alpha, beta).
    """
    m = g.mat if isinstance(g, GroupElement) else g
    *_, alpha, beta = batch_nak(m)
    out = (np.real(alpha), 2 * np.real(beta), 2 * np.imag(beta), np.imag(alpha))
    if np.ndim(alpha) == 0:
        return tuple(float(v) for v in out)
    return out


def one_minus_dadt(r, X, z, tau, t):
    """1 - dA/dt of exp(rX) n(z, tau) a(t), cancellation-free in r."""
    X = np.asarray(X, dtype=float)
    r = np.asarray(r, dtype=float)
    s = np.sinc(r / np.pi)
    am1 = -2 * np.sin(r / 2) ** 2 + 1j * s * r * X[..., 2]
    beta = s * r * (1j * X[..., 0] - X[..., 1])
    z = np.asarray(z, dtype=complex)
    p = -np.exp(t) - np.abs(z) ** 2 + 1j * np.asarray(tau)
    w = (am1 / 2) * (p + 1) - beta * np.conj(z) + 1
    return -np.real(am1 * np.exp(t) / w)


def uniformization_xi(r, X, z, tau, t, delta: float = XI_DELTA):
    """xi = (1 - dA/dt(exp(rX) n(z, tau) a(t))) / r^2 for a unit direction X in k/m."""
    r = np.asarray(r, dtype=float)
    if np.any(np.abs(r) > delta) or np.any(r == 0):
        raise DomainViolation(f"need 0 < |r| <= {delta}")
    X = np.asarray(X, dtype=float)
    X = X / np.linalg.norm(X, axis=-1, keepdims=True)
    return one_minus_dadt(r, X, z, tau, t) / r ** 2


def grad_K_A(rvec, z, tau, t):
    """Gradient in (r1, r2, r3) of A(exp(sum r_i X_i) n(z, tau) a(t))."""
    r = np.asarray(rvec, dtype=float)
    rn = float(np.linalg.norm(r))
    f1 = np.sinc(rn / np.pi)
    if rn < 1e-4:
        f2 = -1 / 3 + rn ** 2 / 30
    else:
        f2 = (rn * np.cos(rn) - np.sin(rn)) / rn ** 3
    alpha = np.cos(rn) + 1j * f1 * r[2]
    beta = f1 * (1j * r[0] - r[1])
    p = -np.exp(t) - abs(z) ** 2 + 1j * tau
    w = ((alpha - 1) / 2) * p - beta * np.conj(z) + (alpha + 1) / 2
    out = np.empty(3)
    for i in range(3):
        da = -f1 * r[i] + 1j * f2 * r[i] * r[2] + (1j * f1 if i == 2 else 0)
        db = f2 * r[i] * (1j * r[0] - r[1]) + f1 * (1j if i == 0 else (-1 if i == 1 else 0))
        dw = da * (p + 1) / 2 - db * np.conj(z)
        out[i] = -2 * np.real(dw / w)
    return out
