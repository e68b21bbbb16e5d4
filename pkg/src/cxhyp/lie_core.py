"""Dense 3x3 complex linear algebra: exp/log, norms and chart distances.

Matrices are plain ``numpy`` arrays of shape (3, 3) with complex dtype.
Most helpers also accept stacks of shape (..., 3, 3).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg
from scipy.optimize import least_squares

from .errors import BranchCut, NonFiniteInput, SingularInput

ComplexMat3 = np.ndarray

I3 = np.eye(3, dtype=complex)


@dataclass(frozen=True)
class MatrixTolerance:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")

    def close(self, a, b) -> bool:
        a, b = np.asarray(a), np.asarray(b)
        return bool(np.all(np.abs(a - b) <= self.abs_tol + self.rel_tol * np.abs(b)))


DEFAULT_TOL = MatrixTolerance()


class SubgroupTag(str, Enum):
    M = "M"
    MA = "MA"
    T0 = "T0"


def _raw(a):
    return a.mat if hasattr(a, "mat") else a


def as_mat3(a, name="matrix") -> np.ndarray:
    """Validate and convert to a complex array with trailing shape (3, 3)."""
    m = np.asarray(_raw(a), dtype=complex)
    if m.shape[-2:] != (3, 3):
        raise ValueError(f"{name} must have shape (..., 3, 3), got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteInput(f"{name} has NaN or Inf entries")
    return m


def mat_mul(a, b) -> np.ndarray:
    return as_mat3(a) @ as_mat3(b)


def frobenius(a) -> float:
    m = as_mat3(a)
    return np.sqrt(np.sum(np.abs(m) ** 2, axis=(-2, -1)))


def _strictly_upper(x) -> bool:
    return not np.any(np.tril(x))


def mat_exp(x) -> np.ndarray:
    """Matrix exponential.

    Strictly upper-triangular input uses the exact polynomial I + x + x^2/2.
    Everything else goes through scipy's scaling-and-squaring Pade(13) expm.
    """
    x = as_mat3(x)
    if x.ndim == 2 and _strictly_upper(x):
        return I3 + x + (x @ x) / 2
    return scipy.linalg.expm(x)


def _check_log_chart(m):
    scale = max(np.abs(m).max(), 1.0)
    ev = np.linalg.eigvals(m)
    if np.min(np.abs(ev)) <= 1e-14 * scale or abs(np.linalg.det(m)) <= 1e-300:
        raise SingularInput("matrix is not invertible")
    on_cut = (ev.real < 0) & (np.abs(ev.imag) <= 1e-12 * np.abs(ev))
    if np.any(on_cut):
        raise BranchCut("eigenvalue on the closed negative real axis")


def mat_log(m) -> np.ndarray:
    """Principal matrix logarithm."""
    m = as_mat3(m)
    if m.ndim != 2:
        return np.stack([mat_log(x) for x in m.reshape(-1, 3, 3)]).reshape(m.shape)
    _check_log_chart(m)
    u = m - I3
    if _strictly_upper(u):
        return u - (u @ u) / 2
    out = scipy.linalg.logm(m)
    if isinstance(out, tuple):
        out = out[0]
    return np.asarray(out, dtype=complex)


def _batch_log(m):
    """Eigen-decomposition log for stacks; inf where the chart fails.

    Only used to seed searches, so defective matrices are tolerated.
    """
    w, v = np.linalg.eig(m)
    bad = np.any((w.real < 0) & (np.abs(w.imag) <= 1e-12 * np.abs(w)), axis=-1)
    bad |= np.any(np.abs(w) < 1e-14, axis=-1)
    w = np.where(np.abs(w) < 1e-14, 1.0, w)
    with np.errstate(all="ignore"):
        vi = np.linalg.inv(v)
        out = (v * np.log(w)[..., None, :]) @ vi
    bad |= ~np.all(np.isfinite(out), axis=(-2, -1))
    return out, bad


def dist(g, h) -> float:
    """Chart distance ||log(g^-1 h)||_F (left invariant by construction)."""
    g, h = as_mat3(g), as_mat3(h)
    return float(frobenius(mat_log(np.linalg.solve(g, h))))


def subgroup_element(tag, params) -> np.ndarray:
    """Parametrized elements of M, MA or the diagonal group T0."""
    tag = SubgroupTag(tag)
    p = np.asarray(params, dtype=float)
    if tag is SubgroupTag.M:
        th, ps = p[..., 0], p[..., 1]
        d = np.stack([1j * th, 1j * ps, 1j * th], axis=-1)
    elif tag is SubgroupTag.MA:
        th, ps, t = p[..., 0], p[..., 1], p[..., 2]
        d = np.stack([1j * th + t / 2, 1j * ps, 1j * th - t / 2], axis=-1)
    else:
        d = p[..., 0:3] + 1j * p[..., 3:6]
    e = np.exp(d)
    out = np.zeros(p.shape[:-1] + (3, 3), dtype=complex)
    for i in range(3):
        out[..., i, i] = e[..., i]
    return out


_NPARAM = {SubgroupTag.M: 2, SubgroupTag.MA: 3, SubgroupTag.T0: 6}


def _coarse_grid(tag, g, n=16):
    ang = np.arange(n) * (2 * np.pi / n)
    if tag is SubgroupTag.M:
        return np.stack(np.meshgrid(ang, ang, indexing="ij"), -1).reshape(-1, 2)
    ts = np.linspace(-3, 3, n)
    grid = np.stack(np.meshgrid(ang, ang, ts, indexing="ij"), -1).reshape(-1, 3)
    if tag is SubgroupTag.MA:
        return grid
    # T0 = center * MA; the center's modulus is fixed from |det g|
    r = np.log(abs(np.linalg.det(g))) / 3
    th, ps, t = grid.T
    return np.stack([r + t / 2, np.full_like(t, r), r - t / 2, th, ps, th], -1)


def dist_to_subgroup(g, target, n_grid: int = 16, max_iter: int = 60,
                     tol: float = 1e-8) -> float:
    """min over the subgroup S of dist(g, s): coarse grid then local descent."""
    tag = SubgroupTag(target)
    g = as_mat3(g)
    ginv = np.linalg.inv(g)
    grid = _coarse_grid(tag, g, n_grid)
    logs, bad = _batch_log(ginv @ subgroup_element(tag, grid))
    vals = np.sqrt(np.sum(np.abs(logs) ** 2, axis=(-2, -1)))
    vals[bad] = np.inf
    if not np.any(np.isfinite(vals)):
        raise BranchCut("no chart point found on the coarse grid")
    order = np.argsort(vals)[:3]

    def resid(p):
        try:
            lg = mat_log(ginv @ subgroup_element(tag, p))
        except (BranchCut, SingularInput):
            return np.full(18, 1e3)
        return np.concatenate([lg.real.ravel(), lg.imag.ravel()])

    best = np.inf
    for i in order:
        if not np.isfinite(vals[i]):
            continue
        sol = least_squares(resid, grid[i], method="lm", xtol=1e-15, ftol=1e-15,
                            gtol=1e-15, max_nfev=max_iter * (_NPARAM[tag] + 1))
        best = min(best, float(np.linalg.norm(sol.fun)), float(vals[i]))
        if best <= tol:
            break
    return best
