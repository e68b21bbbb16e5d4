"""Exact spherical Hecke algebra of GL(3) over a p-adic field with residue size q = p.

Double cosets K diag(p^a1, p^a2, p^a3) K are indexed by signatures a1 >= a2 >= a3.
Left cosets gK inside a double coset are represented by column Hermite normal
forms: upper triangular, diagonal p^e_i, entry (i, j) reduced mod p^e_i.
Products are classified by p-adic elementary divisors.  Everything is exact.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict

import numpy as np

from .errors import BudgetExceeded, EigenvaluePairInvalid, SingularInput

ALLOWED_Q = (2, 3, 5)
MAX_SPREAD = 4
PAIR_BUDGET = 10 ** 6


@dataclass(frozen=True, order=True)
class Signature:
    a1: int
    a2: int
    a3: int

    def __post_init__(self):
        for v in (self.a1, self.a2, self.a3):
            if int(v) != v:
                raise ValueError("signature entries must be integers")
        if not self.a1 >= self.a2 >= self.a3:
            raise ValueError(f"need a1 >= a2 >= a3, got {self.as_tuple()}")

    def as_tuple(self):
        return (self.a1, self.a2, self.a3)

    def shift(self, k: int) -> "Signature":
        return Signature(self.a1 + k, self.a2 + k, self.a3 + k)

    def normalized(self) -> "Signature":
        """Central shift with a3 = 0."""
        return self.shift(-self.a3)

    def inverse(self) -> "Signature":
        return Signature(-self.a3, -self.a2, -self.a1)

    @property
    def spread(self) -> int:
        return self.a1 - self.a3

    @property
    def trace(self) -> int:
        return self.a1 + self.a2 + self.a3

    def __str__(self):
        return f"({self.a1},{self.a2},{self.a3})"


def sig(*a) -> Signature:
    if len(a) == 1:
        a = tuple(a[0])
    return Signature(*a)


def _check_q(q):
    if q not in ALLOWED_Q:
        raise BudgetExceeded(f"q must be one of {ALLOWED_Q}")


# ------------------------------------------------------------ valuations

def vp(n, p) -> float:
    """p-adic valuation of a rational; inf for 0."""
    n = Fraction(n)
    if n == 0:
        return float("inf")
    v = 0
    num, den = n.numerator, n.denominator
    while num % p == 0:
        num //= p
        v += 1
    while den % p == 0:
        den //= p
        v -= 1
    return v


def _minors2(m):
    rows = itertools.combinations(range(3), 2)
    out = []
    for r in rows:
        for c in itertools.combinations(range(3), 2):
            out.append(m[r[0]][c[0]] * m[r[1]][c[1]] - m[r[0]][c[1]] * m[r[1]][c[0]])
    return out


def _det3(m):
    return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))


def smith_signature(m, p: int) -> Signature:
    """Valuations of the elementary divisors of a rational 3x3 matrix, descending."""
    m = [[Fraction(x) for x in row] for row in m]
    det = _det3(m)
    if det == 0:
        raise SingularInput("matrix is singular")
    d1 = min(vp(x, p) for row in m for x in row)
    d2 = min(vp(x, p) for x in _minors2(m))
    d3 = vp(det, p)
    e = sorted([d1, d2 - d1, d3 - d2], reverse=True)
    return Signature(*(int(x) for x in e))


def _smith_int(m, p, v_det):
    """Fast path for integer matrices with known det valuation."""
    d1 = min(_vint(x, p) for row in m for x in row)
    d2 = min(_vint(x, p) for x in _minors2(m))
    e = sorted([d1, d2 - d1, v_det - d2], reverse=True)
    return Signature(*e)


def _vint(n, p):
    if n == 0:
        return 10 ** 9
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def _matmul(a, b):
    return tuple(tuple(sum(a[i][k] * b[k][j] for k in range(3)) for j in range(3)) for i in range(3))


# ------------------------------------------------------------ coset tables

@dataclass(frozen=True)
class CosetTable:
    q: int
    signature: Signature
    reps: tuple

    def __len__(self):
        return len(self.reps)

    @property
    def degree(self) -> int:
        return len(self.reps)


def _hnf_block(p, e):
    """All column HNFs with diagonal exponents e as an int64 stack."""
    p1, p2 = p ** e[0], p ** e[1]
    b12, b13, b23 = np.meshgrid(np.arange(p1), np.arange(p1), np.arange(p2), indexing="ij")
    n = b12.size
    m = np.zeros((n, 3, 3), dtype=np.int64)
    m[:, 0, 0], m[:, 1, 1], m[:, 2, 2] = p1, p2, p ** e[2]
    m[:, 0, 1], m[:, 0, 2], m[:, 1, 2] = b12.ravel(), b13.ravel(), b23.ravel()
    return m


@lru_cache(maxsize=None)
def _int_reps(p, s: Signature):
    """Integer HNF representatives for a normalised signature (a3 = 0)."""
    n = s.trace
    out = []
    for e in itertools.product(range(s.a1 + 1), repeat=3):
        if sum(e) != n:
            continue
        block = _hnf_block(p, e)
        keep = [c == s for c in _classify(block, p, n)]
        out.extend(tuple(map(tuple, m)) for m in block[np.array(keep, dtype=bool)].tolist())
    return tuple(out)


def degree_formula(q: int, s) -> int:
    """q^<2rho, a> W(1/q) / W_a(1/q), the number of left cosets in K diag(q^a) K."""
    s = s if isinstance(s, Signature) else sig(s)
    a = s.as_tuple()

    def poincare(sizes, t):
        out = Fraction(1)
        for m in sizes:
            for k in range(1, m + 1):
                out *= sum(t ** j for j in range(k))
        return out

    blocks = [len(list(g)) for _, g in itertools.groupby(a)]
    t = Fraction(1, q)
    val = Fraction(q) ** (2 * (a[0] - a[2])) * poincare([3], t) / poincare(blocks, t)
    assert val.denominator == 1
    return int(val)


def coset_reps(q: int, s) -> CosetTable:
    """Left coset representatives of K diag(q^a) K."""
    _check_q(q)
    s = s if isinstance(s, Signature) else sig(s)
    if s.spread > MAX_SPREAD:
        raise BudgetExceeded(f"a1 - a3 = {s.spread} exceeds the desk bound {MAX_SPREAD}")
    base = _int_reps(q, s.normalized())
    scale = Fraction(q) ** s.a3
    reps = tuple(tuple(tuple(scale * x for x in row) for row in m) for m in base)
    return CosetTable(q, s, reps)


def degree(q: int, s) -> int:
    s = s if isinstance(s, Signature) else sig(s)
    return len(_int_reps(q, s.normalized()))


# ------------------------------------------------------------ algebra

@dataclass(frozen=True)
class HeckeElement:
    q: int
    terms: Dict[Signature, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for k, v in dict(self.terms).items():
            k = k if isinstance(k, Signature) else sig(k)
            v = _frac(v)
            if v != 0:
                clean[k] = clean.get(k, Fraction(0)) + v
        clean = {k: v for k, v in sorted(clean.items()) if v != 0}
        object.__setattr__(self, "terms", clean)

    @classmethod
    def basis(cls, q, *a):
        return cls(q, {sig(*a): Fraction(1)})

    def __add__(self, other):
        _same_q(self, other)
        t = dict(self.terms)
        for k, v in other.terms.items():
            t[k] = t.get(k, Fraction(0)) + v
        return HeckeElement(self.q, t)

    def __sub__(self, other):
        return self + other.scale(-1)

    def scale(self, c):
        c = _frac(c)
        return HeckeElement(self.q, {k: c * v for k, v in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, HeckeElement):
            return convolve(self, other)
        return self.scale(other)

    __rmul__ = scale

    def __eq__(self, other):
        return isinstance(other, HeckeElement) and self.q == other.q and self.terms == other.terms

    def __hash__(self):
        return hash((self.q, tuple(self.terms.items())))

    def coeff(self, *a) -> Fraction:
        return self.terms.get(sig(*a), Fraction(0))

    def to_json(self) -> dict:
        return {"q": self.q,
                "terms": [{"sig": list(k.as_tuple()), "num": v.numerator, "den": v.denominator}
                          for k, v in self.terms.items()]}

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, d) -> "HeckeElement":
        if isinstance(d, str):
            d = json.loads(d)
        return cls(int(d["q"]), {sig(t["sig"]): Fraction(t["num"], t["den"]) for t in d["terms"]})

    def __str__(self):
        if not self.terms:
            return "0"
        return " + ".join(f"{v}*Phi{k}" for k, v in self.terms.items())


def _frac(v) -> Fraction:
    if isinstance(v, float):
        return Fraction(repr(v))
    return Fraction(v)


def _same_q(a, b):
    if a.q != b.q:
        raise ValueError("Hecke elements over different residue fields")


def _vvec(a, p, cap):
    """Elementwise p-adic valuation of an int64 array, capped at cap."""
    v = np.zeros(a.shape, dtype=np.int64)
    pk = 1
    for _ in range(cap):
        pk *= p
        v += (a % pk == 0)
    return v


def _classify(prods, p, v_det):
    """Smith signatures of a stack of integer matrices with det valuation v_det."""
    mod = p ** (v_det + 1)
    if 2 * mod * mod >= 2 ** 62:
        return [_smith_int(tuple(map(tuple, m.tolist())), p, v_det) for m in prods]
    m = prods % mod
    d1 = _vvec(m.reshape(len(m), -1), p, v_det + 1).min(axis=1)
    mins = []
    for r in itertools.combinations(range(3), 2):
        for c in itertools.combinations(range(3), 2):
            mins.append(m[:, r[0], c[0]] * m[:, r[1], c[1]] - m[:, r[0], c[1]] * m[:, r[1], c[0]])
    d2 = _vvec(np.stack(mins, 1), p, v_det + 1).min(axis=1)
    e = np.sort(np.stack([d1, d2 - d1, v_det - d2], 1), axis=1)[:, ::-1]
    return [Signature(*map(int, row)) for row in e]


@lru_cache(maxsize=None)
def _basis_product(q: int, A: Signature, B: Signature):
    """Phi_A * Phi_B for normalised A, B as {Signature: Fraction}."""
    xs = np.array(_int_reps(q, A), dtype=np.int64)
    ys = np.array(_int_reps(q, B), dtype=np.int64)
    if len(xs) * len(ys) > PAIR_BUDGET:
        raise BudgetExceeded(f"{len(xs) * len(ys)} coset pairs exceed the budget")
    prods = np.einsum("aij,bjk->abik", xs, ys).reshape(-1, 3, 3)
    counts: Dict[Signature, int] = {}
    for c in _classify(prods, q, A.trace + B.trace):
        counts[c] = counts.get(c, 0) + 1
    # c_C = N_C / deg(C); the closed-form degree avoids enumerating large cosets
    return {c: Fraction(n, degree_formula(q, c)) for c, n in counts.items()}


def convolve(h1: HeckeElement, h2: HeckeElement) -> HeckeElement:
    """Exact convolution product in the spherical Hecke algebra."""
    _same_q(h1, h2)
    _check_q(h1.q)
    out: Dict[Signature, Fraction] = {}
    for A, ca in h1.terms.items():
        for B, cb in h2.terms.items():
            if A.spread > MAX_SPREAD or B.spread > MAX_SPREAD:
                raise BudgetExceeded("factor outside the desk bound")
            shift = A.a3 + B.a3
            for C, cc in _basis_product(h1.q, A.normalized(), B.normalized()).items():
                key = C.shift(shift)
                out[key] = out.get(key, Fraction(0)) + ca * cb * cc
    return HeckeElement(h1.q, out)


def adjoint(h: HeckeElement) -> HeckeElement:
    """f*(g) = conj(f(g^-1)); coefficients are rational hence real."""
    return HeckeElement(h.q, {k.inverse(): v for k, v in h.terms.items()})


def amplifier_T(q: int, a_eig, b_eig) -> HeckeElement:
    """Phi(1,0,0)/(a q) if |a| >= 1/2, else Phi(2,1,0)/(b q^2)."""
    a, b = _frac(a_eig), _frac(b_eig)
    if abs(a) >= Fraction(1, 2):
        return HeckeElement(q, {sig(1, 0, 0): 1 / (a * q)})
    if abs(b) >= Fraction(1, 2):
        return HeckeElement(q, {sig(2, 1, 0): 1 / (b * q * q)})
    raise EigenvaluePairInvalid("|a| and |b| cannot both be below 1/2")


FAMILIES = (
    ((-1, 2), 2),
    ((-2, 2), 0),
    ((-2, 1), -2),
)


def support_family(s: Signature):
    """Index of the first (range, trace) family containing s, or None."""
    for i, ((lo, hi), tr) in enumerate(FAMILIES):
        if all(lo <= x <= hi for x in s.as_tuple()) and s.trace == tr:
            return i
    return None


def tt_star_expansion(q: int, a_eig, b_eig):
    """T T* for the amplifier, with a per-term bound report."""
    T = amplifier_T(q, a_eig, b_eig)
    TT = convolve(T, adjoint(T))
    rows = []
    for s, c in TT.terms.items():
        rows.append({"sig": list(s.as_tuple()), "coeff": str(c),
                     "scaled": abs(c) * Fraction(q) ** s.spread,
                     "family": support_family(s)})
    report = {
        "q": q,
        "branch": "Phi(1,0,0)" if sig(1, 0, 0) in T.terms else "Phi(2,1,0)",
        "terms": rows,
        "max_scaled": max((r["scaled"] for r in rows), default=Fraction(0)),
        "support_ok": all(r["family"] is not None for r in rows),
    }
    return TT, report


def sublattice_count(p: int, n: int) -> int:
    """Brute-force count of lattices pZ^3 <= L <= Z^3 of index p^n (subspaces of F_p^3)."""
    vecs = list(itertools.product(range(p), repeat=3))
    dim = 3 - n
    spans = set()
    for basis in itertools.product(vecs, repeat=dim):
        span = {(0, 0, 0)}
        for v in basis:
            span |= {tuple((a + c * b) % p for a, b in zip(w, v)) for w in span for c in range(p)}
        if len(span) == p ** dim:
            spans.add(frozenset(span))
    return len(spans)
