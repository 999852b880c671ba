"""Lattice sums: holomorphic and completed indefinite theta series, Siegel theta, shadows.

Lattice points of a coset ``mu + L`` are carried as integer vectors
``Y = d x`` (``d`` the common denominator of ``mu``), so every sign condition
and every exponent Q(x) is exact. Analytic parts (error functions,
exponentials) are evaluated in doubles in the log-weighted form of
``generf.GeneralizedErf.deviation``.

Truncation of the non-holomorphic sums is empirical: points are enumerated
in majorant shells of doubling radius around a reference negative plane,
until the newest shell's absolute contribution drops below ``tol``.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .chains import (
    CubicalCollection,
    SimplicialCollection,
    b_of_s,
    certify,
    dual_basis,
    face_cubical,
    phi_simplicial_from_signs,
)
from .generf import (
    DEFAULT_EVALUATOR,
    ErrorFunctionEvaluator,
    RecursiveEvaluator,
    cubical_node,
    simplicial_node,
)
from .quadspace import (
    BilinearSpace,
    NegativeFrame,
    as_fraction,
    frac_det,
    frac_matrix,
    frac_rank,
    frac_solve,
    frac_vector,
    majorant_matrix,
    orthonormalize_negative,
)

__all__ = [
    "Coset",
    "EvenLattice",
    "QExpansion",
    "Splitting",
    "TauPoint",
    "ThetaConvergenceError",
    "ThetaValue",
    "UncertifiedCollectionError",
    "ball_constant",
    "completed_term_cubical",
    "completed_term_simplicial",
    "completed_theta",
    "enumerate_coset",
    "holomorphic_theta",
    "lowering_fd",
    "reference_frame",
    "shadow_factored",
    "shadow_value",
    "siegel_theta",
]


class ThetaConvergenceError(RuntimeError):
    """Shell doubling hit the radius cap before the tail dropped below tol."""


class UncertifiedCollectionError(ValueError):
    pass


# ---------------------------------------------------------------- types

@dataclass(frozen=True)
class EvenLattice:
    """Z^m with an even integral Gram matrix of signature (p, q), p, q >= 1."""

    gram: tuple
    space: BilinearSpace = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        g = frac_matrix(self.gram)
        if any(a.denominator != 1 for row in g for a in row):
            raise ValueError("lattice Gram matrix must be integral")
        if any(g[i][i] % 2 for i in range(len(g))):
            raise ValueError("lattice must be even (even diagonal)")
        object.__setattr__(self, "gram", tuple(tuple(int(a) for a in row) for row in g))
        object.__setattr__(self, "space", BilinearSpace(g))

    @property
    def rank(self) -> int:
        return len(self.gram)

    @property
    def gram_int(self) -> np.ndarray:
        return np.array(self.gram, dtype=np.int64)


@dataclass(frozen=True)
class Coset:
    """mu + L for mu in the dual lattice."""

    mu: tuple

    def __post_init__(self):
        object.__setattr__(self, "mu", frac_vector(self.mu))

    def check(self, L: EvenLattice) -> "Coset":
        if len(self.mu) != L.rank:
            raise ValueError("coset vector has the wrong length")
        for row in L.gram:
            if sum((a * m for a, m in zip(row, self.mu)), Fraction(0)).denominator != 1:
                raise ValueError(f"mu = {self.mu} is not in the dual lattice")
        return self

    @property
    def denominator(self) -> int:
        return math.lcm(*(m.denominator for m in self.mu))

    def negate(self) -> "Coset":
        return Coset(tuple(-m for m in self.mu))


@dataclass(frozen=True)
class TauPoint:
    u: float
    v: float

    def __post_init__(self):
        if not self.v > 0:
            raise ValueError("tau must lie in the upper half plane (v > 0)")

    @property
    def tau(self) -> complex:
        return complex(self.u, self.v)

    def shifted(self, du: float = 0.0, dv: float = 0.0) -> "TauPoint":
        return TauPoint(self.u + du, self.v + dv)


@dataclass(frozen=True)
class QExpansion:
    """Finite q-series sum_n c_n q^n with exact rational exponents and coefficients."""

    terms: tuple  # ((exponent, coefficient), ...) strictly increasing exponents
    truncation: Fraction

    def __post_init__(self):
        exps = [e for e, _ in self.terms]
        if any(b <= a for a, b in zip(exps, exps[1:])):
            raise ValueError("exponents must be strictly increasing")

    def coefficient(self, n) -> Fraction:
        n = Fraction(n)
        for e, c in self.terms:
            if e == n:
                return c
        return Fraction(0)

    def evaluate(self, tau) -> complex:
        t = tau.tau if isinstance(tau, TauPoint) else complex(tau)
        return complex(math.fsum(float(c) * (cmath.exp(2j * math.pi * float(e) * t)).real for e, c in self.terms),
                       math.fsum(float(c) * (cmath.exp(2j * math.pi * float(e) * t)).imag for e, c in self.terms))

    def is_zero(self) -> bool:
        return not self.terms


@dataclass(frozen=True)
class ThetaValue:
    value: complex
    truncation_radius: float
    est_error: float
    n_points: int = 0
    metadata: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {"re": self.value.real, "im": self.value.imag, "est_error": self.est_error,
                "truncation_radius": self.truncation_radius, "n_points": self.n_points,
                **({"metadata": self.metadata} if self.metadata else {})}


# ---------------------------------------------------------------- enumeration

def _fincke_pohst(M: np.ndarray, mu: np.ndarray, R: float) -> np.ndarray:
    """Integer n with (mu + n)^T M (mu + n) <= R, breadth-first over coordinates."""
    m = len(mu)
    if R < 0:
        return np.zeros((0, m), dtype=np.int64)
    U = np.linalg.cholesky(M).T  # M = U^T U, U upper triangular
    slack = 1e-9 * max(R, 1.0)
    # partial solutions over coordinates i..m-1, stored as y = mu + n
    Y = np.zeros((1, 0))
    P = np.zeros(1)
    for i in range(m - 1, -1, -1):
        t = Y @ U[i, i + 1:] if Y.shape[1] else np.zeros(len(Y))
        r = np.sqrt(np.maximum(R + slack - P, 0.0))
        lo = np.ceil((-t - r) / U[i, i] - mu[i] - 1e-12)
        hi = np.floor((-t + r) / U[i, i] - mu[i] + 1e-12)
        cnt = np.maximum(hi - lo + 1, 0).astype(np.int64)
        if cnt.sum() == 0:
            return np.zeros((0, m), dtype=np.int64)
        rep = np.repeat(np.arange(len(Y)), cnt)
        offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        ni = lo[rep] + offs
        yi = mu[i] + ni
        P = P[rep] + (U[i, i] * yi + t[rep]) ** 2
        Y = np.column_stack([yi, Y[rep]])
    n = np.rint(Y - mu[None, :]).astype(np.int64)
    vals = np.einsum("ni,ij,nj->n", Y, M, Y)
    return n[vals <= R * (1 + 1e-10) + 1e-12]


def _sort_points(Y: np.ndarray, maj: np.ndarray):
    keys = [Y[:, k] for k in range(Y.shape[1] - 1, -1, -1)] + [np.round(maj, 9)]
    order = np.lexsort(keys)
    return Y[order], maj[order]


def enumerate_coset(L: EvenLattice, mu, frame: NegativeFrame, R: float) -> list:
    """All x in mu + L with majorant norm (x, x)_z <= R, in lexicographic order.

    Boundary points count as inside within a relative 1e-10 rounding band.
    """
    if R < 0:
        raise ValueError("radius must be non-negative")
    coset = (mu if isinstance(mu, Coset) else Coset(mu)).check(L)
    M = majorant_matrix(L.space, frame)
    mf = np.array([float(a) for a in coset.mu])
    n = _fincke_pohst(M, mf, R)
    pts = sorted(tuple(m + int(a) for m, a in zip(coset.mu, row)) for row in n)
    return pts


class _PointSet:
    """Integer representatives Y = d x of an enumerated coset, with exact helpers."""

    def __init__(self, gram_int: np.ndarray, mu: Sequence[Fraction], M: np.ndarray):
        self.G = gram_int
        self.mu = tuple(mu)
        self.d = math.lcm(*(m.denominator for m in self.mu)) if self.mu else 1
        self.dmu = np.array([int(m * self.d) for m in self.mu], dtype=np.int64)
        self.muf = np.array([float(m) for m in self.mu])
        self.M = M

    def ball(self, R: float):
        n = _fincke_pohst(self.M, self.muf, R)
        Y = self.dmu[None, :] + self.d * n
        X = Y / self.d
        maj = np.einsum("ni,ij,nj->n", X, self.M, X)
        return _sort_points(Y, maj)

    def two_d2_Q(self, Y: np.ndarray) -> np.ndarray:
        """Exact integers 2 d^2 Q(x) = Y^T G Y."""
        return np.einsum("ni,ij,nj->n", Y, self.G, Y)

    def Q(self, y_row) -> Fraction:
        return Fraction(int(y_row @ self.G @ y_row), 2 * self.d * self.d)


def _int_dir(C) -> np.ndarray:
    """Positive integer multiple of a rational vector (same signs of inner products)."""
    f = frac_vector(C)
    den = math.lcm(*(a.denominator for a in f))
    return np.array([int(a * den) for a in f], dtype=np.int64)


def _exact_signs(G: np.ndarray, Y: np.ndarray, vecs) -> np.ndarray:
    """sgn(x, C_k) for each row of Y and each C_k, computed in integers."""
    W = np.column_stack([G @ _int_dir(C) for C in vecs]) if len(vecs) else np.zeros((G.shape[0], 0), np.int64)
    bound = (np.abs(Y).max(initial=0) * np.abs(W).sum(axis=0).max(initial=0))
    if bound < 2 ** 62:
        return np.sign(Y @ W)
    return np.sign(np.array(Y, dtype=object) @ np.array(W, dtype=object)).astype(np.int64)


# ---------------------------------------------------------------- reference planes

def _cube_frame(cc: CubicalCollection, s) -> NegativeFrame:
    return orthonormalize_negative(cc.space, [np.asarray(b, dtype=float) for b in b_of_s(cc, list(s))])


def _simplex_frame(sc: SimplicialCollection, s) -> NegativeFrame:
    G = sc.space.gram_f
    dual = np.array([[float(a) for a in v] for v in dual_basis(sc)])
    w = np.asarray(s, dtype=float) @ dual
    ww = w @ G @ w
    V = np.array([[float(a) for a in v] for v in sc.verts[1:]])
    proj = V - np.outer(V @ G @ w / ww, w)
    return orthonormalize_negative(sc.space, proj)


def reference_frame(collection) -> NegativeFrame:
    """Negative plane at the cube centre / simplex barycentre."""
    if isinstance(collection, CubicalCollection):
        return _cube_frame(collection, [0.5] * collection.q)
    n = collection.q + 1
    return _simplex_frame(collection, [1.0 / n] * n)


def _param_grid(collection, steps: int = 8):
    if isinstance(collection, CubicalCollection):
        for s in itertools.product(range(steps + 1), repeat=collection.q):
            yield [a / steps for a in s]
    else:
        n = collection.q + 1
        for s in itertools.product(range(steps + 1), repeat=n - 1):
            if sum(s) <= steps:
                yield [a / steps for a in s] + [(steps - sum(s)) / steps]


def ball_constant(collection, steps: int = 8, safety: float = 1.5) -> float:
    """K with (x, x)_{z0} <= K (x, x)_{z(s)} over the parameter grid, times ``safety``.

    If Phi(x) != 0 then x is perpendicular to some z(s), so (x, x)_{z(s)} = 2 Q(x);
    this bounds the reference-plane majorant of every holomorphic contributor.
    """
    space = collection.space
    M0 = majorant_matrix(space, reference_frame(collection))
    make = _cube_frame if isinstance(collection, CubicalCollection) else _simplex_frame
    K = 1.0
    for s in _param_grid(collection, steps):
        Ms = majorant_matrix(space, make(collection, s))
        K = max(K, float(np.max(np.linalg.eigvals(np.linalg.solve(Ms, M0)).real)))
    return K * safety


def _require_certified(collection, force: bool):
    if force:
        return
    cert = certify(collection)
    if not cert.certified:
        raise UncertifiedCollectionError(f"collection is not certified in good position ({cert.status})")


# ---------------------------------------------------------------- holomorphic series

def _phi_from_signs(collection, S: np.ndarray) -> list:
    """Phi for each row of a sign matrix; columns in collection.vectors order."""
    out = []
    if isinstance(collection, CubicalCollection):
        q = collection.q
        for row in S:
            num = 1
            for j in range(q):
                num *= int(row[2 * j + 1]) - int(row[2 * j])
            out.append(Fraction(num, 2 ** q))
    else:
        for row in S:
            out.append(phi_simplicial_from_signs([int(a) for a in row]))
    return out


def holomorphic_theta(L: EvenLattice, mu, collection, N, force: bool = False,
                      radius: Optional[float] = None) -> QExpansion:
    """sum over x in mu + L with Q(x) <= N of Phi(x) q^{Q(x)}, with exact coefficients."""
    _require_certified(collection, force)
    coset = (mu if isinstance(mu, Coset) else Coset(mu)).check(L)
    N = as_fraction(N)
    frame = reference_frame(collection)
    M = majorant_matrix(L.space, frame)
    R = float(radius) if radius is not None else 2 * max(float(N), 0.0) * ball_constant(collection) + 1e-9
    ps = _PointSet(L.gram_int, coset.mu, M)
    Y, _ = ps.ball(R)
    S = _exact_signs(L.gram_int, Y, collection.vectors)
    phis = _phi_from_signs(collection, S)
    coeffs: dict = {}
    for y, ph in zip(Y, phis):
        if ph == 0:
            continue
        e = ps.Q(y)
        if e <= N:
            coeffs[e] = coeffs.get(e, Fraction(0)) + ph
    terms = tuple((e, c) for e, c in sorted(coeffs.items()) if c != 0)
    return QExpansion(terms=terms, truncation=N)


# ---------------------------------------------------------------- completed terms

def _pairs_array(cc: CubicalCollection) -> np.ndarray:
    return np.array([[[float(a) for a in v] for v in pair] for pair in cc.pairs]).reshape(cc.q, 2, cc.space.dim)


def _cubical_kernel(cc: CubicalCollection, evaluator) -> tuple[RecursiveEvaluator, Fraction]:
    """Evaluator of sum_I (-1)^{|I|} E_q(C^I; .) and the prefactor (-1)^q 2^{-q}."""
    node = cubical_node(cc.space.gram_f, _pairs_array(cc))
    return RecursiveEvaluator(node, evaluator), Fraction((-1) ** cc.q, 2 ** cc.q)


def _simplicial_kernel(sc: SimplicialCollection, evaluator) -> tuple[RecursiveEvaluator, Fraction]:
    """Evaluator of sum_{|I| odd} E(C^(I); .) and the prefactor (-1)^q 2^{-q}."""
    verts = np.array([[float(a) for a in v] for v in sc.verts])
    return RecursiveEvaluator(simplicial_node(sc.space.gram_f, verts), evaluator), Fraction((-1) ** sc.q, 2 ** sc.q)


def _kernel(collection, evaluator):
    if isinstance(collection, CubicalCollection):
        return _cubical_kernel(collection, evaluator)
    return _simplicial_kernel(collection, evaluator)


def _assemble(kernel: RecursiveEvaluator, pref: Fraction, x: np.ndarray, Qx: float, tau: TauPoint,
              shift_lw: float = 0.0) -> complex:
    lw = -2 * math.pi * tau.v * Qx + shift_lw
    ssum, dsum = kernel.deviation(math.sqrt(2 * tau.v) * x, lw)
    mag = float(pref) * ((ssum * math.exp(lw) if ssum else 0.0) + dsum)
    return mag * cmath.exp(2j * math.pi * tau.u * Qx)


def _as_tau(tau) -> TauPoint:
    if isinstance(tau, TauPoint):
        return tau
    if isinstance(tau, complex):
        return TauPoint(tau.real, tau.imag)
    return TauPoint(*tau)


def completed_term_cubical(cc: CubicalCollection, x, tau,
                           evaluator: ErrorFunctionEvaluator = DEFAULT_EVALUATOR) -> complex:
    """(-1)^q 2^{-q} sum_I (-1)^{|I|} E_q(C^I; x sqrt(2v)) q^{Q(x)}."""
    kernel, pref = _cubical_kernel(cc, evaluator)
    xf = np.array([float(a) for a in x])
    return _assemble(kernel, pref, xf, 0.5 * float(xf @ cc.space.gram_f @ xf), _as_tau(tau))


def completed_term_simplicial(sc: SimplicialCollection, x, tau,
                              evaluator: ErrorFunctionEvaluator = DEFAULT_EVALUATOR) -> complex:
    """(-1)^q 2^{-q} sum_{|I| odd} E_{q+1-|I|}(C^(I); x sqrt(2v)) q^{Q(x)}, E_0 = 1."""
    kernel, pref = _simplicial_kernel(sc, evaluator)
    xf = np.array([float(a) for a in x])
    return _assemble(kernel, pref, xf, 0.5 * float(xf @ sc.space.gram_f @ xf), _as_tau(tau))


# ---------------------------------------------------------------- shell-doubling sums

@dataclass
class _SumResult:
    values: list  # one complex per tau
    radius: float
    est_error: list
    n_points: int


def _shell_sum(ps: _PointSet, term: Callable, taus: list, tol: float, R0: float,
               radius: Optional[float], max_doublings: int, quad_err: float = 0.0) -> _SumResult:
    """Sum term(Y_row, tau) over the coset, adaptively (radius None) or in a fixed ball.

    The adaptive radius is driven by the first tau in ``taus``; the remaining
    taus reuse the same point set.
    """
    cache: dict = {}

    def terms_for(Y, k):
        out = []
        for y in Y:
            key = tuple(int(a) for a in y)
            if key not in cache:
                cache[key] = [term(y, t) for t in taus]
            out.append(cache[key][k])
        return out

    def total(Y, k):
        vals = terms_for(Y, k)
        return complex(math.fsum(v.real for v in vals), math.fsum(v.imag for v in vals))

    if radius is not None:
        Y, maj = ps.ball(radius)
        shell = Y[maj > radius / 2]
        tails = [sum(abs(v) for v in terms_for(shell, k)) for k in range(len(taus))]
        vals = [total(Y, k) for k in range(len(taus))]
        active = sum(1 for key in cache if any(abs(v) > quad_err for v in cache[key]))
        return _SumResult(vals, radius, [t + active * quad_err for t in tails], len(Y))

    R_prev = R0
    tail = math.inf
    Y, maj = ps.ball(R_prev)
    terms_for(Y, 0)
    for _ in range(max_doublings):
        R = 2 * R_prev
        Y, maj = ps.ball(R)
        shell = Y[maj > R_prev]
        tail = sum(abs(v) for v in terms_for(shell, 0))
        # an empty shell says nothing about the tail, so keep doubling
        if tail < tol and len(shell):
            others = [sum(abs(v) for v in terms_for(shell, k)) for k in range(len(taus))]
            vals = [total(Y, k) for k in range(len(taus))]
            active = sum(1 for key in cache if any(abs(v) > quad_err for v in cache[key]))
            return _SumResult(vals, R, [t + active * quad_err for t in others], len(Y))
        R_prev = R
    raise ThetaConvergenceError(f"lattice sum did not converge within radius {R_prev:g} (last shell {tail:.3g})")


def _initial_radius(K: float, v: float, tol: float) -> float:
    return max(K, 1.0) * math.log(1.0 / min(tol, 0.5)) / (math.pi * v)


def completed_theta(L: EvenLattice, mu, collection, tau, tol: float = 1e-10,
                    evaluator: Optional[ErrorFunctionEvaluator] = None, force: bool = False,
                    radius: Optional[float] = None, max_doublings: int = 8,
                    _extra_taus: Sequence = ()) -> ThetaValue:
    """Completed theta value: the lattice sum of completed terms over mu + L."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    _require_certified(collection, force)
    coset = (mu if isinstance(mu, Coset) else Coset(mu)).check(L)
    taus = [_as_tau(tau)] + [_as_tau(t) for t in _extra_taus]
    ev = evaluator or ErrorFunctionEvaluator(quad_tol=min(DEFAULT_EVALUATOR.quad_tol, tol / 100))
    kernel, pref = _kernel(collection, ev)
    frame = reference_frame(collection)
    M = majorant_matrix(L.space, frame)
    ps = _PointSet(L.gram_int, coset.mu, M)
    K = ball_constant(collection)

    def term(y, t):
        x = y / ps.d
        Qx = float(ps.Q(y))
        return _assemble(kernel, pref, x, Qx, t)

    quad_err = 0.0 if collection.q == 1 else ev.quad_tol * 2 ** collection.q
    res = _shell_sum(ps, term, taus, tol, _initial_radius(K, min(t.v for t in taus), tol),
                     radius, max_doublings, quad_err)
    out = [ThetaValue(v, res.radius, e, res.n_points) for v, e in zip(res.values, res.est_error)]
    return out[0] if not _extra_taus else out


def siegel_theta(L: EvenLattice, mu, frame: NegativeFrame, tau, tol: float = 1e-12,
                 radius: Optional[float] = None, max_doublings: int = 8) -> ThetaValue:
    """sum_x exp(-2 pi v sum_i (x, zeta_i)^2) q^{Q(x)}, the Siegel theta at the plane of ``frame``."""
    if frame.k != L.space.q:
        raise ValueError("Siegel theta needs a maximal negative frame")
    coset = (mu if isinstance(mu, Coset) else Coset(mu)).check(L)
    t0 = _as_tau(tau)
    M = majorant_matrix(L.space, frame)
    ps = _PointSet(L.gram_int, coset.mu, M)
    GZ = frame.ortho @ L.space.gram_f

    def term(y, t):
        x = y / ps.d
        Qx = float(ps.Q(y))
        r = float(np.sum((GZ @ x) ** 2))
        return math.exp(-2 * math.pi * t.v * (Qx + r)) * cmath.exp(2j * math.pi * t.u * Qx)

    res = _shell_sum(ps, term, [t0], tol, _initial_radius(1.0, t0.v, tol), radius, max_doublings)
    p, q = L.space.sig
    return ThetaValue(res.values[0], res.radius, res.est_error[0], res.n_points,
                      metadata={"weight": str(Fraction(p - q, 2)), "signature": [p, q]})


# ---------------------------------------------------------------- shadows

class _ShadowKernel:
    """Per-point shadow term for a cubical collection; faces are built once."""

    def __init__(self, cc: CubicalCollection, evaluator: ErrorFunctionEvaluator):
        G = cc.space.gram_f
        pairs = _pairs_array(cc)
        fpref = float(Fraction((-1) ** (cc.q - 1), 2 ** (cc.q - 1)))
        self.parts = []  # (sign, Cbar, G Cbar, face evaluator)
        for j in range(cc.q):
            for primed, sign in ((True, 1), (False, -1)):
                C = pairs[j, 1 if primed else 0]
                cbar = C / math.sqrt(-(C @ G @ C))
                rest = np.delete(pairs, j, axis=0)
                face = (rest + np.einsum("abm,mk,k->ab", rest, G, cbar)[..., None] * cbar).reshape(rest.shape)
                self.parts.append((sign, cbar, G @ cbar, RecursiveEvaluator(cubical_node(G, face), evaluator)))
        self.fpref = fpref

    def term(self, x: np.ndarray, Qx: float, tau: TauPoint) -> complex:
        v = tau.v
        pref = 2 ** -0.5 * v ** 1.5 * self.fpref
        acc = []
        for sign, cbar, gcbar, kern in self.parts:
            c = float(gcbar @ x)
            if c == 0.0:
                continue
            xp = x + c * cbar
            # |q^{Q(x)}| e^{-2 pi v c^2} = exp(-2 pi v Q(x_perp) - pi v c^2)
            lw = -2 * math.pi * v * (Qx + 0.5 * c * c) - math.pi * v * c * c
            ssum, dsum = kern.deviation(math.sqrt(2 * v) * xp, lw)
            acc.append(sign * pref * c * ((ssum * math.exp(lw) if ssum else 0.0) + dsum))
        return math.fsum(acc) * cmath.exp(2j * math.pi * tau.u * Qx)


def shadow_value(L: EvenLattice, mu, cc: CubicalCollection, tau, tol: float = 1e-10,
                 evaluator: Optional[ErrorFunctionEvaluator] = None, force: bool = False,
                 radius: Optional[float] = None, max_doublings: int = 8) -> ThetaValue:
    """Lattice sum of the boundary terms giving -2 i v^2 d/d(tau bar) of the completed series."""
    if not isinstance(cc, CubicalCollection):
        raise TypeError("shadow_value is implemented for cubical collections")
    _require_certified(cc, force)
    coset = (mu if isinstance(mu, Coset) else Coset(mu)).check(L)
    t0 = _as_tau(tau)
    ev = evaluator or ErrorFunctionEvaluator(quad_tol=min(DEFAULT_EVALUATOR.quad_tol, tol / 100))
    kern = _ShadowKernel(cc, ev)
    M = majorant_matrix(L.space, reference_frame(cc))
    ps = _PointSet(L.gram_int, coset.mu, M)

    def term(y, t):
        return kern.term(y / ps.d, float(ps.Q(y)), t)

    quad_err = 0.0 if cc.q == 1 else ev.quad_tol * 2 ** cc.q
    res = _shell_sum(ps, term, [t0], tol, _initial_radius(ball_constant(cc), t0.v, tol),
                     radius, max_doublings, quad_err)
    return ThetaValue(res.values[0], res.radius, res.est_error[0], res.n_points)


def lowering_fd(L: EvenLattice, mu, collection, tau, h: float = 1e-3, tol: float = 1e-11,
                evaluator: Optional[ErrorFunctionEvaluator] = None,
                force: bool = False) -> ThetaValue:
    """-2 i v^2 d/d(tau bar) of the completed series by central differences.

    d/d(tau bar) = (d/du + i d/dv) / 2. All four evaluations share one point
    set, fixed by an adaptive run at the smallest v. ``est_error`` combines the
    propagated series error with an O(h^2) truncation estimate from a second
    run at step 2h.
    """
    t0 = _as_tau(tau)
    if not t0.v - 2 * h > 0:
        raise ValueError("step too large for this tau (need v - 2h > 0)")
    inner_tol = tol / 10
    probe = completed_theta(L, mu, collection, t0.shifted(dv=-2 * h), tol=inner_tol,
                            evaluator=evaluator, force=force)
    R = probe.truncation_radius

    def lower(step):
        pts = [t0.shifted(du=step), t0.shifted(du=-step), t0.shifted(dv=step), t0.shifted(dv=-step)]
        vals = completed_theta(L, mu, collection, pts[0], tol=inner_tol, evaluator=evaluator, force=True,
                               radius=R, _extra_taus=pts[1:])
        du = (vals[0].value - vals[1].value) / (2 * step)
        dv = (vals[2].value - vals[3].value) / (2 * step)
        err = sum(v.est_error for v in vals) / step
        return -2j * t0.v ** 2 * 0.5 * (du + 1j * dv), abs(t0.v ** 2) * err

    val, series_err = lower(h)
    val2, _ = lower(2 * h)
    # Richardson: the O(h^2) error at step h is about (val2 - val) / 3
    trunc = abs(val2 - val) / 3
    return ThetaValue(val, R, series_err + trunc, probe.n_points,
                      metadata={"h": h, "truncation_estimate": trunc, "series_error": series_err})


# ---------------------------------------------------------------- factored shadow

@dataclass(frozen=True)
class Splitting:
    """Orthogonal sublattice L0 + L1 of finite index in L, for one boundary vector.

    ``l0`` spans L0 (a multiple of the boundary vector), ``l1`` is a basis of
    L1 (perpendicular to L0) and ``reps`` are representatives of
    (mu + L) / (L0 + L1).
    """

    j: int
    primed: bool
    l0: tuple
    l1: tuple
    reps: tuple

    def __post_init__(self):
        object.__setattr__(self, "l0", frac_vector(self.l0))
        object.__setattr__(self, "l1", tuple(frac_vector(b) for b in self.l1))
        object.__setattr__(self, "reps", tuple(frac_vector(r) for r in self.reps))


def _validate_splitting(L: EvenLattice, mu: Coset, cc: CubicalCollection, sp: Splitting):
    space = L.space
    C = cc.pairs[sp.j][1 if sp.primed else 0]
    basis = [sp.l0, *sp.l1]
    if len(basis) != L.rank:
        raise ValueError("splitting must have rank(L) basis vectors")
    if any(a.denominator != 1 for b in basis for a in b):
        raise ValueError("splitting vectors must lie in L")
    if frac_rank([sp.l0, C]) != 1:
        raise ValueError("L0 must be spanned by a multiple of the boundary vector")
    G = space.gram
    ip = lambda a, b: sum((a[i] * G[i][k] * b[k] for i in range(len(a)) for k in range(len(b))), Fraction(0))
    if any(ip(sp.l0, b) != 0 for b in sp.l1):
        raise ValueError("splitting is not orthogonal: L1 is not perpendicular to L0")
    index = abs(frac_det(basis))
    if index == 0:
        raise ValueError("splitting vectors are dependent")
    if len(sp.reps) != index:
        raise ValueError(f"need {index} coset representatives, got {len(sp.reps)}")
    BT = [list(col) for col in zip(*basis)]
    coords = []
    for r in sp.reps:
        if any((a - m).denominator != 1 for a, m in zip(r, mu.mu)):
            raise ValueError(f"representative {r} is not in mu + L")
        coords.append(frac_solve(BT, list(r)))
    for a, b in itertools.combinations(coords, 2):
        if all((s - t).denominator == 1 for s, t in zip(a, b)):
            raise ValueError("representatives are not distinct modulo L0 + L1")


def _unary_theta_conj(space: BilinearSpace, r0, l0, cbar_dir, tau: TauPoint, tol: float) -> complex:
    """conj of sum_{x0 in r0 + Z l0} (x0, Cb) q^{(x0, Cb)^2 / 2}."""
    G = space.gram_f
    r0f = np.array([float(a) for a in r0])
    l0f = np.array([float(a) for a in l0])
    a = float(r0f @ G @ cbar_dir)
    b = float(l0f @ G @ cbar_dir)
    # c(n) = a + n b; terms decay like exp(-pi v c^2)
    span = math.sqrt(math.log(1.0 / tol) / (math.pi * tau.v)) / abs(b) + 2
    n0 = -a / b
    acc = []
    for n in range(int(math.floor(n0 - span)), int(math.ceil(n0 + span)) + 1):
        c = a + n * b
        acc.append(c * cmath.exp(1j * math.pi * tau.tau * c * c))
    tot = complex(math.fsum(z.real for z in acc), math.fsum(z.imag for z in acc))
    return tot.conjugate()


def _positive_theta(G1: np.ndarray, mu1: np.ndarray, tau: TauPoint, tol: float) -> complex:
    """sum over y in mu1 + Z^k of q^{y^T G1 y / 2} for positive definite G1."""
    R = math.log(1.0 / tol) / (math.pi * tau.v) + 1.0
    n = _fincke_pohst(G1, mu1, 2 * R)
    Y = mu1[None, :] + n
    Qs = 0.5 * np.einsum("ni,ij,nj->n", Y, G1, Y)
    vals = [cmath.exp(2j * math.pi * tau.tau * Qv) for Qv in Qs]
    return complex(math.fsum(z.real for z in vals), math.fsum(z.imag for z in vals))


def shadow_factored(L: EvenLattice, mu, cc: CubicalCollection, splittings: Sequence[Splitting], tau,
                    tol: float = 1e-10, evaluator: Optional[ErrorFunctionEvaluator] = None,
                    force: bool = False) -> complex:
    """Shadow as a sum of products conj(unary theta on L0) * completed theta of the face on L1.

    One ``Splitting`` per boundary vector C_j and C_j' is required.
    """
    _require_certified(cc, force)
    coset = (mu if isinstance(mu, Coset) else Coset(mu)).check(L)
    t0 = _as_tau(tau)
    need = {(j, pr) for j in range(cc.q) for pr in (False, True)}
    given = {(sp.j, sp.primed) for sp in splittings}
    if given != need or len(splittings) != len(need):
        raise ValueError("need exactly one splitting per boundary vector (j, primed)")
    ev = evaluator or ErrorFunctionEvaluator(quad_tol=min(DEFAULT_EVALUATOR.quad_tol, tol / 100))
    space = L.space
    G = space.gram
    Gf = space.gram_f
    pref = 2 ** -0.5 * t0.v ** 1.5
    total = []
    for sp in splittings:
        _validate_splitting(L, coset, cc, sp)
        C = cc.pairs[sp.j][1 if sp.primed else 0]
        Cf = np.array([float(a) for a in C])
        cbar = Cf / math.sqrt(-(Cf @ Gf @ Cf))
        sign = 1 if sp.primed else -1
        B1 = [list(b) for b in sp.l1]
        G1 = [[sum((a[i] * G[i][k] * b[k] for i in range(L.rank) for k in range(L.rank)), Fraction(0))
               for b in B1] for a in B1]
        if cc.q > 1:
            face = face_cubical(cc, sp.j, sp.primed)
            L1 = EvenLattice(G1)
            face1 = CubicalCollection(L1.space, tuple((_coords_in(B1, G, G1, a), _coords_in(B1, G, G1, b))
                                                      for a, b in face.pairs))
        for r in sp.reps:
            cC = sum((r[i] * G[i][k] * C[k] for i in range(L.rank) for k in range(L.rank)), Fraction(0))
            CC = sum((C[i] * G[i][k] * C[k] for i in range(L.rank) for k in range(L.rank)), Fraction(0))
            r0 = tuple(cC / CC * a for a in C)
            r1 = tuple(a - b for a, b in zip(r, r0))
            theta0 = _unary_theta_conj(space, r0, sp.l0, cbar, t0, tol * 1e-3)
            mu1 = _coords_in(B1, G, G1, r1)
            if cc.q == 1:
                I1 = _positive_theta(np.array(G1, dtype=float), np.array([float(a) for a in mu1]), t0,
                                     tol * 1e-3)
            else:
                I1 = completed_theta(L1, Coset(mu1), face1, t0, tol=tol * 1e-3, evaluator=ev, force=True).value
            total.append(sign * pref * theta0 * I1)
    return complex(math.fsum(z.real for z in total), math.fsum(z.imag for z in total))


def _coords_in(B1, G, G1, v) -> list:
    """Coordinates a with sum_k a_k b_k = v for v in span(L1), via the Gram system."""
    rank = len(G)
    rhs = [sum((b[i] * G[i][k] * Fraction(v[k]) for i in range(rank) for k in range(rank)), Fraction(0))
           for b in B1]
    a = frac_solve(G1, rhs)
    back = [sum((a[t] * B1[t][i] for t in range(len(B1))), Fraction(0)) for i in range(rank)]
    if any(x != Fraction(y) for x, y in zip(back, v)):
        raise ValueError("vector does not lie in span(L1)")
    return a
