"""Cubical and simplicial collections of negative vectors.

Covers good-position certification, faces, the sign functions giving the
holomorphic coefficients, the intersection points s(x) and weighted
intersection numbers. Everything that is a sign condition is evaluated in
exact rational arithmetic when the inputs are rational.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .quadspace import (
    BilinearSpace,
    exact_negative_definite,
    exact_signature,
    frac_inverse,
    frac_rank,
    frac_solve,
    frac_vector,
    gram_of,
    inner,
    is_exact,
    project_perp,
)

CERTIFIED, REFUTED, UNDECIDED = "certified", "refuted", "undecided"


def sgn(v) -> int:
    return (v > 0) - (v < 0)


def inner_sign(space: BilinearSpace, x, C) -> int:
    """sgn(x, C) with sgn(0) = 0.

    Exact for rational x; for float x, values below ``tol * scale`` count as 0.
    """
    if is_exact(x):
        return sgn(inner(space, x, C))
    xf = np.asarray(x, dtype=float)
    gc = space.gram_f @ np.array([float(a) for a in C])
    val = float(xf @ gc)
    scale = float(np.abs(xf) @ np.abs(gc)) or 1.0
    return 0 if abs(val) < space.tol * scale else sgn(val)


@dataclass(frozen=True)
class CubicalCollection:
    """q pairs (C_j, C_j') of vectors.

    Negativity of the vertices is part of good position (the cube corners are
    the points s in {0,1}^q), so it is checked by certification rather than
    here; this lets refutable pairs be represented at all.
    """

    space: BilinearSpace
    pairs: tuple

    def __post_init__(self):
        pairs = tuple((frac_vector(a), frac_vector(b)) for a, b in self.pairs)
        for a, b in pairs:
            for v in (a, b):
                if len(v) != self.space.dim:
                    raise ValueError("vector length does not match the space")
                if not any(v):
                    raise ValueError("collection vectors must be nonzero")
        object.__setattr__(self, "pairs", pairs)

    @property
    def q(self) -> int:
        return len(self.pairs)

    @property
    def vectors(self) -> list:
        return [v for pair in self.pairs for v in pair]

    def vertex(self, I) -> list:
        """C^I: C_j' for j in I, C_j otherwise, ordered by j."""
        return [b if j in I else a for j, (a, b) in enumerate(self.pairs)]

    def vertices(self):
        """All (I, C^I) for I a subset of range(q), smallest subsets first."""
        for r in range(self.q + 1):
            for I in itertools.combinations(range(self.q), r):
                yield frozenset(I), self.vertex(frozenset(I))


@dataclass(frozen=True)
class SimplicialCollection:
    """q+1 negative vectors C_0..C_q, every q of which span a negative q-plane."""

    space: BilinearSpace
    verts: tuple

    def __post_init__(self):
        verts = tuple(frac_vector(v) for v in self.verts)
        if len(verts) < 1:
            raise ValueError("need at least one vector")
        for v in verts:
            if len(v) != self.space.dim:
                raise ValueError("vector length does not match the space")
            if not inner(self.space, v, v) < 0:
                raise ValueError(f"collection vector {v} is not negative")
        if frac_rank(verts) != len(verts):
            raise ValueError("simplicial collection must be linearly independent")
        gram = gram_of(self.space, verts)
        q = len(verts) - 1
        if q >= 1:
            for j in range(q + 1):
                sub = [[gram[a][b] for b in range(q + 1) if b != j] for a in range(q + 1) if a != j]
                if not exact_negative_definite(sub):
                    raise ValueError(f"vectors omitting C_{j} do not span a negative plane")
            if exact_signature(gram)[:2] != (1, q):
                raise ValueError("span of the collection must have signature (1, q)")
        object.__setattr__(self, "verts", verts)

    @property
    def q(self) -> int:
        return len(self.verts) - 1

    @property
    def vectors(self) -> list:
        return list(self.verts)

    def gram(self):
        return gram_of(self.space, self.verts)

    def omit(self, I) -> list:
        """C^(I): the collection with the C_i, i in I, removed."""
        return [v for i, v in enumerate(self.verts) if i not in I]

    def odd_subsets(self):
        """Subsets I of {0..q} with |I| odd, smallest first."""
        n = self.q + 1
        for r in range(1, n + 1, 2):
            for I in itertools.combinations(range(n), r):
                yield frozenset(I)


@dataclass(frozen=True)
class PositionCertificate:
    status: str
    witness: Optional[tuple] = None
    resolution: Optional[Fraction] = None
    margin: Optional[float] = None

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "witness": None if self.witness is None else [str(s) for s in self.witness],
            "resolution": None if self.resolution is None else str(self.resolution),
            "margin": self.margin,
        }


# ---------------------------------------------------------------- cubical

def b_of_s(cc: CubicalCollection, s) -> list:
    """B_j(s_j) = (1 - s_j) C_j + s_j C_j'."""
    if len(s) != cc.q:
        raise ValueError("parameter point has the wrong dimension")
    if any(not 0 <= t <= 1 for t in s):
        raise ValueError("parameter point outside the unit cube")
    out = []
    for t, (a, b) in zip(s, cc.pairs):
        if isinstance(t, (int, Fraction)):
            t = Fraction(t)
            out.append(tuple((1 - t) * x + t * y for x, y in zip(a, b)))
        else:
            out.append(np.array([(1 - t) * float(x) + t * float(y) for x, y in zip(a, b)]))
    return out


def _gram_batch(cc: CubicalCollection, S: np.ndarray) -> np.ndarray:
    """Float Gram matrices of B(s) for a batch of parameter points S (n, q)."""
    A = np.array([[float(v) for v in a] for a, _ in cc.pairs])
    D = np.array([[float(v) for v in b] for _, b in cc.pairs]) - A
    B = A[None, :, :] + S[:, :, None] * D[None, :, :]
    return np.einsum("nim,mk,njk->nij", B, cc.space.gram_f, B)


def _exact_refutes(cc: CubicalCollection, s) -> bool:
    return not exact_negative_definite(gram_of(cc.space, b_of_s(cc, s)))


def good_position_cubical(cc: CubicalCollection, resolution=Fraction(1, 32),
                          max_depth: int = 6, chunk: int = 20000) -> PositionCertificate:
    """Certify that Gram(B(s)) is negative definite on the whole cube.

    Grid nodes are scanned first (a node failing the exact check refutes).
    Then every grid cell is closed with the bound
    lambda_max(G(s)) <= lambda_max(G(s0)) + ||G(s) - G(s0)||_F, where the
    entrywise variation comes from the bilinearity of (B_i(s_i), B_j(s_j)).
    Cells the bound cannot close are bisected up to ``max_depth`` times.
    """
    q = cc.q
    h = Fraction(resolution)
    if not 0 < h <= 1 or (1 / h).denominator != 1:
        raise ValueError("resolution must be 1/n for a positive integer n")
    n = int(1 / h)
    tol = cc.space.tol
    if q == 0:
        return PositionCertificate(CERTIFIED, resolution=h, margin=None)
    G = cc.space.gram_f
    A = np.array([[float(v) for v in a] for a, _ in cc.pairs])
    Dl = np.array([[float(v) for v in b] for _, b in cc.pairs]) - A
    DD = Dl @ G @ Dl.T
    scale = max(np.max(np.abs(_gram_batch(cc, np.zeros((1, q))))),
                np.max(np.abs(_gram_batch(cc, np.ones((1, q))))), 1e-300)
    thresh = -tol * scale

    # nodes
    grid = [Fraction(i, n) for i in range(n + 1)]
    nodes = itertools.product(range(n + 1), repeat=q)
    while True:
        block = list(itertools.islice(nodes, chunk))
        if not block:
            break
        S = np.array(block, dtype=float) / n
        lam = np.linalg.eigvalsh(_gram_batch(cc, S))[:, -1]
        for idx in np.nonzero(lam >= thresh)[0]:
            s = tuple(grid[i] for i in block[idx])
            if _exact_refutes(cc, s):
                return PositionCertificate(REFUTED, witness=s, resolution=h, margin=float(lam[idx]))

    # cells, with local bisection
    margin = -np.inf
    cells = itertools.product(range(n), repeat=q)
    while True:
        block = list(itertools.islice(cells, chunk))
        if not block:
            break
        centers = (np.array(block, dtype=float) + 0.5) / n
        pending = [(centers, 0.5 / n)]
        for depth in range(max_depth + 1):
            nxt = []
            for C0, w in pending:
                Gs = _gram_batch(cc, C0)
                lam = np.linalg.eigvalsh(Gs)[:, -1]
                B0 = A[None] + C0[:, :, None] * Dl[None]
                P = np.abs(np.einsum("im,mk,njk->nij", Dl, G, B0))
                bound = (P + np.swapaxes(P, 1, 2)) * w + np.abs(DD)[None] * w * w
                up = lam + np.sqrt(np.sum(bound ** 2, axis=(1, 2)))
                ok = up <= thresh
                if ok.any():
                    margin = max(margin, float(up[ok].max()))
                bad = ~ok
                if not bad.any():
                    continue
                # a positive centre value is a refutation candidate
                for idx in np.nonzero(bad & (lam >= thresh))[0]:
                    s = tuple(Fraction(float(t)).limit_denominator(2 ** 40) for t in C0[idx])
                    if _exact_refutes(cc, s):
                        return PositionCertificate(REFUTED, witness=s, resolution=h, margin=float(lam[idx]))
                if depth == max_depth:
                    return PositionCertificate(UNDECIDED, resolution=h, margin=float(up[bad].max()))
                sub = C0[bad]
                offs = np.array(list(itertools.product((-0.5, 0.5), repeat=q))) * w
                nxt.append(((sub[:, None, :] + offs[None]).reshape(-1, q), w / 2))
            pending = nxt
            if not pending:
                break
    return PositionCertificate(CERTIFIED, resolution=h, margin=float(margin))


def face_cubical(cc: CubicalCollection, j: int, primed: bool = False) -> CubicalCollection:
    """C[j] (or C[j']): drop pair j, project the rest perpendicular to C_j (C_j')."""
    if not 0 <= j < cc.q:
        raise IndexError(f"pair index {j} out of range for q = {cc.q}")
    y = cc.pairs[j][1 if primed else 0]
    pairs = [(project_perp(cc.space, a, y), project_perp(cc.space, b, y))
             for i, (a, b) in enumerate(cc.pairs) if i != j]
    return CubicalCollection(cc.space, tuple(pairs))


def phi_cubical(cc: CubicalCollection, x) -> Fraction:
    """2^{-q} prod_j (sgn(x, C_j') - sgn(x, C_j))."""
    out = Fraction(1)
    for a, b in cc.pairs:
        d = inner_sign(cc.space, x, b) - inner_sign(cc.space, x, a)
        if d == 0:
            return Fraction(0)
        out *= Fraction(d, 2)
    return out


def s_of_x_cubical(cc: CubicalCollection, x):
    """The unique s(x) in [0,1]^q with x perpendicular to every B_j(s_j), or None if Phi = 0."""
    if phi_cubical(cc, x) == 0:
        return None
    s = []
    for a, b in cc.pairs:
        xa, xb = inner(cc.space, x, a), inner(cc.space, x, b)
        s.append(xa / (xa - xb))
    return tuple(s)


def wall_count_cubical(cc: CubicalCollection, x) -> int:
    return sum(1 for a, b in cc.pairs
               if inner_sign(cc.space, x, a) == 0 or inner_sign(cc.space, x, b) == 0)


def intersection_number_cubical(cc: CubicalCollection, x) -> Fraction:
    """Weighted intersection number 2^{-r} prod_j sgn((x, C_j') - (x, C_j)) at s(x).

    r counts the walls through s(x). Only defined where Phi != 0.
    """
    if phi_cubical(cc, x) == 0:
        raise ValueError("intersection number undefined: D_x does not meet S(C)")
    local = 1
    for a, b in cc.pairs:
        d = inner(cc.space, x, b) - inner(cc.space, x, a)
        local *= sgn(d)
    return Fraction(local, 2 ** wall_count_cubical(cc, x))


def is_regular(collection, x) -> bool:
    return all(inner_sign(collection.space, x, C) != 0 for C in collection.vectors)


def very_good_position(cc: CubicalCollection) -> Optional[bool]:
    """True when the 2q vectors are linearly independent (sufficient); None = unknown."""
    vecs = cc.vectors
    if len(vecs) > cc.space.dim:
        return None
    return True if frac_rank(vecs) == len(vecs) else None


# ---------------------------------------------------------------- simplicial

def dual_basis(sc: SimplicialCollection) -> list:
    """C^vee = C (C, C)^{-1}: (C_i^vee, C_j) = delta_ij within span(C)."""
    R = frac_inverse(sc.gram())
    n = sc.q + 1
    m = sc.space.dim
    return [tuple(sum((R[i][j] * sc.verts[i][k] for i in range(n)), Fraction(0)) for k in range(m))
            for j in range(n)]


def _min_on_simplex(R) -> tuple[Fraction, tuple]:
    """Exact minimum of s R s^T over the standard simplex, with a minimiser.

    Each face is handled through its bordered KKT system; faces where that
    system is singular attain their minimum on a smaller face.
    """
    n = len(R)
    best = None
    for r in range(1, n + 1):
        for F in itertools.combinations(range(n), r):
            k = len(F)
            K = [[2 * R[a][b] for b in F] + [Fraction(1)] for a in F] + [[Fraction(1)] * k + [Fraction(0)]]
            rhs = [Fraction(0)] * k + [Fraction(1)]
            try:
                sol = frac_solve(K, rhs)
            except ZeroDivisionError:
                continue
            sF = sol[:k]
            if any(t < 0 for t in sF):
                continue
            s = [Fraction(0)] * n
            for i, t in zip(F, sF):
                s[i] = t
            val = sum((s[a] * R[a][b] * s[b] for a in range(n) for b in range(n)), Fraction(0))
            if best is None or val < best[0]:
                best = (val, tuple(s))
    return best


def good_position_simplicial(sc: SimplicialCollection) -> PositionCertificate:
    R = frac_inverse(sc.gram())
    if all(v >= 0 for row in R for v in row):
        return PositionCertificate(CERTIFIED, margin=float(min(R[i][i] for i in range(len(R)))))
    val, s = _min_on_simplex(R)
    if val > 0:
        return PositionCertificate(CERTIFIED, margin=float(val))
    return PositionCertificate(REFUTED, witness=s, margin=float(val))


def phi_simplicial_from_signs(sigma: Sequence[int]) -> Fraction:
    """2^{-q-1}(prod(1 - s_j) + (-1)^q prod(1 + s_j)) for a sign vector of length q+1."""
    q = len(sigma) - 1
    minus = 1
    plus = 1
    for s in sigma:
        minus *= 1 - s
        plus *= 1 + s
    return Fraction(minus + (-1) ** q * plus, 2 ** (q + 1))


def phi_simplicial_odd_subsets(sigma: Sequence[int]) -> Fraction:
    """(-1)^q 2^{-q} sum over odd |I| of the sign product of the complement of I."""
    q = len(sigma) - 1
    n = q + 1
    total = 0
    for r in range(1, n + 1, 2):
        for I in itertools.combinations(range(n), r):
            prod = 1
            for j in range(n):
                if j not in I:
                    prod *= sigma[j]
            total += prod
    return Fraction((-1) ** q * total, 2 ** q)


def phi_simplicial(sc: SimplicialCollection, x) -> Fraction:
    return phi_simplicial_from_signs([inner_sign(sc.space, x, C) for C in sc.verts])


def s_of_x_simplicial(sc: SimplicialCollection, x):
    """(s(x), lambda) with pr_U(x) = lambda C^vee(s(x)), or None when D_x misses S(C)."""
    prods = [inner(sc.space, x, C) for C in sc.verts]
    signs = {sgn(p) for p in prods} - {0}
    if len(signs) != 1:
        return None
    R = frac_inverse(sc.gram()) if is_exact(x) else np.linalg.inv(np.array(sc.gram(), dtype=float))
    n = len(prods)
    qpr = sum(prods[i] * R[i][j] * prods[j] for i in range(n) for j in range(n)) / 2
    if not qpr > 0:
        return None
    lam = sum(prods)
    return tuple(p / lam for p in prods), lam


def face_simplicial(sc: SimplicialCollection, j: int) -> SimplicialCollection:
    """C[j] = [C_{i perp j} for i != j]."""
    if not 0 <= j <= sc.q:
        raise IndexError(f"vertex index {j} out of range for q = {sc.q}")
    y = sc.verts[j]
    return SimplicialCollection(sc.space, tuple(project_perp(sc.space, v, y)
                                                for i, v in enumerate(sc.verts) if i != j))


def certify(collection, **kwargs) -> PositionCertificate:
    if isinstance(collection, CubicalCollection):
        return good_position_cubical(collection, **kwargs)
    return good_position_simplicial(collection)


def phi(collection, x) -> Fraction:
    if isinstance(collection, CubicalCollection):
        return phi_cubical(collection, x)
    return phi_simplicial(collection, x)
