"""Quadratic-space arithmetic.

Gram matrices are held as exact rationals so that sign conditions such as
``(x, C) = 0`` are decided exactly; all analytic work is done in doubles.
Vectors are plain sequences: tuples of ``Fraction``/``int`` are treated as
exact, anything containing floats goes through the floating-point path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Sequence

import numpy as np


class DefinitenessError(ValueError):
    """A Gram matrix that had to be negative definite is not."""


def as_fraction(value) -> Fraction:
    """Parse ints, Fractions and ``"p/q"`` strings. Floats are rejected."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (bool, float, np.floating)):
        raise TypeError(f"refusing to treat {value!r} as an exact rational")
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, Rational):
        return Fraction(value.numerator, value.denominator)
    raise TypeError(f"cannot convert {value!r} to Fraction")


def frac_vector(v) -> tuple[Fraction, ...]:
    return tuple(as_fraction(a) for a in v)


def frac_matrix(M) -> tuple[tuple[Fraction, ...], ...]:
    return tuple(frac_vector(row) for row in M)


def is_exact(v) -> bool:
    if isinstance(v, np.ndarray):
        if v.dtype.kind in "iu":
            return True
        if v.dtype.kind != "O":
            return False
    return all(isinstance(a, (int, np.integer, Fraction)) and not isinstance(a, bool) for a in v)


# exact linear algebra over Q (small matrices only)

def frac_det(M) -> Fraction:
    A = [list(map(Fraction, row)) for row in M]
    n = len(A)
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if A[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            A[col], A[piv] = A[piv], A[col]
            det = -det
        p = A[col][col]
        det *= p
        for r in range(col + 1, n):
            f = A[r][col] / p
            if f:
                for c in range(col, n):
                    A[r][c] -= f * A[col][c]
    return det


def frac_rank(rows) -> int:
    A = [list(map(Fraction, row)) for row in rows]
    if not A:
        return 0
    n, m = len(A), len(A[0])
    rank = 0
    for col in range(m):
        piv = next((r for r in range(rank, n) if A[r][col] != 0), None)
        if piv is None:
            continue
        A[rank], A[piv] = A[piv], A[rank]
        for r in range(n):
            if r != rank and A[r][col] != 0:
                f = A[r][col] / A[rank][col]
                for c in range(col, m):
                    A[r][c] -= f * A[rank][c]
        rank += 1
        if rank == n:
            break
    return rank


def frac_solve(M, b):
    """Solve ``M y = b`` exactly; ``b`` may be a vector or a list of columns.

    Raises ``ZeroDivisionError`` if ``M`` is singular.
    """
    n = len(M)
    vector = not isinstance(b[0], (list, tuple))
    B = [[Fraction(x)] for x in b] if vector else [list(map(Fraction, row)) for row in b]
    A = [list(map(Fraction, M[i])) + B[i] for i in range(n)]
    k = len(B[0])
    for col in range(n):
        piv = next((r for r in range(col, n) if A[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        A[col], A[piv] = A[piv], A[col]
        p = A[col][col]
        A[col] = [a / p for a in A[col]]
        for r in range(n):
            if r != col and A[r][col] != 0:
                f = A[r][col]
                A[r] = [a - f * c for a, c in zip(A[r], A[col])]
    sol = [row[n:] for row in A]
    return [s[0] for s in sol] if vector else sol


def frac_inverse(M):
    n = len(M)
    eye = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    return frac_solve(M, eye)


def exact_signature(M) -> tuple[int, int, int]:
    """(positive, negative, zero) inertia of a rational symmetric matrix.

    Symmetric Gaussian elimination (congruence), so Sylvester's law applies.
    """
    A = [list(map(Fraction, row)) for row in M]
    n = len(A)
    pos = neg = 0
    active = list(range(n))
    while active:
        piv = next((i for i in active if A[i][i] != 0), None)
        if piv is None:
            pair = next(((i, j) for i in active for j in active if i < j and A[i][j] != 0), None)
            if pair is None:
                break
            i, j = pair
            # e_i <- e_i + e_j makes the (i, i) entry 2 A[i][j] != 0
            for c in range(n):
                A[i][c] += A[j][c]
            for r in range(n):
                A[r][i] += A[r][j]
            piv = i
        p = A[piv][piv]
        if p > 0:
            pos += 1
        else:
            neg += 1
        active.remove(piv)
        for r in active:
            f = A[r][piv] / p
            if f:
                for c in active:
                    A[r][c] -= f * A[piv][c]
                A[r][piv] = Fraction(0)
        for c in active:
            A[piv][c] = Fraction(0)
    return pos, neg, n - pos - neg


def exact_negative_definite(M) -> bool:
    """Sylvester: every leading principal minor of ``-M`` is positive."""
    n = len(M)
    negM = [[-Fraction(a) for a in row] for row in M]
    return all(frac_det([row[:k] for row in negM[:k]]) > 0 for k in range(1, n + 1))


@dataclass(frozen=True)
class BilinearSpace:
    """Real quadratic space ``R^m`` with a rational Gram matrix of signature (p, q)."""

    gram: tuple[tuple[Fraction, ...], ...]
    sig: tuple[int, int] = None
    tol: float = 1e-12
    gram_f: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        gram = frac_matrix(self.gram)
        m = len(gram)
        if m == 0 or any(len(row) != m for row in gram):
            raise ValueError("Gram matrix must be square and non-empty")
        if any(gram[i][j] != gram[j][i] for i in range(m) for j in range(m)):
            raise ValueError("Gram matrix must be symmetric")
        pos, neg, zero = exact_signature(gram)
        if zero:
            raise ValueError("Gram matrix is degenerate")
        if self.sig is not None and tuple(self.sig) != (pos, neg):
            raise ValueError(f"declared signature {tuple(self.sig)} but Gram has ({pos}, {neg})")
        if pos < 1 or neg < 1:
            raise ValueError(f"space must be indefinite, got signature ({pos}, {neg})")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        object.__setattr__(self, "gram", gram)
        object.__setattr__(self, "sig", (pos, neg))
        gf = np.array([[float(a) for a in row] for row in gram])
        gf.setflags(write=False)
        object.__setattr__(self, "gram_f", gf)

    @classmethod
    def from_gram(cls, gram, tol: float = 1e-12) -> "BilinearSpace":
        return cls(frac_matrix(gram), tol=tol)

    @property
    def dim(self) -> int:
        return len(self.gram)

    @property
    def p(self) -> int:
        return self.sig[0]

    @property
    def q(self) -> int:
        return self.sig[1]

    def _check(self, *vs):
        for v in vs:
            if len(v) != self.dim:
                raise ValueError(f"vector of length {len(v)} in a space of dimension {self.dim}")


def _exact_inner(gram, x, y) -> Fraction:
    xs = [Fraction(a) for a in x]
    ys = [Fraction(b) for b in y]
    return sum((xs[i] * gram[i][j] * ys[j] for i in range(len(xs)) for j in range(len(ys))
                if xs[i] and ys[j]), Fraction(0))


def inner(space: BilinearSpace, x, y):
    """``x^T G y``; exact ``Fraction`` when both arguments are rational."""
    space._check(x, y)
    if is_exact(x) and is_exact(y):
        return _exact_inner(space.gram, x, y)
    return float(np.asarray(x, dtype=float) @ space.gram_f @ np.asarray(y, dtype=float))


def quad(space: BilinearSpace, x):
    """Q(x) = (x, x)/2."""
    return inner(space, x, x) / 2


def gram_of(space: BilinearSpace, vectors):
    """Gram matrix of a list of vectors (exact when all are rational)."""
    if all(is_exact(v) for v in vectors):
        return [[inner(space, a, b) for b in vectors] for a in vectors]
    V = np.array([np.asarray(v, dtype=float) for v in vectors])
    return V @ space.gram_f @ V.T


def project_perp(space: BilinearSpace, x, y):
    """x - (x, y)/(y, y) y."""
    yy = inner(space, y, y)
    if yy == 0:
        raise ValueError("cannot project perpendicular to an isotropic vector")
    f = inner(space, x, y) / yy
    if is_exact(x) and is_exact(y):
        return tuple(Fraction(a) - f * Fraction(b) for a, b in zip(x, y))
    return np.asarray(x, dtype=float) - f * np.asarray(y, dtype=float)


def normalize_negative(space: BilinearSpace, C) -> np.ndarray:
    """C |(C, C)|^{-1/2} for a negative vector C."""
    cc = inner(space, C, C)
    if not cc < 0:
        raise DefinitenessError(f"(C, C) = {cc} is not negative")
    return np.asarray([float(a) for a in C]) / np.sqrt(-float(cc))


def is_negative_definite(M, tol: float = 1e-12) -> bool:
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return True
    scale = float(np.max(np.abs(M))) or 1.0
    return bool(np.linalg.eigvalsh(M)[-1] < -tol * scale)


@dataclass(frozen=True)
class NegativeFrame:
    """An ordered basis of a negative k-plane and its Gram-Schmidt orthonormalization.

    ``ortho`` satisfies ``(ortho_i, ortho_j) = -delta_ij`` and is related to
    ``basis`` by an upper-triangular matrix with positive diagonal, so both
    carry the same orientation.
    """

    basis: np.ndarray
    ortho: np.ndarray

    @property
    def k(self) -> int:
        return self.ortho.shape[0]


def orthonormalize_negative(space: BilinearSpace, basis) -> NegativeFrame:
    B = np.array([[float(a) for a in v] for v in basis], dtype=float).reshape(len(basis), space.dim)
    if not is_negative_definite(B @ space.gram_f @ B.T, space.tol):
        raise DefinitenessError("basis does not span a negative plane")
    G = space.gram_f
    Z = []
    for b in B:
        v = b.copy()
        for _ in range(2):  # second pass for numerical orthogonality
            for z in Z:
                v = v + (v @ G @ z) * z
        n2 = -(v @ G @ v)
        if n2 <= 0:
            raise DefinitenessError("basis does not span a negative plane")
        Z.append(v / np.sqrt(n2))
    Z = np.array(Z).reshape(len(basis), space.dim)
    return NegativeFrame(basis=B, ortho=Z)


def frame_orientation(space: BilinearSpace, frame: NegativeFrame, other: NegativeFrame) -> int:
    """+1 if both frames span the same plane with the same orientation, -1 if opposite.

    Raises if the spans differ.
    """
    G = space.gram_f
    M = -(frame.ortho @ G @ other.ortho.T)  # coordinates of frame.ortho in other.ortho
    resid = frame.ortho - M @ other.ortho
    if np.max(np.abs(resid)) > 1e-9 * max(1.0, np.max(np.abs(frame.ortho))):
        raise ValueError("frames span different planes")
    return 1 if np.linalg.det(M) > 0 else -1


def majorant_matrix(space: BilinearSpace, frame: NegativeFrame) -> np.ndarray:
    """Matrix of (x, x)_z = (x, x) + 2 sum_i (x, zeta_i)^2 for a maximal negative frame."""
    if frame.k != space.q:
        raise ValueError(f"majorant needs a maximal negative frame (k = {space.q}), got k = {frame.k}")
    GZ = frame.ortho @ space.gram_f
    return space.gram_f + 2.0 * GZ.T @ GZ


def majorant_norm(space: BilinearSpace, x, frame: NegativeFrame) -> float:
    space._check(x)
    xf = np.asarray([float(a) for a in x])
    return float(xf @ majorant_matrix(space, frame) @ xf)


def as_float_vectors(vectors: Sequence) -> np.ndarray:
    return np.array([[float(a) for a in v] for v in vectors], dtype=float)
