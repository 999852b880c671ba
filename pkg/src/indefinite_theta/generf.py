"""Generalized error functions E_q(C; x).

``E_q(C; x)`` is the Gaussian average, over the negative plane z spanned by
``C = [C_1..C_q]``, of ``prod_k sgn(C_k, y)`` centred at ``pr_z(x)``, with the
Gaussian ``e^{pi (y, y)}`` normalised to total mass one.

The main evaluator uses the inductive identity

    E_q(C; x) - sgn(C; x)
        = -2 sum_j (x, Cb_j) int_1^oo exp(-pi t^2 (x, Cb_j)^2) E_{q-1}(C[j]; t x_{perp j}) dt

(``Cb_j`` the normalised C_j, ``C[j]`` the other vectors projected
perpendicular to C_j), after substituting s = t |(x, Cb_j)| so that every
integral lives on a bounded interval. The recursion is carried out on the
deviation ``e^{lw} (E_q - sgn)`` for a caller-supplied log weight ``lw``; theta
series multiply E-values by ``|q^{Q(x)}|``, which can be astronomically large
when Q(x) < 0, and the weighted form keeps those products accurate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import erf, erfcinv, erfcx

from .quadrature import QuadratureError, integrate
from .quadspace import (
    BilinearSpace,
    DefinitenessError,
    as_float_vectors,
    is_negative_definite,
    orthonormalize_negative,
)

SQRT_PI = math.sqrt(math.pi)

__all__ = [
    "E",
    "ErrorFunctionEvaluator",
    "GeneralizedErf",
    "RecursionNode",
    "RecursiveEvaluator",
    "cubical_node",
    "plain_node",
    "simplicial_node",
    "PlaneIntegralFrame",
    "eq_oracle",
    "eq_recursive",
    "plane_frame",
    "psi0_primitive_q1",
    "radial_derivative_check",
    "sgn_product",
    "QuadratureError",
]


def E(u):
    """E(u) = 2 int_0^u exp(-pi t^2) dt = erf(sqrt(pi) u)."""
    return erf(SQRT_PI * np.asarray(u, dtype=float)) if np.ndim(u) else float(erf(SQRT_PI * u))


@dataclass(frozen=True)
class ErrorFunctionEvaluator:
    quad_tol: float = 1e-10
    rel_tol: float = 1e-13
    reg_eps: float = 1e-9
    mc_samples: int = 10 ** 6
    rng_seed: int = 0
    max_depth: int = 30

    def __post_init__(self):
        if not self.quad_tol > 0:
            raise ValueError("quad_tol must be positive")
        if self.mc_samples < 10 ** 4:
            raise ValueError("mc_samples must be at least 10^4")
        if not 0 < self.reg_eps < 1e-2:
            raise ValueError("reg_eps must lie in (0, 1e-2)")


DEFAULT_EVALUATOR = ErrorFunctionEvaluator()


def sgn_product(space: BilinearSpace, C: Sequence, x) -> int:
    """sgn(C_1, x) ... sgn(C_q, x), with sgn(0) = 0; 1 for an empty collection."""
    from .chains import inner_sign

    out = 1
    for c in C:
        out *= inner_sign(space, x, c)
        if out == 0:
            return 0
    return out



# ---------------------------------------------------------------- recursion engine
#
# A node represents a signed sum F = sum_m eps_m E(C_m; .) of generalized
# error functions whose inductive identities share boundary vectors. Each
# branch b carries a unit boundary vector Cb_b, a sign eps_b and the node of
# the face obtained by projecting perpendicular to Cb_b; then
#
#     F(x) - S(x) = -2 sum_b eps_b (x, Cb_b) int_1^oo exp(-pi t^2 (x, Cb_b)^2) F_b(t x_perp_b) dt
#
# with S the matching signed sum of sign products. Plain E_q is the case of
# one member; alternating sums over the vertices of a cube or the faces of a
# simplex give nodes whose weighted pieces stay bounded where the separate
# members would cancel catastrophically.

PLAIN, CUBICAL, SIMPLICIAL = "plain", "cubical", "simplicial"


class RecursionNode:
    """One level of the recursion: branch vectors, signs and face nodes."""

    __slots__ = ("kind", "cbar", "gcbar", "eps", "children", "pert_dir", "bound", "pairs")

    def __init__(self, kind: str, G: np.ndarray, vecs: np.ndarray, eps, children, bound: float,
                 pairs=None):
        self.kind = kind
        self.eps = np.asarray(eps, dtype=float)
        self.children = list(children)
        self.bound = bound  # sup |F - S|
        self.pairs = pairs
        if len(vecs) == 0:
            self.cbar = self.gcbar = self.pert_dir = None
            return
        norms2 = -np.einsum("ij,jk,ik->i", vecs, G, vecs)
        if np.any(norms2 <= 0):
            raise DefinitenessError("boundary vectors must be negative")
        self.cbar = vecs / np.sqrt(norms2)[:, None]
        self.gcbar = self.cbar @ G
        # a direction moving every boundary inner product by a distinct positive amount
        beta = 1.0 + np.arange(len(vecs)) / (math.pi * len(vecs))
        w, *_ = np.linalg.lstsq(self.gcbar, beta, rcond=None)
        if np.any(np.abs(self.gcbar @ w) < 1e-3 * np.max(np.abs(w))):
            w = np.cos(np.arange(1, G.shape[0] + 1) * 1.3)
        self.pert_dir = w / np.linalg.norm(w)

    @property
    def is_leaf(self) -> bool:
        return self.cbar is None

    def sign_sum(self, c: np.ndarray) -> int:
        """S(x) from the boundary inner products c."""
        if self.is_leaf:
            return 1
        s = np.sign(c).astype(int)
        if self.kind == PLAIN:
            return int(np.prod(s))
        if self.kind == CUBICAL:
            return int(np.prod(s[0::2] - s[1::2]))
        # odd-subset sum: (prod(s + 1) - prod(s - 1)) / 2
        return int((np.prod(s + 1) - np.prod(s - 1)) // 2)

    def near_singular(self, small: np.ndarray) -> bool:
        """Two boundary inner products vanish inside one member of the sum."""
        if self.kind == PLAIN:
            return int(small.sum()) >= 2
        if self.kind == CUBICAL:
            return int((small[0::2] | small[1::2]).sum()) >= 2
        return int(small.sum()) >= 2 and len(small) >= 3

    def leaf_children(self) -> bool:
        return all(ch.is_leaf for ch in self.children)


LEAF = RecursionNode(PLAIN, np.zeros((1, 1)), np.zeros((0, 1)), [], [], 0.0)


def _project(G: np.ndarray, vecs: np.ndarray, cbar: np.ndarray) -> np.ndarray:
    # v perp Cb = v + (v, Cb) Cb because (Cb, Cb) = -1
    return vecs + np.outer(vecs @ G @ cbar, cbar)


def plain_node(G: np.ndarray, vecs: np.ndarray, tol: float = 1e-12) -> RecursionNode:
    """Node for a single E_q(C; .)."""
    vecs = np.asarray(vecs, dtype=float).reshape(-1, G.shape[0])
    k = len(vecs)
    if k == 0:
        return LEAF
    if not is_negative_definite(vecs @ G @ vecs.T, tol):
        raise DefinitenessError("collection does not span a negative plane")
    norms = np.sqrt(-np.einsum("ij,jk,ik->i", vecs, G, vecs))
    children = []
    for j in range(k):
        cb = vecs[j] / norms[j]
        children.append(plain_node(G, _project(G, np.delete(vecs, j, axis=0), cb), tol))
    return RecursionNode(PLAIN, G, vecs, np.ones(k), children, 2.0)


def cubical_node(G: np.ndarray, pairs: np.ndarray) -> RecursionNode:
    """Node for sum_I (-1)^{|I|} E_q(C^I; .); ``pairs`` has shape (q, 2, m)."""
    pairs = np.asarray(pairs, dtype=float)
    q = len(pairs)
    if q == 0:
        return LEAF
    vecs = pairs.reshape(2 * q, -1)
    eps, children = [], []
    for j in range(q):
        for e in (0, 1):
            v = pairs[j, e]
            cb = v / math.sqrt(-(v @ G @ v))
            rest = np.delete(pairs, j, axis=0)
            face = _project(G, rest.reshape(-1, rest.shape[-1]), cb).reshape(rest.shape) if len(rest) else rest
            eps.append(1.0 if e == 0 else -1.0)
            children.append(cubical_node(G, face))
    return RecursionNode(CUBICAL, G, vecs, eps, children, 2.0 ** (q + 1), pairs=q)


def simplicial_node(G: np.ndarray, verts: np.ndarray) -> RecursionNode:
    """Node for sum_{|I| odd} E(C^(I); .) over q+1 vectors (E_0 = 1)."""
    verts = np.asarray(verts, dtype=float)
    n = len(verts)
    if n == 1:
        return LEAF
    children = []
    for j in range(n):
        v = verts[j]
        cb = v / math.sqrt(-(v @ G @ v))
        children.append(simplicial_node(G, _project(G, np.delete(verts, j, axis=0), cb)))
    return RecursionNode(SIMPLICIAL, G, verts, np.ones(n), children, 2.0 ** n)


class RecursiveEvaluator:
    """Evaluates F - S for a recursion node in log-weighted form."""

    def __init__(self, node: RecursionNode, evaluator: ErrorFunctionEvaluator = DEFAULT_EVALUATOR):
        self.node = node
        self.evaluator = evaluator
        self.evaluations = 0

    def deviation(self, x, log_weight: float = 0.0) -> tuple[int, float]:
        """(S(x), e^{log_weight} (F(x) - S(x)))."""
        self.evaluations += 1
        return self._dev(self.node, np.asarray(x, dtype=float), float(log_weight))

    def value(self, x) -> float:
        s, d = self.deviation(x)
        return s + d

    def _dev(self, node: RecursionNode, x: np.ndarray, lw: float) -> tuple[int, float]:
        if node.is_leaf:
            return 1, 0.0
        c = node.gcbar @ x
        s = node.sign_sum(c)
        if node.near_singular(np.abs(c) < self.evaluator.reg_eps):
            return s, self._averaged(node, x, lw, s)
        total = []
        for b in range(len(c)):
            cb = float(c[b])
            if cb == 0.0:
                continue
            total.append(-2.0 * node.eps[b] * math.copysign(1.0, cb) * self._tail(node, b, x, cb, lw))
        return s, math.fsum(total)

    def _averaged(self, node: RecursionNode, x: np.ndarray, lw: float, s: int) -> float:
        # F is smooth in x; the symmetric average is accurate to O(delta^2) = O(reg_eps)
        delta = math.sqrt(self.evaluator.reg_eps) * max(1.0, float(np.linalg.norm(x)))
        vals = []
        for sign in (1.0, -1.0):
            sp, dp = self._dev(node, x + sign * delta * node.pert_dir, lw)
            vals.append((sp - s) * _safe_exp(lw) + dp)
        return 0.5 * (vals[0] + vals[1])

    def _tail(self, node: RecursionNode, b: int, x: np.ndarray, cb: float, lw: float) -> float:
        """e^{lw} int_{|c|}^oo e^{-pi s^2} F_b(s y) ds with y = x_{perp b} / |c|."""
        a = abs(cb)
        child = node.children[b]
        y = (x + cb * node.cbar[b]) / a
        s_child = 1 if child.is_leaf else child.sign_sum(child.gcbar @ y)
        sign_part = s_child * 0.5 * float(erfcx(SQRT_PI * a)) * _safe_exp(lw - math.pi * a * a)
        if child.is_leaf:
            return sign_part
        ev = self.evaluator
        # the tail beyond S is at most bound * e^{lw} erfc(sqrt(pi) S) / 2
        if lw > 700:
            target = 1e-300
        else:
            target = 2 * ev.quad_tol * math.exp(-lw) / child.bound
        if target >= 1.0:
            return sign_part
        upper = float(erfcinv(max(target, 1e-300))) / SQRT_PI
        if upper <= a:
            return sign_part
        if child.leaf_children():
            d = child.gcbar @ y
            nz = d != 0.0
            dn, en = np.abs(d[nz]), (child.eps * np.sign(d))[nz]

            def f(t):
                t = np.asarray(t)[:, None]
                terms = -en[None, :] * erfcx(SQRT_PI * t * dn[None, :]) * np.exp(
                    lw - math.pi * t * t * (1.0 + dn[None, :] ** 2))
                return terms.sum(axis=1)
        else:
            def f(t):
                return np.array([self._dev(child, ti * y, lw - math.pi * ti * ti)[1] for ti in t])
        brk = [a * 4.0 ** i for i in range(1, 40) if a * 4.0 ** i < upper]
        try:
            val, _ = integrate(f, a, upper, abs_tol=ev.quad_tol, rel_tol=ev.rel_tol,
                               breakpoints=brk, max_depth=ev.max_depth)
        except QuadratureError as exc:
            raise QuadratureError(f"recursion at {node.kind} node: {exc}") from exc
        return sign_part + val


def _safe_exp(v: float) -> float:
    return math.exp(min(v, 700.0))


class GeneralizedErf(RecursiveEvaluator):
    """E_q(C; .) for one collection C, evaluated through the inductive identity."""

    def __init__(self, space: BilinearSpace, C: Sequence, evaluator: ErrorFunctionEvaluator = DEFAULT_EVALUATOR):
        vecs = as_float_vectors(C).reshape(len(C), space.dim)
        super().__init__(plain_node(space.gram_f, vecs, space.tol), evaluator)
        self.space = space
        self.q = len(C)


def eq_recursive(space: BilinearSpace, C: Sequence, x, evaluator: ErrorFunctionEvaluator = DEFAULT_EVALUATOR) -> float:
    """E_q(C; x) via the inductive identity (closed form for q = 1, E_0 = 1)."""
    if len(C) == 0:
        return 1.0
    return GeneralizedErf(space, C, evaluator).value(x)

@dataclass(frozen=True)
class PlaneIntegralFrame:
    """Orthonormal coordinates u on z = span(C): y = sum u_i zeta_i, (y, y) = -|u|^2."""

    frame: object
    shift: np.ndarray  # a_i = -(x, zeta_i), coordinates of pr_z(x)
    linforms: np.ndarray  # l_ki = (C_k, zeta_i)


def plane_frame(space: BilinearSpace, C: Sequence, x) -> PlaneIntegralFrame:
    frame = orthonormalize_negative(space, C)
    G = space.gram_f
    xf = np.asarray(x, dtype=float)
    Cf = as_float_vectors(C)
    return PlaneIntegralFrame(frame=frame, shift=-(frame.ortho @ G @ xf), linforms=Cf @ G @ frame.ortho.T)


def eq_oracle(space: BilinearSpace, C: Sequence, x, evaluator: ErrorFunctionEvaluator = DEFAULT_EVALUATOR,
              chunk: int = 200_000) -> tuple[float, float]:
    """Monte-Carlo estimate of the defining plane integral: (mean, standard error).

    In the frame coordinates the weight e^{pi (y - pr x, y - pr x)} is the
    normal law with mean ``shift`` and covariance I / (2 pi).
    """
    pf = plane_frame(space, C, x)
    k = len(C)
    rng = np.random.default_rng(evaluator.rng_seed)
    n = evaluator.mc_samples
    sigma = 1.0 / math.sqrt(2.0 * math.pi)
    s1 = 0.0
    count = 0
    while count < n:
        m = min(chunk, n - count)
        u = pf.shift[None, :] + sigma * rng.standard_normal((m, k))
        vals = np.prod(np.sign(u @ pf.linforms.T), axis=1)
        s1 += float(vals.sum())
        count += m
    mean = s1 / n
    # integrand is +-1 almost surely, so E[f^2] = 1
    var = max(1.0 - mean * mean, 0.0) * n / (n - 1)
    return mean, math.sqrt(var / n)


def radial_derivative_check(space: BilinearSpace, C: Sequence, x,
                            evaluator: ErrorFunctionEvaluator = DEFAULT_EVALUATOR,
                            h: float = 1e-4) -> tuple[float, float]:
    """Central difference of t -> E_q(C; t x) at t = 1 against
    2 sum_j (x, Cb_j) exp(-pi (x, Cb_j)^2) E_{q-1}(C[j]; x_{perp j})."""
    ge = GeneralizedErf(space, C, evaluator)
    xf = np.asarray(x, dtype=float)
    root = ge.node
    c = root.gcbar @ xf
    scale = float(np.max(np.abs(c))) if c.size else 0.0
    if scale == 0.0 or np.any(np.abs(c) <= space.tol * max(scale, 1.0)):
        raise ValueError("x must be regular with respect to C")
    lhs = (ge.value((1 + h) * xf) - ge.value((1 - h) * xf)) / (2 * h)
    terms = []
    for j in range(len(c)):
        cj = float(c[j])
        xperp = xf + cj * root.cbar[j]
        s, d = ge._dev(root.children[j], xperp, 0.0)
        inner_val = s + d
        terms.append(2.0 * cj * math.exp(-math.pi * cj * cj) * inner_val)
    return lhs, math.fsum(terms)


def psi0_primitive_q1(space: BilinearSpace, C, x) -> float:
    """(E_1(C; x sqrt 2) - sgn(x, C)) / 2, the q = 1 primitive at z = span{C}."""
    node = plain_node(space.gram_f, as_float_vectors([C]), space.tol)
    c = float(node.gcbar[0] @ np.asarray(x, dtype=float))
    if c == 0.0:
        return 0.0
    # E(u) - sgn(u) = -sgn(u) erfc(sqrt(pi)|u|)
    return -0.5 * math.copysign(1.0, c) * math.erfc(SQRT_PI * math.sqrt(2.0) * abs(c))
