"""Random instance generators and the built-in identity suites run by ``verify``."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np

from .chains import phi_simplicial_from_signs, phi_simplicial_odd_subsets
from .generf import DEFAULT_EVALUATOR, ErrorFunctionEvaluator, GeneralizedErf, radial_derivative_check
from .quadspace import BilinearSpace, is_negative_definite

SUITES = ("identity", "radial", "phi_simplicial", "limit")


def diagonal_space(p: int, q: int, scales=None) -> BilinearSpace:
    """diag(2 a_1, ..., 2 a_p, -2 b_1, ..., -2 b_q) with integer scales (default 1)."""
    scales = scales or [1] * (p + q)
    return BilinearSpace.from_gram(np.diag([2 * s for s in scales[:p]] + [-2 * s for s in scales[p:]]).tolist())


def random_negative_collection(rng: np.random.Generator, space: BilinearSpace, k: int,
                               spread: float = 0.6) -> np.ndarray:
    """k random vectors spanning a negative k-plane (rejection sampling)."""
    p, m = space.p, space.dim
    G = space.gram_f
    while True:
        C = rng.normal(size=(k, m))
        C[:, :p] *= spread
        gram = C @ G @ C.T
        if is_negative_definite(gram, 1e-6) and abs(np.linalg.det(gram)) > 1e-2 * np.prod(-np.diag(gram)):
            return C


def random_regular_point(rng: np.random.Generator, space: BilinearSpace, C: np.ndarray,
                         scale: float = 1.0, margin: float = 1e-3) -> np.ndarray:
    G = space.gram_f
    norms = np.sqrt(-np.einsum("ij,jk,ik->i", C, G, C))
    while True:
        x = scale * rng.normal(size=space.dim)
        if np.min(np.abs(C @ G @ x) / norms) > margin:
            return x


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    cases: int
    worst: float
    tolerance: float

    def to_dict(self) -> dict:
        return asdict(self)


def identity_suite(n: int = 25, tol: float = 1e-8, seed: int = 10,
                   evaluator: ErrorFunctionEvaluator = DEFAULT_EVALUATOR) -> SuiteResult:
    """E_2(A1+A2, A1) + E_2(A1+A2, A2) = E_2(A1, A2) + 1 on one negative plane."""
    rng = np.random.default_rng(seed)
    space = diagonal_space(1, 2)
    worst = 0.0
    for _ in range(n):
        A1, A2 = random_negative_collection(rng, space, 2)
        S = A1 + A2
        x = rng.normal(size=3)
        lhs = (GeneralizedErf(space, [S, A1], evaluator).value(x)
               + GeneralizedErf(space, [S, A2], evaluator).value(x))
        rhs = GeneralizedErf(space, [A1, A2], evaluator).value(x) + 1.0
        worst = max(worst, abs(lhs - rhs))
    return SuiteResult("identity", worst <= tol, n, worst, tol)


def radial_suite(n: int = 25, tol: float = 1e-6, h: float = 1e-4, seed: int = 11,
                 evaluator: ErrorFunctionEvaluator = ErrorFunctionEvaluator(quad_tol=1e-13)) -> SuiteResult:
    """Central difference of t -> E_q(C; t x) against the closed-form boundary sum, q = 2, 3."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    count = 0
    for q in (2, 3):
        space = diagonal_space(1, q)
        for _ in range(n):
            C = random_negative_collection(rng, space, q)
            x = random_regular_point(rng, space, C, margin=1e-2)
            lhs, rhs = radial_derivative_check(space, C, x, evaluator, h)
            worst = max(worst, abs(lhs - rhs))
            count += 1
    return SuiteResult("radial", worst <= tol, count, worst, tol)


def phi_simplicial_suite(max_q: int = 4) -> SuiteResult:
    """Product form of the simplicial sign function equals its odd-subset form, exhaustively."""
    count = 0
    bad = 0
    for q in range(0, max_q + 1):
        for sigma in itertools.product((-1, 0, 1), repeat=q + 1):
            count += 1
            if phi_simplicial_from_signs(sigma) != phi_simplicial_odd_subsets(sigma):
                bad += 1
    return SuiteResult("phi_simplicial", bad == 0, count, float(bad), 0.0)


def limit_suite(n: int = 50, tol: float = 1e-7, seed: int = 12,
                evaluator: ErrorFunctionEvaluator = DEFAULT_EVALUATOR) -> SuiteResult:
    """E_q(C; t x) -> sgn(C; x): at min_j |(t x, Cb_j)| = 6 the gap is below tol, q <= 3."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(n):
        q = 1 + i % 3
        space = diagonal_space(1, q)
        C = random_negative_collection(rng, space, q)
        x = random_regular_point(rng, space, C, margin=1e-2)
        ge = GeneralizedErf(space, C, evaluator)
        c = ge.node.gcbar @ x
        t = 6.0 / float(np.min(np.abs(c)))
        s, d = ge.deviation(t * x)
        if s != int(np.prod(np.sign(c))):
            worst = math.inf
        worst = max(worst, abs(d))
    return SuiteResult("limit", worst <= tol, n, worst, tol)


def run_suite(name: str, evaluator: ErrorFunctionEvaluator | None = None) -> list:
    names = SUITES if name == "all" else (name,)
    out = []
    for nm in names:
        if nm not in SUITES:
            raise ValueError(f"unknown suite {nm!r}; choose from {', '.join(SUITES)} or all")
        if nm == "phi_simplicial":
            out.append(phi_simplicial_suite())
        elif nm == "radial":
            out.append(radial_suite(evaluator=evaluator) if evaluator else radial_suite())
        else:
            fn = {"identity": identity_suite, "limit": limit_suite}[nm]
            out.append(fn(evaluator=evaluator) if evaluator else fn())
    return out
