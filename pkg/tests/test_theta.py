import cmath
import math
from fractions import Fraction

import numpy as np
import pytest

from indefinite_theta.chains import CubicalCollection, SimplicialCollection, phi_cubical, phi_simplicial
from indefinite_theta.generf import E, ErrorFunctionEvaluator, eq_recursive
from indefinite_theta.quadspace import majorant_norm, orthonormalize_negative
from indefinite_theta.theta import (
    Coset,
    EvenLattice,
    QExpansion,
    Splitting,
    TauPoint,
    ThetaValue,
    UncertifiedCollectionError,
    _kernel,
    completed_term_cubical,
    completed_term_simplicial,
    completed_theta,
    enumerate_coset,
    holomorphic_theta,
    lowering_fd,
    reference_frame,
    shadow_factored,
    shadow_value,
    siegel_theta,
)

from conftest import (
    box_holomorphic,
    box_points,
    coset_reps,
    cube_instance,
    exact_inner,
    mp_completed_q1,
    mp_shadow_q1,
    simplex_instance,
)

F = Fraction
TAU = TauPoint(0.3, 1.1)

# holomorphic coefficients of the signature (1,1) instance, from the box oracle
SIG11_COEFFS = {F(7, 8): F(1, 2), F(31, 8): F(1), F(63, 8): F(-1, 2), F(71, 8): F(1)}


# ---------------------------------------------------------------- lattice types

def test_lattice_and_coset_validation():
    with pytest.raises(ValueError):
        EvenLattice(((1, 0), (0, -2)))  # odd
    with pytest.raises(ValueError):
        EvenLattice(((2, 0), (0, 2)))  # definite
    L = EvenLattice(((2, 0), (0, -4)))
    Coset((0, F(1, 4))).check(L)
    with pytest.raises(ValueError):
        Coset((0, F(1, 3))).check(L)
    assert Coset((F(1, 2), F(1, 4))).denominator == 4
    assert Coset((0, F(1, 4))).negate().mu == (0, F(-1, 4))
    with pytest.raises(ValueError):
        TauPoint(0.1, 0.0)
    with pytest.raises(ValueError):
        QExpansion(terms=((F(1), F(1)), (F(1), F(2))), truncation=F(3))


# ---------------------------------------------------------------- enumeration

def test_enumerate_coset_example(plane):
    L = EvenLattice(((2, 0), (0, -2)))
    fr = orthonormalize_negative(L.space, [(0, 1)])
    pts = enumerate_coset(L, (0, 0), fr, 4)
    assert len(pts) == 9
    assert set(pts) == {(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)}
    assert pts == sorted(pts)
    assert enumerate_coset(L, (0, 0), fr, 0) == [(0, 0)]
    L4 = EvenLattice(((2, 0), (0, -4)))
    assert enumerate_coset(L4, (0, F(1, 4)), orthonormalize_negative(L4.space, [(0, 1)]), 0) == []
    with pytest.raises(ValueError):
        enumerate_coset(L, (0, 0), fr, -1)


def _random_lattice(rng, m):
    while True:
        A = rng.integers(-3, 4, size=(m, m))
        G = A + A.T
        for i in range(m):
            G[i, i] = 2 * int(rng.integers(-3, 4))
        ev = np.linalg.eigvalsh(G.astype(float))
        if np.min(np.abs(ev)) > 0.3 and np.any(ev > 0) and np.any(ev < 0):
            return EvenLattice(tuple(map(tuple, G.tolist())))


def test_enumerate_matches_box_scan(rng):
    for _ in range(20):
        m = int(rng.integers(2, 4))
        L = _random_lattice(rng, m)
        G = L.space.gram_f
        w, V = np.linalg.eigh(G)
        fr = orthonormalize_negative(L.space, V[:, w < 0].T)
        # a dual vector: G^{-1} e_0 scaled to lie in L^dual
        mu = tuple(F(0) for _ in range(m))
        R = 6.0
        pts = enumerate_coset(L, mu, fr, R)
        M_min = float(np.min(np.linalg.eigvalsh(np.array(
            __import__("indefinite_theta.quadspace", fromlist=["majorant_matrix"]).majorant_matrix(L.space, fr)))))
        bound = int(math.ceil(math.sqrt(R / M_min))) + 1
        box = [x for x in box_points(mu, bound) if majorant_norm(L.space, x, fr) <= R * (1 + 1e-10)]
        assert sorted(pts) == sorted(box)


# ---------------------------------------------------------------- holomorphic series

def test_holomorphic_matches_box_oracle(sig11):
    L, mu, cc = sig11
    hol = holomorphic_theta(L, mu, cc, 10)
    box = box_holomorphic(L, mu, lambda x: phi_cubical(cc, x), 10, 50)
    assert dict(hol.terms) == box == SIG11_COEFFS
    Qmu = exact_inner(L.gram, mu, mu) / 2
    assert all((e - Qmu).denominator == 1 for e, _ in hol.terms)


def test_holomorphic_stable_under_larger_ball(sig11):
    L, mu, cc = sig11
    a = holomorphic_theta(L, mu, cc, 10)
    b = holomorphic_theta(L, mu, cc, 10, radius=400.0)
    assert a.terms == b.terms


def test_holomorphic_two_torsion_odd_q_vanishes(sig11):
    L, _, cc = sig11
    assert holomorphic_theta(L, (0, F(1, 2)), cc, 12).is_zero()
    assert holomorphic_theta(L, (0, 0), cc, 12).is_zero()


def test_point_cube_is_zero():
    L = EvenLattice(((2, 0), (0, -4)))
    cc = CubicalCollection(L.space, (((0, 1), (0, 1)),))
    assert holomorphic_theta(L, (0, F(1, 4)), cc, 10).is_zero()
    assert completed_theta(L, (0, F(1, 4)), cc, TAU).value == 0


def test_holomorphic_simplicial_matches_box():
    L, sc = simplex_instance(1)
    mu = (0, F(1, 4))
    hol = holomorphic_theta(L, mu, sc, 8)
    assert dict(hol.terms) == box_holomorphic(L, mu, lambda x: phi_simplicial(sc, x), 8, 40)


def test_uncertified_is_rejected(plane):
    L = EvenLattice(((2, 0), (0, -2)))
    bad = CubicalCollection(L.space, (((0, 1), (1, 0)),))
    with pytest.raises(UncertifiedCollectionError):
        holomorphic_theta(L, (0, 0), bad, 4)
    with pytest.raises(UncertifiedCollectionError):
        completed_theta(L, (0, 0), bad, TAU)


# ---------------------------------------------------------------- completed terms

def test_completed_term_q1_difference_form(sig11):
    L, _, cc = sig11
    x = (F(3, 2), F(1, 4))
    xf = np.array([1.5, 0.25])
    v = TAU.v
    G = L.space.gram_f
    C, Cp = np.array([0.0, 1.0]), np.array([1.0, 2.0])
    e = lambda c: E(math.sqrt(2 * v) * (c @ G @ xf) / math.sqrt(-(c @ G @ c)))
    Qx = 0.5 * xf @ G @ xf
    expected = 0.5 * (e(Cp) - e(C)) * cmath.exp(2j * math.pi * TAU.tau * Qx)
    assert completed_term_cubical(cc, x, TAU) == pytest.approx(expected, abs=1e-14)


def test_completed_term_simplicial_q1_and_q2():
    L, sc = simplex_instance(1)
    x = np.array([0.7, -0.2])
    G = L.space.gram_f
    v = TAU.v
    s = math.sqrt(2 * v)
    qf = cmath.exp(2j * math.pi * TAU.tau * 0.5 * x @ G @ x)
    exp1 = -0.5 * (eq_recursive(L.space, [sc.verts[0]], s * x) + eq_recursive(L.space, [sc.verts[1]], s * x)) * qf
    assert completed_term_simplicial(sc, x, TAU) == pytest.approx(exp1, abs=1e-13)
    L2, sc2 = simplex_instance(2)
    A = [np.array([float(a) for a in c]) for c in sc2.verts]
    x = np.array([0.9, 0.1, -0.3])
    G = L2.space.gram_f
    qf = cmath.exp(2j * math.pi * TAU.tau * 0.5 * x @ G @ x)
    e2 = lambda a, b: eq_recursive(L2.space, [a, b], s * x)
    exp2 = 0.25 * (e2(A[1], A[2]) + e2(A[0], A[2]) + e2(A[0], A[1]) + 1) * qf
    assert completed_term_simplicial(sc2, x, TAU) == pytest.approx(exp2, abs=1e-9)


def test_completed_term_q1_degenerates_to_phi():
    L, cc = cube_instance(1)
    x = (F(1), F(1, 4))
    t = TauPoint(0.0, 60.0)
    Qx = float(exact_inner(L.gram, x, x) / 2)
    val = completed_term_cubical(cc, x, t) / math.exp(-2 * math.pi * t.v * Qx)
    assert val.real == pytest.approx(float(phi_cubical(cc, x)), abs=1e-12)


def test_kernels_degenerate_to_phi():
    # the completed kernel at sqrt(2v) x, v -> oo, is (-1)^q 2^q Phi(x) up to the prefactor
    cases = [(cube_instance(2)[1], (F(1), F(1, 4), F(1, 4)), phi_cubical),
             (cube_instance(3)[1], (F(1), F(1, 4), F(1, 5), F(1, 3)), phi_cubical),
             (simplex_instance(2)[1], (F(-1), F(1, 5), F(1, 5)), phi_simplicial)]
    for coll, x, phi in cases:
        ph = phi(coll, x)
        assert ph != 0
        kernel, pref = _kernel(coll, ErrorFunctionEvaluator())
        xf = np.array([float(a) for a in x])
        c = kernel.node.gcbar @ xf
        t = 6.0 / float(np.min(np.abs(c)))
        assert float(pref) * kernel.value(t * xf) == pytest.approx(float(ph), abs=1e-7)


# ---------------------------------------------------------------- completed series

def test_completed_theta_q1_matches_multiprecision(sig11):
    L, mu, cc = sig11
    tv = completed_theta(L, mu, cc, TAU, tol=1e-12)
    ref = mp_completed_q1(L, mu, (0, 1), (1, 2), (0.3, 1.1), bound=10)
    assert abs(tv.value - ref) <= 1e-10
    assert tv.est_error < 1e-11
    assert isinstance(tv, ThetaValue) and set(tv.to_dict()) >= {"re", "im", "est_error"}


def test_completed_theta_phase_and_parity_q1(sig11):
    L, mu, cc = sig11
    a = completed_theta(L, mu, cc, TAU)
    b = completed_theta(L, mu, cc, TAU.shifted(du=1.0))
    Qmu = float(exact_inner(L.gram, mu, mu) / 2)
    assert abs(b.value - cmath.exp(2j * math.pi * Qmu) * a.value) <= 2 * (a.est_error + b.est_error) + 1e-15
    c = completed_theta(L, Coset(mu).negate(), cc, TAU)
    assert abs(c.value + a.value) <= 2 * (a.est_error + c.est_error) + 1e-15


def test_completed_theta_q2_cubical_parity():
    L, cc = cube_instance(2)
    mu = (F(1, 2), F(1, 2), 0)
    a = completed_theta(L, mu, cc, TAU, tol=1e-8)
    c = completed_theta(L, Coset(mu).negate(), cc, TAU, tol=1e-8)
    assert abs(c.value - a.value) <= 2 * (a.est_error + c.est_error)


def test_completed_theta_fixed_radius(sig11):
    L, mu, cc = sig11
    adaptive = completed_theta(L, mu, cc, TAU, tol=1e-12)
    fixed = completed_theta(L, mu, cc, TAU, radius=adaptive.truncation_radius)
    assert fixed.value == pytest.approx(adaptive.value, abs=1e-14)


def test_degeneration_is_monotone_beyond_v10(sig11):
    L, mu, cc = sig11
    hol = holomorphic_theta(L, mu, cc, 10)
    gaps = []
    for v in (10.0, 15.0, 20.0, 30.0):
        t = TauPoint(0.1, v)
        gaps.append(abs(completed_theta(L, mu, cc, t).value - hol.evaluate(t)))
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


# ---------------------------------------------------------------- Siegel theta

def test_siegel_theta_matches_box():
    L = EvenLattice(((2, 0), (0, -4)))
    fr = orthonormalize_negative(L.space, [(F(1, 2), 1)])
    mu = (0, F(1, 4))
    tv = siegel_theta(L, mu, fr, TAU)
    G = L.space.gram_f
    GZ = fr.ortho @ G
    acc = 0j
    for x in box_points(mu, 12):
        xf = np.array([float(a) for a in x])
        Qx = 0.5 * xf @ G @ xf
        acc += math.exp(-2 * math.pi * TAU.v * (Qx + float(np.sum((GZ @ xf) ** 2)))) * cmath.exp(
            2j * math.pi * TAU.u * Qx)
    assert abs(tv.value - acc) <= 1e-10
    assert tv.metadata["weight"] == "0"
    shifted = siegel_theta(L, mu, fr, TAU.shifted(du=1.0))
    assert abs(shifted.value - cmath.exp(2j * math.pi * (-1 / 8)) * tv.value) <= 1e-10


# ---------------------------------------------------------------- shadows

def test_shadow_q1_matches_multiprecision(sig11):
    L, mu, cc = sig11
    sv = shadow_value(L, mu, cc, TAU, tol=1e-12)
    ref = mp_shadow_q1(L, mu, (0, 1), (1, 2), (0.3, 1.1), bound=10)
    assert abs(sv.value - ref) <= 1e-10


def test_shadow_vanishes_for_two_torsion(sig11):
    L, _, cc = sig11
    assert abs(shadow_value(L, (0, F(1, 2)), cc, TAU).value) < 1e-12


def _sig11_splittings(L, mu):
    reps_c = coset_reps(mu, [(0, 1), (1, 0)], 1)
    reps_cp = coset_reps(mu, [(1, 2), (4, 1)], 7)
    return [Splitting(0, False, (0, 1), ((1, 0),), tuple(reps_c)),
            Splitting(0, True, (1, 2), ((4, 1),), tuple(reps_cp))]


def test_shadow_factored_matches_direct(sig11):
    L, mu, cc = sig11
    fact = shadow_factored(L, mu, cc, _sig11_splittings(L, mu), TAU, tol=1e-12)
    direct = shadow_value(L, mu, cc, TAU, tol=1e-12)
    assert abs(fact - direct.value) <= 1e-9


def test_shadow_factored_rejects_bad_splittings(sig11):
    L, mu, cc = sig11
    good = _sig11_splittings(L, mu)
    non_orth = Splitting(0, True, (1, 2), ((1, 1),), good[1].reps[:1])
    with pytest.raises(ValueError, match="orthogonal"):
        shadow_factored(L, mu, cc, [good[0], non_orth], TAU)
    wrong_count = Splitting(0, True, (1, 2), ((4, 1),), good[1].reps[:3])
    with pytest.raises(ValueError):
        shadow_factored(L, mu, cc, [good[0], wrong_count], TAU)
    with pytest.raises(ValueError):
        shadow_factored(L, mu, cc, good[:1], TAU)


def test_splitting_example_on_plane():
    L = EvenLattice(((2, 0), (0, -2)))
    cc = CubicalCollection(L.space, (((0, 1), (1, 2)),))
    sp = Splitting(0, False, (0, 1), ((1, 0),), ((0, 0),))
    from indefinite_theta.theta import _validate_splitting
    _validate_splitting(L, Coset((0, 0)), cc, sp)


def test_lowering_of_zero_series():
    L = EvenLattice(((2, 0), (0, -4)))
    cc = CubicalCollection(L.space, (((0, 1), (0, 1)),))
    fd = lowering_fd(L, (0, F(1, 4)), cc, TAU)
    assert fd.value == 0


def test_lowering_matches_shadow_q1(sig11):
    L, mu, cc = sig11
    fd = lowering_fd(L, mu, cc, TAU)
    sv = shadow_value(L, mu, cc, TAU)
    assert abs(fd.value - sv.value) <= max(1e-4 * abs(sv.value), 5 * (fd.est_error + sv.est_error))
    with pytest.raises(ValueError):
        lowering_fd(L, mu, cc, TauPoint(0.3, 1e-3), h=1e-3)
