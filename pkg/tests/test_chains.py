import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from indefinite_theta.chains import (
    CERTIFIED,
    REFUTED,
    CubicalCollection,
    SimplicialCollection,
    b_of_s,
    dual_basis,
    face_cubical,
    face_simplicial,
    good_position_cubical,
    good_position_simplicial,
    intersection_number_cubical,
    is_regular,
    phi_cubical,
    phi_simplicial,
    phi_simplicial_from_signs,
    phi_simplicial_odd_subsets,
    s_of_x_cubical,
    s_of_x_simplicial,
    very_good_position,
)
from indefinite_theta.quadspace import BilinearSpace, frac_inverse, gram_of, inner, is_negative_definite

from conftest import cube_instance

F = Fraction


@pytest.fixture
def cc(plane):
    return CubicalCollection(plane, (((0, 1), (1, 2)),))


@pytest.fixture
def sc(plane):
    return SimplicialCollection(plane, ((0, 1), (1, -2)))


def test_b_of_s(cc):
    assert b_of_s(cc, [0]) == [(0, 1)]
    assert b_of_s(cc, [1]) == [(1, 2)]
    assert b_of_s(cc, [F(1, 2)]) == [(F(1, 2), F(3, 2))]
    with pytest.raises(ValueError):
        b_of_s(cc, [F(3, 2)])


def test_cubical_certification_examples(cc, plane):
    cert = good_position_cubical(cc)
    assert cert.status == CERTIFIED
    # (B(s), B(s)) = -2 - 4 s, so the margin cannot exceed -2
    assert cert.margin <= -2 + 1e-12
    point = CubicalCollection(plane, (((0, 1), (0, 1)),))
    assert good_position_cubical(point).certified
    bad = CubicalCollection(plane, (((0, 1), (1, 0)),))
    cert = good_position_cubical(bad)
    assert cert.status == REFUTED
    assert cert.witness == (F(1, 2),)
    assert inner(plane, *b_of_s(bad, cert.witness) * 2) == 0


def test_certificate_serialises(cc):
    d = good_position_cubical(cc, resolution=F(1, 8)).to_dict()
    assert d["status"] == "certified" and d["resolution"] == "1/8"
    with pytest.raises(ValueError):
        good_position_cubical(cc, resolution=F(2, 3))


def test_phi_cubical_examples(cc):
    assert phi_cubical(cc, (3, 1)) == 1
    assert phi_cubical(cc, (1, 1)) == 0
    assert phi_cubical(cc, (2, 1)) == F(1, 2)


def test_s_of_x_cubical_examples(cc, plane):
    assert s_of_x_cubical(cc, (3, 1)) == (F(1, 2),)
    assert inner(plane, (3, 1), b_of_s(cc, [F(1, 2)])[0]) == 0
    assert s_of_x_cubical(cc, (2, 1)) == (1,)
    assert s_of_x_cubical(cc, (1, 1)) is None


def test_intersection_number_examples(cc):
    assert intersection_number_cubical(cc, (3, 1)) == 1 == phi_cubical(cc, (3, 1))
    assert intersection_number_cubical(cc, (2, 1)) == F(1, 2) == phi_cubical(cc, (2, 1))
    with pytest.raises(ValueError):
        intersection_number_cubical(cc, (1, 1))


def test_is_regular_examples(cc):
    assert not is_regular(cc, (0, 0))
    assert is_regular(cc, (3, 1))
    assert not is_regular(cc, (2, 1))


def test_very_good_position(cc, plane):
    assert very_good_position(cc) is True
    assert very_good_position(CubicalCollection(plane, (((0, 1), (0, 1)),))) is None
    L, c2 = cube_instance(2)
    assert very_good_position(c2) is None  # 4 vectors in dimension 3


def test_face_cubical():
    L, c2 = cube_instance(2)
    assert face_cubical(CubicalCollection(c2.space, (c2.pairs[0],)), 0).q == 0
    f = face_cubical(c2, 0)
    # pair 1 is already perpendicular to C_0 = (0,1,0)
    assert f.pairs == (c2.pairs[1],)
    fp = face_cubical(c2, 0, primed=True)
    assert all(inner(c2.space, v, c2.pairs[0][1]) == 0 for v in fp.vectors)


def test_faces_recertify():
    for q in (2, 3):
        L, c = cube_instance(q)
        assert good_position_cubical(c, resolution=F(1, 8)).certified
        for j in range(q):
            for primed in (False, True):
                assert good_position_cubical(face_cubical(c, j, primed), resolution=F(1, 8)).certified


def test_dual_basis_example(sc):
    assert frac_inverse(sc.gram()) == [[F(3, 2), 1], [1, F(1, 2)]]
    dual = dual_basis(sc)
    for i, j in itertools.product(range(2), repeat=2):
        assert inner(sc.space, dual[i], sc.verts[j]) == (1 if i == j else 0)


def test_simplicial_certification(sc, plane):
    assert good_position_simplicial(sc).certified
    # (C_0, C_1) < 0 in the q = 1 case is refuted
    bad = SimplicialCollection(plane, ((0, 1), (2, 3)))
    assert inner(plane, (0, 1), (2, 3)) < 0
    cert = good_position_simplicial(bad)
    assert cert.status == REFUTED
    s = cert.witness
    R = frac_inverse(bad.gram())
    assert sum(s[a] * R[a][b] * s[b] for a in range(2) for b in range(2)) <= 0


def test_simplicial_validation(plane):
    with pytest.raises(ValueError):
        SimplicialCollection(plane, ((0, 1), (0, 2)))  # dependent
    with pytest.raises(ValueError):
        SimplicialCollection(plane, ((1, 0), (0, 1)))  # positive vector


def test_phi_simplicial_examples(sc):
    assert phi_simplicial(sc, (3, -1)) == -1
    assert phi_simplicial(sc, (1, 0)) == F(-1, 2)
    assert phi_simplicial_from_signs([0, 0]) == 0
    assert phi_simplicial_from_signs([0, 0, 0]) == F(1, 4)


def test_s_of_x_simplicial_examples(sc):
    assert s_of_x_simplicial(sc, (3, -1)) == ((F(1, 2), F(1, 2)), 4)
    assert s_of_x_simplicial(sc, (1, 0)) == ((0, 1), 2)
    assert s_of_x_simplicial(sc, (2, 1)) is None


def test_face_simplicial():
    space = BilinearSpace.from_gram([[2, 0, 0], [0, -2, 0], [0, 0, -2]])
    s = SimplicialCollection(space, ((0, 1, 0), (0, 0, 1), (1, -2, -2)))
    f = face_simplicial(s, 0)
    assert f.q == 1
    assert f.verts[0] == (0, 0, 1)  # already perpendicular
    assert all(inner(space, v, s.verts[0]) == 0 for v in f.verts)
    assert is_negative_definite(np.array(gram_of(space, f.verts), dtype=float)[:1, :1])


def test_phi_simplicial_odd_subsets_exhaustive():
    for q in range(5):
        for sigma in itertools.product((-1, 0, 1), repeat=q + 1):
            assert phi_simplicial_from_signs(sigma) == phi_simplicial_odd_subsets(sigma)


def test_phi_simplicial_regular_formula():
    # nonzero Phi on a regular point: all signs equal lambda's sign, value (-1)^q sgn^q
    for q in range(4):
        for s in (-1, 1):
            assert phi_simplicial_from_signs([s] * (q + 1)) == (-1) ** q * s ** q


@settings(max_examples=80, deadline=None)
@given(st.tuples(st.integers(-9, 9), st.integers(-9, 9), st.integers(-9, 9)), st.integers(1, 5))
def test_phi_cubical_parity_and_scaling(x, lam):
    L, c = cube_instance(2)
    assert phi_cubical(c, tuple(-a for a in x)) == phi_cubical(c, x)
    scaled = CubicalCollection(c.space, ((c.pairs[0][0], tuple(lam * a for a in c.pairs[0][1])), c.pairs[1]))
    assert phi_cubical(scaled, x) == phi_cubical(c, x)


@settings(max_examples=80, deadline=None)
@given(st.tuples(st.integers(-9, 9), st.integers(-9, 9), st.integers(-9, 9)))
def test_s_of_x_annihilates(x):
    L, c = cube_instance(2)
    s = s_of_x_cubical(c, x)
    if s is None:
        assert phi_cubical(c, x) == 0
        return
    assert all(0 <= t <= 1 for t in s)
    for B in b_of_s(c, s):
        assert inner(c.space, x, B) == 0
    assert intersection_number_cubical(c, x) == phi_cubical(c, x)
