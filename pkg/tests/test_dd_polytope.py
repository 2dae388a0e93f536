import itertools
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from narybell import atlas, lp
from narybell.dd import ConeError, extreme_rays
from narybell.polytope import (
    EmptyPolytopeError,
    HRep,
    UnboundedPolytopeError,
    VRep,
    canonical_bytes,
    contained_in,
    facets_from_vrep,
    is_face_of,
    lp_max,
    member,
    polytope_equal,
    read_polytope,
    vertices_from_hrep,
    write_hrep,
    write_vrep,
)
from narybell.scenario import Scenario, ns_cg_hrep, ns_hrep

from oracles import brute_force_facets, brute_force_vertices, scipy_lp_max

SQUARE = [(0, 0), (1, 0), (0, 1), (1, 1)]


def test_square_facets():
    h = facets_from_vrep(VRep(SQUARE))
    assert h.n_facets == 4 and not h.equalities
    assert set(h.inequalities) == {((-1, 0), 0), ((0, -1), 0), ((1, 0), 1), ((0, 1), 1)}


def test_interior_points_are_dropped():
    pts = SQUARE + [(Fraction(1, 2), Fraction(1, 2)), (Fraction(1, 3), 0)]
    assert facets_from_vrep(VRep(pts)) == facets_from_vrep(VRep(SQUARE))
    assert len(vertices_from_hrep(facets_from_vrep(VRep(pts)))) == 4


def test_simplex_roundtrip():
    d = 4
    pts = [tuple(int(i == j) for j in range(d)) for i in range(d)] + [(0,) * d]
    h = facets_from_vrep(VRep(pts))
    assert h.n_facets == d + 1
    assert vertices_from_hrep(h) == VRep(pts)


def test_lower_dimensional_point_set():
    # a triangle in the plane z = 1
    pts = [(0, 0, 1), (1, 0, 1), (0, 1, 1)]
    h = facets_from_vrep(VRep(pts))
    assert h.n_facets == 3 and len(h.equalities) == 1
    assert vertices_from_hrep(h) == VRep(pts)


def _random_points(rng, n, d, lo=-3, hi=3):
    return [tuple(rng.randint(lo, hi) for _ in range(d)) for _ in range(n)]


@pytest.mark.parametrize("seed", range(6))
def test_dd_matches_brute_force_facets(seed):
    rng = random.Random(seed)
    d = 3
    while True:
        pts = _random_points(rng, 8, d)
        if np.linalg.matrix_rank(np.array(pts[1:]) - np.array(pts[0])) == d:
            break
    ours = facets_from_vrep(VRep(pts))
    oracle = {(tuple(n), o) for n, o in brute_force_facets(pts)}
    assert set(ours.inequalities) == oracle


@pytest.mark.parametrize("seed", range(4))
def test_dd_matches_brute_force_vertices(seed):
    rng = random.Random(100 + seed)
    d = 3
    # bounded: a box plus random cuts through its center region
    A = [[int(i == j) * s for j in range(d)] for i in range(d) for s in (1, -1)]
    b = [3] * (2 * d)
    for _ in range(4):
        A.append([rng.randint(-2, 2) for _ in range(d)])
        b.append(rng.randint(1, 4))
    h = HRep(d, list(zip(A, b)))
    assert set(vertices_from_hrep(h).points) == brute_force_vertices(A, b)


def test_chsh_ns_polytope_has_24_vertices():
    s = Scenario.parse("[2,2|2,2]")
    v = vertices_from_hrep(ns_cg_hrep(s))
    assert len(v) == 24
    det = [p for p in v.points if all(x.denominator == 1 for x in p)]
    halves = [p for p in v.points if any(x.denominator == 2 for x in p)]
    assert len(det) == 16 and len(halves) == 8


def test_chsh_roundtrip_and_full_table_hrep():
    s = Scenario.parse("[2,2|2,2]")
    h = ns_cg_hrep(s)
    v = vertices_from_hrep(h)
    back = facets_from_vrep(v)
    assert set(back.inequalities) == set(h.inequalities) and back.n_facets == 16
    # the full-table description has the same vertex count
    assert len(vertices_from_hrep(ns_hrep(s))) == 24


@pytest.mark.parametrize("seed", range(20))
def test_lp_hrep_matches_vrep(seed):
    s = Scenario.parse("[2,2|2,2]")
    h = ns_cg_hrep(s)
    v = vertices_from_hrep(h)
    rng = random.Random(seed)
    c = [Fraction(rng.randint(-5, 5), rng.randint(1, 3)) for _ in range(h.dim)]
    assert lp_max(c, h).value == lp_max(c, v).value


@pytest.mark.parametrize("seed", range(5))
def test_lp_matches_scipy(seed):
    s = Scenario.parse("[2,3|2,2]")
    h = ns_cg_hrep(s)
    rng = np.random.default_rng(seed)
    c = rng.integers(-4, 5, h.dim)
    ours = lp_max(c, h)
    A = [n for n, _ in h.inequalities]
    b = [o for _, o in h.inequalities]
    assert float(ours.value) == pytest.approx(scipy_lp_max(c, A, b), abs=1e-7)
    assert h.contains(ours.point)


def test_ia_ns_maximum_exceeds_local_bound():
    f = atlas.build_Ia()
    h, c = f.cg_form()
    val = lp_max(h, ns_cg_hrep(f.scenario)).value + f.bound - c
    assert val > 1


def test_lp_errors():
    with pytest.raises(lp.InfeasibleError):
        lp_max([1, 0], HRep(2, [((1, 0), -1), ((-1, 0), -1)]))
    with pytest.raises(lp.UnboundedError):
        lp_max([1, 0], HRep(2, [((-1, 0), 0)]))
    with pytest.raises(lp.InfeasibleError):
        lp_max([1], VRep([], 1))


def test_vertex_enumeration_errors():
    with pytest.raises(EmptyPolytopeError):
        vertices_from_hrep(HRep(2, [((1, 0), -1), ((-1, 0), -1), ((0, 1), 1), ((0, -1), 1)]))
    with pytest.raises(UnboundedPolytopeError):
        vertices_from_hrep(HRep(2, [((-1, 0), 0), ((0, 1), 1), ((0, -1), 1)]))
    with pytest.raises(EmptyPolytopeError):
        facets_from_vrep(VRep([], 3))
    with pytest.raises(EmptyPolytopeError):
        HRep(1, [((0,), -1)])


def test_cone_error_on_empty_matrix():
    with pytest.raises(ConeError):
        extreme_rays(np.zeros((2, 0), dtype=np.int64))


def test_extreme_rays_of_orthant():
    rays, inc = extreme_rays(np.eye(3, dtype=np.int64))
    assert sorted(map(tuple, np.asarray(rays, dtype=np.int64).tolist())) == [(0, 0, 1), (0, 1, 0), (1, 0, 0)]
    assert inc.sum() == 6


def test_membership_examples():
    v = VRep(SQUARE)
    assert member((Fraction(1, 2), Fraction(1, 3)), v)
    assert member((1, 1), v)
    assert not member((Fraction(3, 2), 0), v)
    # inside the bounding box but outside the triangle
    tri = VRep([(0, 0), (1, 0), (0, 1)])
    assert not member((Fraction(3, 4), Fraction(3, 4)), tri)
    with pytest.raises(ValueError):
        member((0, 0, 0), v)


@pytest.mark.parametrize("method", ["lp", "hrep", "auto"])
def test_polytope_equal_methods(method):
    a = VRep(SQUARE + [(Fraction(1, 2), Fraction(1, 2))])
    b = VRep(SQUARE + [(0, Fraction(1, 2))])
    assert polytope_equal(a, b, method=method)
    assert not polytope_equal(a, VRep(SQUARE[:3]), method=method)
    assert not polytope_equal(VRep(SQUARE[:3]), a, method=method)


def test_polytope_equal_rejects_bad_arguments():
    with pytest.raises(ValueError):
        polytope_equal(VRep(SQUARE), VRep([(0, 0, 0)]))
    with pytest.raises(ValueError):
        polytope_equal(VRep(SQUARE), VRep(SQUARE), method="nope")


def test_is_face_of():
    h = HRep(2, [((1, 0), 1), ((-1, 0), 0), ((0, 1), 1), ((0, -1), 0)])
    assert is_face_of(((1, 1), 2), h)
    assert not is_face_of(((1, 1), Fraction(3, 2)), h)
    s = Scenario.parse("[2,2|2,2]")
    assert contained_in(vertices_from_hrep(ns_cg_hrep(s)), ns_cg_hrep(s))


def test_cache_format_roundtrip(tmp_path):
    s = Scenario.parse("[2,2|2,2]")
    v = vertices_from_hrep(ns_cg_hrep(s))
    h = facets_from_vrep(v)
    write_vrep(tmp_path / "v.txt", v)
    write_hrep(tmp_path / "h.txt", h)
    assert read_polytope(tmp_path / "v.txt") == v
    assert read_polytope(tmp_path / "h.txt") == h
    assert (tmp_path / "v.txt").read_text().startswith("V 24 8\n")
    assert canonical_bytes(read_polytope(tmp_path / "v.txt")) == canonical_bytes(v)
    (tmp_path / "bad.txt").write_text("V 3 2\n0 0\n")
    with pytest.raises(ValueError):
        read_polytope(tmp_path / "bad.txt")


def test_hrep_normalizes_rows():
    h = HRep(2, [((2, 4), 6), ((1, 2), 3)], [((-2, 0), -2)])
    assert h.inequalities == (((1, 2), 3),)
    assert h.equalities == (((1, 0), 1),)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(-4, 4), st.integers(-4, 4), st.integers(-4, 4)), min_size=4, max_size=10))
def test_roundtrip_property(pts):
    v = VRep(pts)
    h = facets_from_vrep(v)
    verts = vertices_from_hrep(h)
    # every input point satisfies the description and the vertices are input points
    assert all(h.contains(p) for p in v.points)
    assert set(verts.points) <= set(v.points)
    assert facets_from_vrep(verts) == h


def test_lex_and_given_orders_agree():
    pts = list(itertools.product((0, 1), repeat=3)) + [(Fraction(1, 2),) * 3]
    assert facets_from_vrep(VRep(pts), order="lex") == facets_from_vrep(VRep(pts), order="given")
