"""Acceptance criteria 1-11, one ``criterion`` marker per check.

A pass/fail line per criterion is printed in the terminal summary.
"""
import math
import random
from fractions import Fraction
from functools import lru_cache

import numpy as np
import pytest

from narybell import atlas, quantum
from narybell.polytope import facets_from_vrep, lp_max, polytope_equal, vertices_from_hrep
from narybell.scenario import Scenario, is_nonsignaling, ns_cg_hrep, ns_hrep
from narybell.symmetry import (
    Relabeling,
    apply_relabeling,
    canonical_key,
    facet_functionals,
    iter_group,
    orbit_classify,
    orbit_report,
)
from narybell.wiring import nary_support_vertices, restricted_tables, restricted_vertices

criterion = pytest.mark.criterion

IA_Q = 2 * (2 / 3) ** 1.5
IB_Q = math.sqrt(16 / 15)
IC_Q = 0.0324

EQUALITY_CASES = [("[2,2|2,2]", "[2,3|3,3]"), ("[2,2|2,2,2]", "[2,2|3,3,3]")]


@lru_cache(maxsize=None)
def restricted(base: str, target: str):
    return restricted_vertices(Scenario.parse(base), Scenario.parse(target))


@lru_cache(maxsize=None)
def restricted_facets(base: str, target: str):
    return facets_from_vrep(restricted(base, target))


def _max_over(f, v):
    """Maximum of ``f`` (natural form, with its own constant) over ``conv(v)``."""
    h, c = f.cg_form()
    return lp_max(h, v).value + f.bound - c


def _non_face_keys(base, target, party_swap=True):
    rep = orbit_report(restricted_facets(base, target), Scenario.parse(target), party_swap)
    return rep, [tuple(r["cg_coefficients"]) + (r["bound"],) for r in rep if not r["face_of_ns"]]


# -- 1 -----------------------------------------------------------------------------


@pytest.mark.slow
@criterion(1, "468 facets, unique non-face orbit equals I_a <= 1")
def test_criterion_1_facets_468():
    h = restricted_facets("[2,2|2,2]", "[3,3|3,3]")
    assert h.n_facets == 468 and not h.equalities
    rep, bad = _non_face_keys("[2,2|2,2]", "[3,3|3,3]")
    assert sum(r["multiplicity"] for r in rep) == 468
    assert len(bad) == 1
    ia = atlas.build_Ia()
    assert bad[0] == canonical_key(ia)
    assert _max_over(ia, restricted("[2,2|2,2]", "[3,3|3,3]")) == ia.bound == 1


# -- 2 -----------------------------------------------------------------------------


@pytest.mark.slow
@criterion(2, "polytope equalities C(<2,3|3,3>) and C(<2,2|3,3,3>)")
@pytest.mark.parametrize("base,target", EQUALITY_CASES)
def test_criterion_2_polytope_equalities(base, target):
    r = restricted(base, target)
    n = nary_support_vertices(Scenario.parse(target), 2)
    assert polytope_equal(r, n)


# -- 3 -----------------------------------------------------------------------------


@pytest.mark.slow
@criterion(3, "126 facets, unique non-face orbit equals I_b <= 1")
def test_criterion_3_facets_126():
    h = restricted_facets("[2,2|2,2,2]", "[2,3|2,2,2]")
    assert h.n_facets == 126
    rep, bad = _non_face_keys("[2,2|2,2,2]", "[2,3|2,2,2]")
    assert len(bad) == 1
    ib = atlas.build_Ibn(3)
    assert bad[0] == canonical_key(ib)
    assert _max_over(ib, restricted("[2,2|2,2,2]", "[2,3|2,2,2]")) == ib.bound == 1


# -- 4 -----------------------------------------------------------------------------


@pytest.mark.slow
@criterion(4, "14052 facets, 10 non-face orbits, one equals I_c <= 0")
def test_criterion_4_facets_14052():
    h = restricted_facets("[2,4|2,4]", "[2,2,2|2,2,2]")
    assert h.n_facets == 14052
    rep, bad = _non_face_keys("[2,4|2,4]", "[2,2,2|2,2,2]", party_swap=True)
    assert sum(r["multiplicity"] for r in rep) == 14052
    assert len(bad) == 10
    ic = atlas.build_Ic()
    assert canonical_key(ic) in bad
    assert _max_over(ic, restricted("[2,4|2,4]", "[2,2,2|2,2,2]")) == ic.bound == 0


# -- 5 -----------------------------------------------------------------------------


@criterion(5, "nonsignaling maximum of I_c is 1/2")
def test_criterion_5_ic_ns_max():
    f = atlas.build_Ic()
    assert lp_max(f.coefficients, ns_hrep(f.scenario)).value == Fraction(1, 2)
    h, c = f.cg_form()
    assert lp_max(h, ns_cg_hrep(f.scenario)).value - c == Fraction(1, 2)


# -- 6 -----------------------------------------------------------------------------


@criterion(6, "certificate max zeta = n-2 for n = 3..50, all ell")
def test_criterion_6_certificate():
    for n in range(3, 51):
        rep = atlas.certificate_report(n)
        assert rep["per_ell"] == [n - 2] * n
        assert atlas.verify_nary_certificate(n) == n - 2


# -- 7 -----------------------------------------------------------------------------


@pytest.mark.slow
@criterion(7, "LP bound of I_b^(n) over (n-1)-ary polytope is n-2 for n = 3, 4")
@pytest.mark.parametrize("n", [3, 4])
def test_criterion_7_lp_agreement(n):
    assert atlas.nary_bound_by_lp(n) == n - 2


# -- 8 -----------------------------------------------------------------------------


@criterion(8, "quantum values of the explicit models")
def test_criterion_8_quantum_values():
    assert abs(quantum.quantum_value(atlas.build_Ia(), quantum.paper_model_Ia()) - IA_Q) <= 1e-9
    for branch in ("plus", "minus"):
        v = quantum.quantum_value(atlas.build_Ibn(3), quantum.paper_model_Ib(3, branch))
        assert abs(v - IB_Q) <= 1e-6
    for n in range(3, 9):
        v = quantum.quantum_value(atlas.build_Ibn(n), quantum.paper_model_Ib(n))
        assert v > (n - 2) + 1 / (4 * n**3)
        if n == 4:
            assert v < quantum.NPA_REFERENCE["I_b^(4)"]


# -- 9 -----------------------------------------------------------------------------


def _check_invariants(res):
    # monotonicity is enforced per sweep inside the search; check the record too
    assert np.all(np.diff(res.history) >= -1e-9)
    assert quantum.born_probabilities(res.model).signaling_residual() < 1e-9


@criterion(9, "see-saw recovers the quantum values from 20 seeded restarts")
@pytest.mark.parametrize(
    "name,target,tol,kwargs",
    [
        ("ia", IA_Q, 1e-5, {}),
        ("ib", IB_Q, 1e-5, {}),
        ("ic", IC_Q, 1e-3, {"rank_one": True}),
    ],
)
def test_criterion_9_seesaw(name, target, tol, kwargs):
    f = atlas.named_functional(name)
    res = quantum.seesaw(f, 3, 3, restarts=20, seed=1, **kwargs)
    assert abs(res.value - target) <= tol
    assert quantum.quantum_value(f, res.model) == pytest.approx(res.value, abs=1e-8)
    _check_invariants(res)


# -- 10 ----------------------------------------------------------------------------


@criterion(10, "critical visibilities")
def test_criterion_10_visibility():
    v_a = quantum.critical_visibility(atlas.build_Ia(), quantum.paper_model_Ia())
    assert abs(v_a - 1 / IA_Q) <= 1e-6
    v_b = quantum.critical_visibility(atlas.build_Ibn(3), quantum.paper_model_Ib(3))
    assert abs(v_b - 0.969) <= 0.002
    v_c = quantum.critical_visibility(atlas.build_Ic(), quantum.reference_model_Ic(), noise="uniform_outcomes")
    assert abs(v_c - 0.979) <= 0.002


@pytest.mark.slow
@criterion(10, "critical visibilities")
def test_criterion_10_reoptimized_reference():
    # tracked reference, not a hard requirement on the 0.917 figure itself
    v = quantum.reoptimized_visibility(atlas.build_Ia(), quantum.paper_model_Ia())
    print(f"re-optimized I_a visibility {v:.5f} (reference {quantum.REFERENCE_VISIBILITY['I_a']})")
    assert 0.915 <= v <= 0.919


# -- 11 ----------------------------------------------------------------------------


@criterion(11, "property suites")
@pytest.mark.parametrize("base,target", [("[2,2|2,2]", "[3,3|3,3]"), ("[2,2|2,2,2]", "[2,3|2,2,2]")])
def test_criterion_11_wiring_closure(base, target):
    tables = restricted_tables(Scenario.parse(base), Scenario.parse(target))
    assert all(is_nonsignaling(t) for t in tables)


@pytest.mark.slow
@criterion(11, "property suites")
@pytest.mark.parametrize("base,target", EQUALITY_CASES)
def test_criterion_11_construction_equivalence(base, target):
    # an independent route: facets of each side must agree exactly
    r = restricted(base, target)
    n = nary_support_vertices(Scenario.parse(target), 2)
    hn = facets_from_vrep(n)
    assert all(hn.contains(p) for p in r.points)
    assert set(n.points) <= set(r.points)


@criterion(11, "property suites")
@pytest.mark.parametrize("text", ["[2,2|2,2]", "[2,3|2,2]", "[2,2|2,2,2]"])
def test_criterion_11_dd_roundtrip(text):
    h = ns_cg_hrep(Scenario.parse(text))
    v = vertices_from_hrep(h)
    back = facets_from_vrep(v)
    assert set(back.inequalities) <= set(h.inequalities)
    assert vertices_from_hrep(back) == v


@criterion(11, "property suites")
def test_criterion_11_lp_vrep_hrep():
    rng = random.Random(0)
    for text in ("[2,2|2,2]", "[2,3|2,2]"):
        h = ns_cg_hrep(Scenario.parse(text))
        v = vertices_from_hrep(h)
        for _ in range(10):
            c = [rng.randint(-5, 5) for _ in range(h.dim)]
            assert lp_max(c, h).value == lp_max(c, v).value


@criterion(11, "property suites")
def test_criterion_11_group_laws():
    s = Scenario.parse("[2,2|2,2]")
    group = list(iter_group(s))
    rng = random.Random(1)
    f = atlas.build_Ia()
    e = Relabeling.identity(s)
    for _ in range(50):
        g, h, k = rng.sample(group, 3)
        assert g.compose(h).compose(k) == g.compose(h.compose(k))
        assert g.compose(g.inverse()) == e
        assert g.compose(h) in set(group)
    s3 = f.scenario
    g3 = list(iter_group(s3))
    for _ in range(10):
        g, h = rng.sample(g3, 2)
        assert apply_relabeling(g.compose(h), f) == apply_relabeling(g, apply_relabeling(h, f))
        assert canonical_key(apply_relabeling(g, f)) == canonical_key(f)
    orbit = orbit_classify([apply_relabeling(g, f) for g in rng.sample(g3, 20)])
    assert len(orbit) == 1
    assert facet_functionals(ns_cg_hrep(s), s)
