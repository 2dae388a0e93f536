"""Restricted nonsignaling polytopes and tests of fundamentally n-ary correlations."""
from .scenario import (
    BellFunctional,
    CorrelationVector,
    NormalizationError,
    Scenario,
    ScenarioError,
    deterministic_points,
    evaluate,
    is_nonsignaling,
    ns_cg_hrep,
    ns_hrep,
)
from .polytope import (
    EmptyPolytopeError,
    GeometryError,
    HRep,
    UnboundedPolytopeError,
    VRep,
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
from .wiring import (
    DeterministicWiring,
    apply_wiring,
    enumerate_wirings,
    nary_support_vertices,
    ns_vertices,
    restricted_vertices,
)
from .symmetry import Relabeling, apply_relabeling, canonical_form, orbit_classify, orbit_report
from .atlas import build_Ia, build_Ibn, build_Ic, nary_bound_by_lp, verify_nary_certificate
from .quantum import (
    QuantumModel,
    born_probabilities,
    critical_visibility,
    paper_model_Ia,
    paper_model_Ib,
    reference_model_Ic,
    seesaw,
)

__version__ = "0.1.0"
