"""Exact convex geometry for bounded rational polytopes.

Two representations are used:

* :class:`VRep` -- a deduplicated, lexicographically sorted list of points.
* :class:`HRep` -- inequalities ``normal @ x <= offset`` and equalities
  ``normal @ x == offset``, each stored as a primitive integer row.

V-to-H and H-to-V both reduce to :func:`narybell.dd.extreme_rays` after
passing to a full-dimensional chart of the affine hull.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import lp
from ._exact import (
    fraction_str,
    lcm_of_denominators,
    primitive_integer_vector,
    rref,
    sign_normalized,
    solve_affine,
    to_fraction,
)
from .dd import ConeError, extreme_rays


class GeometryError(ValueError):
    pass


class EmptyPolytopeError(GeometryError):
    pass


class UnboundedPolytopeError(GeometryError):
    pass


def _point_key(p) -> tuple:
    return tuple(to_fraction(v) for v in p)


@dataclass(frozen=True, eq=False)
class VRep:
    """Finite point set in ``dim``-dimensional rational space."""

    dim: int
    points: tuple[tuple[Fraction, ...], ...]

    def __init__(self, points: Iterable[Sequence], dim: int | None = None):
        pts = sorted({_point_key(p) for p in points})
        if dim is None:
            if not pts:
                raise ValueError("empty point list needs an explicit dimension")
            dim = len(pts[0])
        if any(len(p) != dim for p in pts):
            raise ValueError("points have inconsistent dimensions")
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "points", tuple(pts))

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __eq__(self, other) -> bool:
        return isinstance(other, VRep) and self.dim == other.dim and self.points == other.points

    def __hash__(self):
        return hash((self.dim, self.points))

    def as_array(self) -> np.ndarray:
        return np.array(self.points, dtype=object).reshape(len(self.points), self.dim)

    def integer_scaled(self) -> tuple[np.ndarray, int]:
        """Points times the lcm of all denominators, as an int64 array."""
        scale = lcm_of_denominators(v for p in self.points for v in p)
        arr = np.array([[int(v * scale) for v in p] for p in self.points], dtype=object)
        if arr.size and max(abs(v) for v in arr.flat) < 2**62:
            arr = arr.astype(np.int64)
        return arr.reshape(len(self.points), self.dim), scale


@dataclass(frozen=True, eq=False)
class HRep:
    """``{x : A x <= b, E x == e}`` with primitive integer rows.

    Inequality rows are only scaled by positive factors; equality rows also
    get the first nonzero coefficient made positive.
    """

    dim: int
    inequalities: tuple[tuple[tuple[int, ...], int], ...]
    equalities: tuple[tuple[tuple[int, ...], int], ...] = field(default=())

    def __init__(self, dim: int, inequalities=(), equalities=(), sort: bool = True):
        ineqs = []
        for normal, offset in inequalities:
            row = primitive_integer_vector(list(normal) + [offset])
            if any(row[:-1]):
                ineqs.append((tuple(row[:-1]), row[-1]))
            elif row[-1] < 0:
                raise EmptyPolytopeError("inequality 0 <= negative")
        eqs = []
        for normal, offset in equalities:
            row = sign_normalized(primitive_integer_vector(list(normal) + [offset]))
            if any(row[:-1]):
                eqs.append((tuple(row[:-1]), row[-1]))
            elif row[-1] != 0:
                raise EmptyPolytopeError("equality 0 == nonzero")
        if sort:
            ineqs = sorted(set(ineqs))
            eqs = sorted(set(eqs))
        for normal, _ in ineqs + eqs:
            if len(normal) != dim:
                raise ValueError("row dimension does not match polytope dimension")
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "inequalities", tuple(ineqs))
        object.__setattr__(self, "equalities", tuple(eqs))

    @property
    def n_facets(self) -> int:
        return len(self.inequalities)

    def contains(self, x) -> bool:
        xf = [to_fraction(v) for v in x]
        for normal, off in self.inequalities:
            if sum((c * v for c, v in zip(normal, xf) if c), Fraction(0)) > off:
                return False
        for normal, off in self.equalities:
            if sum((c * v for c, v in zip(normal, xf) if c), Fraction(0)) != off:
                return False
        return True

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, HRep)
            and self.dim == other.dim
            and self.inequalities == other.inequalities
            and self.equalities == other.equalities
        )

    def __hash__(self):
        return hash((self.dim, self.inequalities, self.equalities))


@dataclass(frozen=True)
class AffineHull:
    """Affine hull of a point set, described as a graph over ``coordinates``.

    Every point ``x`` of the hull is determined by ``x[coordinates]``;
    ``equalities`` cut the hull out of the ambient space.
    """

    dim: int
    coordinates: tuple[int, ...]
    equalities: tuple[tuple[tuple[int, ...], int], ...]


def affine_hull(points: Sequence[Sequence]) -> AffineHull:
    pts = [[to_fraction(v) for v in p] for p in points]
    if not pts:
        raise EmptyPolytopeError("empty point set")
    d = len(pts[0])
    origin = pts[0]
    diffs = [[v - o for v, o in zip(p, origin)] for p in pts[1:]]
    diffs = [r for r in diffs if any(r)]
    if diffs:
        basis, pivots = rref(diffs, d)
    else:
        basis, pivots = [], []
    eqs = []
    # Normals: kernel of the direction space.
    free = [c for c in range(d) if c not in set(pivots)]
    for f in free:
        vec = [Fraction(0)] * d
        vec[f] = Fraction(1)
        for row, p in zip(basis, pivots):
            vec[p] = -row[f]
        normal = primitive_integer_vector(vec)
        off = sum((Fraction(c) * v for c, v in zip(normal, origin)), Fraction(0))
        row = sign_normalized(primitive_integer_vector(list(normal) + [off]))
        eqs.append((tuple(row[:-1]), row[-1]))
    return AffineHull(len(pivots), tuple(pivots), tuple(sorted(eqs)))


def facets_from_vrep(v: VRep, order: str = "lex") -> HRep:
    """Minimal H-representation of ``conv(v)``.

    The inequalities are the facets, the equalities span the orthogonal
    complement of the affine hull.
    """
    if len(v) == 0:
        raise EmptyPolytopeError("no points")
    hull = affine_hull(v.points)
    k = hull.dim
    if k == 0:
        return HRep(v.dim, (), hull.equalities)
    cols = list(hull.coordinates)
    reduced = [[p[c] for c in cols] for p in v.points]
    rows = []
    for p in reduced:
        scale = lcm_of_denominators(p)
        rows.append([scale] + [int(x * scale) for x in p])
    rays, _ = extreme_rays(rows, order=order)
    ineqs = []
    for ray in rays:
        offset = int(ray[0])
        normal = [0] * v.dim
        for c, val in zip(cols, ray[1:]):
            normal[c] = -int(val)
        ineqs.append((normal, offset))
    return HRep(v.dim, ineqs, hull.equalities)


def _reduce_equalities(h: HRep):
    """Chart ``x = base + basis.T @ t`` of the equality subspace."""
    eq_rows = [list(n) for n, _ in h.equalities]
    eq_rhs = [o for _, o in h.equalities]
    try:
        base, basis, free = solve_affine(eq_rows, eq_rhs, h.dim)
    except ValueError:
        raise EmptyPolytopeError("equalities are inconsistent") from None
    return base, basis, free


def vertices_from_hrep(h: HRep, order: str = "lex") -> VRep:
    """Vertex set of a bounded polytope given by halfspaces."""
    base, basis, free = _reduce_equalities(h)
    k = len(free)
    if k == 0:
        if not h.contains(base):
            raise EmptyPolytopeError("the unique solution of the equalities violates an inequality")
        return VRep([base], h.dim)
    # Inequalities in chart coordinates: A' t <= b'.
    rows = []
    for normal, off in h.inequalities:
        coeffs = [sum((Fraction(n) * bv[j] for j, n in enumerate(normal) if n), Fraction(0)) for bv in basis]
        rhs = Fraction(off) - sum((Fraction(n) * base[j] for j, n in enumerate(normal) if n), Fraction(0))
        if not any(coeffs):
            if rhs < 0:
                raise EmptyPolytopeError("an inequality is violated on the whole affine subspace")
            continue
        # Cone row: rhs * tau - coeffs @ z >= 0.
        row = primitive_integer_vector([rhs] + [-c for c in coeffs])
        rows.append(list(row))
    rows.append([1] + [0] * k)
    try:
        rays, _ = extreme_rays(rows, order=order)
    except ConeError:
        _raise_empty_or_unbounded(h)
        raise
    verts = []
    for ray in rays:
        tau = int(ray[0])
        if tau == 0:
            raise UnboundedPolytopeError("halfspace system is unbounded")
        t = [Fraction(int(z), tau) for z in ray[1:]]
        x = [base[j] + sum((t[i] * basis[i][j] for i in range(k) if t[i]), Fraction(0)) for j in range(h.dim)]
        verts.append(x)
    if not verts:
        raise EmptyPolytopeError("halfspace system is infeasible")
    return VRep(verts, h.dim)


def _raise_empty_or_unbounded(h: HRep) -> None:
    try:
        lp.solve([0] * h.dim, *_lp_rows(h))
    except lp.InfeasibleError:
        raise EmptyPolytopeError("halfspace system is infeasible") from None
    raise UnboundedPolytopeError("halfspace system is unbounded (has a lineality space)")


def _lp_rows(h: HRep):
    A = [list(n) for n, _ in h.inequalities]
    b = [o for _, o in h.inequalities]
    E = [list(n) for n, _ in h.equalities]
    e = [o for _, o in h.equalities]
    return A, b, E, e


def lp_max(objective: Sequence, polytope: HRep | VRep) -> lp.LPResult:
    """Exact maximum of ``objective @ x`` over the polytope and a maximizer."""
    c = [to_fraction(v) for v in objective]
    if len(c) != polytope.dim:
        raise ValueError("objective dimension does not match the polytope")
    if isinstance(polytope, VRep):
        if len(polytope) == 0:
            raise lp.InfeasibleError("empty point set")
        best = None
        for p in polytope.points:
            val = sum((ci * pi for ci, pi in zip(c, p) if ci), Fraction(0))
            if best is None or val > best[0]:
                best = (val, p)
        return lp.LPResult(best[0], best[1])
    return lp.solve(c, *_lp_rows(polytope))


def member(x: Sequence, v: VRep) -> bool:
    """Whether ``x`` lies in ``conv(v)``, decided by an exact feasibility LP."""
    xf = _point_key(x)
    if len(xf) != v.dim:
        raise ValueError("dimension mismatch")
    if xf in set(v.points):
        return True
    if len(v) == 0:
        return False
    pts = v.points
    for j in range(v.dim):
        lo = min(p[j] for p in pts)
        hi = max(p[j] for p in pts)
        if not lo <= xf[j] <= hi:
            return False
    # lambda >= 0, sum lambda = 1, sum lambda_i p_i = x
    A = [[1] * len(pts)] + [[p[j] for p in pts] for j in range(v.dim)]
    b = [1] + list(xf)
    try:
        lp.solve_standard([0] * len(pts), A, b)
    except lp.InfeasibleError:
        return False
    return True


def _covered(a: VRep, b: VRep, method: str, lp_limit: int) -> bool:
    """Whether every point of ``a`` lies in ``conv(b)``."""
    known = set(b.points)
    rest = [p for p in a.points if p not in known]
    if not rest:
        return True
    if method == "lp" or (method == "auto" and len(rest) <= lp_limit):
        return all(member(p, b) for p in rest)
    # one exact facet enumeration of conv(b) replaces many feasibility LPs
    h = facets_from_vrep(b)
    return all(h.contains(p) for p in rest)


def polytope_equal(a: VRep, b: VRep, method: str = "auto", lp_limit: int = 16) -> bool:
    """Whether ``conv(a) == conv(b)``.

    Points shared literally by both sets are accepted without work. The
    rest are tested by exact LP membership (``method="lp"``), against the
    facets of the other hull (``method="hrep"``), or by LP when at most
    ``lp_limit`` points remain and facets otherwise (``"auto"``).
    """
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    if method not in ("auto", "lp", "hrep"):
        raise ValueError(f"unknown method {method!r}")
    return _covered(a, b, method, lp_limit) and _covered(b, a, method, lp_limit)


def contained_in(a: VRep, h: HRep) -> bool:
    """Whether every point of ``a`` satisfies ``h``."""
    return all(h.contains(p) for p in a.points)


def is_face_of(functional, h: HRep) -> bool:
    """Whether ``functional <= bound`` is valid on the polytope ``h``.

    ``functional`` is either a ``(normal, bound)`` pair or an object with
    ``coefficients`` and ``bound`` attributes.
    """
    if hasattr(functional, "coefficients"):
        normal, bound = functional.coefficients, functional.bound
    else:
        normal, bound = functional
    return lp_max(normal, h).value <= to_fraction(bound)


# -- plain-text cache format -------------------------------------------------
#
#   V n d                  H n d [e]
#   x_1 ... x_d            c_1 ... c_d b       (c @ x <= b; first n rows)
#   ...                    c_1 ... c_d b       (c @ x == b; last e rows)
#
# Entries are "num/den" rationals separated by whitespace.


def write_vrep(path, v: VRep) -> None:
    lines = [f"V {len(v)} {v.dim}"]
    lines += [" ".join(fraction_str(x) for x in p) for p in v.points]
    Path(path).write_text("\n".join(lines) + "\n")


def write_hrep(path, h: HRep) -> None:
    lines = [f"H {len(h.inequalities)} {h.dim} {len(h.equalities)}"]
    for normal, off in h.inequalities + h.equalities:
        lines.append(" ".join(f"{x}/1" for x in list(normal) + [off]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_polytope(path) -> VRep | HRep:
    text = Path(path).read_text().split("\n")
    header = text[0].split()
    kind, n, d = header[0], int(header[1]), int(header[2])
    rows = [[Fraction(t) for t in line.split()] for line in text[1:] if line.strip()]
    if kind == "V":
        if len(rows) != n:
            raise ValueError(f"expected {n} points, found {len(rows)}")
        return VRep(rows, d)
    if kind == "H":
        e = int(header[3]) if len(header) > 3 else 0
        if len(rows) != n + e:
            raise ValueError(f"expected {n + e} rows, found {len(rows)}")
        ineqs = [(r[:-1], r[-1]) for r in rows[:n]]
        eqs = [(r[:-1], r[-1]) for r in rows[n:]]
        return HRep(d, ineqs, eqs)
    raise ValueError(f"unknown polytope file kind {kind!r}")


def canonical_bytes(obj: VRep | HRep) -> bytes:
    """Deterministic serialization used for hashing and cache checks."""
    if isinstance(obj, VRep):
        body = [f"V {len(obj)} {obj.dim}"] + [" ".join(fraction_str(x) for x in p) for p in obj.points]
    else:
        body = [f"H {len(obj.inequalities)} {obj.dim} {len(obj.equalities)}"]
        body += [" ".join(map(str, list(n) + [o])) for n, o in obj.inequalities + obj.equalities]
    return ("\n".join(body) + "\n").encode()


def gcd_normalize(row: Sequence[int]) -> tuple[int, ...]:
    g = 0
    for v in row:
        g = math.gcd(g, int(v))
    return tuple(int(v) // g for v in row) if g > 1 else tuple(int(v) for v in row)
