"""Relabelings of Bell scenarios and canonical forms of Bell functionals.

A relabeling permutes the settings of each party (only among settings with
equal outcome counts), permutes the outcomes of every setting, and may
exchange the parties when both have the same outcome tuple. Functionals are
compared in CG form, so two functionals that agree on the nonsignaling
affine hull are treated as identical.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np

from .scenario import BellFunctional, Scenario, ScenarioError

Perm = tuple[int, ...]


def _is_perm(p: Sequence[int], n: int) -> bool:
    return sorted(p) == list(range(n))


def _inverse(p: Perm) -> Perm:
    out = [0] * len(p)
    for i, v in enumerate(p):
        out[v] = i
    return tuple(out)


@dataclass(frozen=True)
class PartyRelabeling:
    """``settings[x]`` is the new label of setting ``x``; ``outcomes[x][a]``
    the new label of outcome ``a`` of (old) setting ``x``."""

    settings: Perm
    outcomes: tuple[Perm, ...]

    @classmethod
    def identity(cls, outs: Sequence[int]) -> "PartyRelabeling":
        return cls(tuple(range(len(outs))), tuple(tuple(range(o)) for o in outs))

    def check(self, outs: Sequence[int]) -> None:
        n = len(outs)
        if not _is_perm(self.settings, n) or len(self.outcomes) != n:
            raise ScenarioError("setting permutation is not a bijection")
        for x, o in enumerate(outs):
            if outs[self.settings[x]] != o:
                raise ScenarioError("settings may only be exchanged with equal outcome counts")
            if not _is_perm(self.outcomes[x], o):
                raise ScenarioError(f"outcome permutation of setting {x} is not a bijection")

    def then(self, other: "PartyRelabeling") -> "PartyRelabeling":
        """Apply ``self`` first, then ``other``."""
        settings = tuple(other.settings[s] for s in self.settings)
        outcomes = tuple(
            tuple(other.outcomes[self.settings[x]][v] for v in perm) for x, perm in enumerate(self.outcomes)
        )
        return PartyRelabeling(settings, outcomes)

    def inverse(self) -> "PartyRelabeling":
        inv = _inverse(self.settings)
        return PartyRelabeling(inv, tuple(_inverse(self.outcomes[inv[x]]) for x in range(len(inv))))


@dataclass(frozen=True)
class Relabeling:
    """Local relabeling of both parties, followed by an optional party swap."""

    alice: PartyRelabeling
    bob: PartyRelabeling
    party_swap: bool = False

    @classmethod
    def identity(cls, s: Scenario) -> "Relabeling":
        return cls(PartyRelabeling.identity(s.alice), PartyRelabeling.identity(s.bob))

    def check(self, s: Scenario) -> None:
        self.alice.check(s.alice)
        self.bob.check(s.bob)
        if self.party_swap and s.alice != s.bob:
            raise ScenarioError(f"party swap needs equal parties, got {s}")

    def compose(self, other: "Relabeling") -> "Relabeling":
        """``self ∘ other``: apply ``other`` first."""
        # swap^s L_g swap^t L_h = swap^(s^t) (swap^t L_g swap^t) L_h
        ga, gb = (self.bob, self.alice) if other.party_swap else (self.alice, self.bob)
        return Relabeling(other.alice.then(ga), other.bob.then(gb), self.party_swap != other.party_swap)

    def inverse(self) -> "Relabeling":
        ia, ib = self.alice.inverse(), self.bob.inverse()
        if self.party_swap:
            ia, ib = ib, ia
        return Relabeling(ia, ib, self.party_swap)

    def index_map(self, s: Scenario) -> np.ndarray:
        """``dest`` with ``new_table[dest[i]] = old_table[i]``."""
        self.check(s)
        dest = np.empty(s.size, dtype=np.int64)
        for i, (a, b, x, y) in enumerate(s.keys):
            a2, x2 = self.alice.outcomes[x][a], self.alice.settings[x]
            b2, y2 = self.bob.outcomes[y][b], self.bob.settings[y]
            if self.party_swap:
                a2, b2, x2, y2 = b2, a2, y2, x2
            dest[i] = s.index(a2, b2, x2, y2)
        return dest


def _party_group(outs: tuple[int, ...]) -> list[PartyRelabeling]:
    setting_perms = [
        p for p in itertools.permutations(range(len(outs))) if all(outs[p[x]] == outs[x] for x in range(len(outs)))
    ]
    outcome_choices = list(itertools.product(*(list(itertools.permutations(range(o))) for o in outs)))
    return [PartyRelabeling(sp, oc) for sp in setting_perms for oc in outcome_choices]


def group_order(s: Scenario, party_swap: bool = True) -> int:
    def party(outs):
        counts: dict[int, int] = {}
        for o in outs:
            counts[o] = counts.get(o, 0) + 1
        return math.prod(math.factorial(c) for c in counts.values()) * math.prod(math.factorial(o) for o in outs)

    swap = 2 if party_swap and s.alice == s.bob else 1
    return party(s.alice) * party(s.bob) * swap


def iter_group(s: Scenario, party_swap: bool = True) -> Iterator[Relabeling]:
    """All relabelings of ``s`` (party swap only where the scenario allows it)."""
    swaps = (False, True) if party_swap and s.alice == s.bob else (False,)
    ga, gb = _party_group(s.alice), _party_group(s.bob)
    for sw in swaps:
        for ra in ga:
            for rb in gb:
                yield Relabeling(ra, rb, sw)


@lru_cache(maxsize=16)
def _gather_maps(s: Scenario, party_swap: bool) -> np.ndarray:
    """Rows ``src`` with ``new_table = old_table[src]``, one per group element."""
    rows = []
    for g in iter_group(s, party_swap):
        dest = g.index_map(s)
        src = np.empty_like(dest)
        src[dest] = np.arange(s.size)
        rows.append(src)
    return np.array(rows, dtype=np.int64)


def apply_relabeling(g: Relabeling, f: BellFunctional) -> BellFunctional:
    """Relabeled functional; its value on relabeled tables equals the original."""
    dest = g.index_map(f.scenario)
    coeffs = np.empty(f.scenario.size, dtype=object)
    coeffs[dest] = f.coefficients
    return BellFunctional(f.scenario, coeffs, f.bound, f.bound_kind, f.name)


def relabel_table(g: Relabeling, values: np.ndarray, s: Scenario) -> np.ndarray:
    dest = g.index_map(s)
    out = np.empty_like(np.asarray(values))
    out[dest] = values
    return out


# -- canonical forms -----------------------------------------------------------


def _integer_form(coefficients: np.ndarray, bound) -> tuple[np.ndarray, int]:
    vals = [Fraction(v) for v in coefficients] + [Fraction(bound)]
    scale = 1
    for v in vals:
        scale = math.lcm(scale, v.denominator)
    ints = [int(v * scale) for v in vals]
    return np.array(ints[:-1], dtype=object), ints[-1]


def _normalized_rows(H: np.ndarray, c: np.ndarray) -> np.ndarray:
    rows = np.concatenate([H, c[:, None]], axis=1)
    if rows.dtype == object:
        out = rows.copy()
        for i in range(len(out)):
            g = 0
            for v in out[i]:
                g = math.gcd(g, int(v))
            if g > 1:
                out[i] = [int(v) // g for v in out[i]]
        return out
    g = np.gcd.reduce(rows, axis=1)
    g[g == 0] = 1
    return rows // g[:, None]


def _orbit_rows(coefficients: np.ndarray, bound, s: Scenario, party_swap: bool) -> np.ndarray:
    """Normalized CG rows ``(h, c)`` of every relabeled copy, one per group element."""
    f, b = _integer_form(coefficients, bound)
    M, p0, _ = s.cg_maps
    src = _gather_maps(s, party_swap)
    big = max((abs(int(v)) for v in f), default=0) * s.size
    if big < 2**40 and abs(b) < 2**40:
        F = f.astype(np.int64)[src]
        H = F @ M
        c = b - F @ p0
    else:
        F = f[src]
        H = F @ M.astype(object)
        c = b - F @ p0.astype(object)
    return _normalized_rows(H, c)


def _lexmin(rows: np.ndarray) -> tuple[int, ...]:
    return min(tuple(int(v) for v in r) for r in rows)


def canonical_key(f: BellFunctional, party_swap: bool = True) -> tuple[int, ...]:
    """Lexicographically smallest normalized CG row ``(h, c)`` over the orbit."""
    return _lexmin(_orbit_rows(f.coefficients, f.bound, f.scenario, party_swap))


def cg_key(f: BellFunctional) -> tuple[int, ...]:
    """Normalized CG row of ``f`` itself."""
    h, c = f.cg_form()
    row = _normalized_rows(*_as_cg_ints(h, c))
    return tuple(int(v) for v in row[0])


def _as_cg_ints(h, c):
    ints, last = _integer_form(h, c)
    return np.array([ints], dtype=object), np.array([last], dtype=object)


def _cg_table(s: Scenario, key: Sequence[int]) -> np.ndarray:
    _, _, C = s.cg_maps
    return C.T.astype(object) @ np.array([int(v) for v in key[:-1]], dtype=object)


def from_key(s: Scenario, key: Sequence[int], bound_kind: str = "reference", name: str = "") -> BellFunctional:
    return BellFunctional.from_cg(s, key[:-1], key[-1], bound_kind, name)


def canonical_form(f: BellFunctional, party_swap: bool = True) -> BellFunctional:
    """Orbit representative; equivalent functionals give identical results.

    The result is expanded on CG entries and scaled to coprime integers, so
    the bound is rescaled together with the coefficients.
    """
    return from_key(f.scenario, canonical_key(f, party_swap), f.bound_kind, f.name)


def equivalent(f: BellFunctional, g: BellFunctional, party_swap: bool = True) -> bool:
    if f.scenario != g.scenario:
        return False
    return canonical_key(f, party_swap) == canonical_key(g, party_swap)


@dataclass
class Orbit:
    canonical: BellFunctional
    multiplicity: int
    members: list[int]

    @property
    def key(self) -> tuple[int, ...]:
        return cg_key(self.canonical)


def orbit_classify(fs: Iterable[BellFunctional], party_swap: bool = True) -> list[Orbit]:
    """Group functionals by canonical form, sorted by canonical key."""
    fs = list(fs)
    if not fs:
        return []
    s = fs[0].scenario
    if any(f.scenario != s for f in fs):
        raise ScenarioError("all functionals must share a scenario")
    by_key: dict[tuple, list[int]] = {}
    for i, f in enumerate(fs):
        by_key.setdefault(cg_key(f), []).append(i)
    assigned: dict[tuple, tuple] = {}
    groups: dict[tuple, list[int]] = {}
    for key in by_key:
        if key in assigned:
            continue
        rows = _orbit_rows(_cg_table(s, key), key[-1], s, party_swap)
        orbit = {tuple(int(v) for v in r) for r in rows}
        canon = min(orbit)
        members = groups.setdefault(canon, [])
        for k in orbit:
            if k in by_key and k not in assigned:
                assigned[k] = canon
                members.extend(by_key[k])
    out = []
    for canon in sorted(groups):
        members = sorted(groups[canon])
        f0 = fs[members[0]]
        out.append(Orbit(from_key(s, canon, f0.bound_kind, f0.name), len(members), members))
    return out


def facet_functionals(h, s: Scenario, bound_kind: str = "facet") -> list[BellFunctional]:
    """Inequalities of an HRep in CG coordinates of ``s`` as functionals."""
    if h.dim != s.cg_dim:
        raise ValueError("HRep is not in the CG coordinates of the scenario")
    if h.equalities:
        raise ValueError("facet functionals need a full-dimensional polytope")
    return [BellFunctional.from_cg(s, n, b, bound_kind) for n, b in h.inequalities]


def orbit_report(h, s: Scenario, party_swap: bool = True) -> list[dict]:
    """Orbit table of the facets of ``h`` with the face-of-NS test per orbit."""
    from .polytope import lp_max
    from .scenario import ns_cg_hrep

    ns = ns_cg_hrep(s)
    out = []
    for orb in orbit_classify(facet_functionals(h, s), party_swap):
        key = orb.key
        value = lp_max(key[:-1], ns).value
        out.append(
            {
                "cg_coefficients": [int(v) for v in key[:-1]],
                "bound": int(key[-1]),
                "coefficients": [str(v) for v in orb.canonical.coefficients],
                "multiplicity": orb.multiplicity,
                "ns_max": str(value),
                "face_of_ns": bool(value <= key[-1]),
            }
        )
    return out
