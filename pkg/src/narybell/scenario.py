"""Bipartite Bell scenarios, correlation tables and linear Bell functionals.

Correlation tables are flat vectors. Entries are ordered by ``(x, y, a, b)``
lexicographically: all blocks ``P(., .|x, y)`` in order of the setting pair,
each block laid out row-major in ``(a, b)``.

Collins-Gisin (CG) coordinates parametrize the nonsignaling affine hull. Their
order is: Alice marginals ``P(a|x)`` for ``a < o_x - 1``, then Bob marginals
``P(b|y)`` for ``b < o_y - 1``, then joint entries ``P(a, b|x, y)`` with both
outcomes below the last one, ordered by ``(x, y, a, b)``.
"""
from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from ._exact import fraction_str, to_fraction

BOUND_KINDS = ("binary", "nary", "nonsignaling", "reference", "facet")


class ScenarioError(ValueError):
    pass


class NormalizationError(ValueError):
    """A correlation table does not sum to one for some setting pair."""


@dataclass(frozen=True)
class Scenario:
    """Outcome counts per measurement setting, for Alice and for Bob."""

    alice: tuple[int, ...]
    bob: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "alice", tuple(int(o) for o in self.alice))
        object.__setattr__(self, "bob", tuple(int(o) for o in self.bob))
        if not self.alice or not self.bob:
            raise ScenarioError("each party needs at least one setting")
        if min(self.alice + self.bob) < 2:
            raise ScenarioError("every setting needs at least two outcomes")

    @classmethod
    def parse(cls, text: str) -> "Scenario":
        """Parse the ``"[2,3|2,2,2]"`` notation (brackets optional)."""
        m = re.fullmatch(r"\s*[\[<]?\s*([\d,\s]+)\|([\d,\s]+)[\]>]?\s*", text)
        if not m:
            raise ScenarioError(f"cannot parse scenario {text!r}")
        try:
            alice = [int(v) for v in m.group(1).split(",") if v.strip()]
            bob = [int(v) for v in m.group(2).split(",") if v.strip()]
        except ValueError:
            raise ScenarioError(f"cannot parse scenario {text!r}") from None
        return cls(tuple(alice), tuple(bob))

    def __str__(self) -> str:
        return "[" + ",".join(map(str, self.alice)) + "|" + ",".join(map(str, self.bob)) + "]"

    def swapped(self) -> "Scenario":
        return Scenario(self.bob, self.alice)

    @property
    def n_x(self) -> int:
        return len(self.alice)

    @property
    def n_y(self) -> int:
        return len(self.bob)

    @cached_property
    def offsets(self) -> dict[tuple[int, int], int]:
        out, pos = {}, 0
        for x, oa in enumerate(self.alice):
            for y, ob in enumerate(self.bob):
                out[x, y] = pos
                pos += oa * ob
        return out

    @property
    def size(self) -> int:
        return sum(self.alice) * sum(self.bob)

    def index(self, a: int, b: int, x: int, y: int) -> int:
        if not (0 <= x < self.n_x and 0 <= y < self.n_y):
            raise ScenarioError(f"setting pair ({x}, {y}) outside {self}")
        if not (0 <= a < self.alice[x] and 0 <= b < self.bob[y]):
            raise ScenarioError(f"outcomes ({a}, {b}) outside setting pair ({x}, {y}) of {self}")
        return self.offsets[x, y] + a * self.bob[y] + b

    @cached_property
    def keys(self) -> tuple[tuple[int, int, int, int], ...]:
        """``(a, b, x, y)`` for every flat position, in flat order."""
        return tuple(
            (a, b, x, y)
            for x, oa in enumerate(self.alice)
            for y, ob in enumerate(self.bob)
            for a in range(oa)
            for b in range(ob)
        )

    @property
    def cg_dim(self) -> int:
        da = sum(o - 1 for o in self.alice)
        db = sum(o - 1 for o in self.bob)
        return da * db + da + db

    @cached_property
    def cg_maps(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Integer matrices ``(M, p0, C)`` of the CG chart.

        ``P = M @ theta + p0`` for every nonsignaling normalized table and
        ``theta = C @ P`` reads the coordinates back (marginals taken from
        the ``y = 0`` and ``x = 0`` blocks).
        """
        d = self.cg_dim
        N = self.size
        amarg = {}
        bmarg = {}
        joint = {}
        pos = 0
        for x, oa in enumerate(self.alice):
            for a in range(oa - 1):
                amarg[a, x] = pos
                pos += 1
        for y, ob in enumerate(self.bob):
            for b in range(ob - 1):
                bmarg[b, y] = pos
                pos += 1
        for x, oa in enumerate(self.alice):
            for y, ob in enumerate(self.bob):
                for a in range(oa - 1):
                    for b in range(ob - 1):
                        joint[a, b, x, y] = pos
                        pos += 1
        M = np.zeros((N, d), dtype=np.int64)
        p0 = np.zeros(N, dtype=np.int64)
        C = np.zeros((d, N), dtype=np.int64)
        for i, (a, b, x, y) in enumerate(self.keys):
            la, lb = self.alice[x] - 1, self.bob[y] - 1
            if a < la and b < lb:
                M[i, joint[a, b, x, y]] = 1
            elif a < la:
                M[i, amarg[a, x]] = 1
                for bb in range(lb):
                    M[i, joint[a, bb, x, y]] -= 1
            elif b < lb:
                M[i, bmarg[b, y]] = 1
                for aa in range(la):
                    M[i, joint[aa, b, x, y]] -= 1
            else:
                p0[i] = 1
                for aa in range(la):
                    M[i, amarg[aa, x]] -= 1
                for bb in range(lb):
                    M[i, bmarg[bb, y]] -= 1
                for aa in range(la):
                    for bb in range(lb):
                        M[i, joint[aa, bb, x, y]] += 1
        for (a, x), j in amarg.items():
            for b in range(self.bob[0]):
                C[j, self.index(a, b, x, 0)] = 1
        for (b, y), j in bmarg.items():
            for a in range(self.alice[0]):
                C[j, self.index(a, b, 0, y)] = 1
        for (a, b, x, y), j in joint.items():
            C[j, self.index(a, b, x, y)] = 1
        return M, p0, C

    def to_cg(self, values) -> np.ndarray:
        """CG coordinates of a table (exact if the table is exact)."""
        _, _, C = self.cg_maps
        arr = np.asarray(values)
        if arr.dtype == object:
            return C.astype(object) @ arr
        return C @ arr

    def from_cg(self, theta) -> np.ndarray:
        M, p0, _ = self.cg_maps
        arr = np.asarray(theta)
        if arr.dtype == object:
            return M.astype(object) @ arr + p0.astype(object)
        return M @ arr + p0


def _exact_vector(values, size: int) -> np.ndarray:
    arr = np.empty(size, dtype=object)
    vals = list(values)
    if len(vals) != size:
        raise ValueError(f"expected {size} entries, got {len(vals)}")
    for i, v in enumerate(vals):
        arr[i] = to_fraction(v)
    return arr


@dataclass(frozen=True, eq=False)
class CorrelationVector:
    """A table ``P(a, b|x, y)`` in flat order.

    ``values`` holds Fractions (exact) or float64 (quantum output).
    """

    scenario: Scenario
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.shape != (self.scenario.size,):
            raise ValueError(f"table of shape {vals.shape} does not fit {self.scenario}")
        if vals.dtype != object:
            vals = vals.astype(np.float64)
        object.__setattr__(self, "values", vals)

    @classmethod
    def exact(cls, scenario: Scenario, values) -> "CorrelationVector":
        return cls(scenario, _exact_vector(values, scenario.size))

    @classmethod
    def from_function(cls, scenario: Scenario, func) -> "CorrelationVector":
        """Build from ``func(a, b, x, y)`` returning exact values."""
        return cls.exact(scenario, [func(*k) for k in scenario.keys])

    @classmethod
    def uniform(cls, scenario: Scenario) -> "CorrelationVector":
        return cls.from_function(
            scenario, lambda a, b, x, y: Fraction(1, scenario.alice[x] * scenario.bob[y])
        )

    @property
    def is_exact(self) -> bool:
        return self.values.dtype == object

    def __getitem__(self, key) -> Fraction | float:
        a, b, x, y = key
        return self.values[self.scenario.index(a, b, x, y)]

    def block(self, x: int, y: int) -> np.ndarray:
        s = self.scenario
        off = s.offsets[x, y]
        return self.values[off: off + s.alice[x] * s.bob[y]].reshape(s.alice[x], s.bob[y])

    def alice_marginal(self, x: int, y: int) -> np.ndarray:
        return self.block(x, y).sum(axis=1)

    def bob_marginal(self, x: int, y: int) -> np.ndarray:
        return self.block(x, y).sum(axis=0)

    def normalization_residual(self) -> float:
        s = self.scenario
        worst = 0
        for x, y in itertools.product(range(s.n_x), range(s.n_y)):
            worst = max(worst, abs(self.block(x, y).sum() - 1))
        return worst

    def signaling_residual(self) -> float:
        """Largest marginal discrepancy between settings of the other party."""
        s = self.scenario
        worst = 0
        for x in range(s.n_x):
            ref = self.alice_marginal(x, 0)
            for y in range(1, s.n_y):
                worst = max(worst, max(abs(v) for v in self.alice_marginal(x, y) - ref))
        for y in range(s.n_y):
            ref = self.bob_marginal(0, y)
            for x in range(1, s.n_x):
                worst = max(worst, max(abs(v) for v in self.bob_marginal(x, y) - ref))
        return worst

    def cg(self) -> np.ndarray:
        return self.scenario.to_cg(self.values)

    def mix(self, other: "CorrelationVector", weight) -> "CorrelationVector":
        """``weight * self + (1 - weight) * other``."""
        if other.scenario != self.scenario:
            raise ScenarioError("scenario mismatch")
        if self.is_exact and other.is_exact:
            w = to_fraction(weight)
        else:
            w = float(weight)
        return CorrelationVector(self.scenario, w * self.values + (1 - w) * other.values)

    def to_json(self) -> dict:
        if self.is_exact:
            vals = [fraction_str(v) for v in self.values]
        else:
            vals = [float(v) for v in self.values]
        return {"scenario": str(self.scenario), "order": "x,y,a,b", "values": vals}

    @classmethod
    def from_json(cls, data: Mapping) -> "CorrelationVector":
        scenario = Scenario.parse(data["scenario"])
        vals = data["values"]
        if all(isinstance(v, str) or isinstance(v, int) for v in vals):
            return cls.exact(scenario, vals)
        return cls(scenario, np.array(vals, dtype=np.float64))

    def __eq__(self, other) -> bool:
        if not isinstance(other, CorrelationVector):
            return NotImplemented
        return self.scenario == other.scenario and bool(np.all(self.values == other.values))

    def __hash__(self):
        return hash((self.scenario, tuple(self.values.tolist())))


def is_nonsignaling(p: CorrelationVector, tol: float = 0.0) -> bool:
    """Exact nonsignaling test (or within ``tol`` for float tables).

    Raises :class:`NormalizationError` when some block does not sum to one.
    """
    if p.normalization_residual() > tol:
        raise NormalizationError(f"table is not normalized (residual {p.normalization_residual()})")
    return p.signaling_residual() <= tol


def deterministic_point(scenario: Scenario, alice_assignment: Iterable[int], bob_assignment: Iterable[int]) -> CorrelationVector:
    """The local deterministic table with fixed outcomes per setting."""
    aa = tuple(int(v) for v in alice_assignment)
    bb = tuple(int(v) for v in bob_assignment)
    if len(aa) != scenario.n_x or len(bb) != scenario.n_y:
        raise ScenarioError("one outcome per setting is required")
    for o, n in zip(aa + bb, scenario.alice + scenario.bob):
        if not 0 <= o < n:
            raise ScenarioError(f"outcome {o} out of range for a {n}-outcome setting")
    return CorrelationVector.from_function(
        scenario, lambda a, b, x, y: Fraction(int(a == aa[x] and b == bb[y]))
    )


def deterministic_points(scenario: Scenario) -> list[CorrelationVector]:
    out = []
    for aa in itertools.product(*(range(o) for o in scenario.alice)):
        for bb in itertools.product(*(range(o) for o in scenario.bob)):
            out.append(deterministic_point(scenario, aa, bb))
    return out


@dataclass(frozen=True, eq=False)
class BellFunctional:
    """Linear functional on correlation tables plus a claimed bound.

    The inequality reads ``sum(coefficients * P) <= bound``.
    """

    scenario: Scenario
    coefficients: np.ndarray
    bound: Fraction = Fraction(0)
    bound_kind: str = "reference"
    name: str = field(default="", compare=False)

    def __post_init__(self):
        coeffs = _exact_vector(self.coefficients, self.scenario.size)
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "bound", to_fraction(self.bound))
        kind = self.bound_kind.split(":")[0]
        if kind not in BOUND_KINDS:
            raise ValueError(f"unknown bound kind {self.bound_kind!r}")

    @classmethod
    def from_terms(
        cls,
        scenario: Scenario,
        joint: Mapping[tuple[int, int, int, int], object] = (),
        alice_marginals: Mapping[tuple[int, int], object] = (),
        bob_marginals: Mapping[tuple[int, int], object] = (),
        bound=0,
        bound_kind: str = "reference",
        name: str = "",
    ) -> "BellFunctional":
        """Assemble from joint terms ``{(a, b, x, y): c}`` and marginal terms.

        Alice marginals ``{(a, x): c}`` are expanded on Bob's ``y = 0`` block
        and Bob marginals ``{(b, y): c}`` on Alice's ``x = 0`` block.
        """
        coeffs = [Fraction(0)] * scenario.size
        for (a, b, x, y), c in dict(joint).items():
            coeffs[scenario.index(a, b, x, y)] += to_fraction(c)
        for (a, x), c in dict(alice_marginals).items():
            for b in range(scenario.bob[0]):
                coeffs[scenario.index(a, b, x, 0)] += to_fraction(c)
        for (b, y), c in dict(bob_marginals).items():
            for a in range(scenario.alice[0]):
                coeffs[scenario.index(a, b, 0, y)] += to_fraction(c)
        return cls(scenario, np.array(coeffs, dtype=object), bound, bound_kind, name)

    def __getitem__(self, key) -> Fraction:
        a, b, x, y = key
        return self.coefficients[self.scenario.index(a, b, x, y)]

    def evaluate(self, p: CorrelationVector):
        return evaluate(self, p)

    def cg_form(self) -> tuple[np.ndarray, Fraction]:
        """``(h, c)`` with ``h @ theta <= c`` equivalent on the NS affine hull."""
        M, p0, _ = self.scenario.cg_maps
        h = M.T.astype(object) @ self.coefficients
        const = sum((int(v) * c for v, c in zip(p0, self.coefficients)), Fraction(0))
        return h, self.bound - const

    @classmethod
    def from_cg(cls, scenario: Scenario, h, c, bound_kind: str = "reference", name: str = "") -> "BellFunctional":
        """Expand a CG inequality into the canonical full-table layout."""
        _, _, C = scenario.cg_maps
        coeffs = C.T.astype(object) @ np.array([to_fraction(v) for v in h], dtype=object)
        return cls(scenario, coeffs, to_fraction(c), bound_kind, name)

    def canonical_expansion(self) -> "BellFunctional":
        """The NS-equivalent functional supported on CG entries only."""
        h, c = self.cg_form()
        return BellFunctional.from_cg(self.scenario, h, c, self.bound_kind, self.name)

    def with_bound(self, bound, bound_kind: str | None = None) -> "BellFunctional":
        return BellFunctional(self.scenario, self.coefficients, bound, bound_kind or self.bound_kind, self.name)

    def terms(self) -> dict[tuple[int, int, int, int], Fraction]:
        return {k: c for k, c in zip(self.scenario.keys, self.coefficients) if c != 0}

    def to_json(self) -> dict:
        return {
            "scenario": str(self.scenario),
            "order": "x,y,a,b",
            "coefficients": [fraction_str(v) for v in self.coefficients],
            "bound": fraction_str(self.bound),
            "bound_kind": self.bound_kind,
            "name": self.name,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "BellFunctional":
        return cls(
            Scenario.parse(data["scenario"]),
            np.array([to_fraction(v) for v in data["coefficients"]], dtype=object),
            to_fraction(data.get("bound", 0)),
            data.get("bound_kind", "reference"),
            data.get("name", ""),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, BellFunctional):
            return NotImplemented
        return (
            self.scenario == other.scenario
            and self.bound == other.bound
            and bool(np.all(self.coefficients == other.coefficients))
        )

    def __hash__(self):
        return hash((self.scenario, self.bound, tuple(self.coefficients.tolist())))


def evaluate(f: BellFunctional, p: CorrelationVector):
    if f.scenario != p.scenario:
        raise ScenarioError(f"functional on {f.scenario} cannot evaluate a table on {p.scenario}")
    if p.is_exact:
        return sum((c * v for c, v in zip(f.coefficients, p.values) if c != 0), Fraction(0))
    return float(np.dot(f.coefficients.astype(np.float64), p.values))


def dumps(obj) -> str:
    return json.dumps(obj.to_json(), indent=2)


def ns_hrep(scenario: Scenario):
    """Halfspace description of the nonsignaling polytope in table coordinates.

    Positivity of every entry, one normalization per setting pair, and the
    marginal equalities tying every setting of the other party to setting 0.
    """
    from .polytope import HRep

    N = scenario.size
    ineqs = []
    for i in range(N):
        row = [0] * N
        row[i] = -1
        ineqs.append((row, 0))
    eqs = []
    for (x, y), off in scenario.offsets.items():
        row = [0] * N
        for j in range(scenario.alice[x] * scenario.bob[y]):
            row[off + j] = 1
        eqs.append((row, 1))
    for x, oa in enumerate(scenario.alice):
        for a in range(oa):
            for y in range(1, scenario.n_y):
                row = [0] * N
                for b in range(scenario.bob[y]):
                    row[scenario.index(a, b, x, y)] += 1
                for b in range(scenario.bob[0]):
                    row[scenario.index(a, b, x, 0)] -= 1
                eqs.append((row, 0))
    for y, ob in enumerate(scenario.bob):
        for b in range(ob):
            for x in range(1, scenario.n_x):
                row = [0] * N
                for a in range(scenario.alice[x]):
                    row[scenario.index(a, b, x, y)] += 1
                for a in range(scenario.alice[0]):
                    row[scenario.index(a, b, 0, y)] -= 1
                eqs.append((row, 0))
    return HRep(N, ineqs, eqs, sort=False)


def ns_cg_hrep(scenario: Scenario):
    """The nonsignaling polytope as positivity constraints in CG coordinates."""
    from .polytope import HRep

    M, p0, _ = scenario.cg_maps
    # -(M theta + p0) <= 0
    ineqs = [([-int(v) for v in M[i]], int(p0[i])) for i in range(scenario.size)]
    return HRep(scenario.cg_dim, ineqs, sort=False)
