"""Restricted polytopes built by local classical postprocessing.

A deterministic wiring assigns every target setting of one party a source
setting of the base scenario and a map from source outcomes to target
outcomes. Shared randomness is accounted for by taking convex hulls.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

from .polytope import VRep, vertices_from_hrep
from .scenario import CorrelationVector, Scenario, ScenarioError, ns_cg_hrep

log = logging.getLogger(__name__)

PARTIES = ("A", "B")


@dataclass(frozen=True)
class DeterministicWiring:
    """Per target setting: ``(source_setting, outcome_map)``."""

    party: str
    choices: tuple[tuple[int, tuple[int, ...]], ...]
    target_outcomes: tuple[int, ...]

    def __post_init__(self):
        if self.party not in PARTIES:
            raise ValueError(f"party must be one of {PARTIES}")
        if len(self.choices) != len(self.target_outcomes):
            raise ValueError("one choice per target setting is required")
        for (_, fmap), o in zip(self.choices, self.target_outcomes):
            if any(not 0 <= v < o for v in fmap):
                raise ValueError("outcome map leaves the target outcome range")

    @classmethod
    def identity(cls, party: str, outcomes: tuple[int, ...]) -> "DeterministicWiring":
        return cls(party, tuple((x, tuple(range(o))) for x, o in enumerate(outcomes)), tuple(outcomes))

    def check_source(self, source_outcomes: tuple[int, ...]) -> None:
        for x, fmap in self.choices:
            if not 0 <= x < len(source_outcomes):
                raise ScenarioError(f"source setting {x} does not exist")
            if len(fmap) != source_outcomes[x]:
                raise ScenarioError(f"outcome map for source setting {x} is not total")


def _party_outcomes(s: Scenario, party: str) -> tuple[int, ...]:
    return s.alice if party == "A" else s.bob


def setting_options(source: tuple[int, ...], target_o: int) -> list[tuple[int, tuple[int, ...]]]:
    return [
        (x, fmap)
        for x, o in enumerate(source)
        for fmap in itertools.product(range(target_o), repeat=o)
    ]


def wiring_count(s: Scenario, s_target: Scenario, party: str) -> int:
    src = _party_outcomes(s, party)
    return math.prod(sum(o_t ** o for o in src) for o_t in _party_outcomes(s_target, party))


def iter_wirings(s: Scenario, s_target: Scenario, party: str) -> Iterator[DeterministicWiring]:
    src = _party_outcomes(s, party)
    tgt = _party_outcomes(s_target, party)
    per = [setting_options(src, o) for o in tgt]
    for combo in itertools.product(*per):
        yield DeterministicWiring(party, tuple(combo), tgt)


def enumerate_wirings(s: Scenario, s_target: Scenario, party: str, limit: int | None = None) -> list[DeterministicWiring]:
    """All deterministic wirings of one party (optionally only the first ``limit``)."""
    return list(itertools.islice(iter_wirings(s, s_target, party), limit))


def apply_wiring(p: CorrelationVector, wa: DeterministicWiring, wb: DeterministicWiring) -> CorrelationVector:
    """Coarse-grain ``p`` through Alice's and Bob's wirings."""
    if wa.party != "A" or wb.party != "B":
        raise ValueError("expected an Alice wiring and a Bob wiring")
    s = p.scenario
    wa.check_source(s.alice)
    wb.check_source(s.bob)
    target = Scenario(wa.target_outcomes, wb.target_outcomes)
    zero = Fraction(0) if p.is_exact else 0.0
    out = [zero] * target.size
    for xt, (xs, fa) in enumerate(wa.choices):
        for yt, (ys, fb) in enumerate(wb.choices):
            block = p.block(xs, ys)
            for a in range(s.alice[xs]):
                for b in range(s.bob[ys]):
                    out[target.index(fa[a], fb[b], xt, yt)] += block[a, b]
    if p.is_exact:
        return CorrelationVector.exact(target, out)
    return CorrelationVector(target, np.array(out, dtype=np.float64))


# -- vectorized image computation --------------------------------------------


def swap_permutation(s: Scenario) -> np.ndarray:
    """``perm`` with ``table_swapped = table[perm]`` (parties exchanged)."""
    t = s.swapped()
    return np.array([s.index(a, b, x, y) for (b, a, y, x) in t.keys], dtype=np.int64)


def _unique_rows(arr: np.ndarray) -> np.ndarray:
    if len(arr) <= 1:
        return arr
    arr = np.ascontiguousarray(arr)
    view = arr.view(np.dtype((np.void, arr.dtype.itemsize * arr.shape[1]))).ravel()
    _, idx = np.unique(view, return_index=True)
    return arr[np.sort(idx)]


def _alice_options(points: np.ndarray, s: Scenario, target_alice: tuple[int, ...]):
    """Per target setting, the stacked blocks ``F @ P(.,.|x,y)`` for every choice.

    Returns a list over target settings of arrays shaped
    ``(n_points, n_choices, o_target * sum(bob))`` laid out as ``(y, a', b)``.
    """
    n = len(points)
    sum_b = sum(s.bob)
    per_setting = []
    for ot in target_alice:
        opts = []
        for x, fmap in setting_options(s.alice, ot):
            F = np.zeros((ot, s.alice[x]), dtype=points.dtype)
            F[list(fmap), range(s.alice[x])] = 1
            blocks = []
            for y, ob in enumerate(s.bob):
                off = s.offsets[x, y]
                blk = points[:, off: off + s.alice[x] * ob].reshape(n, s.alice[x], ob)
                blocks.append(np.einsum("ta,nab->ntb", F, blk).reshape(n, ot * ob))
            opts.append(np.concatenate(blocks, axis=1))
        per_setting.append(np.stack(opts, axis=1))
    assert all(o.shape[2] == ot * sum_b for o, ot in zip(per_setting, target_alice))
    return per_setting


def _wire_alice(points: np.ndarray, s: Scenario, target_alice: tuple[int, ...], chunk: int = 2_000_000) -> np.ndarray:
    """Deduplicated images of ``points`` under every Alice wiring.

    The target layout is ``(x', y, a', b)``, i.e. the flat order of
    ``Scenario(target_alice, s.bob)``.
    """
    options = _alice_options(points, s, target_alice)
    seen: list[np.ndarray] = []
    pending: list[np.ndarray] = []
    pending_rows = 0
    for i in range(len(points)):
        per = [_unique_rows(opt[i]) for opt in options]
        sizes = [len(o) for o in per]
        grids = np.meshgrid(*[np.arange(k) for k in sizes], indexing="ij")
        combos = np.concatenate([per[j][grids[j].ravel()] for j in range(len(per))], axis=1)
        pending.append(_unique_rows(combos))
        pending_rows += len(pending[-1])
        if pending_rows > chunk:
            seen.append(_unique_rows(np.concatenate(pending)))
            pending, pending_rows = [], 0
    if pending:
        seen.append(_unique_rows(np.concatenate(pending)))
    return _unique_rows(np.concatenate(seen)) if seen else points[:0]


def wire_images(points: np.ndarray, s: Scenario, s_target: Scenario) -> np.ndarray:
    """Integer tables of all wiring images (both parties), deduplicated."""
    mid = Scenario(s_target.alice, s.bob)
    stage1 = _wire_alice(points, s, s_target.alice)
    log.info("alice wiring: %d -> %d points", len(points), len(stage1))
    swapped = stage1[:, swap_permutation(mid)]
    stage2 = _wire_alice(swapped, mid.swapped(), s_target.bob)
    log.info("bob wiring: %d -> %d points", len(stage1), len(stage2))
    back = stage2[:, swap_permutation(s_target.swapped())]
    return back


def _integer_tables(vertices: list[CorrelationVector]) -> tuple[np.ndarray, int]:
    scale = 1
    for v in vertices:
        for val in v.values:
            scale = math.lcm(scale, val.denominator)
    arr = np.array([[int(val * scale) for val in v.values] for v in vertices], dtype=np.int64)
    dtype = np.int8 if scale < 100 else np.int64
    return arr.astype(dtype), scale


def ns_vertices(s: Scenario) -> list[CorrelationVector]:
    """Vertices of the nonsignaling polytope as exact tables."""
    v = vertices_from_hrep(ns_cg_hrep(s))
    return [CorrelationVector.exact(s, s.from_cg(np.array(p, dtype=object))) for p in v.points]


def _to_vectors(arr: np.ndarray, scale: int, s: Scenario) -> list[CorrelationVector]:
    return [CorrelationVector.exact(s, [Fraction(int(v), scale) for v in row]) for row in arr]


def restricted_tables(s: Scenario, s_target: Scenario) -> list[CorrelationVector]:
    """Wiring images of the nonsignaling vertices of ``s``, as tables on ``s_target``."""
    base = ns_vertices(s)
    arr, scale = _integer_tables(base)
    images = wire_images(arr, s, s_target)
    return _to_vectors(images, scale, s_target)


def restricted_vertices(s: Scenario, s_target: Scenario) -> VRep:
    """Generating points of ``C(s -> s_target)`` in CG coordinates of the target."""
    tables = restricted_tables(s, s_target)
    return VRep([t.cg() for t in tables], s_target.cg_dim)


def _subsets_at_most(n_out: int, k: int) -> list[tuple[int, ...]]:
    size = min(k, n_out)
    return list(itertools.combinations(range(n_out), size))


def nary_support_tables(s_target: Scenario, n_max: int) -> list[CorrelationVector]:
    """Nonsignaling vertices with at most ``n_max`` outcomes in use per setting.

    For every choice of an ``n_max``-element outcome subset per setting, the
    vertices of the nonsignaling polytope of the reduced scenario are
    embedded into ``s_target``. Smaller supports are faces of these and are
    therefore covered.
    """
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    a_choices = [_subsets_at_most(o, n_max) for o in s_target.alice]
    b_choices = [_subsets_at_most(o, n_max) for o in s_target.bob]
    cache: dict[Scenario, list[CorrelationVector]] = {}
    seen: set[tuple] = set()
    out: list[CorrelationVector] = []
    for sa in itertools.product(*a_choices):
        for sb in itertools.product(*b_choices):
            sub = Scenario(tuple(len(t) for t in sa), tuple(len(t) for t in sb))
            if sub not in cache:
                cache[sub] = ns_vertices(sub)
            for v in cache[sub]:
                vals = [Fraction(0)] * s_target.size
                for (a, b, x, y), val in zip(sub.keys, v.values):
                    if val:
                        vals[s_target.index(sa[x][a], sb[y][b], x, y)] = val
                key = tuple(vals)
                if key not in seen:
                    seen.add(key)
                    out.append(CorrelationVector.exact(s_target, vals))
    return out


def nary_support_vertices(s_target: Scenario, n_max: int) -> VRep:
    """Generating points of the ``n_max``-ary polytope in CG coordinates."""
    return VRep([t.cg() for t in nary_support_tables(s_target, n_max)], s_target.cg_dim)
