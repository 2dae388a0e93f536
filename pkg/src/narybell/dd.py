"""Exact double description for pointed polyhedral cones.

The cone is ``{y : A @ y >= 0}`` for an integer matrix ``A``. Rays are kept
as primitive integer vectors; ``int64`` is used while the magnitudes are
provably safe and the arrays are promoted to Python integers otherwise.

Adjacency uses the combinatorial test: rays ``p`` and ``n`` are adjacent iff
their common zero set has at least ``D - 2`` rows and no third ray vanishes
on all of them. Zero sets are packed into 64-bit words and the test runs in
a compiled kernel; a float32 BLAS version is kept as a fallback.
"""
from __future__ import annotations

import logging
import math
from fractions import Fraction

import numpy as np

from ._exact import rank

log = logging.getLogger(__name__)

_SAFE = 2**62
# Budget (in float32 entries) for one containment-test product.
_BATCH_ENTRIES = 24_000_000


try:
    import numba
except ImportError:  # pragma: no cover
    numba = None


class ConeError(ValueError):
    """The constraint matrix does not describe a pointed, full-dimensional cone."""


def _as_int_matrix(rows) -> np.ndarray:
    arr = np.array(rows, dtype=object)
    if arr.ndim != 2:
        raise ValueError("constraint matrix must be two-dimensional")
    if arr.size and max(abs(int(v)) for v in arr.flat) < 2**31:
        return arr.astype(np.int64)
    return np.vectorize(int, otypes=[object])(arr) if arr.size else arr.astype(np.int64)


def _max_abs(arr: np.ndarray) -> int:
    if arr.size == 0:
        return 0
    if arr.dtype == object:
        return max(abs(v) for v in arr.flat)
    return int(np.abs(arr).max())


def _primitive_rows(arr: np.ndarray) -> np.ndarray:
    if arr.size == 0:
        return arr
    if arr.dtype == object:
        out = arr.copy()
        for i in range(out.shape[0]):
            g = 0
            for v in out[i]:
                g = math.gcd(g, v)
            if g > 1:
                out[i] = [v // g for v in out[i]]
        return out
    g = np.gcd.reduce(arr, axis=1)
    g[g == 0] = 1
    return arr // g[:, None]


def _initial_basis(A: np.ndarray, order: np.ndarray, D: int) -> list[int]:
    chosen: list[int] = []
    rows: list[list[int]] = []
    for idx in order:
        candidate = rows + [[int(v) for v in A[idx]]]
        if rank(candidate) == len(candidate):
            rows = candidate
            chosen.append(int(idx))
            if len(chosen) == D:
                return chosen
    raise ConeError(f"constraint matrix has rank {len(chosen)} < {D}; cone is not pointed")


def _initial_rays(B: list[list[int]]) -> list[list[int]]:
    D = len(B)
    # Solve B @ R = I exactly, columns of R are the rays.
    aug = [[Fraction(v) for v in row] + [Fraction(int(i == j)) for j in range(D)] for i, row in enumerate(B)]
    for c in range(D):
        p = next(i for i in range(c, D) if aug[i][c] != 0)
        aug[c], aug[p] = aug[p], aug[c]
        pv = aug[c][c]
        aug[c] = [v / pv for v in aug[c]]
        for i in range(D):
            if i != c and aug[i][c] != 0:
                f = aug[i][c]
                aug[i] = [a - f * b for a, b in zip(aug[i], aug[c])]
    rays = []
    for j in range(D):
        col = [aug[i][D + j] for i in range(D)]
        scale = 1
        for v in col:
            scale = math.lcm(scale, v.denominator)
        ints = [int(v * scale) for v in col]
        g = 0
        for v in ints:
            g = math.gcd(g, v)
        rays.append([v // g for v in ints])
    return rays


def lex_order(A: np.ndarray) -> np.ndarray:
    """Row indices of ``A`` in lexicographic order of the rows."""
    if A.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    keys = [tuple(int(v) for v in row) for row in A]
    return np.array(sorted(range(len(keys)), key=keys.__getitem__), dtype=np.int64)


if numba is not None:

    @numba.njit(cache=True)
    def _popcount(x):
        x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
        x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
        x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
        return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)

    @numba.njit(cache=True)
    def _bit_adjacency(Z, pos, neg, need):
        R, W = Z.shape
        sizes = np.zeros(R, np.int64)
        for r in range(R):
            s = 0
            for w in range(W):
                s += _popcount(Z[r, w])
            sizes[r] = s
        out_p = np.empty(16, np.int64)
        out_n = np.empty(16, np.int64)
        found = 0
        common = np.empty(W, np.uint64)
        for i in range(pos.shape[0]):
            p = pos[i]
            for j in range(neg.shape[0]):
                n = neg[j]
                cnt = 0
                for w in range(W):
                    c = Z[p, w] & Z[n, w]
                    common[w] = c
                    cnt += _popcount(c)
                if cnt < need:
                    continue
                adjacent = True
                for r in range(R):
                    if r == p or r == n or sizes[r] < cnt:
                        continue
                    inside = True
                    for w in range(W):
                        if (Z[r, w] & common[w]) != common[w]:
                            inside = False
                            break
                    if inside:
                        adjacent = False
                        break
                if adjacent:
                    if found == out_p.shape[0]:
                        out_p = np.concatenate((out_p, np.empty(found, np.int64)))
                        out_n = np.concatenate((out_n, np.empty(found, np.int64)))
                    out_p[found] = i
                    out_n[found] = j
                    found += 1
        return out_p[:found], out_n[:found]


def _pack(Z: np.ndarray) -> np.ndarray:
    R, k = Z.shape
    words = max(1, (k + 63) // 64)
    padded = np.zeros((R, words * 64), dtype=bool)
    padded[:, :k] = Z
    return np.packbits(padded, axis=1, bitorder="little").view(np.uint64)


def _adjacent_pairs(Zk: np.ndarray, pos: np.ndarray, neg: np.ndarray, D: int):
    """Indices (into pos, neg) of adjacent ray pairs and their common zero sets."""
    if numba is None:
        return _adjacent_pairs_blas(Zk, pos, neg, D)
    pi, ni = _bit_adjacency(_pack(Zk), pos.astype(np.int64), neg.astype(np.int64), D - 2)
    log.debug("pairs P=%d N=%d adjacent=%d k=%d", len(pos), len(neg), len(pi), Zk.shape[1])
    return pi, ni, Zk[pos[pi]] & Zk[neg[ni]]


def _adjacent_pairs_blas(Zk: np.ndarray, pos: np.ndarray, neg: np.ndarray, D: int):
    if Zk.shape[1] < D - 2:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros((0, Zk.shape[1]), bool)
    Zf = Zk.astype(np.float32)
    Zp = Zf[pos]
    Zn = Zf[neg]
    pis, nis = [], []
    step = max(1, _BATCH_ENTRIES // max(1, len(neg)))
    for start in range(0, len(pos), step):
        counts = Zp[start:start + step] @ Zn.T
        pi, ni = np.nonzero(counts >= D - 2)
        pis.append(pi + start)
        nis.append(ni)
    pi = np.concatenate(pis)
    ni = np.concatenate(nis)
    log.debug("pairs P=%d N=%d cand=%d k=%d R=%d", len(pos), len(neg), len(pi), Zk.shape[1], Zk.shape[0])
    if pi.size == 0:
        return pi, ni, np.zeros((0, Zk.shape[1]), bool)
    keep_p, keep_n, commons = [], [], []
    step = max(1, _BATCH_ENTRIES // max(1, Zk.shape[0]))
    ZfT = Zf
    for start in range(0, len(pi), step):
        bp = pi[start:start + step]
        bn = ni[start:start + step]
        common = Zk[pos[bp]] & Zk[neg[bn]]
        size = common.sum(axis=1)
        hits = ZfT @ common.T.astype(np.float32)
        owners = (hits == size[None, :].astype(np.float32)).sum(axis=0)
        ok = owners == 2
        keep_p.append(bp[ok])
        keep_n.append(bn[ok])
        commons.append(common[ok])
    return np.concatenate(keep_p), np.concatenate(keep_n), np.concatenate(commons)


def extreme_rays(constraints, order: str = "lex"):
    """Extreme rays of the pointed cone ``{y : constraints @ y >= 0}``.

    Returns ``(rays, incidence)``: primitive integer rays (one per row, in
    lexicographic order) and a boolean matrix whose entry ``[i, j]`` says
    whether constraint ``j`` is tight at ray ``i``.
    """
    A = _as_int_matrix(constraints)
    m, D = A.shape
    if D == 0:
        raise ConeError("zero-dimensional cone")
    if order == "lex":
        ordering = lex_order(A)
    elif order == "given":
        ordering = np.arange(m)
    else:
        raise ValueError(f"unknown insertion order {order!r}")
    basis = _initial_basis(A, ordering, D)
    R = np.array(_initial_rays([[int(v) for v in A[i]] for i in basis]), dtype=object)
    if _max_abs(R) < 2**31 and A.dtype != object:
        R = R.astype(np.int64)
    # Incidence over the tracked rows only; rows strictly satisfied by every
    # ray stay strict forever and are never tracked.
    Z = ~np.eye(D, dtype=bool)
    tracked = list(basis)
    in_basis = set(basis)
    amax = _max_abs(A)
    for step, idx in enumerate(ordering):
        idx = int(idx)
        if idx in in_basis:
            continue
        a = A[idx]
        if R.dtype != object and _max_abs(R) * amax * D >= _SAFE:
            R = R.astype(object)
        if R.dtype == object:
            s = np.array([sum(int(x) * int(y) for x, y in zip(r, a)) for r in R], dtype=object)
            sgn = np.array([(v > 0) - (v < 0) for v in s], dtype=np.int8)
        else:
            s = R @ a
            sgn = np.sign(s).astype(np.int8)
        neg = np.flatnonzero(sgn < 0)
        zero_col = sgn == 0
        if neg.size == 0:
            if zero_col.any():
                Z = np.hstack([Z, zero_col[:, None]])
                tracked.append(idx)
            continue
        pos = np.flatnonzero(sgn > 0)
        pi, ni, common = _adjacent_pairs(Z, pos, neg, D)
        if pi.size:
            sp = s[pos[pi]]
            sn = s[neg[ni]]
            rp = R[pos[pi]]
            rn = R[neg[ni]]
            if R.dtype != object:
                bound = 2 * int(np.abs(s).max()) * _max_abs(R)
                if bound >= _SAFE:
                    sp, sn, rp, rn = (v.astype(object) for v in (sp, sn, rp, rn))
            new = _primitive_rows(sp[:, None] * rn - sn[:, None] * rp)
            if new.dtype == object and R.dtype != object:
                R = R.astype(object)
            new = new.astype(R.dtype)
        else:
            new = np.zeros((0, D), dtype=R.dtype)
        keep = np.flatnonzero(sgn >= 0)
        R = np.concatenate([R[keep], new])
        newcol = np.concatenate([zero_col[keep], np.ones(len(new), dtype=bool)])
        Z = np.hstack([np.concatenate([Z[keep], common]), newcol[:, None]])
        tracked.append(idx)
        if R.shape[0] == 0:
            break
        if log.isEnabledFor(logging.DEBUG):
            log.debug("dd step %d/%d: rays=%d new=%d", step, m, R.shape[0], len(new))
    if R.dtype == object and R.size and _max_abs(R) < 2**62:
        R = R.astype(np.int64)
    # Canonical order and full incidence against every input row.
    keys = [tuple(int(v) for v in r) for r in R]
    perm = sorted(range(len(keys)), key=keys.__getitem__)
    R = R[perm] if len(perm) else R.reshape(0, D)
    if R.dtype == object or A.dtype == object:
        prod = np.array([[sum(int(x) * int(y) for x, y in zip(r, a)) for a in A] for r in R], dtype=object)
        incidence = (prod == 0).astype(bool)
    else:
        incidence = (R @ A.T) == 0
    return R, incidence
