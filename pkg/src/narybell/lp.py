"""Exact two-phase simplex with Bland's anti-cycling rule.

Arithmetic runs on ``gmpy2.mpq``; inputs and outputs are ``Fraction``.
The tableau is dense but pivots only touch the nonzero columns of the pivot
row, which keeps the correlation-polytope LPs (a few hundred columns) fast.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from gmpy2 import mpq

from ._exact import to_fraction


class LPError(ValueError):
    pass


class InfeasibleError(LPError):
    pass


class UnboundedError(LPError):
    pass


@dataclass(frozen=True)
class LPResult:
    value: Fraction
    point: tuple[Fraction, ...]
    pivots: int = 0


def _q(v) -> mpq:
    f = to_fraction(v)
    return mpq(f.numerator, f.denominator)


def _frac(v: mpq) -> Fraction:
    return Fraction(int(v.numerator), int(v.denominator))


class _Tableau:
    def __init__(self, rows: list[list[mpq]], basis: list[int], ncols: int):
        self.rows = rows
        self.basis = basis
        self.ncols = ncols
        self.pivots = 0

    def pivot(self, r: int, col: int, z: list[mpq]) -> None:
        prow = self.rows[r]
        pv = prow[col]
        if pv != 1:
            prow = [v / pv for v in prow]
            self.rows[r] = prow
        nz = [j for j, v in enumerate(prow) if v != 0]
        for i, row in enumerate(self.rows):
            if i == r:
                continue
            f = row[col]
            if f != 0:
                for j in nz:
                    row[j] -= f * prow[j]
        f = z[col]
        if f != 0:
            for j in nz:
                z[j] -= f * prow[j]
        self.basis[r] = col
        self.pivots += 1

    def reduced_costs(self, cost: list[mpq]) -> list[mpq]:
        z = list(cost) + [mpq(0)]
        for i, b in enumerate(self.basis):
            cb = cost[b]
            if cb != 0:
                row = self.rows[i]
                for j, v in enumerate(row):
                    if v != 0:
                        z[j] -= cb * v
        return z

    def maximize(self, cost: list[mpq], allowed: Sequence[bool]) -> None:
        z = self.reduced_costs(cost)
        while True:
            col = next((j for j in range(self.ncols) if allowed[j] and z[j] > 0), None)
            if col is None:
                return
            best = None
            for i, row in enumerate(self.rows):
                a = row[col]
                if a > 0:
                    ratio = row[-1] / a
                    key = (ratio, self.basis[i])
                    if best is None or key < best[0]:
                        best = (key, i)
            if best is None:
                raise UnboundedError("objective is unbounded")
            self.pivot(best[1], col, z)

    def solution(self) -> list[mpq]:
        x = [mpq(0)] * self.ncols
        for i, b in enumerate(self.basis):
            x[b] = self.rows[i][-1]
        return x


def solve_standard(cost, A_eq, b_eq) -> LPResult:
    """Maximize ``cost @ x`` subject to ``A_eq @ x = b_eq`` and ``x >= 0``."""
    n = len(cost)
    m = len(A_eq)
    rows = []
    for row, rhs in zip(A_eq, b_eq):
        r = [_q(v) for v in row] + [_q(rhs)]
        if len(r) != n + 1:
            raise ValueError("constraint width does not match the objective")
        if r[-1] < 0:
            r = [-v for v in r]
        rows.append(r)
    # Rows that already own a unit column start with it basic; the others
    # get an artificial variable for phase 1.
    owner: dict[int, int] = {}
    for j in range(n):
        nz = [i for i in range(m) if rows[i][j] != 0]
        if len(nz) == 1 and rows[nz[0]][j] == 1 and nz[0] not in owner:
            owner[nz[0]] = j
    needs = [i for i in range(m) if i not in owner]
    total = n + len(needs)
    art = {i: n + k for k, i in enumerate(needs)}
    for i, r in enumerate(rows):
        rhs = r.pop()
        r.extend(mpq(int(art.get(i) == n + k)) for k in range(len(needs)))
        r.append(rhs)
    basis = [owner[i] if i in owner else art[i] for i in range(m)]
    tab = _Tableau(rows, basis, total)
    phase1 = [mpq(0)] * n + [mpq(-1)] * len(needs)
    tab.maximize(phase1, [True] * total)
    infeas = sum((r[-1] for i, r in enumerate(tab.rows) if tab.basis[i] >= n), mpq(0))
    if infeas != 0:
        raise InfeasibleError("constraints are infeasible")
    # Drive zero-level artificials out of the basis, dropping redundant rows.
    i = 0
    while i < len(tab.rows):
        if tab.basis[i] >= n:
            col = next((j for j in range(n) if tab.rows[i][j] != 0), None)
            if col is None:
                del tab.rows[i]
                del tab.basis[i]
                continue
            tab.pivot(i, col, [mpq(0)] * (total + 1))
        i += 1
    tab.rows = [r[:n] + [r[-1]] for r in tab.rows]
    tab.ncols = n
    c = [_q(v) for v in cost]
    tab.maximize(c, [True] * n)
    x = tab.solution()
    value = sum((ci * xi for ci, xi in zip(c, x)), mpq(0))
    return LPResult(_frac(value), tuple(_frac(v) for v in x), tab.pivots)


def solve(cost, A_ub=(), b_ub=(), A_eq=(), b_eq=()) -> LPResult:
    """Maximize ``cost @ x`` over free ``x`` with ``A_ub x <= b_ub``, ``A_eq x = b_eq``."""
    n = len(cost)
    m_ub = len(A_ub)
    rows, rhs = [], []
    # Variables: x+ (n), x- (n), slacks (m_ub).
    for k, (row, b) in enumerate(zip(A_ub, b_ub)):
        r = list(row) + [-v for v in row] + [int(i == k) for i in range(m_ub)]
        rows.append(r)
        rhs.append(b)
    for row, b in zip(A_eq, b_eq):
        rows.append(list(row) + [-v for v in row] + [0] * m_ub)
        rhs.append(b)
    cost2 = list(cost) + [-to_fraction(v) for v in cost] + [0] * m_ub
    res = solve_standard(cost2, rows, rhs)
    x = tuple(res.point[i] - res.point[n + i] for i in range(n))
    return LPResult(res.value, x, res.pivots)
