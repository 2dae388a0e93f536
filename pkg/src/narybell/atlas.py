"""Named Bell functionals and the exact dual certificate for the n-ary bound.

The certificate works in a formal basis ``R[a, b|x, y]`` of linearly
independent symbols, one per entry of the correlation table of
``[2,n|2,...,2]``. Combinations are exact integer tables in the usual flat
order, so ``phi(R[v]) = P(v)`` turns them back into functionals.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .polytope import lp_max
from .scenario import BellFunctional, Scenario, ScenarioError
from .wiring import nary_support_vertices


def ibn_scenario(n: int) -> Scenario:
    return Scenario((2, n), (2,) * n)


def build_Ia() -> BellFunctional:
    """``sum_{k,x,y in {0,1}} (-1)^(k+x+y) P(k,k|x,y) <= 1`` on [3,3|3,3]."""
    s = Scenario((3, 3), (3, 3))
    joint = {(k, k, x, y): (-1) ** (k + x + y) for k in (0, 1) for x in (0, 1) for y in (0, 1)}
    return BellFunctional.from_terms(s, joint, bound=1, bound_kind="binary", name="I_a")


def build_Ibn(n: int) -> BellFunctional:
    """``-P(0,_|0,_) + sum_k [P(0,0|0,k) - P(k,0|1,k)] <= n - 2`` for (n-1)-ary boxes."""
    if n < 3:
        raise ValueError("I_b^(n) needs n >= 3")
    s = ibn_scenario(n)
    joint: dict[tuple[int, int, int, int], int] = {}
    for k in range(n):
        joint[0, 0, 0, k] = joint.get((0, 0, 0, k), 0) + 1
        joint[k, 0, 1, k] = joint.get((k, 0, 1, k), 0) - 1
    name = "I_b" if n == 3 else f"I_b^({n})"
    return BellFunctional.from_terms(
        s, joint, alice_marginals={(0, 0): -1}, bound=n - 2, bound_kind=f"nary:{n - 1}", name=name
    )


_IC_TERMS = {
    (1, 0, 0, 0): -1,
    (0, 0, 0, 1): -1,
    (0, 0, 1, 0): -1,
    (0, 0, 1, 1): -1,
    (1, 0, 1, 2): -1,
    (0, 1, 2, 0): -1,
    (0, 1, 2, 1): -1,
    (0, 0, 2, 2): 1,
}


def build_Ic() -> BellFunctional:
    """The eight-term facet ``I_c <= 0`` on [2,2,2|2,2,2]."""
    s = Scenario((2, 2, 2), (2, 2, 2))
    return BellFunctional.from_terms(s, _IC_TERMS, bound=0, bound_kind="binary", name="I_c")


# -- dual certificate ----------------------------------------------------------


class CertificateError(RuntimeError):
    """Internal bookkeeping of the certificate is inconsistent."""


@dataclass
class CertificateWorkspace:
    n: int
    ell: int
    table: np.ndarray = field(init=False)
    residue: dict = field(init=False, default_factory=dict)

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("the certificate needs n >= 3")
        if not 0 <= self.ell < self.n:
            raise ValueError("ell must be an outcome of Alice's second setting")
        self.scenario = ibn_scenario(self.n)
        self.table = np.zeros(self.scenario.size, dtype=object)
        self.table[:] = 0

    def add(self, a: int, b: int, x: int, y: int, c: int) -> None:
        """Add ``c * R[a, b|x, y]``; symbols outside the scenario go to the residue."""
        s = self.scenario
        if 0 <= x < s.n_x and 0 <= y < s.n_y and 0 <= a < s.alice[x] and 0 <= b < s.bob[y]:
            self.table[s.index(a, b, x, y)] += c
        else:
            key = (a, b, x, y)
            self.residue[key] = self.residue.get(key, 0) + c

    def add_F(self, c: int) -> None:
        # the marginal term is written on Bob's setting ell
        for b in range(2):
            self.add(0, b, 0, self.ell, -c)
        for k in range(self.n):
            self.add(0, 0, 0, k, c)
            self.add(k, 0, 1, k, -c)

    def add_X1(self, a: int, x: int, y: int, c: int) -> None:
        """``X_1[a|x,y] = sum_b (R[a,b|x,y] - R[a,b|x,ell])``."""
        for b in range(2):
            self.add(a, b, x, y, c)
            self.add(a, b, x, self.ell, -c)

    def add_X2(self, b: int, x: int, y: int, c: int) -> None:
        """``X_2[b|x,y] = sum_a R[a,b|x,y] - sum_a R[a,b|0,y]``."""
        for a in range(self.scenario.alice[x]):
            self.add(a, b, x, y, c)
        for a in range(self.scenario.alice[0]):
            self.add(a, b, 0, y, -c)

    def zeta(self) -> np.ndarray:
        if any(v != 0 for v in self.residue.values()):
            raise CertificateError(f"nonzero residue outside the basis: {self.residue}")
        return self.table


def certificate_zeta(n: int, ell: int) -> np.ndarray:
    """``zeta`` with ``2nF - sum xi X - sum eta R[ell,b|1,y] = sum zeta R``."""
    w = CertificateWorkspace(n, ell)
    w.add_F(2 * n)
    # minus sum_tau xi_tau X_tau
    for k in range(n):
        for a in range(2):
            w.add_X1(a, 0, k, -4)
        w.add_X1(k, 1, k, 2 * n)
    for b in range(2):
        w.add_X2(b, 1, ell, 3 * n - 2)
        for k in range(n):
            if k != ell:
                w.add_X2(b, 1, k, (-1) ** b * n - 2)
    # eta = 2n on the dropped outcome
    for b in range(2):
        for y in range(n):
            w.add(ell, b, 1, y, -2 * n)
    return w.zeta()


def _check_identity(n: int, ell: int, zeta: np.ndarray) -> None:
    """Evaluate both sides on an n-ary NS point with ``P(ell|1) = 0``."""
    s = ibn_scenario(n)
    # Alice outputs 0 on x=0 and (ell+1) mod n on x=1, Bob outputs 0.
    p = np.zeros(s.size, dtype=object)
    for x in range(2):
        for y in range(n):
            a = 0 if x == 0 else (ell + 1) % n
            p[s.index(a, 0, x, y)] = 1
    lhs = 2 * n * sum(c * v for c, v in zip(build_Ibn(n).coefficients, p))
    rhs = sum(int(z) * int(v) for z, v in zip(zeta, p))
    if lhs != rhs:
        raise CertificateError(f"certificate identity fails for n={n}, ell={ell}: {lhs} != {rhs}")


def certificate_report(n: int) -> dict:
    """Per-``ell`` maxima of ``zeta`` for ``I_b^(n)``."""
    per_ell = []
    for ell in range(n):
        z = certificate_zeta(n, ell)
        _check_identity(n, ell, z)
        per_ell.append(int(max(z)))
    best = max(per_ell)
    return {
        "n": n,
        "max_zeta": best,
        "per_ell": per_ell,
        "bound": n - 2,
        "pass": all(v == n - 2 for v in per_ell),
    }


def verify_nary_certificate(n: int) -> int:
    """``max_ell max_v zeta_v``; this bounds ``I_b^(n)`` on (n-1)-ary correlations."""
    if n < 3:
        raise ValueError("the certificate needs n >= 3")
    return certificate_report(n)["max_zeta"]


def nary_bound_by_lp(n: int) -> Fraction:
    """Exact max of ``I_b^(n)`` over the (n-1)-ary nonsignaling polytope."""
    if n < 3:
        raise ValueError("I_b^(n) needs n >= 3")
    f = build_Ibn(n)
    h, c = f.cg_form()
    v = nary_support_vertices(f.scenario, n - 1)
    const = f.bound - c
    return lp_max(h, v).value + const


def named_functional(name: str, n: int | None = None) -> BellFunctional:
    key = name.lower().replace("_", "").replace("-", "")
    if key == "ia":
        return build_Ia()
    if key == "ib":
        return build_Ibn(n or 3)
    if key == "ic":
        return build_Ic()
    raise ScenarioError(f"unknown functional {name!r}")
