"""Small exact-arithmetic helpers shared by the geometry modules."""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np


def to_fraction(value) -> Fraction:
    """Coerce ints, Fractions and ``"num/den"`` strings to a Fraction.

    Floats are rejected on purpose; callers that hold floats must decide
    how to rationalize them.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, (float, np.floating)):
        raise TypeError(f"refusing to convert float {value!r} to an exact rational")
    try:
        return Fraction(int(value.numerator), int(value.denominator))
    except AttributeError:
        raise TypeError(f"cannot convert {value!r} to Fraction") from None


def fraction_str(value: Fraction) -> str:
    value = to_fraction(value)
    return f"{value.numerator}/{value.denominator}"


def fraction_array(rows, ndim: int | None = None) -> np.ndarray:
    arr = np.array(rows, dtype=object)
    if ndim is not None and arr.ndim != ndim:
        if arr.size == 0:
            return np.zeros((0,) * ndim, dtype=object)
        raise ValueError(f"expected a {ndim}-dimensional array, got shape {arr.shape}")
    flat = arr.reshape(-1)
    for i, v in enumerate(flat):
        flat[i] = to_fraction(v)
    return flat.reshape(arr.shape)


def lcm_of_denominators(values: Iterable) -> int:
    out = 1
    for v in values:
        out = math.lcm(out, to_fraction(v).denominator)
    return out


def primitive_integer_vector(values: Sequence) -> tuple[int, ...]:
    """Scale a rational vector to coprime integers, keeping its direction."""
    fr = [to_fraction(v) for v in values]
    scale = lcm_of_denominators(fr)
    ints = [int(v * scale) for v in fr]
    g = 0
    for v in ints:
        g = math.gcd(g, v)
    if g > 1:
        ints = [v // g for v in ints]
    return tuple(ints)


def sign_normalized(values: Sequence[int]) -> tuple[int, ...]:
    """First nonzero entry made positive; used for equalities only."""
    for v in values:
        if v != 0:
            return tuple(values) if v > 0 else tuple(-x for x in values)
    return tuple(values)


def rref(rows: Sequence[Sequence], ncols: int | None = None):
    """Reduced row echelon form over the rationals.

    Returns ``(matrix, pivot_columns)`` where ``matrix`` holds only the
    nonzero rows.
    """
    mat = [[to_fraction(v) for v in row] for row in rows]
    if ncols is None:
        ncols = len(mat[0]) if mat else 0
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        pivot = None
        for i in range(r, len(mat)):
            if mat[i][c] != 0:
                pivot = i
                break
        if pivot is None:
            continue
        mat[r], mat[pivot] = mat[pivot], mat[r]
        pv = mat[r][c]
        if pv != 1:
            mat[r] = [v / pv for v in mat[r]]
        for i in range(len(mat)):
            if i != r and mat[i][c] != 0:
                f = mat[i][c]
                row_r = mat[r]
                mat[i] = [vi - f * vr for vi, vr in zip(mat[i], row_r)]
        pivots.append(c)
        r += 1
        if r == len(mat):
            break
    return mat[:r], pivots


def rank(rows: Sequence[Sequence]) -> int:
    if len(rows) == 0:
        return 0
    return len(rref(rows)[1])


def solve_affine(eq_rows: Sequence[Sequence], rhs: Sequence, ncols: int):
    """Parametrize ``{x : E x = e}`` as ``x = base + basis.T @ t``.

    Returns ``(base, basis, free_columns)`` with exact Fractions, or raises
    ``ValueError`` if the system is inconsistent. The free columns are the
    non-pivot coordinates; ``t`` equals ``x`` restricted to them.
    """
    if len(eq_rows) == 0:
        base = [Fraction(0)] * ncols
        basis = [[Fraction(int(i == j)) for j in range(ncols)] for i in range(ncols)]
        return base, basis, list(range(ncols))
    aug = [list(row) + [rhs_i] for row, rhs_i in zip(eq_rows, rhs)]
    mat, pivots = rref(aug, ncols + 1)
    if ncols in pivots:
        raise ValueError("inconsistent equality system")
    free = [c for c in range(ncols) if c not in set(pivots)]
    base = [Fraction(0)] * ncols
    for row, p in zip(mat, pivots):
        base[p] = row[ncols]
    basis = []
    for f in free:
        vec = [Fraction(0)] * ncols
        vec[f] = Fraction(1)
        for row, p in zip(mat, pivots):
            vec[p] = -row[f]
        basis.append(vec)
    return base, basis, free


def nullspace(rows: Sequence[Sequence], ncols: int) -> list[list[Fraction]]:
    """Basis of ``{x : rows @ x = 0}``."""
    _, basis, _ = solve_affine(rows, [0] * len(rows), ncols)
    return basis
