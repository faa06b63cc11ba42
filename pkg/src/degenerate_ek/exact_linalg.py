"""Exact linear algebra over the rationals (row reduction on ``Fraction`` rows)."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence


def row_reduce(rows: Sequence[Sequence], ncols: int | None = None):
    """Reduced row echelon form.  Returns (matrix, pivot columns)."""
    mat = [[Fraction(v) for v in row] for row in rows]
    if not mat:
        return mat, []
    ncols = len(mat[0]) if ncols is None else ncols
    pivots = []
    r = 0
    for col in range(ncols):
        pivot = next((i for i in range(r, len(mat)) if mat[i][col]), None)
        if pivot is None:
            continue
        mat[r], mat[pivot] = mat[pivot], mat[r]
        lead = mat[r][col]
        mat[r] = [v / lead for v in mat[r]]
        for i in range(len(mat)):
            if i != r and mat[i][col]:
                f = mat[i][col]
                mat[i] = [a - f * b for a, b in zip(mat[i], mat[r])]
        pivots.append(col)
        r += 1
        if r == len(mat):
            break
    return mat, pivots


def rank(rows: Sequence[Sequence]) -> int:
    return len(row_reduce(rows)[1])


def solve(matrix: Sequence[Sequence], rhs: Sequence):
    """Solve ``matrix @ x = rhs`` exactly.

    Returns ``(x, rank_a, rank_ab)``; ``x`` is None when the system is
    inconsistent.  Free variables are set to zero.
    """
    nrows = len(matrix)
    if len(rhs) != nrows:
        raise ValueError("right-hand side length does not match the row count")
    ncols = len(matrix[0]) if nrows else 0
    aug = [list(row) + [rhs[i]] for i, row in enumerate(matrix)]
    red, pivots = row_reduce(aug, ncols + 1)
    rank_ab = len(pivots)
    rank_a = sum(1 for p in pivots if p < ncols)
    if rank_ab > rank_a:
        return None, rank_a, rank_ab
    x = [Fraction(0)] * ncols
    for i, p in enumerate(pivots):
        x[p] = red[i][ncols]
    return x, rank_a, rank_ab
