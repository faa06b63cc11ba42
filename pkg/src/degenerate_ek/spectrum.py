"""Finite differences for the Witten Laplacian -h^2 Delta + |grad V|^2 - h Delta V.

Two discretizations on a Dirichlet box:

* ``factorized`` (default): the operator is written as D^T D with
  D = h d/dx + V' on the staggered half-point grid, one block per axis.  The
  matrix is positive semidefinite by construction and its smallest
  eigenvalues are exponentially small, as for the continuous operator.  In
  1D the small eigenvalues are obtained from the singular values of the
  bidiagonal D by bisection on its Golub-Kahan form, which resolves them to
  high relative accuracy far below eps * ||A||.
* ``nodal``: -h^2 Delta by a central stencil of order 2 or 4 plus the
  sampled potential term |grad V|^2 - h Delta V.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eig_banded, eigh_tridiagonal
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, eigsh, splu

from .errors import ConvergenceError, InvariantError
from .potential import PotentialSpec, nu_stats, require_numerics

SCHEME_FACTORIZED = "factorized"
SCHEME_NODAL = "nodal"
MIN_POINTS = 16
MEMORY_LIMIT_BYTES = 2 * 1024 ** 3
FLOOR_FACTOR = 1e-14

# fourth-order central second derivative: (-1, 16, -30, 16, -1)/12
_STENCIL = {2: (np.array([1.0, -2.0, 1.0]), 1), 4: (np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0, 2)}


@dataclass
class DiscreteOperator:
    spec: PotentialSpec
    h: float
    axes: list               # interior node coordinates per axis
    spacing: tuple
    matrix: sp.csr_matrix
    scheme: str
    order: int = 2
    factors: list = field(default_factory=list)    # per-axis D_k (factorized scheme)
    bidiagonal: tuple | None = None                # (p, q) for the 1D factorized scheme

    @property
    def shape(self):
        return tuple(len(a) for a in self.axes)

    @property
    def size(self):
        return self.matrix.shape[0]

    def norm_estimate(self) -> float:
        """Row-sum bound on ||A||_2."""
        return float(abs(self.matrix).sum(axis=1).max())

    @property
    def floor(self) -> float:
        """Eigenvalues below this are not resolved by a generic sparse solver."""
        return FLOOR_FACTOR * self.norm_estimate()

    def dim_is_one(self):
        return len(self.axes) == 1

    def apply(self, v):
        if self.factors:
            return sum(Dk.T @ (Dk @ v) for Dk in self.factors)
        return self.matrix @ v

    def gibbs_vector(self):
        """exp(-(V - min V)/h) sampled on the nodes, unit norm."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        values = self.spec.V.evaluate_array(*mesh).ravel()
        g = np.exp(-(values - values.min()) / self.h)
        return g / np.linalg.norm(g)


def _points(n, d):
    if isinstance(n, (int, np.integer)):
        return [int(n)] * d
    n = [int(v) for v in n]
    if len(n) != d:
        raise InvariantError("grid", f"need {d} point counts, got {len(n)}")
    return n


def _memory_estimate(shape, order):
    N = math.prod(shape)
    nnz = N * (1 + 2 * len(shape) * (order // 2))
    return nnz * 16 * 3


def _one_d_shifts(n):
    """Selection matrices from n nodes to n + 1 half points: right and left neighbour."""
    right = sp.eye(n + 1, n, k=0, format="csr")
    left = sp.eye(n + 1, n, k=-1, format="csr")
    return right, left


def _kron_axis(mat, axis, shape):
    """mat acting on ``axis`` of a C-ordered array of the given shape."""
    out = None
    for a, n in enumerate(shape):
        factor = mat if a == axis else sp.identity(n, format="csr")
        out = factor if out is None else sp.kron(out, factor, format="csr")
    return out


def assemble(spec: PotentialSpec, h: float, n, scheme: str = SCHEME_FACTORIZED, order: int = 2,
             memory_limit: int = MEMORY_LIMIT_BYTES) -> DiscreteOperator:
    """Discretize the operator on ``n`` interior points per axis of the spec's box."""
    require_numerics(spec)
    if not h > 0:
        raise InvariantError("h", "h must be positive")
    d = spec.dim
    counts = _points(n, d)
    if min(counts) < MIN_POINTS:
        raise InvariantError("grid", f"grid too small: need at least {MIN_POINTS} points per axis")
    if scheme not in (SCHEME_FACTORIZED, SCHEME_NODAL):
        raise ValueError(f"unknown scheme {scheme!r}")
    if scheme == SCHEME_FACTORIZED and order != 2:
        raise ValueError("the factorized scheme is second order")
    if order not in _STENCIL:
        raise ValueError("order must be 2 or 4")
    if _memory_estimate(counts, order) > memory_limit:
        raise InvariantError("memory", f"grid {counts} exceeds the memory limit")
    bounds = spec.box_float()
    axes, spacing = [], []
    for (lo, hi), m in zip(bounds, counts):
        full = np.linspace(lo, hi, m + 2)
        axes.append(full[1:-1])
        spacing.append(full[1] - full[0])
    shape = tuple(counts)
    if scheme == SCHEME_FACTORIZED:
        factors = []
        bidiagonal = None
        for k in range(d):
            half = np.concatenate([[axes[k][0] - spacing[k] / 2], axes[k] + spacing[k] / 2])
            grids = [half if a == k else axes[a] for a in range(d)]
            mesh = np.meshgrid(*grids, indexing="ij")
            dV = spec.gradient[k].evaluate_array(*mesh).ravel()
            p = h / spacing[k] + dV / 2
            q = -h / spacing[k] + dV / 2
            right, left = _one_d_shifts(counts[k])
            Dk = sp.diags(p) @ _kron_axis(right, k, shape) + sp.diags(q) @ _kron_axis(left, k, shape)
            factors.append(Dk.tocsr())
            if d == 1:
                bidiagonal = (p, q)
        A = sum(Dk.T @ Dk for Dk in factors)
        A = ((A + A.T) / 2).tocsr()
        A.sort_indices()
        return DiscreteOperator(spec, h, axes, tuple(spacing), A, scheme, order, factors, bidiagonal)
    mesh = np.meshgrid(*axes, indexing="ij")
    W = (spec.grad_sq.evaluate_array(*mesh) - h * spec.laplacian.evaluate_array(*mesh)).ravel()
    weights, half_width = _STENCIL[order]
    A = sp.diags(W)
    for k in range(d):
        m = counts[k]
        diags = [np.full(m - abs(o), weights[o + half_width]) for o in range(-half_width, half_width + 1)]
        lap = sp.diags(diags, list(range(-half_width, half_width + 1)), shape=(m, m)) / spacing[k] ** 2
        A = A - h * h * _kron_axis(lap.tocsr(), k, shape)
    A = ((A + A.T) / 2).tocsr()
    A.sort_indices()
    return DiscreteOperator(spec, h, axes, tuple(spacing), A, scheme, order)


def export_triplets(op: DiscreteOperator) -> str:
    coo = op.matrix.tocoo()
    return "".join(f"{i} {j} {float(v)!r}\n" for i, j, v in zip(coo.row, coo.col, coo.data))


@dataclass
class Eigenpairs:
    values: np.ndarray
    vectors: np.ndarray        # columns, unit norm
    residuals: np.ndarray      # ||A v - lambda v|| / ||A||_est
    iterations: int
    method: str
    floor: float               # values below are unresolved for this method

    @property
    def resolved(self):
        return self.values > self.floor


def _tgk_offdiagonal(p, q):
    """Golub-Kahan tridiagonal of D^T (n x (n + 1) upper bidiagonal)."""
    n = len(p) - 1
    off = np.empty(2 * n)
    off[0::2] = p[:n]
    off[1::2] = q[1:]
    return off


def _bidiagonal_eigs(op: DiscreteOperator, k: int):
    p, q = op.bidiagonal
    n = len(p) - 1
    off = _tgk_offdiagonal(p, q)
    tiny = 4 * np.finfo(float).tiny
    # eigenvalues of the (2n + 1) Golub-Kahan matrix are +-sigma_i and one
    # extra zero; indices n + 1 .. n + k are the k smallest singular values
    sig, z = eigh_tridiagonal(np.zeros(2 * n + 1), off, select="i", select_range=(n + 1, n + k),
                              lapack_driver="stebz", tol=tiny)
    sig = np.abs(sig)
    vecs = z[1::2, :]
    norms = np.linalg.norm(vecs, axis=0)
    vecs = vecs / np.where(norms > 0, norms, 1.0)
    order = np.argsort(sig)
    return sig[order] ** 2, vecs[:, order]


def smallest_eigs(op: DiscreteOperator, k: int = 3, tol: float = 1e-10, seed: int = 0,
                  v0=None, maxiter: int | None = None) -> Eigenpairs:
    """The k algebraically smallest eigenpairs.

    1D operators use direct tridiagonal solvers (bisection for the factorized
    scheme, a banded solver for the nodal one); larger grids use Lanczos in
    shift-invert mode around a small negative shift.  Raises ConvergenceError
    when a residual exceeds ``tol``.
    """
    N = op.size
    if not 1 <= k < N:
        raise ValueError("need 1 <= k < matrix dimension")
    norm = op.norm_estimate()
    iterations = 0
    if op.dim_is_one() and op.bidiagonal is not None:
        values, vectors = _bidiagonal_eigs(op, k)
        method, floor = "bidiagonal-bisection", 0.0
    elif op.dim_is_one():
        half_width = op.order // 2
        A = op.matrix
        bands = np.zeros((half_width + 1, N))
        for o in range(half_width + 1):
            bands[o, :N - o] = A.diagonal(o)
        values, vectors = eig_banded(bands, lower=True, select="i", select_range=(0, k - 1))
        method, floor = "banded", op.floor
    else:
        rng = np.random.default_rng(seed)
        start = v0 if v0 is not None else op.gibbs_vector() + 1e-3 * rng.standard_normal(N)
        shift = -1e-3 * max(op.h, 1e-12) ** 2
        lu = splu((op.matrix - shift * sp.identity(N, format="csr")).tocsc())
        solves = [0]

        def solve(x):
            solves[0] += 1
            return lu.solve(np.asarray(x, dtype=float).ravel())

        opinv = LinearOperator((N, N), matvec=solve, dtype=float)
        try:
            values, vectors = eigsh(op.matrix, k=k, sigma=shift, which="LM", v0=start, tol=tol * 1e-2,
                                    maxiter=maxiter, OPinv=opinv)
        except (ArpackNoConvergence, ArpackError) as exc:
            raise ConvergenceError(f"Lanczos did not converge: {exc}") from None
        order = np.argsort(values)
        values, vectors = values[order], vectors[:, order]
        values, vectors = _factored_ritz(op, vectors, values)
        iterations = solves[0]
        method, floor = "shift-invert-lanczos", op.floor
    residuals = np.array([np.linalg.norm(op.apply(vectors[:, i]) - values[i] * vectors[:, i])
                          for i in range(k)]) / norm
    if np.any(residuals > tol):
        raise ConvergenceError(f"eigenpair residuals {residuals.max():.3g} exceed tolerance {tol:g}")
    return Eigenpairs(values, vectors, residuals, iterations, method, floor)


def _factored_ritz(op, Q, values):
    """Rayleigh-Ritz through the factor: singular values of D Q.  Small Ritz
    values then carry absolute error ~ eps ||D|| rather than eps ||A||."""
    if not op.factors:
        return values, Q
    Q, _ = np.linalg.qr(Q)
    B = np.vstack([Dk @ Q for Dk in op.factors])
    _, s, wt = np.linalg.svd(B, full_matrices=False)
    order = np.argsort(s)
    return s[order] ** 2, Q @ wt.T[:, order]


# sweeps

def default_n_rule(spec: PotentialSpec, h: float, factor: float = 20.0) -> list:
    """max(512, ceil(factor * width / h^{1/nu_under})) per axis, capped at 2^15
    in 1D, 2^10 in 2D and 2^7 in 3D."""
    points = spec.critical_points
    nu_under = nu_stats(points).nu_under if points else 2
    cap = {1: 2 ** 15, 2: 2 ** 10, 3: 2 ** 7}[spec.dim]
    out = []
    for lo, hi in spec.box_float():
        n = max(512, math.ceil(factor * (hi - lo) / h ** (1.0 / nu_under)))
        out.append(min(n, cap))
    return out


@dataclass
class SpectralRow:
    h: float
    values: np.ndarray
    residuals: np.ndarray
    n: tuple
    iterations: int
    method: str = ""
    floor: float = 0.0
    error: str = ""
    vectors: np.ndarray | None = None
    axes: list | None = None
    seconds: float = 0.0

    @property
    def ok(self):
        return not self.error


@dataclass
class SpectralTable:
    rows: list
    k: int
    scheme: str = SCHEME_FACTORIZED

    @property
    def h(self):
        return np.array([r.h for r in self.rows])

    def values(self, index: int):
        """Column of the index-th eigenvalue (0-based); NaN on failed rows."""
        return np.array([r.values[index] if r.ok else np.nan for r in self.rows])

    def to_csv(self) -> str:
        k = self.k
        head = ["h"] + [f"lambda{i + 1}" for i in range(k)] + [f"res{i + 1}" for i in range(k)] + ["n", "iters"]
        lines = [",".join(head)]
        for r in self.rows:
            n = "x".join(str(v) for v in r.n)
            if r.ok:
                cells = [repr(float(r.h))] + [repr(float(v)) for v in r.values] + \
                        [repr(float(v)) for v in r.residuals] + [n, str(r.iterations)]
            else:
                cells = [repr(float(r.h))] + ["nan"] * (2 * k) + [n, "failed"]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def _interpolate(vec, old_axes, new_axes):
    if len(old_axes) == 1:
        return np.interp(new_axes[0], old_axes[0], vec, left=0.0, right=0.0)
    from scipy.interpolate import RegularGridInterpolator

    grid = RegularGridInterpolator(tuple(old_axes), vec.reshape([len(a) for a in old_axes]),
                                   bounds_error=False, fill_value=0.0)
    mesh = np.meshgrid(*new_axes, indexing="ij")
    return grid(np.stack([m.ravel() for m in mesh], axis=-1))


def _solve_row(spec, h, k, n, scheme, order, tol, seed, v0):
    t0 = time.perf_counter()
    try:
        op = assemble(spec, h, n, scheme, order)
        start = None
        if v0 is not None and not op.dim_is_one():
            old_vec, old_axes = v0
            start = _interpolate(old_vec, old_axes, op.axes)
        pairs = smallest_eigs(op, k, tol, seed, start)
        return SpectralRow(h, pairs.values, pairs.residuals, op.shape, pairs.iterations, pairs.method,
                           pairs.floor, "", pairs.vectors, op.axes, time.perf_counter() - t0)
    except (ConvergenceError, InvariantError) as exc:
        counts = tuple(_points(n, spec.dim))
        return SpectralRow(h, np.full(k, np.nan), np.full(k, np.nan), counts, 0, error=str(exc),
                           seconds=time.perf_counter() - t0)


def sweep(spec: PotentialSpec, h_list: Sequence[float], k: int = 3,
          n_rule: Callable | None = None, scheme: str = SCHEME_FACTORIZED, order: int = 2,
          tol: float = 1e-10, seed: int = 0, jobs: int = 1, keep_vectors: bool = True) -> SpectralTable:
    """One eigensolve per h (descending, duplicates dropped).  Failed rows are
    kept with their error message and the sweep continues."""
    hs = sorted({float(h) for h in h_list}, reverse=True)
    if any(not 0 < h < 1 for h in hs):
        raise InvariantError("h", "h values must lie in (0, 1)")
    rule = n_rule or default_n_rule
    counts = [rule(spec, h) for h in hs]
    rows = []
    if jobs > 1 and spec.dim == 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_solve_row, spec, h, k, n, scheme, order, tol, seed, None)
                       for h, n in zip(hs, counts)]
            rows = [f.result() for f in futures]
    else:
        warm = None
        for h, n in zip(hs, counts):
            row = _solve_row(spec, h, k, n, scheme, order, tol, seed, warm)
            if row.ok:
                warm = (row.vectors.sum(axis=1), row.axes)
            rows.append(row)
    if not keep_vectors:
        for r in rows:
            r.vectors = None
    return SpectralTable(rows, k, scheme)


def branch_overlaps(table: SpectralTable):
    """|<v_i(h_prev), v_j(h)>| between consecutive ok rows, previous vectors
    interpolated onto the new grid.  Returns one k x k matrix per step."""
    out = []
    prev = None
    for r in table.rows:
        if not r.ok or r.vectors is None:
            continue
        if prev is not None:
            k = table.k
            M = np.zeros((k, k))
            for i in range(k):
                vi = _interpolate(prev.vectors[:, i], prev.axes, r.axes)
                vi = vi / (np.linalg.norm(vi) or 1.0)
                for j in range(k):
                    M[i, j] = abs(float(vi @ r.vectors[:, j]))
            out.append((prev.h, r.h, M))
        prev = r
    return out


def track_branches(table: SpectralTable):
    """Follow eigenvector overlap across h.

    Returns (assignments, worst) where assignments[r] lists, for each branch,
    the eigenvalue index it occupies in ok row r (None for failed rows) and
    worst[b] is the smallest overlap seen along branch b.
    """
    from scipy.optimize import linear_sum_assignment

    k = table.k
    steps = {(a, b): M for a, b, M in branch_overlaps(table)}
    current = list(range(k))
    worst = np.ones(k)
    assignments = []
    prev_h = None
    for r in table.rows:
        if not r.ok or r.vectors is None:
            assignments.append(None)
            continue
        if prev_h is not None:
            M = steps[(prev_h, r.h)]
            rows_idx, cols = linear_sum_assignment(-M)
            mapping = dict(zip(rows_idx, cols))
            for b in range(k):
                new = int(mapping[current[b]])
                worst[b] = min(worst[b], M[current[b], new])
                current[b] = new
        assignments.append(list(current))
        prev_h = r.h
    return assignments, worst
