"""Eigenvalue clusters of block matrices with geometrically separated scales.

A symmetric matrix M with blocks of sizes n_1, ..., n_p and scales
1 = eps_1 > eps_2 > ... is rescaled as Omega^{-1} M Omega^{-1} with
Omega = diag(eps_j I_{n_j}).  Each diagonal block of the rescaled matrix is
eigensolved on its own; its eigenvalues times eps_j^2 predict one cluster of
the spectrum of M, and the norm of the off-diagonal part of the rescaled
matrix is the certificate for the cluster width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvariantError

DEFAULT_WIDTH_FACTOR = 2.0


@dataclass
class Cluster:
    scale: float
    centers: np.ndarray      # eps_j^2 * eigenvalues of the rescaled block
    radius: float            # half-width around each center

    def contains(self, value: float) -> bool:
        return bool(np.any(np.abs(self.centers - value) <= self.radius))

    @property
    def size(self):
        return len(self.centers)


@dataclass
class ClusteredSpectrum:
    clusters: list
    off_diagonal_norm: float
    rescaled: np.ndarray
    width_factor: float
    block_condition: list = field(default_factory=list)

    def predicted(self) -> np.ndarray:
        return np.sort(np.concatenate([c.centers for c in self.clusters]))

    def assign(self, eigenvalues: Sequence[float]):
        """Cluster index of each eigenvalue, or -1 if it lies in none or in several."""
        out = []
        for lam in eigenvalues:
            hits = [j for j, c in enumerate(self.clusters) if c.contains(lam)]
            out.append(hits[0] if len(hits) == 1 else -1)
        return out

    def agrees_with(self, eigenvalues: Sequence[float]) -> bool:
        """Every eigenvalue lies in exactly one cluster and each cluster holds
        as many eigenvalues as its block size."""
        labels = self.assign(eigenvalues)
        if -1 in labels:
            return False
        counts = [labels.count(j) for j in range(len(self.clusters))]
        return counts == [c.size for c in self.clusters]


def block_slices(sizes: Sequence[int]):
    out, start = [], 0
    for n in sizes:
        out.append(slice(start, start + n))
        start += n
    return out


def _check_scales(sizes, eps):
    if len(sizes) != len(eps):
        raise ValueError("one scale per block is required")
    if any(n < 1 for n in sizes):
        raise ValueError("block sizes must be positive")
    if not math.isclose(eps[0], 1.0):
        raise ValueError("the first scale must be 1")
    if any(b >= a for a, b in zip(eps, eps[1:])) or eps[-1] <= 0:
        raise ValueError("scales must be positive and strictly decreasing")


def graded_cluster(M, blocks: Sequence[int], eps: Sequence[float],
                   width_factor: float = DEFAULT_WIDTH_FACTOR, singular_tol: float = 1e-12) -> ClusteredSpectrum:
    """Predict the spectrum of a graded symmetric matrix block by block.

    Raises InvariantError when a rescaled diagonal block is singular: the
    clusters then no longer separate.
    """
    M = np.asarray(M, dtype=float)
    blocks = [int(n) for n in blocks]
    eps = [float(e) for e in eps]
    _check_scales(blocks, eps)
    if M.shape != (sum(blocks), sum(blocks)):
        raise ValueError(f"matrix shape {M.shape} does not match blocks {blocks}")
    if not np.allclose(M, M.T, rtol=1e-12, atol=0.0):
        raise InvariantError("symmetric", "graded matrix is not symmetric")
    scale = np.concatenate([np.full(n, e) for n, e in zip(blocks, eps)])
    rescaled = M / np.outer(scale, scale)
    slices = block_slices(blocks)
    off = rescaled.copy()
    for sl in slices:
        off[sl, sl] = 0.0
    r = float(np.linalg.norm(off, 2)) if off.any() else 0.0
    clusters, conditions = [], []
    for j, (sl, e) in enumerate(zip(slices, eps)):
        block = rescaled[sl, sl]
        vals = np.linalg.eigvalsh(block)
        size = max(float(np.max(np.abs(vals))), np.finfo(float).tiny)
        smallest = float(np.min(np.abs(vals)))
        if smallest <= singular_tol * size:
            raise InvariantError("graded-block", f"rescaled diagonal block {j} is singular "
                                                 f"(smallest |eigenvalue| {smallest:.3g})")
        conditions.append(size / smallest)
        clusters.append(Cluster(e * e, e * e * vals, e * e * width_factor * r))
    return ClusteredSpectrum(clusters, r, rescaled, width_factor, conditions)


def interaction_scales(mu: Sequence, S: Sequence, h: float):
    """Scales eps_j = sqrt(h^{mu_j - mu_1} e^{-2(S_j - S_1)/h}) for minima ordered
    by increasing barrier (mu_j, S_j); the matrix divided by h^{mu_1} e^{-2 S_1/h}
    is then graded with these scales."""
    mu = [float(m) for m in mu]
    S = [float(s) for s in S]
    return [math.sqrt(h ** (m - mu[0]) * math.exp(-2 * (s - S[0]) / h)) for m, s in zip(mu, S)]


def random_graded(rng: np.random.Generator, blocks: Sequence[int], eps: Sequence[float], h: float,
                  spectrum=(0.1, 10.0)):
    """Omega (M0 + h P) Omega with M0 block diagonal SPD (spectrum in the given
    range) and P symmetric with unit spectral norm."""
    n = sum(blocks)
    M0 = np.zeros((n, n))
    for sl in block_slices(blocks):
        k = sl.stop - sl.start
        q, _ = np.linalg.qr(rng.standard_normal((k, k)))
        vals = rng.uniform(*spectrum, size=k)
        M0[sl, sl] = (q * vals) @ q.T
    P = rng.standard_normal((n, n))
    P = (P + P.T) / 2
    P /= np.linalg.norm(P, 2)
    scale = np.concatenate([np.full(k, e) for k, e in zip(blocks, eps)])
    M = np.outer(scale, scale) * (M0 + h * P)
    return (M + M.T) / 2
