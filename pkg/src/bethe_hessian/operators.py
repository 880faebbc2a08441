"""Bethe-Hessian and non-backtracking operators, plus exact identity checks.

``H(t) = t^2 I - t A + (D - I)``. The reduced non-backtracking matrix
``[[0, D - I], [-I, A]]`` (size ``2n``) shares the non-trivial spectrum of the
``2m x 2m`` non-backtracking matrix ``B``; ``H(z)`` is singular exactly at
those eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import PoleAtWeight, TooLargeForDense, ValidationError, ZeroParameter
from .graph import SparseGraph, oriented_edges

__all__ = [
    "SymmetricOperator",
    "GeneralOperator",
    "bethe_hessian",
    "weighted_bethe_hessian",
    "reduced_nb",
    "full_nb",
    "ihara_bass_residual",
    "deformed_difference_check",
    "eigen_relation_residuals",
    "kernel_residual",
    "export_matrix_market",
    "gershgorin_bounds",
    "DENSE_DET_MAX_N",
    "DENSE_DET_MAX_M",
]

DENSE_DET_MAX_N = 12
DENSE_DET_MAX_M = 20


@dataclass(frozen=True, eq=False)
class SymmetricOperator:
    """A sparse symmetric matrix with a provenance tag such as ``"H(t=2.449)"``."""

    matrix: sp.csr_array
    tag: str = ""

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def shape(self):
        return self.matrix.shape

    def matvec(self, v):
        return self.matrix @ v

    def row(self, i):
        M = self.matrix
        lo, hi = M.indptr[i], M.indptr[i + 1]
        return M.indices[lo:hi], M.data[lo:hi]

    def toarray(self):
        return self.matrix.toarray()


@dataclass(frozen=True, eq=False)
class GeneralOperator:
    """A sparse (non-symmetric) real matrix with a structure tag."""

    matrix: sp.csr_array
    tag: str = ""

    @property
    def shape(self):
        return self.matrix.shape

    def matvec(self, v):
        return self.matrix @ v

    def toarray(self):
        return self.matrix.toarray()


def bethe_hessian(graph: SparseGraph, t: float) -> SymmetricOperator:
    t = float(t)
    A = graph.adjacency()
    diag = t * t - 1.0 + graph.degrees.astype(np.float64)
    H = sp.diags_array(diag, format="csr") - t * A
    H = sp.csr_array(H)
    H.sort_indices()
    return SymmetricOperator(H, f"H(t={t:.6g})")


def weighted_bethe_hessian(graph: SparseGraph, t: float) -> SymmetricOperator:
    """Weighted Bethe-Hessian.

    ``H_ii = 1 + sum_k w_ik^2 / (t^2 - w_ik^2)`` and
    ``H_ij = -t w_ij / (t^2 - w_ij^2)`` for edges. With unit weights this is
    ``bethe_hessian(graph, t) / (t^2 - 1)``.
    """
    t = float(t)
    w = np.ones(len(graph.indices)) if graph.weights is None else np.asarray(graph.weights)
    denom = t * t - w * w
    if np.any(np.abs(denom) <= 1e-12 * max(1.0, t * t)):
        raise PoleAtWeight(f"t^2 = {t * t:g} coincides with a squared edge weight")
    off = -t * w / denom
    rows = np.repeat(np.arange(graph.n), graph.degrees)
    diag = 1.0 + np.bincount(rows, weights=w * w / denom, minlength=graph.n)
    H = sp.csr_array(
        (off, graph.indices.copy(), graph.indptr.copy()), shape=(graph.n, graph.n)
    ) + sp.diags_array(diag, format="csr")
    H = sp.csr_array(H)
    H.sort_indices()
    return SymmetricOperator(H, f"Hw(t={t:.6g})")


def reduced_nb(graph: SparseGraph) -> GeneralOperator:
    n = graph.n
    A = graph.adjacency()
    DmI = sp.diags_array(graph.degrees.astype(np.float64) - 1.0)
    I = sp.eye_array(n)
    Bt = sp.block_array([[None, DmI], [-I, A]], format="csr")
    if n == 0:
        Bt = sp.csr_array((0, 0))
    return GeneralOperator(sp.csr_array(Bt), "reduced-nb")


def full_nb(graph: SparseGraph) -> GeneralOperator:
    """``B[(u,v),(x,y)] = 1`` iff ``v == x`` and ``u != y``, indexed by :func:`oriented_edges`."""
    oe = oriented_edges(graph).edges
    size = len(oe)
    if size == 0:
        return GeneralOperator(sp.csr_array((0, 0)), "nb")
    tails = oe[:, 0]
    by_tail = np.argsort(tails, kind="stable")
    starts = np.searchsorted(tails[by_tail], np.arange(graph.n + 1))
    heads = oe[:, 1]
    counts = starts[heads + 1] - starts[heads]
    rows = np.repeat(np.arange(size), counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    cols = by_tail[np.repeat(starts[heads], counts) + offs]
    keep = cols != (rows ^ 1)
    B = sp.csr_array(
        (np.ones(keep.sum()), (rows[keep], cols[keep])), shape=(size, size)
    )
    return GeneralOperator(B, "nb")


def _check_dense_size(graph):
    if graph.n > DENSE_DET_MAX_N or graph.m > DENSE_DET_MAX_M:
        raise TooLargeForDense(
            f"dense determinant checks need n <= {DENSE_DET_MAX_N} and "
            f"m <= {DENSE_DET_MAX_M}, got n={graph.n}, m={graph.m}"
        )


def _rel(a, b):
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def ihara_bass_residual(graph: SparseGraph, z_samples) -> float:
    """Largest relative residual of the two determinant identities at each ``z``.

    Checks ``det(B - zI) = (z^2-1)^(m-n) det(z^2 I - zA + D - I)`` and
    ``det(B - zI) = (z^2-1)^(m-n) det(reduced_nb - zI)`` densely.
    """
    _check_dense_size(graph)
    n, m = graph.n, graph.m
    B = full_nb(graph).toarray()
    Bt = reduced_nb(graph).toarray()
    A = graph.adjacency().toarray()
    DmI = np.diag(graph.degrees - 1.0)
    worst = 0.0
    for z in np.atleast_1d(np.asarray(z_samples, dtype=complex)):
        if abs(z * z - 1) < 1e-8:
            raise ValidationError(f"z={z} is too close to +-1")
        lhs = np.linalg.det(B - z * np.eye(2 * m)) if m else 1.0
        factor = (z * z - 1) ** (m - n)
        rhs_h = factor * np.linalg.det(z * z * np.eye(n) - z * A + DmI)
        rhs_b = factor * np.linalg.det(Bt - z * np.eye(2 * n))
        worst = max(worst, _rel(lhs, rhs_h), _rel(lhs, rhs_b))
    return worst


def deformed_difference_check(graph: SparseGraph, t: float, t2: float) -> float:
    """Residual of ``H(t)/t - H(t')/t' = (t - t')(I - (D - I)/(t t'))``.

    Both sides are assembled explicitly, which is the same as applying them
    to the standard basis. Returns the largest entrywise difference divided
    by ``max(1, largest entry of the right-hand side)``.
    """
    if t == 0 or t2 == 0:
        raise ZeroParameter("t and t' must be non-zero")
    lhs = bethe_hessian(graph, t).matrix / t - bethe_hessian(graph, t2).matrix / t2
    rhs = (t - t2) * sp.diags_array(1.0 - (graph.degrees - 1.0) / (t * t2), format="csr")
    diff = sp.csr_array(lhs - rhs)
    top = abs(diff).max() if diff.nnz else 0.0
    scale = max(1.0, float(abs(rhs).max()) if rhs.nnz else 0.0)
    return float(top) / scale


def eigen_relation_residuals(graph: SparseGraph, lam, x, y):
    """Residuals of ``(D - I) y = lam x`` and ``-x + A y = lam y``."""
    A = graph.adjacency()
    dm1 = graph.degrees - 1.0
    r1 = np.linalg.norm(dm1 * y - lam * x)
    r2 = np.linalg.norm(-x + A @ y - lam * y)
    return float(r1), float(r2)


def kernel_residual(graph: SparseGraph, lam, y) -> float:
    """``||H(lam) y||`` for real ``lam`` (complex ``lam`` handled too)."""
    A = graph.adjacency()
    Hy = (lam * lam - 1.0 + graph.degrees) * y - lam * (A @ y)
    return float(np.linalg.norm(Hy))


def gershgorin_bounds(M) -> tuple[float, float]:
    """Interval containing the spectrum of a symmetric matrix."""
    M = sp.csr_array(M.matrix if hasattr(M, "matrix") else M)
    if M.shape[0] == 0:
        return 0.0, 0.0
    diag = M.diagonal()
    radius = np.asarray(abs(M).sum(axis=1)).ravel() - np.abs(diag)
    return float((diag - radius).min()), float((diag + radius).max())


def export_matrix_market(op, path):
    M = op.matrix if hasattr(op, "matrix") else op
    with open(path, "wb") as fh:
        scipy.io.mmwrite(fh, sp.coo_array(M), precision=17)
