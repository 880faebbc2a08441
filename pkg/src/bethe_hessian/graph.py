"""Sparse undirected graphs: storage, degrees, oriented edges and file IO."""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import DuplicateEdgeRejected, ParseError, SelfLoopRejected, ValidationError

__all__ = [
    "SparseGraph",
    "OrientedEdgeSet",
    "mean_degree",
    "oriented_edges",
    "load_graph",
    "save_graph",
]

EDGE_LIST = "edge-list"
MATRIX_MARKET = "matrix-market"


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SparseGraph:
    """Simple undirected graph in compressed sparse row form.

    ``indices[indptr[i]:indptr[i+1]]`` is the sorted neighbour list of ``i``.
    ``weights`` is either ``None`` (all weights 1) or aligned with ``indices``.
    Instances are immutable; build them with :meth:`from_edges`.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray | None = None

    @classmethod
    def from_edges(cls, n, edges, weights=None):
        """Build a graph from an ``(m, 2)`` array of undirected edges.

        Raises
        ------
        SelfLoopRejected, DuplicateEdgeRejected
            On ``u == v`` or when an unordered pair occurs twice.
        """
        n = int(n)
        if n < 0:
            raise ValidationError("vertex count must be non-negative")
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise ValidationError(f"edge endpoint out of range [0, {n})")
        loops = np.flatnonzero(e[:, 0] == e[:, 1])
        if loops.size:
            raise SelfLoopRejected(f"self-loop at vertex {e[loops[0], 0]}")
        lo = np.minimum(e[:, 0], e[:, 1])
        hi = np.maximum(e[:, 0], e[:, 1])
        order = np.lexsort((hi, lo))
        lo, hi = lo[order], hi[order]
        w = None
        if weights is not None:
            w = np.asarray(weights, dtype=np.float64).reshape(-1)
            if w.shape[0] != e.shape[0]:
                raise ValidationError("weights must align with edges")
            w = w[order]
        if lo.size > 1:
            dup = np.flatnonzero((lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1]))
            if dup.size:
                raise DuplicateEdgeRejected(
                    f"duplicate edge {{{lo[dup[0]]}, {hi[dup[0]]}}}"
                )

        rows = np.concatenate([lo, hi])
        cols = np.concatenate([hi, lo])
        order = np.lexsort((cols, rows))
        indices = cols[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
        # an edgeless graph carries no weight information
        wdata = None if w is None or not w.size else np.concatenate([w, w])[order]
        return cls(
            n,
            _frozen(indptr),
            _frozen(indices),
            None if wdata is None else _frozen(wdata),
        )

    @classmethod
    def empty(cls, n):
        return cls.from_edges(n, np.zeros((0, 2), dtype=np.int64))

    @property
    def m(self) -> int:
        return len(self.indices) // 2

    @property
    def weighted(self) -> bool:
        return self.weights is not None

    @cached_property
    def degrees(self) -> np.ndarray:
        return _frozen(np.diff(self.indptr))

    def neighbors(self, i):
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    def edge_array(self):
        """Return ``(edges, weights)`` with each edge once as ``u < v``, sorted."""
        rows = np.repeat(np.arange(self.n), self.degrees)
        keep = rows < self.indices
        e = np.column_stack([rows[keep], self.indices[keep]])
        w = None if self.weights is None else self.weights[keep]
        return e, w

    def adjacency(self, weighted=False):
        """Adjacency matrix as a CSR array (weights only if ``weighted``)."""
        if weighted and self.weights is not None:
            data = np.array(self.weights, dtype=np.float64)
        else:
            data = np.ones(len(self.indices))
        return sp.csr_array(
            (data, self.indices.copy(), self.indptr.copy()), shape=(self.n, self.n)
        )

    def __eq__(self, other):
        if not isinstance(other, SparseGraph):
            return NotImplemented
        if self.n != other.n or not np.array_equal(self.indptr, other.indptr):
            return False
        if not np.array_equal(self.indices, other.indices):
            return False
        if (self.weights is None) != (other.weights is None):
            return False
        return self.weights is None or np.array_equal(self.weights, other.weights)

    __hash__ = None

    def __repr__(self):
        w = ", weighted" if self.weighted else ""
        return f"SparseGraph(n={self.n}, m={self.m}{w})"


def mean_degree(graph: SparseGraph) -> float:
    """Sample mean degree ``2m / n`` (0.0 for the graph with no vertices)."""
    if graph.n == 0:
        return 0.0
    return 2.0 * graph.m / graph.n


@dataclass(frozen=True, eq=False)
class OrientedEdgeSet:
    """Both orientations of every edge, as a ``(2m, 2)`` array.

    Ordering: undirected edges sorted by ``(min, max)``; each contributes
    ``(min, max)`` then ``(max, min)``. So the reverse of edge ``e`` is
    ``e ^ 1``.
    """

    edges: np.ndarray

    def __len__(self):
        return len(self.edges)

    @cached_property
    def index(self) -> dict:
        return {(int(u), int(v)): k for k, (u, v) in enumerate(self.edges)}

    def reverse(self, k):
        return k ^ 1


def oriented_edges(graph: SparseGraph) -> OrientedEdgeSet:
    e, _ = graph.edge_array()
    out = np.empty((2 * len(e), 2), dtype=np.int64)
    out[0::2] = e
    out[1::2] = e[:, ::-1]
    return OrientedEdgeSet(_frozen(out))


def _atomic_write_text(path, text):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _format_from_path(path):
    return MATRIX_MARKET if str(path).endswith((".mtx", ".mm")) else EDGE_LIST


def save_graph(graph: SparseGraph, path, format=None):
    """Write ``graph`` as an edge list (``u v [w]``, 0-based) or Matrix Market.

    The edge list starts with a ``# n=<n>`` comment so isolated vertices
    survive a round trip.
    """
    format = format or _format_from_path(path)
    e, w = graph.edge_array()
    if format == EDGE_LIST:
        lines = [f"# n={graph.n}"]
        if w is None:
            lines += [f"{u} {v}" for u, v in e]
        else:
            lines += [f"{u} {v} {x!r}" for (u, v), x in zip(e, w.tolist())]
        _atomic_write_text(path, "\n".join(lines) + "\n")
    elif format == MATRIX_MARKET:
        # lower triangle, as the symmetric coordinate format expects
        data = np.ones(len(e)) if w is None else w
        lower = sp.coo_array((data, (e[:, 1], e[:, 0])), shape=(graph.n, graph.n))
        field = "pattern" if w is None else "real"
        with open(path, "wb") as fh:
            scipy.io.mmwrite(fh, lower, field=field, symmetry="symmetric", precision=17)
    else:
        raise ValidationError(f"unknown graph format {format!r}")


def _parse_edge_list(text):
    n = None
    edges, weights = [], []
    weighted = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("n="):
                try:
                    n = int(body[2:])
                except ValueError:
                    raise ParseError(f"bad vertex count {body!r}", lineno) from None
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise ParseError(f"expected 'u v [w]', got {line!r}", lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else None
        except ValueError:
            raise ParseError(f"non-numeric field in {line!r}", lineno) from None
        if u < 0 or v < 0:
            raise ParseError("negative vertex index", lineno)
        if weighted is None:
            weighted = w is not None
        elif weighted != (w is not None):
            raise ParseError("mixed weighted and unweighted lines", lineno)
        if u == v:
            raise SelfLoopRejected(f"self-loop at vertex {u}", lineno)
        edges.append((u, v, lineno))
        if w is not None:
            weights.append(w)

    seen = {}
    for u, v, lineno in edges:
        key = (min(u, v), max(u, v))
        if key in seen:
            raise DuplicateEdgeRejected(
                f"edge {{{key[0]}, {key[1]}}} already given on line {seen[key]}", lineno
            )
        seen[key] = lineno
    e = np.array([(u, v) for u, v, _ in edges], dtype=np.int64).reshape(-1, 2)
    top = int(e.max()) + 1 if e.size else 0
    if n is None:
        n = top
    elif top > n:
        raise ParseError(f"vertex {top - 1} exceeds declared n={n}")
    return SparseGraph.from_edges(n, e, weights if weighted else None)


def _read_matrix_market(path):
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", "replace").lower()
    field = "pattern" if "pattern" in header else "real"
    try:
        M = sp.coo_array(scipy.io.mmread(path))
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    if M.shape[0] != M.shape[1]:
        raise ParseError(f"adjacency matrix must be square, got {M.shape}")
    r, c = M.row.astype(np.int64), M.col.astype(np.int64)
    if np.any(r == c):
        raise SelfLoopRejected(f"self-loop at vertex {int(r[r == c][0])}")
    upper = r < c
    lower_pairs = set(zip(c[~upper].tolist(), r[~upper].tolist()))
    upper_pairs = list(zip(r[upper].tolist(), c[upper].tolist()))
    if len(set(upper_pairs)) != len(upper_pairs) or set(upper_pairs) != lower_pairs:
        raise DuplicateEdgeRejected("duplicate or unmatched entries in matrix-market file")
    e = np.array(upper_pairs, dtype=np.int64).reshape(-1, 2)
    w = None if field == "pattern" else np.asarray(M.data)[upper].astype(np.float64)
    return SparseGraph.from_edges(M.shape[0], e, w)


def load_graph(path, format=None) -> SparseGraph:
    """Read a graph written by :func:`save_graph` (or any compatible file)."""
    format = format or _format_from_path(path)
    if format == EDGE_LIST:
        return _parse_edge_list(Path(path).read_text())
    if format == MATRIX_MARKET:
        return _read_matrix_market(path)
    raise ValidationError(f"unknown graph format {format!r}")
