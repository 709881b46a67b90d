"""Graphs, set-size vectors, model matrices and the partition-matrix constraint sets.

Node indices are 0-based everywhere in the code.  The set ``S_k`` (the last
column of a partition matrix) is the separator block: edges touching it are
never counted by :func:`cut_value`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

DENSE_LIMIT = 2000
MEMBERSHIP_TOL = 1e-10
MEMBERSHIP_TAGS = ("Z", "N", "E", "D", "DO", "De", "G")


class GraphParseError(ValueError):
    """Malformed edge-list document; ``lineno`` is 1-based."""

    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph on nodes ``0..n-1``.

    ``edges`` is an ``(|E|, 2)`` integer array with ``u < v`` in every row,
    sorted lexicographically and free of duplicates.
    """

    n: int
    edges: np.ndarray = field(repr=False)

    @classmethod
    def from_edges(cls, n: int, pairs: Iterable[Sequence[int]]) -> "Graph":
        n = int(n)
        if n < 1:
            raise ValueError("graph needs at least one node")
        arr = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs,
                         dtype=np.int64).reshape(-1, 2)
        if arr.size:
            if arr.min() < 0 or arr.max() >= n:
                raise ValueError("edge endpoint out of range")
            if np.any(arr[:, 0] == arr[:, 1]):
                raise ValueError("self-loops are not allowed")
        lo = np.minimum(arr[:, 0], arr[:, 1])
        hi = np.maximum(arr[:, 0], arr[:, 1])
        keys = np.unique(lo * n + hi)
        edges = np.column_stack([keys // n, keys % n]).astype(np.int64)
        edges.setflags(write=False)
        return cls(n, edges)

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def density(self) -> float:
        if self.n < 2:
            return 0.0
        return 2.0 * self.num_edges / (self.n * (self.n - 1))

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency in CSR form (sorted neighbour lists)."""
        u, v = self.edges[:, 0], self.edges[:, 1]
        rows = np.concatenate([u, v])
        cols = np.concatenate([v, u])
        data = np.ones(rows.size, dtype=np.float64)
        A = sp.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))
        A.sort_indices()
        return A

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n).astype(np.float64)

    def neighbors(self, i: int) -> np.ndarray:
        A = self.adjacency
        return A.indices[A.indptr[i]:A.indptr[i + 1]]

    def dense_adjacency(self, force: bool = False) -> np.ndarray:
        if self.n > DENSE_LIMIT and not force:
            raise ValueError(f"refusing to densify a graph with n={self.n} > {DENSE_LIMIT}")
        return self.adjacency.toarray()

    def laplacian(self) -> sp.csr_matrix:
        return (sp.diags(self.degrees) - self.adjacency).tocsr()

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    def __hash__(self):
        return hash((self.n, self.edges.tobytes()))


def parse_graph(text: str) -> Graph:
    """Read the ``n |E|`` header followed by ``u v`` lines."""
    lines = text.split("\n")
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise GraphParseError(1, "empty document")
    head = lines[0].split()
    if len(head) != 2:
        raise GraphParseError(1, "expected header 'n |E|'")
    try:
        n, ne = int(head[0]), int(head[1])
    except ValueError:
        raise GraphParseError(1, "header fields must be integers") from None
    if n < 1 or ne < 0:
        raise GraphParseError(1, "header needs n >= 1 and |E| >= 0")
    body = lines[1:]
    if len(body) != ne:
        raise GraphParseError(len(lines), f"header announces {ne} edges, found {len(body)} lines")
    pairs = []
    for offset, line in enumerate(body, start=2):
        parts = line.split()
        if len(parts) != 2:
            raise GraphParseError(offset, f"expected 'u v', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphParseError(offset, f"non-integer endpoint in {line!r}") from None
        if not (0 <= u < n and 0 <= v < n):
            raise GraphParseError(offset, f"endpoint out of range 0..{n - 1}")
        if u == v:
            raise GraphParseError(offset, f"self-loop at node {u}")
        pairs.append((u, v))
    return Graph.from_edges(n, pairs)


def format_graph(g: Graph) -> str:
    out = [f"{g.n} {g.num_edges}"]
    out.extend(f"{u} {v}" for u, v in g.edges.tolist())
    return "\n".join(out) + "\n"


def read_graph(path) -> Graph:
    with open(path, "r", encoding="ascii") as fh:
        return parse_graph(fh.read())


def write_graph(g: Graph, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_graph(g))


@dataclass(frozen=True)
class SizeVector:
    """Prescribed set sizes ``m``; the last entry is the separator set."""

    m: tuple[int, ...]

    def __post_init__(self):
        m = tuple(int(x) for x in self.m)
        if len(m) < 3:
            raise ValueError("need k >= 3 sets")
        if min(m) < 1:
            raise ValueError("set sizes must be positive")
        object.__setattr__(self, "m", m)

    @classmethod
    def parse(cls, text: str) -> "SizeVector":
        return cls(tuple(int(t) for t in text.replace(" ", "").split(",") if t))

    @property
    def k(self) -> int:
        return len(self.m)

    @property
    def n(self) -> int:
        return sum(self.m)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.m, dtype=np.float64)

    def __str__(self):
        return ",".join(str(x) for x in self.m)


@dataclass(frozen=True, eq=False)
class ModelMatrices:
    B: np.ndarray
    M: np.ndarray
    mtilde: np.ndarray
    Mtilde: np.ndarray
    Btilde: np.ndarray


def b_matrix(k: int) -> np.ndarray:
    B = np.zeros((k, k))
    B[: k - 1, : k - 1] = 1.0 - np.eye(k - 1)
    return B


def model_matrices(m: SizeVector) -> ModelMatrices:
    B = b_matrix(m.k)
    mt = np.sqrt(m.array)
    Mt = np.diag(mt)
    return ModelMatrices(B=B, M=np.diag(m.array), mtilde=mt, Mtilde=Mt, Btilde=Mt @ B @ Mt)


def objective_matrix(g: Graph, d, sparse: bool = False):
    """``G(d) = A - Diag(d)``; ``d = 0`` gives ``A`` and ``d = Ae`` gives ``-L``."""
    d = np.asarray(d, dtype=np.float64)
    if d.shape != (g.n,):
        raise ValueError(f"d must have length {g.n}, got shape {d.shape}")
    G = (g.adjacency - sp.diags(d)).tocsr()
    return G if sparse else G.toarray()


def partition_matrix(labels, k: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    X = np.zeros((labels.size, k), dtype=np.int64)
    X[np.arange(labels.size), labels] = 1
    return X


def labels_of(X) -> np.ndarray:
    return np.argmax(np.asarray(X), axis=1)


def check_partition(X, m: SizeVector) -> np.ndarray:
    """Validate a partition matrix for ``m`` and return its labels."""
    X = np.asarray(X)
    if X.shape != (m.n, m.k):
        raise ValueError(f"partition matrix must be {m.n}x{m.k}, got {X.shape}")
    if not np.all((X == 0) | (X == 1)):
        raise ValueError("partition matrix entries must be 0 or 1")
    if not np.all(X.sum(axis=1) == 1):
        raise ValueError("every node must lie in exactly one set")
    if not np.array_equal(X.sum(axis=0).astype(np.int64), np.asarray(m.m)):
        raise ValueError("column sums must equal the set sizes")
    return labels_of(X)


def cut_value(g: Graph, X, m: SizeVector | None = None) -> int:
    """Number of edges joining two distinct sets among ``S_1..S_{k-1}``."""
    X = np.asarray(X)
    if m is None:
        m = SizeVector(tuple(int(c) for c in X.sum(axis=0)))
    labels = check_partition(X, m)
    lu = labels[g.edges[:, 0]]
    lv = labels[g.edges[:, 1]]
    sep = m.k - 1
    return int(np.count_nonzero((lu != lv) & (lu != sep) & (lv != sep)))


def quadratic_cut(g: Graph, X, d=None) -> float:
    """``1/2 trace G(d) X B X^T``, equal to :func:`cut_value` on partition matrices."""
    X = np.asarray(X, dtype=np.float64)
    d = np.zeros(g.n) if d is None else np.asarray(d, dtype=np.float64)
    B = b_matrix(X.shape[1])
    GX = g.adjacency @ X - d[:, None] * X
    return 0.5 * float(np.sum(GX * (X @ B)))


def membership(X, m: SizeVector, which: str) -> tuple[bool, float]:
    """Membership of ``X`` in one of the sets Z, N, E, D, DO, De, G.

    Returns ``(inside, worst_residual)``.  Integer input is checked exactly,
    float input within ``MEMBERSHIP_TOL``.
    """
    if which not in MEMBERSHIP_TAGS:
        raise ValueError(f"unknown constraint set {which!r}; expected one of {MEMBERSHIP_TAGS}")
    Xa = np.asarray(X)
    if Xa.shape != (m.n, m.k):
        raise ValueError(f"X must be {m.n}x{m.k}, got {Xa.shape}")
    exact = np.issubdtype(Xa.dtype, np.integer) or Xa.dtype == np.bool_
    tol = 0.0 if exact else MEMBERSHIP_TOL
    Xf = Xa.astype(np.float64)
    mv = m.array
    if which == "Z":
        res = float(np.max(np.abs(Xf * Xf - Xf)))
    elif which == "N":
        res = float(max(0.0, -Xf.min()))
    elif which == "E":
        res = _e_residual(Xf, mv)
    elif which == "D":
        res = max(_e_residual(Xf, mv), float(max(0.0, -Xf.min())))
    elif which == "DO":
        res = float(np.max(np.abs(Xf.T @ Xf - np.diag(mv))))
    elif which == "De":
        res = float(np.max(np.abs(np.einsum("ij,ij->i", Xf, Xf) - 1.0)))
    else:
        gram = np.abs(Xf).T @ np.abs(Xf)
        np.fill_diagonal(gram, 0.0)
        res = float(gram.max()) if m.k > 1 else 0.0
    return res <= tol, res


def _e_residual(X: np.ndarray, m: np.ndarray) -> float:
    return float(max(np.max(np.abs(X.sum(axis=1) - 1.0)), np.max(np.abs(X.sum(axis=0) - m))))


def block_partition(m: SizeVector) -> np.ndarray:
    """The partition matrix ``X_0`` that puts nodes in consecutive blocks."""
    labels = np.repeat(np.arange(m.k), m.m)
    return partition_matrix(labels, m.k)
