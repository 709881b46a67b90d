"""Seeded graph generators.

All randomness comes from numpy's PCG64 bit generator seeded through
``SeedSequence(seed)``; per-instance streams are obtained with
``SeedSequence.spawn`` so a table of instances is reproducible bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph, SizeVector

DENSE_P = 0.75


def rng_for(seed) -> np.random.Generator:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.PCG64(ss))


def spawn_seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(int(seed)).spawn(count)


@dataclass(frozen=True)
class GeneratorConfig:
    kind: str                 # structured | randomDense | randomSparse
    k: int = 3
    imax: int = 10
    p: float = 0.0
    dens: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("structured", "randomDense", "randomSparse"):
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if not 0.0 <= self.p < 1.0:
            raise ValueError("p must lie in [0, 1)")
        if self.k < 3:
            raise ValueError("k must be at least 3")


def random_sizes(k: int, imax: int, rng: np.random.Generator) -> SizeVector:
    """Sizes drawn uniformly from ``{2, ..., imax+1}``."""
    return SizeVector(tuple(int(x) for x in rng.integers(2, imax + 2, size=k)))


def _pairs_from_index(idx: np.ndarray, n: int) -> np.ndarray:
    """Decode row-major indices of the strict upper triangle into ``(u, v)`` pairs."""
    u_all = np.arange(n - 1, dtype=np.int64)
    starts = u_all * (2 * n - u_all - 1) // 2
    u = np.searchsorted(starts, idx, side="right") - 1
    v = idx - starts[u] + u + 1
    return np.column_stack([u, v])


def _structured_base(sizes: SizeVector) -> list[np.ndarray]:
    off = np.concatenate([[0], np.cumsum(sizes.m)])
    parts = []
    for b in range(sizes.k):
        lo, hi = off[b], off[b + 1]
        iu, ju = np.triu_indices(hi - lo, 1)
        parts.append(np.column_stack([iu + lo, ju + lo]))
    sep = np.arange(off[-2], off[-1])
    front = np.arange(off[-2])
    parts.append(np.column_stack([np.repeat(front, sep.size), np.tile(sep, front.size)]))
    return parts


def cross_pairs(sizes: SizeVector) -> int:
    """Number of node pairs lying in two distinct blocks among the first ``k-1``."""
    mv = np.asarray(sizes.m[:-1], dtype=np.int64)
    return int((mv.sum() ** 2 - (mv ** 2).sum()) // 2)


def gen_structured(sizes: SizeVector, p: float = 0.0, seed=0) -> tuple[Graph, int]:
    """Cliques on consecutive blocks, blocks ``1..k-1`` joined to block ``k``, plus ``u0`` cross edges.

    The ``u0 = floor(e_c p)`` extra edges are drawn without replacement from
    the ``e_c`` pairs between distinct blocks among the first ``k-1``, so the
    block partition has cut exactly ``u0``.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError("p must lie in [0, 1)")
    rng = rng_for(seed)
    parts = _structured_base(sizes)
    ec = cross_pairs(sizes)
    u0 = int(np.floor(ec * p))
    if u0:
        pick = np.sort(rng.choice(ec, size=u0, replace=False))
        parts.append(_decode_cross(pick, sizes))
    return Graph.from_edges(sizes.n, np.vstack(parts)), u0


def _decode_cross(idx: np.ndarray, sizes: SizeVector) -> np.ndarray:
    off = np.concatenate([[0], np.cumsum(sizes.m)])
    blocks = [(a, b) for a in range(sizes.k - 1) for b in range(a + 1, sizes.k - 1)]
    counts = np.array([sizes.m[a] * sizes.m[b] for a, b in blocks], dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(counts)])
    which = np.searchsorted(starts, idx, side="right") - 1
    out = np.empty((idx.size, 2), dtype=np.int64)
    for w in np.unique(which):
        a, b = blocks[w]
        local = idx[which == w] - starts[w]
        out[which == w, 0] = off[a] + local // sizes.m[b]
        out[which == w, 1] = off[b] + local % sizes.m[b]
    return out


def gen_random_dense(sizes: SizeVector, seed=0) -> Graph:
    """Each pair present independently with probability 0.75."""
    rng = rng_for(seed)
    n = sizes.n
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < DENSE_P
    return Graph.from_edges(n, np.column_stack([iu[keep], ju[keep]]))


def gen_random_sparse(n: int, dens: float, seed=0) -> Graph:
    """Binomially many pairs drawn without replacement, expected density ``dens``."""
    if not 0.0 < dens < 1.0:
        raise ValueError("dens must lie in (0, 1)")
    if n < 2:
        raise ValueError("need n >= 2")
    rng = rng_for(seed)
    total = n * (n - 1) // 2
    count = int(rng.binomial(total, dens))
    idx = np.sort(rng.choice(total, size=count, replace=False))
    return Graph.from_edges(n, _pairs_from_index(idx.astype(np.int64), n))
