"""Rounding to partition matrices, upper bounds and the relative gap."""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np

from .eig import BoundResult
from .graph import Graph, SizeVector, cut_value, membership
from .lp import transport_solve

E_TOL = 1e-6


def nearest_partition(Xbar, m: SizeVector) -> tuple[np.ndarray, bool]:
    """Frobenius-nearest partition matrix to ``Xbar``.

    All partition matrices have the same norm, so the nearest one maximises
    ``<Xbar, X>`` over ``D``, a transportation problem with an integral optimal
    vertex.  Returns ``(X, flagged)`` where ``flagged`` marks an input outside
    ``E`` beyond ``1e-6``; such input is rounded anyway.
    """
    Xbar = np.asarray(Xbar, dtype=np.float64)
    if Xbar.shape != (m.n, m.k):
        raise ValueError(f"Xbar must be {m.n}x{m.k}")
    _, res = membership(Xbar, m, "E")
    flagged = res > E_TOL
    if flagged:
        warnings.warn(f"rounding a matrix outside E (residual {res:.2e})", RuntimeWarning, stacklevel=2)
    return transport_solve(Xbar, m).X, flagged


def upper_bound_from(g: Graph, Xbar, m: SizeVector, method: str = "round") -> BoundResult:
    t0 = time.perf_counter()
    X, flagged = nearest_partition(Xbar, m)
    value = cut_value(g, X, m)
    return BoundResult.upper(value, X, method, time.perf_counter() - t0, outside_E=flagged)


@dataclass(eq=False)
class GapReport:
    lowers: dict
    uppers: dict
    relGap: float | None
    bestLower: int | None
    bestUpper: int | None

    def gap_text(self) -> str:
        return "NA" if self.relGap is None else f"{self.relGap:.4f}"


def _rounded(r) -> int:
    return r.rounded if isinstance(r, BoundResult) else int(r)


def relative_gap(lowers: dict, uppers: dict) -> GapReport:
    """``(U - L) / (U + L)`` on rounded values of the best bounds; ``None`` if ``U + L <= 0``."""
    if not lowers or not uppers:
        raise ValueError("need at least one lower and one upper bound")
    lo = max(_rounded(r) for r in lowers.values())
    up = min(_rounded(r) for r in uppers.values())
    denom = up + lo
    gap = (up - lo) / denom if denom > 0 else None
    return GapReport(dict(lowers), dict(uppers), gap, lo, up)
