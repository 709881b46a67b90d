"""Experiment orchestration: per-instance bound evaluation, tables and the separator scan."""
from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .eig import BoundResult, projected_eig_bound, projected_pieces
from .generators import gen_random_dense, gen_random_sparse, gen_structured, random_sizes, rng_for, spawn_seeds
from .graph import Graph, SizeVector, labels_of
from .qp import build_dual_pair, qp_lower_bound
from .rounding import GapReport, relative_gap, upper_bound_from
from .sdp import build_sdp_data, recover_candidates, solve_sdp
from .spectral import build_basis

METHODS = ("eigL", "eigA", "qp", "sdp")
DEFAULT_METHODS = ("eigL", "eigA", "qp")
STATUS_ABSENT = "separator certified absent"
STATUS_FOUND = "separator found"
STATUS_UNDECIDED = "undecided"


@dataclass(frozen=True)
class RunOptions:
    methods: tuple = DEFAULT_METHODS
    basis: str = "V1"
    tol: float | None = None          # qp default 1e-6, sdp default 1e-5
    max_iters: int | None = None      # qp default 2000, sdp default 20000
    qp_limit: int = 2000
    sdp_limit: int = 2000
    seed: int = 0
    timings: bool = False

    def __post_init__(self):
        bad = [mth for mth in self.methods if mth not in METHODS]
        if bad:
            raise ValueError(f"unknown method(s) {bad}; choose from {METHODS}")
        if self.basis not in ("V0", "V1", "dense"):
            raise ValueError("basis must be V0, V1 or dense")


@dataclass
class Instance:
    graph: Graph
    sizes: SizeVector
    u0: int | None = None


@dataclass(eq=False)
class ExperimentRow:
    n: int
    k: int
    E: int
    u0: int | None
    density: float
    sizes: SizeVector
    lowers: dict = field(default_factory=dict)
    uppers: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    gap: GapReport | None = None

    def best_upper(self) -> BoundResult | None:
        if not self.uppers:
            return None
        return min(self.uppers.values(), key=lambda r: r.rounded)


def _lower_upper(method: str, inst: Instance, opts: RunOptions, basis):
    g, m = inst.graph, inst.sizes
    if method in ("eigL", "eigA"):
        mode = "negLaplacian" if method == "eigL" else "adjacency"
        low = projected_eig_bound(g, m, mode, basis, seed=opts.seed)
        return low, [low.witness]
    if method == "qp":
        if g.n > opts.qp_limit:
            raise ValueError(f"qp size guard: n={g.n} exceeds {opts.qp_limit}")
        t0 = time.perf_counter()
        pieces = projected_pieces(g, m, None, basis, seed=opts.seed)
        dual = build_dual_pair(pieces, opts.qp_limit)
        low = qp_lower_bound(g, m, dual, pieces, max_iters=opts.max_iters or 2000, tol=opts.tol or 1e-6)
        low.seconds = time.perf_counter() - t0
        return low, [low.witness]
    t0 = time.perf_counter()
    data = build_sdp_data(g, m, limit=opts.sdp_limit)
    sol = solve_sdp(data, tol=opts.tol or 1e-5, max_iters=opts.max_iters or 20000)
    X1, X2, _ = recover_candidates(sol, data)
    low = BoundResult.lower(sol.certifiedLowerBound, X1, "sdp", time.perf_counter() - t0,
                            primal=sol.primalValue, converged=sol.converged, iterations=sol.iterations)
    return low, [X for X in (X1, X2) if X is not None]


def evaluate(inst: Instance, opts: RunOptions) -> ExperimentRow:
    g, m = inst.graph, inst.sizes
    row = ExperimentRow(g.n, m.k, g.num_edges, inst.u0, g.density, m)
    basis = build_basis(g.n, np.sqrt(m.array), opts.basis)
    for method in opts.methods:
        try:
            low, cands = _lower_upper(method, inst, opts, basis)
            row.lowers[method] = low
            t0 = time.perf_counter()
            ups = [upper_bound_from(g, X, m, method) for X in cands]
            up = min(ups, key=lambda r: r.rounded)
            up.seconds = time.perf_counter() - t0
            row.uppers[method] = up
        except Exception as exc:  # recorded per cell, the run continues
            row.errors[method] = f"{type(exc).__name__}: {exc}"
    if row.lowers and row.uppers:
        row.gap = relative_gap(row.lowers, row.uppers)
    return row


def _evaluate_star(args):
    return evaluate(*args)


def run_table(instances, opts: RunOptions, jobs: int = 1) -> list[ExperimentRow]:
    """Evaluate every instance; output order follows input order."""
    work = [(inst, opts) for inst in instances]
    if jobs <= 1 or len(work) <= 1:
        return [evaluate(*w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_evaluate_star, work))


def make_instances(kind: str, count: int, k: int = 3, imax: int = 10, p: float = 0.0,
                   n: int | None = None, dens: float = 0.01, seed: int = 0) -> list[Instance]:
    """Seeded instance suite; instance ``i`` uses the ``i``-th spawned stream."""
    out = []
    for ss in spawn_seeds(seed, count):
        s_sizes, s_graph = ss.spawn(2)
        if kind == "randomSparse":
            if n is None:
                raise ValueError("randomSparse needs n")
            sizes = even_sizes(n, k)
            out.append(Instance(gen_random_sparse(n, dens, s_graph), sizes))
            continue
        sizes = random_sizes(k, imax, rng_for(s_sizes))
        if kind == "structured":
            g, u0 = gen_structured(sizes, p, s_graph)
            out.append(Instance(g, sizes, u0))
        elif kind == "randomDense":
            out.append(Instance(gen_random_dense(sizes, s_graph), sizes))
        else:
            raise ValueError(f"unknown instance kind {kind!r}")
    return out


def even_sizes(n: int, k: int) -> SizeVector:
    base, extra = divmod(n, k)
    return SizeVector(tuple(base + (1 if i < extra else 0) for i in range(k)))


TABLE_COLUMNS = (["n", "k", "E", "u0", "density"]
                 + [f"low_{mth}" for mth in METHODS] + [f"up_{mth}" for mth in METHODS]
                 + ["rel_gap"]
                 + [f"t_low_{mth}" for mth in METHODS] + [f"t_up_{mth}" for mth in METHODS])


def _bounds_cells(row: ExperimentRow, timings: bool) -> dict:
    cells = {}
    for mth in METHODS:
        lo, up = row.lowers.get(mth), row.uppers.get(mth)
        cells[f"low_{mth}"] = "" if lo is None else str(lo.rounded)
        cells[f"up_{mth}"] = "" if up is None else str(up.rounded)
        cells[f"t_low_{mth}"] = f"{lo.seconds:.3f}" if (timings and lo is not None) else ""
        cells[f"t_up_{mth}"] = f"{up.seconds:.3f}" if (timings and up is not None) else ""
    cells["rel_gap"] = "" if row.gap is None else row.gap.gap_text()
    return cells


def row_record(row: ExperimentRow, timings: bool = False) -> dict:
    rec = {"n": str(row.n), "k": str(row.k), "E": str(row.E),
           "u0": "" if row.u0 is None else str(row.u0), "density": f"{row.density:.6f}"}
    rec.update(_bounds_cells(row, timings))
    return rec


def table_csv(rows, timings: bool = False) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow(row_record(row, timings))
    return buf.getvalue()


def _witness(row: ExperimentRow):
    best = row.best_upper()
    if best is None or best.witness is None:
        return None
    return labels_of(best.witness).tolist()


def _json_value(v: str):
    if v == "":
        return None
    if v == "NA":
        return v
    return float(v) if "." in v else int(v)


def table_json(rows, timings: bool = False) -> str:
    out = []
    for row in rows:
        rec = {key: _json_value(val) for key, val in row_record(row, timings).items()}
        rec["sizes"] = list(row.sizes.m)
        rec["errors"] = dict(sorted(row.errors.items()))
        rec["witness"] = _witness(row)
        out.append(rec)
    return json.dumps(out, indent=1, sort_keys=False) + "\n"


@dataclass(eq=False)
class ScanCell:
    sizes: SizeVector
    row: ExperimentRow
    status: str
    witness: np.ndarray | None


def classify(row: ExperimentRow) -> tuple[str, np.ndarray | None]:
    lower_pos = any(r.rounded > 0 for r in row.lowers.values())
    found = [r for r in row.uppers.values() if r.rounded == 0]
    if lower_pos and found:
        raise AssertionError(f"certified lower > 0 but a zero cut was found for m={row.sizes}")
    if lower_pos:
        return STATUS_ABSENT, None
    if found:
        return STATUS_FOUND, found[0].witness
    return STATUS_UNDECIDED, None


def separator_scan(g: Graph, grid, opts: RunOptions, jobs: int = 1) -> list[ScanCell]:
    grid = list(grid)
    for m in grid:
        if m.n != g.n:
            raise ValueError(f"size vector {m} does not sum to n={g.n}")
    rows = run_table([Instance(g, m) for m in grid], opts, jobs)
    cells = []
    for m, row in zip(grid, rows):
        status, wit = classify(row)
        cells.append(ScanCell(m, row, status, wit))
    return cells


SCAN_COLUMNS = (["m"] + [f"low_{mth}" for mth in METHODS] + [f"up_{mth}" for mth in METHODS]
                + ["status"] + [f"t_low_{mth}" for mth in METHODS] + [f"t_up_{mth}" for mth in METHODS])


def scan_csv(cells, timings: bool = False) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SCAN_COLUMNS, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for c in cells:
        rec = {"m": str(c.sizes), "status": c.status}
        rec.update(_bounds_cells(c.row, timings))
        w.writerow(rec)
    return buf.getvalue()


def scan_json(cells, timings: bool = False) -> str:
    out = []
    for c in cells:
        rec = {"m": list(c.sizes.m), "status": c.status}
        rec.update({key: _json_value(val) for key, val in _bounds_cells(c.row, timings).items()})
        rec["errors"] = dict(sorted(c.row.errors.items()))
        rec["witness"] = None if c.witness is None else labels_of(c.witness).tolist()
        out.append(rec)
    return json.dumps(out, indent=1) + "\n"


def size_grid(n: int, k: int, spec: str) -> list[SizeVector]:
    """Grid ``lo:hi:step`` for the first ``k-1`` sizes; the last absorbs the rest."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError("grid must look like lo:hi:step")
    lo, hi, step = (int(x) for x in parts)
    if step <= 0 or lo > hi:
        raise ValueError("grid needs lo <= hi and step > 0")
    vals = list(range(lo, hi + 1, step))
    grid = []
    for combo in np.array(np.meshgrid(*[vals] * (k - 1), indexing="ij")).reshape(k - 1, -1).T:
        last = n - int(combo.sum())
        if last >= 1:
            grid.append(SizeVector(tuple(int(x) for x in combo) + (last,)))
    return grid
