"""Command-line interface: generate, bound, sweep-gamma, scan, table."""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import experiments as ex
from .eig import gamma_sweep, sweep_csv
from .generators import gen_random_dense, gen_random_sparse, gen_structured, rng_for
from .graph import GraphParseError, SizeVector, format_graph, read_graph

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _sizes(text: str) -> SizeVector:
    try:
        return SizeVector.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _methods(text: str) -> tuple:
    items = tuple(t for t in text.split(",") if t)
    bad = [t for t in items if t not in ex.METHODS]
    if bad or not items:
        raise argparse.ArgumentTypeError(f"methods must be a subset of {','.join(ex.METHODS)}")
    return items


def _basis(text: str) -> str:
    table = {"v0": "V0", "v1": "V1", "dense": "dense"}
    if text.lower() not in table:
        raise argparse.ArgumentTypeError("basis must be v0, v1 or dense")
    return table[text.lower()]


def _common(p: argparse.ArgumentParser, graph: bool = True, sizes: bool = True):
    if graph:
        p.add_argument("--graph", required=True, help="edge-list file")
    if sizes:
        p.add_argument("--sizes", type=_sizes, help="set sizes a,b,c (last is the separator set)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--basis", type=_basis, default="V1", help="v0|v1|dense")
    p.add_argument("--methods", type=_methods, default=ex.DEFAULT_METHODS,
                   help="subset of eigL,eigA,qp,sdp")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--qp-limit", type=int, default=2000, help="largest n for the qp method")
    p.add_argument("--sdp-limit", type=int, default=2000, help="largest n*k for the sdp method")
    p.add_argument("--timings", action="store_true", help="fill the t_* columns (output no longer reproducible)")
    p.add_argument("--jobs", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cutbounds", description="Bounds for min-cut vertex-separator partitioning.")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a generated graph as an edge list")
    g.add_argument("--kind", choices=("structured", "randomDense", "randomSparse"), required=True)
    g.add_argument("--sizes", type=_sizes)
    g.add_argument("--p", type=float, default=0.0, help="structured edge-fill fraction")
    g.add_argument("--n", type=int, help="node count for randomSparse")
    g.add_argument("--dens", type=float, default=0.01)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")

    b = sub.add_parser("bound", help="lower/upper bounds for one graph and size vector")
    _common(b)

    s = sub.add_parser("sweep-gamma", help="projected bound of A - gamma Diag(d) over a gamma grid")
    _common(s)
    s.add_argument("--grid", default="-1:2:0.25", help="lo:hi:step")
    s.add_argument("--d", dest="dvec", default="degrees",
                   help="'degrees', 'random' (seeded normal) or a file with n numbers")

    sc = sub.add_parser("scan", help="separator scan over a grid of size vectors")
    _common(sc, sizes=False)
    sc.add_argument("--k", type=int, default=3)
    sc.add_argument("--grid", help="lo:hi:step for the first k-1 sizes")
    sc.add_argument("--sizes", type=_sizes, action="append", help="explicit size vector (repeatable)")

    t = sub.add_parser("table", help="generated instance suite with all bounds")
    _common(t, graph=False, sizes=False)
    t.add_argument("--kind", choices=("structured", "randomDense", "randomSparse"), required=True)
    t.add_argument("--count", type=int, default=5)
    t.add_argument("--k", type=int, default=3)
    t.add_argument("--imax", type=int, default=10)
    t.add_argument("--p", type=float, default=0.0)
    t.add_argument("--n", type=int)
    t.add_argument("--dens", type=float, default=0.01)
    return ap


def _opts(a) -> ex.RunOptions:
    return ex.RunOptions(methods=a.methods, basis=a.basis, tol=a.tol, max_iters=a.max_iters,
                         qp_limit=a.qp_limit, sdp_limit=a.sdp_limit, seed=a.seed, timings=a.timings)


def _emit(text: str, out) -> None:
    if out:
        with open(out, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_graph(path):
    try:
        return read_graph(path)
    except (OSError, GraphParseError) as exc:
        raise ConfigError(f"cannot read graph {path}: {exc}") from None


def _need_sizes(a, n):
    if a.sizes is None:
        raise ConfigError("--sizes is required")
    if a.sizes.n != n:
        raise ConfigError(f"sizes sum to {a.sizes.n} but the graph has {n} nodes")
    return a.sizes


def cmd_generate(a) -> int:
    if a.kind == "randomSparse":
        if a.n is None:
            raise ConfigError("randomSparse needs --n")
        g = gen_random_sparse(a.n, a.dens, a.seed)
    else:
        if a.sizes is None:
            raise ConfigError(f"{a.kind} needs --sizes")
        if a.kind == "structured":
            g, u0 = gen_structured(a.sizes, a.p, a.seed)
            print(f"u0={u0}", file=sys.stderr)
        else:
            g = gen_random_dense(a.sizes, a.seed)
    _emit(format_graph(g), a.out)
    return EXIT_OK


def _rows_out(rows, a) -> int:
    text = ex.table_json(rows, a.timings) if a.format == "json" else ex.table_csv(rows, a.timings)
    _emit(text, a.out)
    for row in rows:
        for mth, err in sorted(row.errors.items()):
            print(f"warning: {mth} failed on n={row.n}: {err}", file=sys.stderr)
    return EXIT_PARTIAL if any(r.errors for r in rows) else EXIT_OK


def cmd_bound(a) -> int:
    g = _load_graph(a.graph)
    m = _need_sizes(a, g.n)
    rows = ex.run_table([ex.Instance(g, m)], _opts(a))
    return _rows_out(rows, a)


def _grid(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError("grid must look like lo:hi:step")
    lo, hi, step = (float(x) for x in parts)
    if step <= 0 or hi < lo:
        raise ConfigError("grid needs lo <= hi and step > 0")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 12) for i in range(count)]


def cmd_sweep(a) -> int:
    g = _load_graph(a.graph)
    m = _need_sizes(a, g.n)
    if a.dvec == "degrees":
        d = g.degrees
    elif a.dvec == "random":
        d = rng_for(a.seed).standard_normal(g.n)
    else:
        try:
            d = np.loadtxt(a.dvec, dtype=np.float64).ravel()
        except OSError as exc:
            raise ConfigError(str(exc)) from None
        if d.size != g.n:
            raise ConfigError(f"d has {d.size} entries, expected {g.n}")
    curve = gamma_sweep(g, m, d, _grid(a.grid), a.basis, seed=a.seed)
    if a.format == "json":
        import json
        text = json.dumps([{"gamma": x, "bound": y} for x, y in curve], indent=1) + "\n"
    else:
        text = sweep_csv(curve)
    _emit(text, a.out)
    return EXIT_OK


def cmd_scan(a) -> int:
    g = _load_graph(a.graph)
    grid = []
    if a.grid:
        grid += ex.size_grid(g.n, a.k, a.grid)
    grid += a.sizes or []
    if not grid:
        raise ConfigError("scan needs --grid or at least one --sizes")
    for m in grid:
        if m.n != g.n:
            raise ConfigError(f"size vector {m} does not sum to n={g.n}")
    cells = ex.separator_scan(g, grid, _opts(a), a.jobs)
    text = ex.scan_json(cells, a.timings) if a.format == "json" else ex.scan_csv(cells, a.timings)
    _emit(text, a.out)
    return EXIT_PARTIAL if any(c.row.errors for c in cells) else EXIT_OK


def cmd_table(a) -> int:
    if not 0.0 <= a.p < 1.0:
        raise ConfigError("--p must lie in [0, 1)")
    insts = ex.make_instances(a.kind, a.count, a.k, a.imax, a.p, a.n, a.dens, a.seed)
    rows = ex.run_table(insts, _opts(a), a.jobs)
    return _rows_out(rows, a)


COMMANDS = {"generate": cmd_generate, "bound": cmd_bound, "sweep-gamma": cmd_sweep,
            "scan": cmd_scan, "table": cmd_table}


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    try:
        return COMMANDS[a.cmd](a)
    except (ConfigError, ValueError) as exc:
        print(f"cutbounds: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
