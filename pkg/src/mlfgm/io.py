"""Problem files and result serialization.

Problem file grammar (UTF-8, one token group per line)::

    MLGM-PROBLEM 1
    layers <N_L>
    graph <1|2>
    vertices <n>
    edges <m>
    <i> <j>                      # m lines
    inter default | inter <k>    # followed by k "<i> <j>" lines
    edge_attrs <dim>             # N_L*m lines of dim floats, layer-major
    vertex_attrs <dim>           # N_L*n lines of dim floats, layer-major
    end graph
    ...                          # second graph
    affinity Kp <count> <rows> <cols>    # count*rows lines of cols floats
    affinity Kqi <count> <rows> <cols>
    affinity Kqt <count> <rows> <cols>
    groundtruth none | groundtruth <k> <g_0> ... <g_{k-1}>
    meta <json object>
    end

Blocks with zero columns (or zero attribute dimension) have no data lines.
Floats are written with ``repr`` so a save/load cycle is exact. Lines
starting with ``#`` are ignored.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .affinity import LayerAffinities, MatchingProblem
from .graph import MultiLayerGraph

FORMAT_TAG = "MLGM-PROBLEM"
FORMAT_VERSION = 1


class ProblemFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def _write_graph(out: list, tag: int, g: MultiLayerGraph):
    out.append(f"graph {tag}")
    out.append(f"vertices {g.n_vertices}")
    out.append(f"edges {g.n_edges}")
    out.extend(f"{i} {j}" for i, j in g.intra_edges)
    if g.inter_pairs is None:
        out.append("inter default")
    else:
        out.append(f"inter {len(g.inter_pairs)}")
        out.extend(f"{i} {j}" for i, j in g.inter_pairs)
    for name, arr in (("edge_attrs", g.edge_attrs), ("vertex_attrs", g.vertex_attrs)):
        out.append(f"{name} {arr.shape[2]}")
        if arr.shape[2]:
            out.extend(_fmt(row) for row in arr.reshape(-1, arr.shape[2]))
    out.append("end graph")


def dumps_problem(problem: MatchingProblem) -> str:
    out = [f"{FORMAT_TAG} {FORMAT_VERSION}", f"layers {problem.g1.n_layers}"]
    _write_graph(out, 1, problem.g1)
    _write_graph(out, 2, problem.g2)
    aff = problem.affinities
    for name in ("Kp", "Kqi", "Kqt"):
        arr = getattr(aff, name)
        count, rows, cols = arr.shape
        out.append(f"affinity {name} {count} {rows} {cols}")
        if cols:
            out.extend(_fmt(row) for row in arr.reshape(count * rows, cols))
    gt = problem.ground_truth
    if gt is None:
        out.append("groundtruth none")
    else:
        out.append(" ".join(["groundtruth", str(len(gt))] + [str(int(v)) for v in gt]))
    out.append("meta " + json.dumps(problem.meta, sort_keys=True))
    out.append("end")
    return "\n".join(out) + "\n"


def save_problem(path, problem: MatchingProblem):
    Path(path).write_text(dumps_problem(problem), encoding="utf-8")


class _Reader:
    def __init__(self, text: str):
        self.lines = [
            (no, line.strip())
            for no, line in enumerate(text.splitlines(), start=1)
            if not line.lstrip().startswith("#")
        ]
        self.pos = 0
        self.section = "header"

    def next(self) -> tuple[int, str]:
        if self.pos >= len(self.lines):
            raise ProblemFormatError(f"unexpected end of file in section '{self.section}'")
        item = self.lines[self.pos]
        self.pos += 1
        return item

    def keyword(self, word: str, nargs: int | None = None) -> tuple[int, list[str]]:
        self.section = word
        no, line = self.next()
        parts = line.split()
        if not parts or parts[0] != word:
            raise ProblemFormatError(f"expected section '{word}', found {line[:40]!r}", no)
        args = parts[1:]
        if nargs is not None and len(args) != nargs:
            raise ProblemFormatError(f"'{word}' takes {nargs} fields, got {len(args)}", no)
        return no, args

    def ints(self, args, no) -> list[int]:
        try:
            return [int(a) for a in args]
        except ValueError:
            raise ProblemFormatError(f"expected integers in section '{self.section}'", no) from None

    def rows(self, count: int, width: int, dtype=float) -> np.ndarray:
        data = np.empty((count, width), dtype=dtype)
        for r in range(count):
            no, line = self.next()
            parts = line.split()
            if len(parts) != width:
                raise ProblemFormatError(
                    f"expected {width} values in section '{self.section}', got {len(parts)}", no
                )
            try:
                data[r] = [dtype(p) for p in parts]
            except ValueError:
                raise ProblemFormatError(f"bad number in section '{self.section}'", no) from None
        return data


def _read_graph(rd: _Reader, tag: int, n_layers: int) -> MultiLayerGraph:
    no, args = rd.keyword("graph", 1)
    if rd.ints(args, no) != [tag]:
        raise ProblemFormatError(f"expected graph {tag}", no)
    no, args = rd.keyword("vertices", 1)
    (n,) = rd.ints(args, no)
    no, args = rd.keyword("edges", 1)
    (m,) = rd.ints(args, no)
    edges = rd.rows(m, 2, int)
    no, args = rd.keyword("inter", 1)
    inter = None
    if args[0] != "default":
        (k,) = rd.ints(args, no)
        inter = rd.rows(k, 2, int)
    attrs = {}
    for name, count in (("edge_attrs", m), ("vertex_attrs", n)):
        no, args = rd.keyword(name, 1)
        (dim,) = rd.ints(args, no)
        attrs[name] = rd.rows(n_layers * count, dim).reshape(n_layers, count, dim) if dim else None
    no, args = rd.keyword("end", 1)
    if args != ["graph"]:
        raise ProblemFormatError("expected 'end graph'", no)
    try:
        return MultiLayerGraph(n, n_layers, edges, attrs["edge_attrs"], attrs["vertex_attrs"], inter)
    except ValueError as exc:
        raise ProblemFormatError(f"invalid graph {tag}: {exc}", no) from None


def loads_problem(text: str) -> MatchingProblem:
    rd = _Reader(text)
    no, args = rd.keyword(FORMAT_TAG, 1)
    if args[0] != str(FORMAT_VERSION):
        raise ProblemFormatError(
            f"unsupported format version {args[0]!r} (expected {FORMAT_VERSION})", no
        )
    no, args = rd.keyword("layers", 1)
    (n_layers,) = rd.ints(args, no)
    if n_layers < 1:
        raise ProblemFormatError("layers must be >= 1", no)
    g1 = _read_graph(rd, 1, n_layers)
    g2 = _read_graph(rd, 2, n_layers)
    blocks = {}
    for name in ("Kp", "Kqi", "Kqt"):
        no, args = rd.keyword("affinity", 4)
        if args[0] != name:
            raise ProblemFormatError(f"expected affinity {name}, found {args[0]}", no)
        rd.section = f"affinity {name}"
        count, rows, cols = rd.ints(args[1:], no)
        flat = rd.rows(count * rows, cols) if cols else np.zeros((count * rows, 0))
        blocks[name] = flat.reshape(count, rows, cols)
    no, args = rd.keyword("groundtruth")
    gt = None
    if args != ["none"]:
        vals = rd.ints(args, no)
        if not vals or len(vals) != vals[0] + 1:
            raise ProblemFormatError("groundtruth count does not match its entries", no)
        gt = np.array(vals[1:], dtype=np.int64)
    rd.section = "meta"
    no, line = rd.next()
    if not line.startswith("meta"):
        raise ProblemFormatError("expected section 'meta'", no)
    try:
        meta = json.loads(line[4:].strip() or "{}")
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"meta is not valid JSON: {exc.msg}", no) from None
    rd.keyword("end", 0)
    try:
        aff = LayerAffinities(blocks["Kp"], blocks["Kqi"], blocks["Kqt"])
        return MatchingProblem(g1, g2, aff, gt, meta)
    except ValueError as exc:
        raise ProblemFormatError(f"inconsistent problem: {exc}") from None


def load_problem(path) -> MatchingProblem:
    return loads_problem(Path(path).read_text(encoding="utf-8"))


def solve_result_dict(report, method: str, objective: float | None = None, accuracy=None) -> dict:
    X = report.assignment
    return {
        "method": method,
        "assignment": [int(c) for c in X.to_permutation()],
        "shape": list(X.matrix.shape),
        "objective": objective,
        "accuracy": accuracy,
        "confidence": None if report.confidence is None else [float(v) for v in report.confidence],
        "flags": list(report.flags),
        "wall_time": report.wall_time,
        "objective_trace": [[t, f, g] for t, f, g in report.objective_trace],
    }


def save_result(path, data: dict):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


CSV_COLUMNS = ["kind", "value", "trial", "seed", "method", "accuracy", "objective"]


def write_bench_csv(path, records, include_timing: bool = False):
    """One row per (sweep point, trial, method).

    Timing is opt-in because it is the only non-reproducible column.
    """
    cols = CSV_COLUMNS + (["wall_time"] if include_timing else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for rec in records:
            row = [rec.kind, repr(float(rec.value)), rec.trial, rec.seed, rec.method,
                   repr(float(rec.accuracy)), repr(float(rec.objective))]
            if include_timing:
                row.append(repr(float(rec.wall_time)))
            writer.writerow(row)


def read_bench_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_curve_table(path, result):
    """Whitespace-separated curve table: the sweep value, then mean and std per method."""
    methods = list(result.points[0].mean) if result.points else []
    header = [result.sweep_variable] + [f"{m}_{stat}" for m in methods for stat in ("mean", "std")]
    lines = ["# " + " ".join(header)]
    for p in result.points:
        cells = [repr(p.value)] + [repr(v) for m in methods for v in (p.mean[m], p.std[m])]
        lines.append(" ".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
