"""Readers and writers for edge lists, contact matrices, catalogs, diagrams and cycles.

All formats are UTF-8 text with ``#`` comments; files ending in ``.gz`` are
transparently (de)compressed.  Floats are written with ``repr`` so they
read back bit-identically.
"""

from __future__ import annotations

import gzip
import math
from collections import Counter
from itertools import combinations
from pathlib import Path

import numpy as np

from .complex import SparseMetricSpace
from .persistence import PersistenceDiagram, PersistencePair

H0_DEFAULT = 72.1


class ParseError(ValueError):
    def __init__(self, path, line_no, msg):
        super().__init__(f"{path}:{line_no}: {msg}")
        self.path = path
        self.line_no = line_no


def open_text(path, mode="r"):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8", newline="\n")


def fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def _data_lines(fh):
    for no, line in enumerate(fh, 1):
        s = line.strip()
        if s and not s.startswith("#"):
            yield no, s


# --------------------------------------------------------------------------
# edge lists


def write_edge_list(path, space: SparseMetricSpace) -> None:
    with open_text(path, "w") as fh:
        fh.write(f"# n={space.n_vertices} tau={fmt(space.threshold)}\n")
        for a, b, d in zip(space.u.tolist(), space.v.tolist(), space.d.tolist()):
            fh.write(f"{a} {b} {fmt(d)}\n")


def read_edge_list(path, threshold: float | None = None) -> SparseMetricSpace:
    """Parse ``u v d`` lines under a ``# n=<count> tau=<tau>`` header."""
    n = None
    tau = math.inf
    edges = []
    with open_text(path) as fh:
        for no, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                for tok in s[1:].split():
                    if tok.startswith("n="):
                        n = _parse(int, tok[2:], path, no, "vertex count")
                    elif tok.startswith("tau="):
                        tau = _parse(float, tok[4:], path, no, "threshold")
                continue
            parts = s.split()
            if len(parts) != 3:
                raise ParseError(path, no, "expected 'u v d'")
            u = _parse(int, parts[0], path, no, "vertex id")
            v = _parse(int, parts[1], path, no, "vertex id")
            d = _parse(float, parts[2], path, no, "distance")
            if not u < v:
                raise ParseError(path, no, "vertex ids must satisfy u < v")
            if not (d > 0 and math.isfinite(d)):
                raise ParseError(path, no, "distance must be positive and finite")
            if d > tau:
                raise ParseError(path, no, f"distance {d} exceeds tau={tau}")
            edges.append((u, v, d))
    if n is None:
        n = 1 + max((max(u, v) for u, v, _ in edges), default=-1)
    if threshold is not None:
        edges = [e for e in edges if e[2] <= threshold]
        tau = threshold
    try:
        return SparseMetricSpace.from_edges(n, edges, threshold=tau)
    except ValueError as exc:
        raise ParseError(path, 0, str(exc)) from exc


def _parse(kind, text, path, no, what):
    try:
        return kind(text)
    except ValueError:
        raise ParseError(path, no, f"bad {what}: {text!r}") from None


# --------------------------------------------------------------------------
# contact matrices


def load_contact_matrix(path, threshold: float = math.inf, n_vertices: int | None = None,
                        report: dict | None = None) -> SparseMetricSpace:
    """Distances ``1/m`` from sparse ``i j m`` contact triples.

    Zero and NaN entries mean no edge; so do distances above ``threshold``.
    Triples may list (i, j) in either order but only once.  ``report``, if
    given, receives the counts and a histogram of ``|i - j|`` over kept edges.
    """
    edges = {}
    n_seen = 0
    n_max = -1
    with open_text(path) as fh:
        for no, s in _data_lines(fh):
            parts = s.split()
            if len(parts) != 3:
                raise ParseError(path, no, "expected 'i j m'")
            i = _parse(int, parts[0], path, no, "bin id")
            j = _parse(int, parts[1], path, no, "bin id")
            m = _parse(float, parts[2], path, no, "contact value")
            if i < 0 or j < 0:
                raise ParseError(path, no, "bin ids must be non-negative")
            n_max = max(n_max, i, j)
            n_seen += 1
            if m < 0:
                raise ParseError(path, no, "contact values must be non-negative")
            if i == j:
                continue
            a, b = min(i, j), max(i, j)
            if (a, b) in edges:
                raise ParseError(path, no, f"duplicate entry for ({a}, {b})")
            if math.isnan(m) or m == 0:
                edges[(a, b)] = None
                continue
            edges[(a, b)] = 1.0 / m
    kept = [(a, b, d) for (a, b), d in edges.items() if d is not None and math.isfinite(d) and d <= threshold]
    n = n_vertices if n_vertices is not None else n_max + 1
    if report is not None:
        report["entries"] = n_seen
        report["valid_edges"] = len(kept)
        report["bin_distance"] = dict(sorted(Counter(b - a for a, b, _ in kept).items()))
    return SparseMetricSpace.from_edges(max(n, 0), kept, threshold=threshold)


def read_chrom_map(path) -> dict:
    """``vertex chromosome`` lines."""
    out = {}
    with open_text(path) as fh:
        for no, s in _data_lines(fh):
            parts = s.split()
            if len(parts) != 2:
                raise ParseError(path, no, "expected 'vertex chromosome'")
            out[_parse(int, parts[0], path, no, "vertex id")] = parts[1]
    return out


def classify_cis_trans(cycle_vertices, chrom_map: dict, pair_counts: Counter | None = None) -> str:
    """``'cis'`` when all vertices share a chromosome, else ``'trans'``.

    For trans cycles every unordered pair of chromosomes present is counted
    once in ``pair_counts``.
    """
    chroms = set()
    for v in cycle_vertices:
        if v not in chrom_map:
            raise KeyError(f"vertex {v} has no chromosome")
        chroms.add(chrom_map[v])
    if len(chroms) <= 1:
        return "cis"
    if pair_counts is not None:
        for pair in combinations(sorted(chroms, key=str), 2):
            pair_counts[pair] += 1
    return "trans"


# --------------------------------------------------------------------------
# point clouds and catalogs


def read_points(path) -> np.ndarray:
    """Comma (or whitespace) separated coordinates, one point per row."""
    rows = []
    with open_text(path) as fh:
        for no, s in _data_lines(fh):
            parts = s.replace(",", " ").split()
            try:
                rows.append([float(x) for x in parts])
            except ValueError:
                if not rows:   # header row
                    continue
                raise ParseError(path, no, "non-numeric coordinate") from None
    if not rows:
        return np.zeros((0, 3))
    if len({len(r) for r in rows}) != 1:
        raise ParseError(path, 0, "rows have different lengths")
    return np.asarray(rows, dtype=float)


def write_points(path, X) -> None:
    X = np.asarray(X, float)
    with open_text(path, "w") as fh:
        names = "xyz"[: X.shape[1]] if X.shape[1] <= 3 else [f"x{i}" for i in range(X.shape[1])]
        fh.write("# " + ",".join(names) + "\n")
        for row in X:
            fh.write(",".join(fmt(x) for x in row) + "\n")


def embed_redshift(cz, b, l, H0: float = H0_DEFAULT):
    """Cartesian positions (Mpc) from recession velocity and galactic coordinates.

    With D = cz/H0, theta = l and phi = pi/2 - b:
    x = D sin(phi) cos(theta), y = D sin(phi) sin(theta), z = D cos(phi).
    Rows with cz <= 0 or non-finite values are rejected; returns the
    coordinates and the mask of kept rows.
    """
    cz = np.asarray(cz, float)
    b = np.asarray(b, float)
    l = np.asarray(l, float)
    keep = (cz > 0) & np.isfinite(cz) & np.isfinite(b) & np.isfinite(l)
    D = cz[keep] / H0
    theta = l[keep]
    phi = np.pi / 2 - b[keep]
    X = np.column_stack([D * np.sin(phi) * np.cos(theta), D * np.sin(phi) * np.sin(theta), D * np.cos(phi)])
    return X, keep


def read_redshift_catalog(path, H0: float = H0_DEFAULT, report: dict | None = None):
    """Rows ``cz b l [class]``; returns the embedding and class labels of kept rows."""
    cz, b, l, cls = [], [], [], []
    with open_text(path) as fh:
        for no, s in _data_lines(fh):
            parts = s.replace(",", " ").split()
            if len(parts) < 3:
                raise ParseError(path, no, "expected 'cz b l [class]'")
            cz.append(_parse(float, parts[0], path, no, "cz"))
            b.append(_parse(float, parts[1], path, no, "latitude"))
            l.append(_parse(float, parts[2], path, no, "longitude"))
            cls.append(parts[3] if len(parts) > 3 else "")
    X, keep = embed_redshift(cz, b, l, H0)
    if report is not None:
        report["rows"] = len(cz)
        report["rejected"] = int(len(cz) - keep.sum())
    return X, [c for c, k in zip(cls, keep) if k]


# --------------------------------------------------------------------------
# diagrams


DIAGRAM_HEADER = "dim\tbirth\tdeath"


def write_diagram(path, diagram: PersistenceDiagram, dims=None) -> None:
    rows = sorted(diagram.values() if dims is None else
                  [r for d in dims for r in diagram.values(d)])
    with open_text(path, "w") as fh:
        fh.write(DIAGRAM_HEADER + "\n")
        for d, b, e in rows:
            fh.write(f"{d}\t{fmt(b)}\t{fmt(e)}\n")


def read_diagram(path) -> PersistenceDiagram:
    pairs = []
    with open_text(path) as fh:
        for no, line in enumerate(fh, 1):
            s = line.rstrip("\n")
            if not s.strip() or s.startswith("#") or (no == 1 and s == DIAGRAM_HEADER):
                continue
            parts = s.split("\t")
            if len(parts) != 3:
                raise ParseError(path, no, "expected 'dim<TAB>birth<TAB>death'")
            d = _parse(int, parts[0], path, no, "dimension")
            b = _parse(float, parts[1], path, no, "birth")
            e = _parse(float, parts[2], path, no, "death")
            if math.isnan(b) or math.isnan(e) or e < b:
                raise ParseError(path, no, "death must not precede birth")
            pairs.append(PersistencePair(d, None, None, b, e))
    return PersistenceDiagram(pairs)


# --------------------------------------------------------------------------
# cycles


def format_simplex(vertices) -> str:
    return "-".join(str(v) for v in sorted(vertices))


def write_cycles(path, cycles) -> None:
    """``cycles``: iterable of (dim, birth, [vertex tuples])."""
    with open_text(path, "w") as fh:
        for dim, birth, simplices in cycles:
            toks = [str(dim), fmt(birth)] + sorted(format_simplex(s) for s in simplices)
            fh.write(" ".join(toks) + "\n")


def read_cycles(path) -> list:
    out = []
    with open_text(path) as fh:
        for no, s in _data_lines(fh):
            parts = s.split()
            if len(parts) < 2:
                raise ParseError(path, no, "expected 'dim birth simplices...'")
            dim = _parse(int, parts[0], path, no, "dimension")
            birth = _parse(float, parts[1], path, no, "birth")
            simplices = []
            for tok in parts[2:]:
                vs = tuple(_parse(int, x, path, no, "vertex") for x in tok.split("-"))
                if len(vs) != dim + 1 or list(vs) != sorted(set(vs)):
                    raise ParseError(path, no, f"bad {dim}-simplex {tok!r}")
                simplices.append(vs)
            out.append((dim, birth, sorted(simplices)))
    return out


# --------------------------------------------------------------------------
# generic TSV tables


def write_table(path, header, rows) -> None:
    with open_text(path, "w") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(fmt(x) if isinstance(x, float) else str(x) for x in row) + "\n")


def read_table(path) -> tuple:
    with open_text(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        return [], []
    return lines[0].split("\t"), [ln.split("\t") for ln in lines[1:]]
