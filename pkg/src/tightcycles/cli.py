"""Command line: ``tightcycles {pd,cycles,localize,stats}``.

Exit codes: 0 ok, 1 usage, 2 parse error, 3 budget exceeded, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import resource
import sys
import time
from pathlib import Path

import numpy as np

from . import io as tio
from .birth_cycles import RecursionBudgetError
from .complex import CapacityError, SparseMetricSpace
from .covers import Cover, SignificanceParams, as_embedding
from .pipeline import Cycle, cycle_stages, localize, persistence, significant_count, to_cycle
from .stats import features_of_cover, graphical_sample, neg_log10, pseudo_p_value, spatial_sample
from .stochastic import trial_rng

logger = logging.getLogger("tightcycles")

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_BUDGET, EXIT_INTERNAL = 0, 1, 2, 3, 4
THREADS_ENV = "TIGHTCYCLES_THREADS"
FORMATS = ("edges", "contacts", "points", "redshift")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dims(text: str) -> tuple:
    try:
        dims = tuple(sorted({int(x) for x in text.split(",")}))
    except ValueError:
        raise argparse.ArgumentTypeError("dims must be a comma list of 1 and 2") from None
    if not dims or any(d not in (1, 2) for d in dims):
        raise argparse.ArgumentTypeError("dims must be a comma list of 1 and 2")
    return dims


def _positive(text: str) -> float:
    x = float(text)
    if not (x > 0 and math.isfinite(x)):
        raise argparse.ArgumentTypeError("must be positive and finite")
    return x


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("input", help="input file")
    common.add_argument("--format", choices=FORMATS, default="edges")
    common.add_argument("--tau-u", type=_positive, required=True)
    common.add_argument("--epsilon", type=_positive, required=True)
    common.add_argument("--dims", type=_dims, default=(1, 2))
    common.add_argument("--n-pert", type=int, default=4)
    common.add_argument("--n-perm", type=int, default=4)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=int(os.environ.get(THREADS_ENV, "1")))
    common.add_argument("--batch-size", type=int, default=1000)
    common.add_argument("--simplex-budget", type=float, default=5e7)
    common.add_argument("--recursion-budget", type=int, default=10_000_000)
    common.add_argument("--m-max", type=int, default=20)
    common.add_argument("--embedding", help="coordinates for edge/contact inputs (CSV)")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="tightcycles", description="Persistent homology with tight representatives")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("pd", parents=[common], help="persistence diagram")
    c = sub.add_parser("cycles", parents=[common], help="birth, shortened and smoothed cycles")
    c.add_argument("--stages", default="birth,shortened,smoothed")
    c.add_argument("--skip-trivial", action="store_true", help="omit zero-persistence birth-cycles")
    loc = sub.add_parser("localize", parents=[common], help="covers, contraction and refinement")
    loc.add_argument("--cycles", help="smoothed cycle file from 'cycles' (computed if absent)")
    st = sub.add_parser("stats", parents=[common], help="void features and pseudo p-values")
    st.add_argument("--covers", help="contracted cover table from 'localize' (computed if absent)")
    st.add_argument("--n-samples", type=int, default=1000)
    st.add_argument("--size-range", default=None, help="lo,hi for graphical sampling")
    return p


# --------------------------------------------------------------------------
# loading


def load_input(args):
    """Returns (space at tau, embedding or None, load report)."""
    tau = args.tau_u + args.epsilon
    report: dict = {}
    X = None
    if args.format == "edges":
        space = tio.read_edge_list(args.input)
        space = _restrict(space, tau)
    elif args.format == "contacts":
        space = tio.load_contact_matrix(args.input, tau, report=report)
    elif args.format == "points":
        X = tio.read_points(args.input)
        space = SparseMetricSpace.from_points(X, tau) if len(X) else SparseMetricSpace.from_edges(0, [], tau)
    else:
        X, _ = tio.read_redshift_catalog(args.input, report=report)
        space = SparseMetricSpace.from_points(X, tau)
    if X is None and args.embedding:
        X = tio.read_points(args.embedding)
    if X is not None and len(X):
        X = as_embedding(X, space.n_vertices)
    report["n_vertices"] = space.n_vertices
    report["n_edges"] = space.n_edges
    return space, X, report


def _restrict(space: SparseMetricSpace, tau: float) -> SparseMetricSpace:
    keep = space.d <= tau
    edges = zip(space.u[keep].tolist(), space.v[keep].tolist(), space.d[keep].tolist())
    return SparseMetricSpace.from_edges(space.n_vertices, edges, threshold=tau)


def _params(args) -> SignificanceParams:
    return SignificanceParams(args.tau_u, args.epsilon)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _peak_memory_mb() -> float:
    # ru_maxrss is KiB on Linux
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0


# --------------------------------------------------------------------------
# commands


def _compute(args, space):
    return persistence(space, dims=args.dims, batch_size=args.batch_size, n_jobs=max(args.threads, 1))


def cmd_pd(args, timing: dict) -> dict:
    out = _outdir(args)
    space, _, load = load_input(args)
    t0 = time.perf_counter()
    res = _compute(args, space)
    timing["pd_seconds"] = time.perf_counter() - t0
    tio.write_diagram(out / "diagram.tsv", res.diagram, dims=args.dims)
    params = _params(args)
    report = {
        "load": load,
        "tau": params.tau,
        "features": {f"H{d}": len(res.diagram.in_dim(d)) for d in args.dims},
        "significant": {f"H{d}": significant_count(res, d, params) for d in args.dims},
    }
    _write_json(out / "report.json", report)
    return report


def _stages(args, space, X):
    res = _compute(args, space)
    params = _params(args)
    kw = {"max_steps": args.recursion_budget}
    return res, {d: cycle_stages(res, d, params, X=X, include_trivial=not getattr(args, "skip_trivial", True),
                                 builder_kwargs=kw) for d in args.dims}


def cmd_cycles(args, timing: dict) -> dict:
    wanted = set(args.stages.split(","))
    unknown = wanted - {"birth", "shortened", "smoothed"}
    if unknown:
        raise UsageError(f"unknown stages: {sorted(unknown)}")
    out = _outdir(args)
    space, X, load = load_input(args)
    t0 = time.perf_counter()
    res, stages = _stages(args, space, X)
    timing["cycles_seconds"] = time.perf_counter() - t0
    f = res.filtration
    rows = {"birth": [], "shortened": [], "smoothed": [], "degenerate": [], "nonsignificant": []}
    for d, st in stages.items():
        rows["birth"] += [_row(to_cycle(f, d, c.chain)) for c in st.birth]
        rows["shortened"] += [_row(to_cycle(f, d, c)) for c in st.shortened]
        rows["smoothed"] += [_row(to_cycle(f, d, c)) for c in st.smoothed]
        rows["degenerate"] += [_row(to_cycle(f, d, c)) for c in st.degenerate]
        rows["nonsignificant"] += [_row(to_cycle(f, d, c)) for c, _ in st.nonsignificant]
    for name in ("birth", "shortened", "smoothed"):
        if name in wanted:
            tio.write_cycles(out / f"{name}_cycles.txt", rows[name])
    tio.write_cycles(out / "degenerate_cycles.txt", rows["degenerate"])
    tio.write_cycles(out / "nonsignificant_cycles.txt", rows["nonsignificant"])
    report = {"load": load, "counts": {k: len(v) for k, v in rows.items()}}
    _write_json(out / "cycles_report.json", report)
    return report


def _row(c: Cycle):
    return (c.dim, c.birth, list(c.simplices))


def _cover_rows(covers):
    for i, c in enumerate(covers):
        yield (i, ",".join(tio.fmt(x) for x in c.lo), ",".join(tio.fmt(x) for x in c.hi),
               c.size, c.n_sig, ",".join(map(str, c.members)))


COVER_HEADER = ("id", "lo", "hi", "n_members", "n_sig", "members")


def read_covers(path) -> list:
    header, rows = tio.read_table(path)
    if tuple(header) != COVER_HEADER:
        raise tio.ParseError(path, 1, "not a cover table")
    out = []
    for no, r in enumerate(rows, 2):
        try:
            lo = np.array([float(x) for x in r[1].split(",")])
            hi = np.array([float(x) for x in r[2].split(",")])
            members = tuple(int(x) for x in r[5].split(",")) if r[5] else ()
            out.append(Cover(lo, hi, members, int(r[4])))
        except (ValueError, IndexError):
            raise tio.ParseError(path, no, "malformed cover row") from None
    return out


def _require_embedding(X):
    if X is None or not len(X):
        raise UsageError("this command needs an embedding (--format points/redshift or --embedding)")
    return X


def cmd_localize(args, timing: dict) -> dict:
    out = _outdir(args)
    space, X, load = load_input(args)
    X = _require_embedding(X)
    params = _params(args)
    t0 = time.perf_counter()
    if getattr(args, "cycles", None):
        by_dim = {d: [] for d in args.dims}
        for dim, birth, simplices in tio.read_cycles(args.cycles):
            if dim in by_dim:
                by_dim[dim].append(Cycle(dim, birth, tuple(simplices)))
    else:
        res, stages = _stages(args, space, X)
        by_dim = {d: [to_cycle(res.filtration, d, c) for c in st.smoothed] for d, st in stages.items()}
    covers, contracted, minimal, log_lines, graph_rows = [], [], [], [], []
    for d in args.dims:
        loc = localize(X, by_dim[d], params, d, n_pert=args.n_pert, n_perm=args.n_perm, seed=args.seed,
                       budget=args.simplex_budget, m_max=args.m_max)
        offset = len(contracted)
        covers += loc.covers
        contracted += loc.contracted
        for entry in loc.contraction_log:
            log_lines.append(f"H{d}\t{entry[0]}\t" + "\t".join(",".join(map(str, m)) for m in entry[1:]))
        for a, b in sorted(loc.graph.edges):
            graph_rows.append((d, offset + a, offset + b))
        for r in loc.refined:
            for chain in r.selection.representatives:
                minimal.append((d, max(_simplex_diam(X, s) for s in chain), list(chain)))
    timing["localize_seconds"] = time.perf_counter() - t0
    tio.write_table(out / "covers.tsv", COVER_HEADER, _cover_rows(covers))
    tio.write_table(out / "contracted_covers.tsv", COVER_HEADER, _cover_rows(contracted))
    (out / "contraction.log").write_text("".join(s + "\n" for s in log_lines), encoding="utf-8")
    tio.write_cycles(out / "minimal_cycles.txt", minimal)
    tio.write_table(out / "intersection_graph.tsv", ("dim", "cover_a", "cover_b"), graph_rows)
    report = {"load": load, "covers": len(covers), "contracted": len(contracted),
              "minimal_cycles": len(minimal)}
    _write_json(out / "localize_report.json", report)
    return report


def _simplex_diam(X, s) -> float:
    P = X[list(s)]
    return float(max(np.linalg.norm(P[i] - P[j]) for i in range(len(P)) for j in range(i + 1, len(P))))


def cmd_stats(args, timing: dict) -> dict:
    out = _outdir(args)
    _, X, load = load_input(args)
    X = _require_embedding(X)
    if args.covers:
        covers = read_covers(args.covers)
    else:
        cmd_localize(args, timing)
        covers = read_covers(out / "contracted_covers.tsv")
    if not covers:
        raise UsageError("no covers to evaluate")
    t0 = time.perf_counter()
    feats = [features_of_cover(X, c) for c in covers]
    try:
        spatial = spatial_sample(X, covers, args.n_samples, trial_rng(args.seed, 1))
    except ValueError as exc:
        logger.warning("spatial sampling failed: %s", exc)
        spatial = None
    if args.size_range:
        lo, hi = (int(x) for x in args.size_range.split(","))
    else:
        lo, hi = max(4, min(c.size for c in covers)), max(4, max(c.size for c in covers))
    try:
        graphical = graphical_sample(X, args.tau_u, (lo, hi), args.n_samples, trial_rng(args.seed, 2))
    except RuntimeError as exc:
        logger.warning("graphical sampling skipped: %s", exc)
        graphical = None
    rows = []
    for i, (c, fs) in enumerate(zip(covers, feats)):
        ps = pseudo_p_value(spatial, fs) if spatial is not None else math.nan
        pg = pseudo_p_value(graphical, fs) if graphical is not None else math.nan
        rows.append((i, fs.cover_size, fs.radius, fs.spherical_uniformity, fs.eccentricity,
                     ps, neg_log10(ps) if not math.isnan(ps) else math.nan, pg, neg_log10(pg) if not math.isnan(pg) else math.nan))
    tio.write_table(out / "void_features.tsv",
                    ("id", "cover_size", "radius", "spherical_uniformity", "eccentricity",
                     "p_spatial", "neglog10_p_spatial", "p_graphical", "neglog10_p_graphical"), rows)
    for name, bank in (("spatial", spatial), ("graphical", graphical)):
        if bank is None:
            continue
        tio.write_table(out / f"{name}_samples.tsv",
                        ("cover_size", "radius", "spherical_uniformity", "eccentricity"),
                        [tuple(float(x) for x in r) for r in bank.raw])
        tio.write_table(out / f"{name}_pca.tsv", ("component", "variance_ratio"),
                        [(k, float(v)) for k, v in enumerate(bank.variance_ratio)])
    timing["stats_seconds"] = time.perf_counter() - t0
    report = {"load": load, "voids": len(rows), "spatial_samples": len(spatial) if spatial is not None else 0,
              "graphical_samples": len(graphical) if graphical is not None else 0}
    _write_json(out / "stats_report.json", report)
    return report


COMMANDS = {"pd": cmd_pd, "cycles": cmd_cycles, "localize": cmd_localize, "stats": cmd_stats}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    timing: dict = {}
    t0 = time.perf_counter()
    try:
        COMMANDS[args.command](args, timing)
    except UsageError as exc:
        print(f"tightcycles: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (tio.ParseError, FileNotFoundError) as exc:
        print(f"tightcycles: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (CapacityError, RecursionBudgetError, MemoryError) as exc:
        print(f"tightcycles: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except Exception as exc:  # noqa: BLE001
        logger.exception("internal error")
        print(f"tightcycles: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    timing["total_seconds"] = time.perf_counter() - t0
    timing["peak_memory_mb_estimate"] = _peak_memory_mb()
    _write_json(Path(args.out) / "timing.json", timing)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
