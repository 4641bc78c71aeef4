"""Command-line entry point: ``localcc <command> [options]``.

Commands: generate, cluster, estimate, test, bench, verify.  A one-line
summary goes to stderr; the machine-readable report (JSON or TSV) goes to
stdout or ``--output``.  Exit codes: 0 success, 1 verification failure,
2 usage or input error, 3 tester reject, 4 budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import suites
from .clustering import brute_force_opt, connected_components_clustering, cost, quick_cluster
from .estimation import estimate_edit_distance, test_clusterable
from .graph import (GraphFormatError, NeighborhoodOracle, QueryBudgetExceeded, SignedGraph,
                    format_clustering, format_graph, generate_adversarial, generate_planted,
                    parse_graph, random_graph)
from .pivot import (ApproxParams, PivotHandle, boosted_cluster, explicit_cluster, find_cluster,
                    find_good_pivots, hybrid_cluster, local_cluster)
from .ptas import EnumerationBudgetExceeded, PtasHandle, ptas_explicit, ptas_local_cluster, ptas_preprocess
from .seeding import SeedContext
from .streaming import (ProcessorPartition, parse_stream, simulate_distributed, stream_one_pass,
                        stream_two_pass)

SCHEMA = "localcc.report/1"
TIMING_FIELDS = ("wall_time_s",)

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_REJECT, EXIT_BUDGET = 0, 1, 2, 3, 4

ALGOS = ("local", "quick", "cc", "brute", "ptas", "stream1", "stream2", "dist", "boost", "hybrid")


class UsageError(Exception):
    pass


# -- reports ------------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def render(report: dict, fmt: str) -> str:
    """Serialise a report; JSON keys are sorted so equal runs give equal bytes."""
    report = _jsonable(report)
    if fmt == "json":
        return json.dumps(report, sort_keys=True, indent=2) + "\n"
    table = report.get("table")
    if table:
        cols = list(table[0])
        lines = ["\t".join(cols)]
        lines += ["\t".join(_cell(row.get(c)) for c in cols) for row in table]
        return "\n".join(lines) + "\n"
    lines = [f"{k}\t{_cell(report[k])}" for k in sorted(report)]
    return "\n".join(lines) + "\n"


def _cell(v) -> str:
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True, separators=(",", ":"))
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def strip_timing(report: dict) -> dict:
    return {k: v for k, v in report.items() if k not in TIMING_FIELDS}


def _emit(args, report: dict):
    text = render(report, args.format)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def _say(msg: str):
    print(msg, file=sys.stderr)


# -- shared helpers -------------------------------------------------------------

def _seed(args) -> SeedContext:
    return SeedContext.from_env() if args.seed is None else SeedContext(args.seed)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror or e}") from None


def _load_graph(path: str) -> SignedGraph:
    return parse_graph(_read(path), weighted=False)


def _params(args) -> ApproxParams:
    return ApproxParams(args.eps, estimator=args.estimator)


def _base(command: str, args, seed: SeedContext) -> dict:
    return dict(schema=SCHEMA, command=command, seed=int(seed.seed))


def _finish_clustering(args, g: SignedGraph, labels, rep: dict):
    labels = np.asarray(labels, dtype=np.int64)
    c = cost(g, labels)
    rep.update(n=g.n, cost=int(c), fractional_cost=c / g.n**2 if g.n else 0.0,
               clusters=int(np.unique(labels).size))
    if args.clustering_out:
        Path(args.clustering_out).write_text(format_clustering(labels))
        rep["clustering_file"] = args.clustering_out
    else:
        rep["labels"] = labels.tolist()


# -- generate -------------------------------------------------------------------

def cmd_generate(args) -> int:
    seed = _seed(args)
    rep = _base("generate", args, seed)
    labels = None
    if args.planted:
        if args.k is None:
            raise UsageError("--planted needs -k")
        g, labels = generate_planted(args.n, args.k, args.noise, seed)
        rep.update(family="planted", k=args.k, noise=args.noise)
    elif args.adversarial:
        g, labels, prm = generate_adversarial(args.n, args.eps, args.c, seed)
        rep.update(family="adversarial", eps=args.eps, c=args.c, k=prm.k, alpha=prm.alpha,
                   clique_size=prm.clique_size, extra_per_cluster=prm.extra_per_cluster,
                   requested_n=args.n)
    else:
        g = random_graph(args.n, args.p, seed)
        rep.update(family="uniform", p=args.p)
    Path(args.graph_out).write_text(format_graph(g))
    rep.update(n=g.n, positive_edges=g.num_positive(), graph_file=args.graph_out)
    if labels is not None:
        Path(args.clustering_out).write_text(format_clustering(labels))
        rep.update(clustering_file=args.clustering_out, planted_cost=int(cost(g, labels)))
    _say(f"generated {rep['family']} graph: n={g.n}, {g.num_positive()} positive edges -> {args.graph_out}")
    _emit(args, rep)
    return EXIT_OK


# -- cluster --------------------------------------------------------------------

def _cluster_local(args, g, seed, rep):
    oracle = g.oracle(budget=args.max_queries)
    params = _params(args)
    handle = None
    if args.handle and Path(args.handle).exists():
        handle = PivotHandle.from_dict(json.loads(_read(args.handle)))
    if args.vertex is not None:
        v = args.vertex
        if not 0 <= v < g.n:
            raise UsageError(f"--vertex {v} outside 0..{g.n - 1}")
        if handle is None and (args.preprocessed or args.handle):
            handle = find_good_pivots(params, oracle, seed)
            pre = oracle.query_count
        else:
            pre = 0
        if handle is not None:
            before = oracle.query_count
            lab = find_cluster(v, handle.pivots, oracle)
            rep.update(vertex=v, label=int(lab), preprocessing_queries=int(pre),
                       vertex_queries=int(oracle.query_count - before))
        else:
            lab = local_cluster(v, params, oracle, seed)
            rep.update(vertex=v, label=int(lab))
        if handle is not None:
            rep["pivots"] = [int(p) for p in handle.pivots]
        rep.update(n=g.n, query_count=oracle.query_count)
        return handle, None
    if handle is None:
        labels, handle = explicit_cluster(params, oracle, seed, return_handle=True)
    else:
        labels = handle.labels(oracle)
    rep.update(pivots=[int(p) for p in handle.pivots],
               preprocessing_queries=handle.preprocessing_queries, query_count=oracle.query_count)
    return handle, labels


def _cluster_ptas(args, g, seed, rep):
    oracle = g.oracle(budget=args.max_queries)
    handle = None
    if args.handle and Path(args.handle).exists():
        handle = PtasHandle.from_json(_read(args.handle))
    if handle is None:
        handle = ptas_preprocess(args.eps, oracle, seed, g=g, mode=args.mode, k=args.k,
                                 max_width=args.max_width)
    rep.update(mode=handle.mode, k=handle.k, width=handle.decomp.width, atoms=handle.num_atoms,
               ptas=handle.stats)
    if args.vertex is not None:
        if not 0 <= args.vertex < g.n:
            raise UsageError(f"--vertex {args.vertex} outside 0..{g.n - 1}")
        before = oracle.query_count
        lab = ptas_local_cluster(args.vertex, handle, oracle)
        rep.update(n=g.n, vertex=args.vertex, label=int(lab),
                   vertex_queries=oracle.query_count - before, query_count=oracle.query_count)
        return handle, None
    labels = np.array([ptas_local_cluster(v, handle, oracle) for v in range(g.n)], dtype=np.int64)
    rep["query_count"] = oracle.query_count
    return handle, labels


def _cluster_stream(args, text, seed, rep):
    stream = parse_stream(text)
    params = _params(args)
    if args.algo == "stream1":
        labels, stats = stream_one_pass(stream, params=params, seed=seed, simple=args.simple,
                                        return_stats=True)
        rep["stream"] = stats.to_dict()
    elif args.algo == "stream2":
        labels, stats = stream_two_pass(stream, params=params, seed=seed, simple=args.simple,
                                        return_stats=True)
        rep["stream"] = stats.to_dict()
    else:
        g = stream.to_graph()
        part = ProcessorPartition.from_graph(g, args.procs, seed.child("cli:partition"))
        labels, tr = simulate_distributed(part, params=params, seed=seed, simple=args.simple,
                                          workers=max(1, args.jobs))
        rep.update(procs=args.procs, transcript=tr.to_dict())
    rep["simple"] = args.simple
    return stream.to_graph(), labels


def cmd_cluster(args) -> int:
    seed = _seed(args)
    rep = _base("cluster", args, seed)
    rep.update(algo=args.algo, eps=args.eps)
    text = _read(args.input)
    t0 = time.perf_counter()
    labels = None
    handle = None
    if args.vertex is not None and args.algo not in ("local", "ptas"):
        raise UsageError("--vertex is supported by --algo local and ptas only")
    if args.algo in ("stream1", "stream2", "dist"):
        g, labels = _cluster_stream(args, text, seed, rep)
    else:
        g = parse_graph(text, weighted=False)
        if args.algo == "local":
            rep["estimator"] = args.estimator
            handle, labels = _cluster_local(args, g, seed, rep)
        elif args.algo == "ptas":
            handle, labels = _cluster_ptas(args, g, seed, rep)
        elif args.algo == "quick":
            oracle = g.oracle(budget=args.max_queries)
            labels = quick_cluster(oracle, seed)
            rep["query_count"] = oracle.query_count
        elif args.algo == "cc":
            labels = connected_components_clustering(g)
        elif args.algo == "brute":
            if g.n > 12:
                raise UsageError(f"brute force is limited to n <= 12 (got {g.n})")
            res = brute_force_opt(g)
            labels = res.opt_clustering
        elif args.algo == "boost":
            oracle = g.oracle(budget=args.max_queries)
            res = boosted_cluster(_params(args), lambda o, s: quick_cluster(o, s), args.r, oracle,
                                  seed, return_details=True)
            labels = res.labels
            rep.update(r=args.r, chosen=res.chosen, estimates=res.estimates,
                       query_count=oracle.query_count)
        elif args.algo == "hybrid":
            nbr = NeighborhoodOracle(g)
            res = hybrid_cluster(nbr, seed, return_details=True)
            labels = res.labels
            rep.update(fallback=res.fallback, steps=res.steps, budget=res.budget,
                       edge_queries=res.edge_queries)
    if args.handle and handle is not None and not Path(args.handle).exists():
        body = handle.to_json() if isinstance(handle, PtasHandle) else json.dumps(
            handle.to_dict(), sort_keys=True)
        Path(args.handle).write_text(body)
    if labels is not None:
        _finish_clustering(args, g, labels, rep)
    rep["wall_time_s"] = time.perf_counter() - t0
    if labels is not None:
        _say(f"{args.algo}: n={g.n} cost={rep['cost']} ({rep['fractional_cost']:.4f} n^2), "
             f"{rep['clusters']} clusters, {rep.get('query_count', 0)} probes")
    else:
        _say(f"{args.algo}: vertex {rep['vertex']} -> label {rep['label']}, {rep['query_count']} probes")
    _emit(args, rep)
    return EXIT_OK


# -- estimate / test ------------------------------------------------------------

def cmd_estimate(args) -> int:
    seed = _seed(args)
    g = _load_graph(args.input)
    oracle = g.oracle(budget=args.max_queries)
    t0 = time.perf_counter()
    res = estimate_edit_distance(args.eps, oracle, seed, params=_params(args))
    rep = _base("estimate", args, seed)
    rep.update(n=g.n, eps=args.eps, estimate=res.estimate, lower_bound=res.lower_bound,
               samples=res.samples, query_count=res.queries,
               wall_time_s=time.perf_counter() - t0)
    _say(f"estimated distance {res.estimate:.4f} n^2 (lower bound {res.lower_bound:.4f}), "
         f"{res.queries} probes")
    _emit(args, rep)
    return EXIT_OK


def cmd_test(args) -> int:
    seed = _seed(args)
    g = _load_graph(args.input)
    oracle = g.oracle(budget=args.max_queries)
    t0 = time.perf_counter()
    res = test_clusterable(args.eps, oracle, seed, params=_params(args))
    rep = _base("test", args, seed)
    rep.update(n=g.n, eps=args.eps, verdict=res.verdict, estimate=res.estimate,
               threshold=res.threshold, samples=res.samples, exact=res.exact,
               query_count=res.queries, wall_time_s=time.perf_counter() - t0)
    _say(f"{res.verdict}: estimate {res.estimate:.4f} vs threshold {res.threshold:.4f}")
    _emit(args, rep)
    return EXIT_OK if res.accept else EXIT_REJECT


# -- bench ----------------------------------------------------------------------

def _bench_one(job):
    algo, family, n, eps, k, noise, seed = job
    ctx = SeedContext(seed)
    if family == "planted":
        g, _ = generate_planted(n, k, noise, ctx.child("bench:graph"))
    else:
        g = random_graph(n, noise, ctx.child("bench:graph"))
    oracle = g.oracle()
    if algo == "local":
        labels = explicit_cluster(eps, oracle, ctx)
    elif algo == "quick":
        labels = quick_cluster(oracle, ctx)
    else:
        labels = ptas_explicit(eps, oracle, ctx, mode="sampled", decomposition="fk")
    return oracle.query_count, cost(g, labels) / n**2


def _grid(text: str, cast):
    try:
        vals = [cast(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad grid {text!r}") from None
    if not vals:
        raise UsageError("empty grid")
    return vals


def cmd_bench(args) -> int:
    seed = _seed(args)
    eps_grid = _grid(args.eps_grid, float)
    n_grid = _grid(args.n_grid, int)
    base = int(seed.seed)
    jobs = [(args.algo, args.family, n, e, args.k, args.noise, base + s)
            for n in n_grid for e in eps_grid for s in range(args.seeds)]
    t0 = time.perf_counter()
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            out = list(ex.map(_bench_one, jobs))
    else:
        out = [_bench_one(j) for j in jobs]
    table = []
    i = 0
    for n in n_grid:
        for e in eps_grid:
            chunk = out[i:i + args.seeds]
            i += args.seeds
            q = [c[0] for c in chunk]
            f = [c[1] for c in chunk]
            table.append(dict(n=n, eps=e, seeds=args.seeds, median_queries=float(np.median(q)),
                              median_cost=float(np.median(f)),
                              queries_eps2=float(np.median(q)) * e * e))
    rep = _base("bench", args, seed)
    rep.update(algo=args.algo, family=args.family, k=args.k, noise=args.noise, table=table,
               wall_time_s=time.perf_counter() - t0)
    for row in table:
        _say(f"n={row['n']:>6} eps={row['eps']:<6} median queries={row['median_queries']:>12.0f} "
             f"median cost={row['median_cost']:.4f} n^2")
    _emit(args, rep)
    return EXIT_OK


# -- verify ---------------------------------------------------------------------

def cmd_verify(args) -> int:
    only = _grid(args.criteria, int) if args.criteria else None
    if only and not set(only) <= set(suites.CRITERIA):
        raise UsageError(f"criteria must be among {sorted(suites.CRITERIA)}")
    t0 = time.perf_counter()
    results = suites.run_all(args.scale, max(1, args.jobs), only)
    for r in results:
        _say(r.line())
    rep = dict(schema=SCHEMA, command="verify", scale=args.scale,
               passed=all(r.passed for r in results),
               criteria=[r.to_dict() if args.details else
                         dict(number=r.number, name=r.name, passed=r.passed, summary=r.summary)
                         for r in results],
               wall_time_s=time.perf_counter() - t0)
    if args.format == "tsv":
        rep = dict(rep, table=[dict(number=r.number, name=r.name, passed=r.passed,
                                    summary=r.summary) for r in results])
    _emit(args, rep)
    return EXIT_OK if rep["passed"] else EXIT_VERIFY


# -- parser ---------------------------------------------------------------------

def _positive_eps(text: str) -> float:
    x = float(text)
    if not 0 < x < 1:
        raise argparse.ArgumentTypeError("eps must lie in (0, 1)")
    return x


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "tsv"), default="json")
    common.add_argument("--output", "-o", help="write the report here instead of stdout")
    common.add_argument("--seed", type=int, help="random seed (default: $LOCALCC_SEED or 0)")
    common.add_argument("--max-queries", type=int, default=None, help="oracle probe budget")
    common.add_argument("--jobs", type=int, default=1, help="worker processes across seeds/instances")

    p = argparse.ArgumentParser(prog="localcc", description="Local correlation clustering toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="write a benchmark graph")
    fam = g.add_mutually_exclusive_group(required=True)
    fam.add_argument("--planted", action="store_true")
    fam.add_argument("--adversarial", action="store_true")
    fam.add_argument("--uniform", action="store_true")
    g.add_argument("-n", type=int, required=True)
    g.add_argument("-k", type=int)
    g.add_argument("--noise", type=float, default=0.0)
    g.add_argument("--p", type=float, default=0.5)
    g.add_argument("--eps", type=float, default=1 / 32)
    g.add_argument("--c", type=float, default=1.0)
    g.add_argument("--graph-out", default="graph.txt")
    g.add_argument("--clustering-out", default="clustering.txt")
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("cluster", parents=[common], help="cluster a graph or edge stream")
    c.add_argument("-i", "--input", required=True)
    c.add_argument("--algo", choices=ALGOS, default="local")
    c.add_argument("--eps", type=_positive_eps, default=0.1)
    which = c.add_mutually_exclusive_group()
    which.add_argument("--vertex", type=int)
    which.add_argument("--all", action="store_true", help="label every vertex (default)")
    c.add_argument("--preprocessed", action="store_true",
                   help="with --vertex: run preprocessing once and report its probes separately")
    c.add_argument("--handle", help="preprocessing handle file (read if present, else written)")
    c.add_argument("--mode", choices=("exact", "sampled"), default="exact")
    c.add_argument("--k", type=int, help="PTAS cluster count (default: from eps)")
    c.add_argument("--max-width", type=int, default=4, help="PTAS decomposition width cap")
    c.add_argument("--procs", type=int, default=4)
    c.add_argument("--simple", action="store_true", help="single-sample streaming/distributed variant")
    c.add_argument("--estimator", choices=("multiplicative", "additive"), default="multiplicative")
    c.add_argument("--r", type=float, default=2.0, help="boosting factor for --algo boost")
    c.add_argument("--clustering-out")
    c.set_defaults(func=cmd_cluster)

    for name, fn, hlp in (("estimate", cmd_estimate, "estimate cluster edit distance / n^2"),
                          ("test", cmd_test, "clusterability tester (exit 3 on reject)")):
        e = sub.add_parser(name, parents=[common], help=hlp)
        e.add_argument("-i", "--input", required=True)
        e.add_argument("--eps", type=_positive_eps, default=0.1)
        e.add_argument("--estimator", choices=("multiplicative", "additive"), default="multiplicative")
        e.set_defaults(func=fn)

    b = sub.add_parser("bench", parents=[common], help="probe and cost table over a grid")
    b.add_argument("--algo", choices=("local", "quick", "ptas"), default="local")
    b.add_argument("--eps-grid", default="0.05,0.1,0.2")
    b.add_argument("--n-grid", default="128,256,512")
    b.add_argument("--seeds", type=int, default=20)
    b.add_argument("--family", choices=("planted", "uniform"), default="planted")
    b.add_argument("-k", type=int, default=4)
    b.add_argument("--noise", type=float, default=0.05,
                   help="flip probability (planted) or edge probability (uniform)")
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("verify", parents=[common], help="run the desk-scale oracle suites")
    v.add_argument("--scale", choices=tuple(suites.SCALES), default="quick")
    v.add_argument("--criteria", help="comma-separated criterion numbers (default: all)")
    v.add_argument("--details", action="store_true", help="include per-instance details")
    v.set_defaults(func=cmd_verify)
    return p


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    try:
        if getattr(args, "max_queries", None) is not None and args.max_queries < 0:
            raise UsageError("--max-queries must be non-negative")
        if args.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        return args.func(args)
    except (QueryBudgetExceeded, EnumerationBudgetExceeded) as e:
        _say(f"budget exceeded: {e}")
        return EXIT_BUDGET
    except (UsageError, GraphFormatError, ValueError) as e:
        _say(f"error: {e}")
        return EXIT_USAGE


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
