"""``giantwalk`` command line: one subcommand per pipeline stage plus verify/report."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import claims, gff, giant, gw, harness, resistance, skeleton, walk
from .errors import ConfigInvalid, GiantWalkError, GraphFormatError, MissingProvenance
from .graph import bfs_distances, read_graph, write_graph

log = logging.getLogger("giantwalk")

EXIT_OK, EXIT_CLAIM, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 2, as argparse does, but without traceback noise
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


# --------------------------------------------------------------------------
# output helpers

def _emit_csv(out: Path | None, name: str, columns, rows) -> None:
    if out is None:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)
        return
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{name}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)


def _emit_json(out: Path | None, name: str, obj) -> None:
    text = harness.dumps_json(obj)
    if out is None:
        sys.stderr.write(text)
    else:
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.json").write_text(text)


def _load_sample(graph_path: str, prov_path: str | None):
    g = read_graph(graph_path)
    prov = prov_path or graph_path + ".prov"
    try:
        text = Path(prov).read_text()
    except OSError:
        if prov_path:
            raise MissingProvenance(f"cannot read provenance file {prov}") from None
        return g, None
    return g, giant.loads_sample(g, text)


def _need_seed(args) -> int:
    if args.seed is None:
        raise ConfigInvalid("--seed is required (no clock-based default)")
    return args.seed


# --------------------------------------------------------------------------
# subcommands

def cmd_gen(args) -> int:
    if args.out is None:
        raise ConfigInvalid("gen needs --out <graph path>")
    params = giant.ModelParams.from_eps(args.n, args.eps)
    gs = giant.sample_giant(params, _need_seed(args))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_graph(gs.graph, out)
    Path(str(out) + ".prov").write_text(giant.dumps_provenance(gs))
    rep = giant.apoh_report(gs)
    print(harness.dumps_json({"graph": str(out), "provenance": str(out) + ".prov", **rep.as_dict()}), end="")
    return EXIT_OK


def cmd_gw(args) -> int:
    rng = np.random.default_rng(_need_seed(args))
    exact = gw.survival_prob_exact(args.mu, args.kmax)
    forest = gw.grow_forest(args.mu, args.draws, args.kmax, rng)
    depths = forest.tree_depths()
    rows = []
    for k in range(args.kmax + 1):
        p = float((depths >= k).mean())
        se = math.sqrt(p * (1 - p) / args.draws)
        rows.append([k, repr(float(exact[k])), repr(p), repr(se)])
    _emit_csv(_outdir(args), "gw", ["k", "p_exact", "p_empirical", "se"], rows)
    return EXIT_OK


def _outdir(args) -> Path | None:
    return Path(args.out) if args.out else None


def _read_pairs(spec: str, n: int, seed: int | None) -> np.ndarray:
    if spec.startswith("random:"):
        k = int(spec.split(":", 1)[1])
        if seed is None:
            raise ConfigInvalid("random pairs need --seed")
        return np.random.default_rng(seed).integers(0, n, size=(k, 2))
    pairs = []
    for line in Path(spec).read_text().splitlines():
        line = line.split("#", 1)[0].replace(",", " ").split()
        if line:
            pairs.append((int(line[0]), int(line[1])))
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def cmd_resist(args) -> int:
    g = read_graph(args.graph)
    pairs = _read_pairs(args.pairs, g.vertex_count, args.seed)
    rows = []
    src, dist = -1, None
    for v, w in pairs.tolist():
        if v != src:
            src, dist = v, bfs_distances(g, [v]).dist
        r = resistance.resistance_solve(g, v, w, args.tol, args.method)
        rows.append([v, w, int(dist[w]), repr(r.value), repr(r.residual), r.method])
    _emit_csv(_outdir(args), "resist", ["v", "w", "dist", "reff", "residual", "method"], rows)
    return EXIT_OK


def _pin(spec: str, g, gs) -> int:
    if spec == "auto-kernel":
        if gs is not None:
            return int(gs.kernel_vertices[0])
        kern = np.flatnonzero(g.roles == 0)
        return int(kern[0]) if len(kern) else 0
    return int(spec)


def cmd_gff(args) -> int:
    g, gs = _load_sample(args.graph, args.prov)
    pin = _pin(args.pin, g, gs)
    est = gff.estimate_M(g, pin, args.replicas, _need_seed(args))
    _emit_csv(_outdir(args), "gff", ["replica", "max_eta"],
              [[i, repr(float(m))] for i, m in enumerate(est.maxima)])
    summary = {"pin": pin, "M": est.M, "se": est.se, "sigma2": est.sigma2,
               "sigma2_bound": est.sigma2_bound, "radius": est.radius, "alpha": est.alpha,
               "replicas": est.replicas}
    if gs is not None:
        p = gs.params
        summary["target"] = math.log(p.N) / math.sqrt(2 * p.eps)
        summary["ratio"] = est.M / summary["target"]
    _emit_json(_outdir(args), "gff_summary", summary)
    return EXIT_OK


def cmd_cover(args) -> int:
    g, gs = _load_sample(args.graph, args.prov)
    seed = _need_seed(args)
    if args.starts == "panel":
        rng = np.random.default_rng(seed)
        if gs is not None:
            starts, labels = walk.start_panel(gs, rng, args.random_starts)
        else:
            far = int(np.argmax(bfs_distances(g, [0]).dist))
            starts = [0, far] + [int(v) for v in rng.integers(0, g.vertex_count, args.random_starts)]
            labels = ["vertex0", "farthest"] + ["random"] * args.random_starts
    else:
        starts = [int(s) for s in args.starts.split(",")]
        labels = ["given"] * len(starts)
    runs = [walk.simulate_cover(g, s, args.replicas, seed) for s in starts]
    rows = [[r.start, i, int(x)] for r in runs for i, x in enumerate(r.steps)]
    _emit_csv(_outdir(args), "cover", ["start", "replica", "steps"], rows)
    summary: dict = {
        "starts": starts, "labels": labels,
        "means": [r.mean for r in runs], "se": [r.se for r in runs],
        "cover_time": max(r.mean for r in runs),
        "feige": list(walk.feige_bounds(g.vertex_count)),
    }
    if args.exact:
        exact = walk.exact_cover_all(g)
        summary["exact"] = {int(s): float(exact[s]) for s in starts}
        summary["exact_max"] = float(exact.max())
    if gs is not None:
        est = gff.estimate_M(g, int(gs.kernel_vertices[0]), args.gff_replicas, seed)
        pred = walk.predict_cover(gs.params, g.edge_count, est.M, est.sigma2,
                                  vertex_count=g.vertex_count)
        summary["M"] = est.M
        summary["R"] = est.sigma2
        summary["prediction"] = pred.as_dict()
        summary["ratios"] = {"cover/headline": summary["cover_time"] / pred.headline,
                             "cover/dlp_center": summary["cover_time"] / pred.dlp_center}
    _emit_json(_outdir(args), "cover_summary", summary)
    return EXIT_OK


def cmd_skeleton(args) -> int:
    g, gs = _load_sample(args.graph, args.prov)
    if gs is None:
        raise MissingProvenance("skeleton needs the provenance sidecar (--prov)")
    summary = harness.skeleton_summary(gs)
    if args.chains:
        h = skeleton.build_hierarchy(gs)
        ch = skeleton.all_chains(h)
        with open(args.chains, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["v", "alpha", "length"] + [f"m{i}" for i in range(h.l0 + 1)])
            for v in range(h.n):
                w.writerow([v, int(h.alpha[v]), int(ch.lengths[v]) - 1, *ch.counts[v].tolist()])
    text = harness.dumps_json(summary)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "skeleton.json").write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if summary["budget_violations"] == 0 and summary["properties"]["ok"] else EXIT_CLAIM


def _config_from(args):
    overrides = {"seed": args.seed, "out": args.out}
    if getattr(args, "scale", None):
        overrides["scale"] = args.scale
    if getattr(args, "commute_convention", None):
        overrides["commute_convention"] = args.commute_convention
    if args.config:
        return harness.load_config(args.config, **overrides)
    return harness.make_config(**{k: v for k, v in overrides.items() if v is not None})


def cmd_verify(args) -> int:
    cfg = _config_from(args)
    only = args.only.split(",") if args.only else None
    if only and set(only) - set(claims.CLAIM_IDS):
        raise ConfigInvalid(f"unknown claim ids {sorted(set(only) - set(claims.CLAIM_IDS))}")
    progress = (lambda m: print(m, file=sys.stderr, flush=True)) if args.verbose else None
    ledger, code = harness.verify_suite(cfg, cfg.out, only=only, progress=progress)
    sys.stdout.write(ledger.table())
    return code


def cmd_report(args) -> int:
    if args.source:
        src = Path(args.source)
        if (src / "claims.txt").exists():
            sys.stdout.write((src / "claims.txt").read_text())
        man = src / "manifest.json"
        if not man.exists() and not (src / "claims.txt").exists():
            raise ConfigInvalid(f"{src} holds no giantwalk outputs")
        if man.exists():
            m = json.loads(man.read_text())
            print(f"status: {m['status']}")
            for name, digest in sorted(m["files"].items()):
                print(f"{name:<14} {digest}")
        return EXIT_OK
    cfg = _config_from(args)
    digests = harness.run_experiment(cfg, cfg.out)
    for name, digest in sorted(digests.items()):
        print(f"{name:<14} {digest}")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="giantwalk", description="Cover times and Gaussian free fields on emerging giants.")
    p.add_argument("--seed", type=_u64, default=None, help="master seed (unsigned 64-bit)")
    p.add_argument("--threads", type=int, default=None, help="numba worker threads")
    p.add_argument("--out", default=None, help="output path (graph file for gen, directory otherwise)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("gen", help="sample H and write graph + provenance")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--eps", type=float, required=True)
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("gw", help="PGW survival curve, exact vs empirical")
    s.add_argument("--mu", type=float, required=True)
    s.add_argument("--draws", type=int, required=True)
    s.add_argument("--kmax", type=int, required=True)
    s.set_defaults(func=cmd_gw)

    s = sub.add_parser("resist", help="effective resistances of vertex pairs")
    s.add_argument("--graph", required=True)
    s.add_argument("--pairs", required=True, help="file of 'v w' lines or random:<k>")
    s.add_argument("--tol", type=float, default=resistance.DEFAULT_TOL)
    s.add_argument("--method", choices=("auto", "direct", "iterative"), default="auto")
    s.set_defaults(func=cmd_resist)

    s = sub.add_parser("gff", help="estimate M = E max of the pinned GFF")
    s.add_argument("--graph", required=True)
    s.add_argument("--prov", default=None)
    s.add_argument("--pin", default="auto-kernel")
    s.add_argument("--replicas", type=int, default=gff.DEFAULT_REPLICAS)
    s.set_defaults(func=cmd_gff)

    s = sub.add_parser("cover", help="Monte Carlo cover times and the predictor stack")
    s.add_argument("--graph", required=True)
    s.add_argument("--prov", default=None)
    s.add_argument("--starts", default="panel", help="'panel' or comma-separated vertex ids")
    s.add_argument("--replicas", type=int, default=10)
    s.add_argument("--random-starts", type=int, default=8)
    s.add_argument("--gff-replicas", type=int, default=500)
    s.add_argument("--exact", action="store_true", help="also solve exactly (at most 14 vertices)")
    s.set_defaults(func=cmd_cover)

    s = sub.add_parser("skeleton", help="chaining hierarchy summary")
    s.add_argument("--graph", required=True)
    s.add_argument("--prov", required=True)
    s.add_argument("--chains", default=None, help="optional per-vertex chain CSV path")
    s.set_defaults(func=cmd_skeleton)

    for name, func, helptext in (("verify", cmd_verify, "run the claims battery"),
                                 ("report", cmd_report, "run an experiment grid or show outputs")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", default=None, help="key=value config file")
        s.add_argument("--scale", choices=("desk", "full"), default=None)
        s.set_defaults(func=func)
        if name == "verify":
            s.add_argument("--only", default=None, help="comma-separated claim ids")
            s.add_argument("--commute-convention", choices=("standard", "literal"), default=None)
        else:
            s.add_argument("--from", dest="source", default=None, help="existing output directory")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads:
        import numba
        numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
    try:
        return args.func(args)
    except (ConfigInvalid, GraphFormatError, MissingProvenance, FileNotFoundError) as exc:
        print(f"giantwalk: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GiantWalkError as exc:
        print(f"giantwalk: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CLAIM


if __name__ == "__main__":
    sys.exit(main())
