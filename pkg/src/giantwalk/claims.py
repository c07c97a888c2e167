"""The claims battery behind ``giantwalk verify`` and the acceptance tests.

Each claim is a function of a :class:`ClaimContext` returning a
:class:`ClaimRecord`. Sizes come from the ``desk`` or ``full`` scale table;
``full`` uses the sizes and tolerances of the acceptance criteria.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import gff, giant, resistance, skeleton, walk
from .graph import Graph, bfs_distances, build_graph, random_connected_graph
from .harness import ExperimentConfig, stage_seed

CLAIM_IDS = (
    "commute-identity",
    "resistance-oracle",
    "gff-fidelity",
    "m-oracles",
    "maxnorm",
    "cover-oracle",
    "dklp-statistics",
    "skeleton-lemmas",
    "headline-trend",
    "feige-sanity",
)

SCALES = {
    "full": dict(
        commute_graphs=50, commute_max_v=50, commute_pairs=5,
        resist_n=1_000_000, resist_pairs=1000,
        gff_p3_samples=100_000, gff_graphs=10, gff_graph_samples=100_000,
        m_replicas=100_000,
        maxnorm_s=10_000, maxnorm_trials=100_000,
        cover_graphs=30, cover_max_v=10, cover_replicas=10_000, cover_starts=2,
        dklp_n=1_000_000, dklp_seeds=20,
        skeleton_n=1_000_000, skeleton_seeds=20,
        headline_n=(250_000, 1_000_000, 4_000_000), headline_seeds=3,
        headline_gff_replicas=2000, headline_cover_replicas=10, headline_random_starts=2,
    ),
    "desk": dict(
        commute_graphs=20, commute_max_v=30, commute_pairs=3,
        resist_n=250_000, resist_pairs=200,
        gff_p3_samples=100_000, gff_graphs=5, gff_graph_samples=50_000,
        m_replicas=100_000,
        maxnorm_s=10_000, maxnorm_trials=20_000,
        cover_graphs=10, cover_max_v=8, cover_replicas=10_000, cover_starts=2,
        dklp_n=1_000_000, dklp_seeds=4,
        skeleton_n=1_000_000, skeleton_seeds=4,
        headline_n=(250_000, 1_000_000), headline_seeds=1,
        headline_gff_replicas=500, headline_cover_replicas=10, headline_random_starts=0,
    ),
}

EPS = 0.1
MAXNORM_TOL = 0.03
DLP_BAND = (0.5, 2.0)
FEIGE_SLACK = 0.1


@dataclass(frozen=True)
class ClaimRecord:
    id: str
    anchor: str
    measured: object
    band: str
    verdict: str            # pass | fail | trend | report-only
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return self.verdict in ("pass", "trend", "report-only")

    def as_dict(self) -> dict:
        return {"id": self.id, "anchor": self.anchor, "measured": self.measured,
                "band": self.band, "verdict": self.verdict, "detail": self.detail,
                "seconds": round(self.seconds, 3)}


@dataclass
class ClaimsLedger:
    records: list[ClaimRecord]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.records)

    def table(self) -> str:
        w = max(len(r.id) for r in self.records) if self.records else 8
        lines = [f"{'claim':<{w}}  {'verdict':<11}  {'measured':<28}  band"]
        for r in self.records:
            m = r.measured if isinstance(r.measured, str) else _short(r.measured)
            lines.append(f"{r.id:<{w}}  {r.verdict:<11}  {m:<28}  {r.band}")
        return "\n".join(lines) + "\n"


def _short(x) -> str:
    if isinstance(x, float):
        return f"{x:.6g}"
    if isinstance(x, (list, tuple)):
        return "[" + ", ".join(_short(v) for v in x) + "]"
    return str(x)


# --------------------------------------------------------------------------
# context shared across claims (sample cache, cover-time registry)

class ClaimContext:
    def __init__(self, cfg: ExperimentConfig, scale: dict | None = None):
        self.cfg = cfg
        self.scale = dict(SCALES[cfg.scale] if scale is None else scale)
        self._samples: dict[tuple[int, int], giant.GiantSample] = {}
        self.cover_times: list[tuple[str, int, float]] = []   # (source, |V|, cover time)

    def seed(self, stage: str, grid: int = 0, replica: int = 0) -> int:
        return stage_seed(self.cfg.seed, stage, grid, replica)

    def rng(self, stage: str, grid: int = 0, replica: int = 0) -> np.random.Generator:
        return np.random.default_rng(self.seed(stage, grid, replica))

    def sample(self, n: int, replica: int) -> giant.GiantSample:
        """Giant sample at ``(n, EPS)``; seeds depend on ``n`` and replica only."""
        key = (n, replica)
        if key not in self._samples:
            params = giant.ModelParams.from_eps(n, EPS)
            self._samples[key] = giant.sample_giant(params, self.seed("giant", n, replica))
        return self._samples[key]

    def forget(self, n: int) -> None:
        for k in [k for k in self._samples if k[0] == n]:
            del self._samples[k]


def _verdict(ok: bool) -> str:
    return "pass" if ok else "fail"


# --------------------------------------------------------------------------
# 1. commute identity

def claim_commute_identity(ctx: ClaimContext) -> ClaimRecord:
    s = ctx.scale
    rng = ctx.rng("commute")
    worst = 0.0
    checks = 0
    for _ in range(s["commute_graphs"]):
        n = int(rng.integers(3, s["commute_max_v"] + 1))
        g = random_connected_graph(n, int(rng.integers(0, 2 * n)), rng)
        for _ in range(s["commute_pairs"]):
            v, w = (int(x) for x in rng.choice(n, size=2, replace=False))
            c = resistance.commute_identity_check(g, v, w, ctx.cfg.commute_convention)
            worst = max(worst, c.residual)
            checks += 1
    return ClaimRecord(
        "commute-identity",
        "tau(v,w) + tau(w,v) = 2|E| R_eff(v,w)",
        worst, "max relative residual < 1e-6", _verdict(worst < 1e-6),
        {"checks": checks, "convention": ctx.cfg.commute_convention},
    )


# --------------------------------------------------------------------------
# 2. resistance oracle

def claim_resistance_oracle(ctx: ClaimContext) -> ClaimRecord:
    s = ctx.scale
    p3 = build_graph([(0, 1), (1, 2)])
    tri = build_graph([(0, 1), (1, 2), (0, 2)])
    k4 = build_graph([(i, j) for i in range(4) for j in range(i + 1, 4)])
    exact = {
        "P3 endpoints": (resistance.effective_resistance(p3, 0, 2), 2.0),
        "triangle edge": (resistance.effective_resistance(tri, 0, 1), 2.0 / 3.0),
        "K4 pair": (resistance.effective_resistance(k4, 0, 3), 0.5),
    }
    err = max(abs(a - b) for a, b in exact.values())
    gs = ctx.sample(s["resist_n"], 0)
    g = gs.graph
    rng = ctx.rng("resist-pairs")
    pairs = rng.integers(0, g.vertex_count, size=(s["resist_pairs"], 2))
    reff = resistance.LaplacianFactor(g, 0).resistances(pairs)
    order = np.argsort(pairs[:, 0], kind="stable")
    violations, src, dist = 0, -1, None
    for k in order:
        a, b = pairs[k]
        if a != src:
            src, dist = a, bfs_distances(g, [a]).dist
        violations += int(reff[k] > dist[b] + 1e-9)
    ok = err <= 1e-9 and violations == 0
    return ClaimRecord(
        "resistance-oracle",
        "closed-form R_eff on P3, triangle, K4; R_eff <= hop distance",
        [err, violations], "oracle error <= 1e-9 and 0 distance violations", _verdict(ok),
        {k: v[0] for k, v in exact.items()} | {"pairs": int(len(pairs)), "n": s["resist_n"]},
    )


# --------------------------------------------------------------------------
# 3. GFF fidelity

def claim_gff_fidelity(ctx: ClaimContext) -> ClaimRecord:
    s = ctx.scale
    rng = ctx.rng("gff-fidelity")
    p3 = build_graph([(0, 1), (1, 2)])
    fac = resistance.LaplacianFactor(p3, 0)
    eta = fac.sample(rng.standard_normal((2, s["gff_p3_samples"])))
    sq = eta[2] ** 2
    var, se = float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(len(sq)))
    p3_ok = abs(var - 2.0) <= 3 * se
    zs = []
    for _ in range(s["gff_graphs"]):
        n = int(rng.integers(4, 13))
        g = random_connected_graph(n, int(rng.integers(0, n)), rng)
        f = resistance.LaplacianFactor(g, 0)
        v, w = (int(x) for x in rng.choice(n, size=2, replace=False))
        e = f.sample(rng.standard_normal((n - 1, s["gff_graph_samples"])))
        d = (e[v] - e[w]) ** 2
        R = resistance.effective_resistance(g, v, w)
        zs.append(float(abs(d.mean() - R) / (d.std(ddof=1) / math.sqrt(len(d)))))
    ok = p3_ok and max(zs) <= 3
    return ClaimRecord(
        "gff-fidelity",
        "GFF increments have variance R_eff(v,w)",
        [var, max(zs)], "Var(eta_b) in 2 +/- 3 SE; every |z| <= 3", _verdict(ok),
        {"p3_var": var, "p3_se": se, "z_scores": zs},
    )


# --------------------------------------------------------------------------
# 4. M oracles

M_EDGE = 1.0 / math.sqrt(2 * math.pi)
M_P3 = (1.0 + math.sqrt(2) / 2) / math.sqrt(2 * math.pi)


def claim_m_oracles(ctx: ClaimContext) -> ClaimRecord:
    s = ctx.scale
    out = {}
    for name, g, exact in (("edge", build_graph([(0, 1)]), M_EDGE),
                           ("P3", build_graph([(0, 1), (1, 2)]), M_P3)):
        est = gff.estimate_M(g, 0, s["m_replicas"], ctx.seed("m-oracle", len(out)))
        out[name] = {"M": est.M, "se": est.se, "exact": exact, "z": (est.M - exact) / est.se}
    zmax = max(abs(v["z"]) for v in out.values())
    return ClaimRecord(
        "m-oracles",
        "closed-form E max of the GFF on an edge and on P3",
        [out["edge"]["M"], out["P3"]["M"]], "within 3 SE of 0.398942 / 0.681037",
        _verdict(zmax <= 3), out,
    )


# --------------------------------------------------------------------------
# 5. maxnorm

def mc_max_iid_normals(s: int, trials: int, rng: np.random.Generator, chunk: int = 500):
    maxima = np.empty(trials)
    for a in range(0, trials, chunk):
        b = min(trials, a + chunk)
        maxima[a:b] = rng.standard_normal((b - a, s), dtype=np.float32).max(axis=1)
    return float(maxima.mean()), float(maxima.std(ddof=1) / math.sqrt(trials))


def claim_maxnorm(ctx: ClaimContext) -> ClaimRecord:
    s = ctx.scale
    formula = gff.expected_max_iid_normals(s["maxnorm_s"])
    mc, se = mc_max_iid_normals(s["maxnorm_s"], s["maxnorm_trials"], ctx.rng("maxnorm"))
    return ClaimRecord(
        "maxnorm",
        "E max of s iid normals, second-order expansion",
        abs(mc - formula), f"|MC - formula| <= {MAXNORM_TOL}", _verdict(abs(mc - formula) <= MAXNORM_TOL),
        {"s": s["maxnorm_s"], "formula": formula, "mc": mc, "se": se, "trials": s["maxnorm_trials"]},
    )


# --------------------------------------------------------------------------
# 6. cover oracle

def _oracle_graphs(ctx: ClaimContext) -> list[Graph]:
    s = ctx.scale
    rng = ctx.rng("cover-graphs")
    graphs = [build_graph([(0, 1), (1, 2)]), build_graph([(0, 1), (1, 2), (0, 2)])]
    while len(graphs) < s["cover_graphs"]:
        n = int(rng.integers(3, s["cover_max_v"] + 1))
        graphs.append(random_connected_graph(n, int(rng.integers(0, n)), rng))
    return graphs


def claim_cover_oracle(ctx: ClaimContext) -> ClaimRecord:
    s = ctx.scale
    rng = ctx.rng("cover-starts")
    zs, rows = [], []
    for gi, g in enumerate(_oracle_graphs(ctx)):
        exact = walk.exact_cover_all(g)
        ctx.cover_times.append(("oracle-exact", g.vertex_count, float(exact.max())))
        starts = rng.choice(g.vertex_count, size=min(s["cover_starts"], g.vertex_count), replace=False)
        for st in starts:
            sim = walk.simulate_cover(g, int(st), s["cover_replicas"], ctx.seed("cover-oracle", gi, int(st)))
            z = abs(sim.mean - exact[st]) / sim.se if sim.se > 0 else abs(sim.mean - exact[st])
            zs.append(float(z))
            rows.append({"graph": gi, "n": g.vertex_count, "start": int(st),
                         "exact": float(exact[st]), "mc": sim.mean, "se": sim.se, "z": float(z)})
    return ClaimRecord(
        "cover-oracle",
        "Monte Carlo cover time against the exact subset recursion",
        max(zs), "every |z| <= 3", _verdict(max(zs) <= 3), {"runs": rows},
    )


# --------------------------------------------------------------------------
# 7. DKLP statistics

def claim_dklp_statistics(ctx: ClaimContext) -> ClaimRecord:
    s = ctx.scale
    n = s["dklp_n"]
    rows = []
    fails = 0
    for r in range(s["dklp_seeds"]):
        gs = ctx.sample(n, r)
        rep = giant.apoh_report(gs)
        p = gs.params
        eh = rep.counts["E(H)"] / (2 * p.eps * p.n)
        k1 = gs.kernel_count / (4.0 / 3.0 * p.eps ** 3 * p.n)
        c = rep.census
        row = {"seed": r, "E(H) ratio": eh, "N>=3 ratio": k1, "deep trees": c.over_deep_limit,
               "census exponent": c.exponent, "census count": c.count, "threshold": c.threshold}
        row["ok"] = bool(0.85 <= eh <= 1.15 and 0.7 <= k1 <= 1.3 and c.over_deep_limit == 0
                         and 0.3 <= c.exponent <= 0.7)
        fails += not row["ok"]
        rows.append(row)
    col = lambda k: [x[k] for x in rows]  # noqa: E731
    measured = {
        "E(H) ratio": [min(col("E(H) ratio")), max(col("E(H) ratio"))],
        "N>=3 ratio": [min(col("N>=3 ratio")), max(col("N>=3 ratio"))],
        "deep trees": max(col("deep trees")),
        "census exponent": [min(col("census exponent")), max(col("census exponent"))],
    }
    return ClaimRecord(
        "dklp-statistics",
        "sizes of H and K1, tree depth limit, depth census exponent",
        f"{fails}/{len(rows)} seeds outside bands",
        "E(H)/(2 eps n) in [0.85,1.15]; N>=3/(4/3 eps^3 n) in [0.7,1.3]; 0 deep trees; exponent in [0.3,0.7]",
        _verdict(fails == 0), {"ranges": measured, "per_seed": rows, "n": n},
    )


# --------------------------------------------------------------------------
# 8. skeleton lemmas

def claim_skeleton_lemmas(ctx: ClaimContext) -> ClaimRecord:
    s = ctx.scale
    n = s["skeleton_n"]
    rows, bad = [], 0
    for r in range(s["skeleton_seeds"]):
        gs = ctx.sample(n, r)
        h = skeleton.build_hierarchy(gs)
        b = skeleton.verify_budgets(h, strict=False)
        pr = skeleton.validate_properties(h, gs)
        dy = skeleton.dyadic_k2_pairs(gs)
        ok = b.ok and pr.ok and dy.within_bound and dy.i0_in_k2 and dy.greedy_ok
        bad += not ok
        rows.append({"seed": r, "budget_violations": b.budget_violations,
                     "lex": b.lex_violations, "stuck": b.stuck, "alpha": b.alpha_mismatch,
                     "A": pr.A, "B": pr.B, "C": pr.C, "D": pr.D,
                     "I_sizes": dy.sizes, "I_within": dy.within_bound,
                     "J_sizes": b.J_sizes, "J_slope": b.J_slope, "ok": ok})
    return ClaimRecord(
        "skeleton-lemmas",
        "pairing properties A-D, chain budgets 1+2(l0-i), |I_i| <= 3 eps^2 n / 2^i",
        f"{bad}/{len(rows)} hierarchies with a violation", "zero violations", _verdict(bad == 0),
        {"per_seed": rows, "n": n},
    )


# --------------------------------------------------------------------------
# 9. headline trend

def _toward_one(seq: list[float]) -> bool:
    d = [abs(x - 1.0) for x in seq]
    return all(b < a for a, b in zip(d, d[1:]))


def claim_headline_trend(ctx: ClaimContext, progress=None) -> ClaimRecord:
    s = ctx.scale
    points = []
    for gi, n in enumerate(s["headline_n"]):
        per_seed = []
        for r in range(s["headline_seeds"]):
            gs = ctx.sample(n, r)
            p = gs.params
            fac = resistance.LaplacianFactor(gs.graph, 0)
            est = gff.estimate_M(gs.graph, 0, s["headline_gff_replicas"],
                                 ctx.seed("headline-gff", gi, r), factor=fac)
            rep = walk.cover_report(gs, est.M, est.sigma2, replicas=s["headline_cover_replicas"],
                                    seed=ctx.seed("headline-cover", gi, r),
                                    random_starts=s["headline_random_starts"],
                                    c1=ctx.cfg.c1, c2=ctx.cfg.c2, lambdas=ctx.cfg.lambdas)
            for m in rep.means:
                ctx.cover_times.append((f"H n={n}", gs.graph.vertex_count, float(m)))
            tau = rep.cover_time
            per_seed.append({
                "M": est.M, "M_se": est.se, "tau": tau, "starts": rep.starts,
                "means": rep.means.tolist(),
                "m_ratio": est.M * math.sqrt(2 * p.eps) / math.log(p.N),
                "cover_ratio": tau / rep.prediction.headline,
                "dlp_ratio": tau / rep.prediction.dlp_center,
                "edges": gs.graph.edge_count,
            })
            if progress:
                progress(f"headline n={n} seed={r}: {per_seed[-1]['cover_ratio']:.3f}")
        avg = {k: float(np.mean([x[k] for x in per_seed])) for k in ("m_ratio", "cover_ratio", "dlp_ratio")}
        points.append({"n": n, "N": n * EPS ** 3, **avg, "seeds": per_seed})
        ctx.forget(n)
    m_seq = [p["m_ratio"] for p in points]
    c_seq = [p["cover_ratio"] for p in points]
    d_seq = [p["dlp_ratio"] for p in points]
    trend = _toward_one(m_seq) and _toward_one(c_seq)
    dlp_ok = all(DLP_BAND[0] <= d <= DLP_BAND[1] for d in d_seq)
    return ClaimRecord(
        "headline-trend",
        "M sqrt(2 eps)/ln N and tau/(n ln^2 N) move toward 1; tau/(|E| M^2) bounded",
        {"N": [p["N"] for p in points], "m_ratio": m_seq, "cover_ratio": c_seq, "dlp_ratio": d_seq},
        "both ratios strictly closer to 1 as N grows; dlp ratio in [0.5, 2]",
        "trend" if trend and dlp_ok else "fail",
        {"points": points, "trend": trend, "dlp_ok": dlp_ok},
    )


# --------------------------------------------------------------------------
# 10. Feige sanity

def claim_feige_sanity(ctx: ClaimContext) -> ClaimRecord:
    bad = []
    for src, nv, c in ctx.cover_times:
        if not walk.feige_check(c, nv, FEIGE_SLACK):
            bad.append({"source": src, "n": nv, "cover": c, "bounds": walk.feige_bounds(nv)})
    return ClaimRecord(
        "feige-sanity",
        "(1-0.1) n ln n <= cover time <= (1+0.1) (4/27) n^3",
        f"{len(bad)}/{len(ctx.cover_times)} outside", "none outside",
        _verdict(not bad and bool(ctx.cover_times)), {"violations": bad, "checked": len(ctx.cover_times)},
    )


CLAIMS = {
    "commute-identity": claim_commute_identity,
    "resistance-oracle": claim_resistance_oracle,
    "gff-fidelity": claim_gff_fidelity,
    "m-oracles": claim_m_oracles,
    "maxnorm": claim_maxnorm,
    "cover-oracle": claim_cover_oracle,
    "dklp-statistics": claim_dklp_statistics,
    "skeleton-lemmas": claim_skeleton_lemmas,
    "headline-trend": claim_headline_trend,
    "feige-sanity": claim_feige_sanity,
}


def run_claim(ctx: ClaimContext, claim_id: str, progress=None) -> ClaimRecord:
    fn = CLAIMS[claim_id]
    t = time.perf_counter()
    rec = fn(ctx, progress) if claim_id == "headline-trend" else fn(ctx)
    return ClaimRecord(rec.id, rec.anchor, rec.measured, rec.band, rec.verdict, rec.detail,
                       time.perf_counter() - t)


def run_claims(cfg: ExperimentConfig, only=None, progress=None, scale: dict | None = None) -> ClaimsLedger:
    """Run the battery in order; Feige last so it sees every measured cover time."""
    ids = list(CLAIM_IDS) if not only else [c for c in CLAIM_IDS if c in set(only)]
    unknown = set(only or ()) - set(CLAIM_IDS)
    if unknown:
        raise KeyError(f"unknown claims {sorted(unknown)}")
    ctx = ClaimContext(cfg, scale)
    records = []
    for cid in ids:
        rec = run_claim(ctx, cid, progress)
        records.append(rec)
        if progress:
            progress(f"{cid}: {rec.verdict}")
    return ClaimsLedger(records)
