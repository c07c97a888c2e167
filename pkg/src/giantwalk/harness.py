"""Experiment configuration, seed derivation and reproducible output trees."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import subprocess
from dataclasses import dataclass, field, fields, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import giant, gff, resistance, skeleton, walk
from .errors import ConfigInvalid, GiantWalkError, StageFailed
from .graph import bfs_distances

STAGES = ("gen", "resist", "gff", "cover", "skeleton")
OUTPUT_FILES = ("apoh.json", "resist.csv", "gff.csv", "cover.csv", "skeleton.json", "manifest.json")


# --------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    n: tuple[int, ...] = (250_000,)
    eps: tuple[float, ...] = (0.1,)
    seeds: int = 1
    scale: str = "desk"
    gff_replicas: int = 500
    cover_replicas: int = 10
    random_starts: int = 2
    resist_pairs: int = 200
    c1: float = 0.5
    c2: float = 2.0
    lambdas: tuple[float, ...] = walk.DEFAULT_LAMBDAS
    log_base: str = "e"
    stages: tuple[str, ...] = STAGES
    commute_convention: str = "standard"
    out: str = "giantwalk-out"

    def grid(self) -> list[giant.ModelParams]:
        return [giant.ModelParams.from_eps(n, e) for n in self.n for e in self.eps]

    def canonical(self) -> str:
        """Normalised ``key=value`` text; ``out`` is excluded so the hash is location-free."""
        lines = []
        for f in fields(self):
            if f.name == "out":
                continue
            v = getattr(self, f.name)
            lines.append(f"{f.name}={_fmt(v)}")
        return "\n".join(lines) + "\n"

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


_LIST_INT = {"n"}
_LIST_FLOAT = {"eps", "lambdas"}
_LIST_STR = {"stages"}
_INT = {"seed", "seeds", "gff_replicas", "cover_replicas", "random_starts", "resist_pairs"}
_FLOAT = {"c1", "c2"}
_STR = {"scale", "log_base", "commute_convention", "out"}


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Parse flat ``key=value`` text (``#`` comments, comma lists) and validate it."""
    raw: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            raw[key] = _convert(key, value)
        except ValueError as exc:
            raise ConfigInvalid(f"line {lineno}: bad value for {key}: {exc}") from None
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return make_config(**raw)


def _convert(key: str, value: str):
    items = [s.strip() for s in value.split(",") if s.strip()]
    if key in _LIST_INT:
        return tuple(int(float(s)) for s in items)
    if key in _LIST_FLOAT:
        return tuple(float(s) for s in items)
    if key in _LIST_STR:
        return tuple(items)
    if key in _INT:
        return int(value, 0) if value.lower().startswith("0x") else int(float(value))
    if key in _FLOAT:
        return float(value)
    if key in _STR:
        return value
    raise ConfigInvalid(f"unknown key {key!r}")


def make_config(**kw) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(kw) - known
    if unknown:
        raise ConfigInvalid(f"unknown keys {sorted(unknown)}")
    if kw.get("seed") is None:
        raise ConfigInvalid("a master seed is required")
    for k in ("n", "eps", "lambdas", "stages"):
        if k in kw and not isinstance(kw[k], tuple):
            kw[k] = tuple(kw[k]) if isinstance(kw[k], (list, tuple)) else (kw[k],)
    cfg = ExperimentConfig(**kw)
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    if not 0 <= cfg.seed < 2 ** 64:
        raise ConfigInvalid("seed must be an unsigned 64-bit integer")
    if not cfg.n or not cfg.eps:
        raise ConfigInvalid("grid needs at least one n and one eps")
    for e in cfg.eps:
        if not 0.0 < e < 1.0:
            raise ConfigInvalid(f"eps must lie in (0, 1), got {e}")
    for n in cfg.n:
        if n < 1000:
            raise ConfigInvalid(f"n must be at least 1000, got {n}")
    if cfg.seeds < 1:
        raise ConfigInvalid("seeds must be positive")
    if cfg.scale not in ("desk", "full"):
        raise ConfigInvalid("scale must be desk or full")
    if cfg.log_base not in ("e", "2"):
        raise ConfigInvalid("log_base must be e or 2")
    if cfg.commute_convention not in ("standard", "literal"):
        raise ConfigInvalid("commute_convention must be standard or literal")
    bad = set(cfg.stages) - set(STAGES)
    if bad:
        raise ConfigInvalid(f"unknown stages {sorted(bad)}")
    if "cover" in cfg.stages and not {"gff", "resist"} <= set(cfg.stages):
        raise ConfigInvalid("the cover stage needs the gff and resist stages")
    if cfg.gff_replicas < 100:
        raise ConfigInvalid("gff_replicas must be at least 100")
    if cfg.cover_replicas < 10:
        raise ConfigInvalid("cover_replicas must be at least 10")
    if cfg.c1 <= 0 or cfg.c2 < cfg.c1:
        raise ConfigInvalid("need 0 < c1 <= c2")


def load_config(path: str | Path, **overrides) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config: {exc}") from None
    return parse_config(text, **overrides)


# --------------------------------------------------------------------------
# seeds

def stage_seed(master: int, stage: str, grid: int = 0, replica: int = 0) -> int:
    """64-bit seed for one (stage, grid point, replica) cell, stable across runs."""
    h = hashlib.sha256(f"{int(master)}:{stage}:{int(grid)}:{int(replica)}".encode()).digest()
    return int.from_bytes(h[:8], "little")


@lru_cache(maxsize=1)
def git_describe() -> str:
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=here, capture_output=True, text=True, timeout=10)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


# --------------------------------------------------------------------------
# serialisation helpers

def to_jsonable(x):
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return to_jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def dumps_json(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=1) + "\n"


def dumps_csv(header_line: str, columns: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    buf.write(header_line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def header(cfg: ExperimentConfig) -> dict:
    return {
        "params": {"n": list(cfg.n), "eps": list(cfg.eps), "seeds": cfg.seeds},
        "seed": cfg.seed,
        "git": git_describe(),
        "config_sha256": cfg.sha256(),
    }


def header_line(cfg: ExperimentConfig) -> str:
    h = header(cfg)
    p = h["params"]
    return (f"# giantwalk n={','.join(map(str, p['n']))} eps={','.join(map(repr, p['eps']))} "
            f"seeds={p['seeds']} seed={h['seed']} git={h['git']} config_sha256={h['config_sha256']}")


# --------------------------------------------------------------------------
# run_experiment

_RESIST_COLS = ["grid", "replica", "n", "eps", "v", "w", "dist", "reff", "method"]
_GFF_COLS = ["grid", "replica", "n", "eps", "pin", "replicas", "M", "se", "sigma2", "radius",
             "target", "ratio"]
_COVER_COLS = ["grid", "replica", "n", "eps", "start", "label", "replicas", "mean", "se",
               "headline", "dlp_center"]


@dataclass
class _Outputs:
    apoh: list = field(default_factory=list)
    resist: list = field(default_factory=list)
    gff: list = field(default_factory=list)
    cover: list = field(default_factory=list)
    skeleton: list = field(default_factory=list)


def _write_outputs(cfg: ExperimentConfig, out: Path, res: _Outputs, status: str) -> dict[str, str]:
    out.mkdir(parents=True, exist_ok=True)
    hdr, line = header(cfg), header_line(cfg)
    texts = {
        "apoh.json": dumps_json({"header": hdr, "records": res.apoh}),
        "resist.csv": dumps_csv(line, _RESIST_COLS, res.resist),
        "gff.csv": dumps_csv(line, _GFF_COLS, res.gff),
        "cover.csv": dumps_csv(line, _COVER_COLS, res.cover),
        "skeleton.json": dumps_json({"header": hdr, "records": res.skeleton}),
    }
    digests = {}
    for name, text in texts.items():
        (out / name).write_text(text, newline="\n")
        digests[name] = hashlib.sha256(text.encode()).hexdigest()
    manifest = {"header": hdr, "config": cfg.canonical(), "status": status, "files": digests}
    (out / "manifest.json").write_text(dumps_json(manifest), newline="\n")
    return digests


def _resist_rows(gs, gi, r, params, pairs_count, seed):
    rng = np.random.default_rng(seed)
    g = gs.graph
    fac = resistance.LaplacianFactor(g, 0)
    pairs = rng.integers(0, g.vertex_count, size=(pairs_count, 2))
    reff = fac.resistances(pairs)
    rows = []
    src, dist = -1, None
    for (a, b), x in sorted(zip(map(tuple, pairs.tolist()), reff.tolist())):
        if a != src:
            src, dist = a, bfs_distances(g, [a]).dist
        d = int(dist[b])
        rows.append([gi, r, params.n, params.eps, a, b, d, float(x), "direct"])
    return rows, fac


def run_experiment(cfg: ExperimentConfig, out: str | Path | None = None) -> dict[str, str]:
    """Run every enabled stage on every grid point and replica; return file digests."""
    out = Path(out if out is not None else cfg.out)
    res = _Outputs()
    stages = set(cfg.stages)
    current = "gen"
    try:
        for gi, params in enumerate(cfg.grid()):
            for r in range(cfg.seeds):
                current = "gen"
                seed = stage_seed(cfg.seed, "gen", gi, r)
                gs = giant.sample_giant(params, seed)
                rep = giant.apoh_report(gs)
                if "gen" in stages:
                    res.apoh.append({"grid": gi, "replica": r, "n": params.n, "eps": params.eps,
                                     "sample_seed": seed, "stats": gs.stats, **rep.as_dict()})
                R = M = None
                fac = None
                if "resist" in stages:
                    current = "resist"
                    rows, fac = _resist_rows(gs, gi, r, params, cfg.resist_pairs,
                                             stage_seed(cfg.seed, "resist", gi, r))
                    res.resist.extend(rows)
                    R = max(row[7] for row in rows) if rows else 0.0
                if "gff" in stages:
                    current = "gff"
                    est = gff.estimate_M(gs.graph, 0, cfg.gff_replicas,
                                         stage_seed(cfg.seed, "gff", gi, r), factor=fac)
                    target = math.log(params.N) / math.sqrt(2 * params.eps)
                    res.gff.append([gi, r, params.n, params.eps, 0, est.replicas, est.M, est.se,
                                    est.sigma2, est.radius, target, est.M / target])
                    M = est.M
                    R = max(R or 0.0, est.sigma2)
                if "cover" in stages:
                    current = "cover"
                    crep = walk.cover_report(gs, M, R, replicas=cfg.cover_replicas,
                                             seed=stage_seed(cfg.seed, "cover", gi, r),
                                             random_starts=cfg.random_starts,
                                             c1=cfg.c1, c2=cfg.c2, lambdas=cfg.lambdas)
                    p = crep.prediction
                    for s, lab, run in zip(crep.starts, crep.labels, crep.runs):
                        res.cover.append([gi, r, params.n, params.eps, s, lab, run.replicas,
                                          run.mean, run.se, p.headline, p.dlp_center])
                if "skeleton" in stages:
                    current = "skeleton"
                    res.skeleton.append({"grid": gi, "replica": r, "n": params.n,
                                         "eps": params.eps,
                                         **skeleton_summary(gs, log_base=cfg.log_base)})
    except GiantWalkError as exc:
        _write_outputs(cfg, out, res, f"failed:{current}")
        raise StageFailed(f"stage {current} failed: {exc}") from exc
    return _write_outputs(cfg, out, res, "ok")


def skeleton_summary(gs, *, log_base: str = "e", strict: bool = False) -> dict:
    """JSON-ready summary of the hierarchy, its budgets, properties and dyadic pairs."""
    N = gs.params.N
    levels = int(math.ceil(2 * (math.log(N) if log_base == "e" else math.log2(N))))
    h = skeleton.build_hierarchy(gs, u_levels=levels)
    b = skeleton.verify_budgets(h, strict=strict)
    props = skeleton.validate_properties(h, gs)
    dy = skeleton.dyadic_k2_pairs(gs)
    return {
        "kappa": h.kappa, "l0": h.l0,
        "U_sizes": b.U_sizes, "U_overflow": b.U_overflow, "U_decay": b.U_decay,
        "U_decay_target": b.U_decay_target,
        "J_sizes": b.J_sizes, "J_slope": b.J_slope, "J_slope_target": b.J_slope_target,
        "I_sizes": dy.sizes, "I_bounds": dy.bounds, "I_within_bound": dy.within_bound,
        "I0_in_K2": dy.i0_in_k2, "I_greedy_ok": dy.greedy_ok,
        "budget_violations": b.budget_violations, "lex_violations": b.lex_violations,
        "stuck": b.stuck, "alpha_mismatch": b.alpha_mismatch,
        "max_counts": b.max_counts, "budget": b.budget,
        "properties": {"A": props.A, "B": props.B, "C": props.C, "D": props.D,
                       "W_nested": props.W_nested, "ok": props.ok},
        "bounds": skeleton.bound_evaluators(gs.params).as_dict(),
    }


# --------------------------------------------------------------------------
# verify_suite

def verify_suite(cfg: ExperimentConfig, out: str | Path | None = None, *, only=None,
                 progress=None):
    """Run the claims battery; write ``claims.json`` and ``claims.txt``; return ``(ledger, code)``."""
    from . import claims

    ledger = claims.run_claims(cfg, only=only, progress=progress)
    out = Path(out if out is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "claims.json").write_text(
        dumps_json({"header": header(cfg), "claims": [c.as_dict() for c in ledger.records]}),
        newline="\n")
    (out / "claims.txt").write_text(ledger.table(), newline="\n")
    return ledger, (0 if ledger.ok else 1)


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    new = replace(cfg, **{k: v for k, v in kw.items() if v is not None})
    validate_config(new)
    return new
