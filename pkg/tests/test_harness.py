import hashlib
import json
import subprocess
import sys

import pytest

from giantwalk import cli
from giantwalk.claims import CLAIM_IDS, CLAIMS, ClaimContext, run_claim
from giantwalk.errors import ConfigInvalid, StageFailed
from giantwalk.harness import (
    OUTPUT_FILES, load_config, make_config, parse_config, run_experiment, stage_seed,
    verify_suite, with_overrides,
)

SMALL = """\
# one grid point, every stage
seed = 7
n = 20000
eps = 0.3
seeds = 1
gff_replicas = 100
cover_replicas = 10
random_starts = 1
resist_pairs = 20
"""


def test_parse_config_types():
    cfg = parse_config(SMALL)
    assert cfg.seed == 7 and cfg.n == (20000,) and cfg.eps == (0.3,)
    assert cfg.stages == ("gen", "resist", "gff", "cover", "skeleton")
    cfg2 = parse_config("seed=0x10\nn=1e6,4e6\neps=0.1,0.2\nlambdas=1,2\n")
    assert cfg2.seed == 16 and cfg2.n == (1_000_000, 4_000_000)
    assert len(cfg2.grid()) == 4


@pytest.mark.parametrize("text", [
    "seed=1\neps=1.5\n",
    "seed=1\neps=0\n",
    "seed=1\nn=999\n",
    "n=10000\n",
    "seed=1\nbogus=3\n",
    "seed=1\nscale=huge\n",
    "seed=1\nstages=gen,cover\n",
    "seed=1\ngff_replicas=10\n",
    "seed=1\ncover_replicas=9\n",
    "seed=1\nn\n",
    "seed=1\nn=abc\n",
])
def test_invalid_configs(text):
    with pytest.raises(ConfigInvalid):
        parse_config(text)


def test_config_hash_ignores_out(tmp_path):
    a = make_config(seed=1, out="x")
    b = make_config(seed=1, out="y")
    assert a.sha256() == b.sha256()
    assert make_config(seed=2).sha256() != a.sha256()
    p = tmp_path / "c.cfg"
    p.write_text(SMALL)
    assert load_config(p) == parse_config(SMALL)
    with pytest.raises(ConfigInvalid):
        load_config(tmp_path / "missing.cfg")
    with pytest.raises(ConfigInvalid):
        with_overrides(a, commute_convention="other")


def test_stage_seed():
    s = stage_seed(1, "gff", 2, 3)
    assert s == stage_seed(1, "gff", 2, 3)
    assert 0 <= s < 2 ** 64
    assert len({stage_seed(1, st, g, r) for st in ("gen", "gff") for g in range(3) for r in range(3)}) == 18
    digest = hashlib.sha256(b"1:gff:2:3").digest()
    assert s == int.from_bytes(digest[:8], "little")


@pytest.fixture(scope="module")
def two_runs(tmp_path_factory):
    cfg = parse_config(SMALL)
    a = tmp_path_factory.mktemp("a")
    b = tmp_path_factory.mktemp("b")
    return cfg, a, run_experiment(cfg, a), b, run_experiment(cfg, b)


def test_run_experiment_outputs(two_runs):
    cfg, a, digests, _, _ = two_runs
    assert sorted(p.name for p in a.iterdir()) == sorted(OUTPUT_FILES)
    for name in OUTPUT_FILES:
        text = (a / name).read_text()
        assert cfg.sha256() in text  # header carries the config hash
    man = json.loads((a / "manifest.json").read_text())
    assert man["status"] == "ok"
    for name, digest in man["files"].items():
        assert hashlib.sha256((a / name).read_bytes()).hexdigest() == digest
    sk = json.loads((a / "skeleton.json").read_text())
    rec = sk["records"][0]
    assert rec["budget_violations"] == 0 and rec["properties"]["ok"]
    assert len(json.loads((a / "apoh.json").read_text())["records"]) == 1


def test_run_experiment_is_byte_identical(two_runs):
    _, a, da, b, db = two_runs
    assert da == db
    for name in OUTPUT_FILES:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_stage_failure_keeps_partial_outputs(tmp_path, monkeypatch):
    from giantwalk import harness
    from giantwalk.errors import SolveDiverged

    def boom(*a, **k):
        raise SolveDiverged("injected")

    monkeypatch.setattr(harness.gff, "estimate_M", boom)
    with pytest.raises(StageFailed):
        run_experiment(parse_config(SMALL), tmp_path)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["status"] == "failed:gff"
    assert (tmp_path / "apoh.json").exists()


def test_claim_registry_complete():
    assert tuple(CLAIMS) == CLAIM_IDS
    assert len(set(CLAIM_IDS)) == 10


def test_commute_fault_injection(tmp_path):
    good = make_config(seed=0, out=str(tmp_path / "g"))
    ledger, code = verify_suite(good, only=["commute-identity"])
    assert code == 0 and [r.id for r in ledger.records] == ["commute-identity"]
    bad = with_overrides(good, commute_convention="literal", out=str(tmp_path / "b"))
    ledger, code = verify_suite(bad, only=["commute-identity"])
    assert code == 1 and ledger.records[0].verdict == "fail"
    saved = json.loads((tmp_path / "b" / "claims.json").read_text())
    assert saved["claims"][0]["id"] == "commute-identity"
    assert "commute-identity" in (tmp_path / "b" / "claims.txt").read_text()


def test_single_claim_record_shape():
    rec = run_claim(ClaimContext(make_config(seed=0)), "resistance-oracle")
    d = rec.as_dict()
    assert set(d) == {"id", "anchor", "measured", "band", "verdict", "detail", "seconds"}
    assert rec.verdict == "pass"


# --------------------------------------------------------------------------
# command line

def run_cli(*argv):
    return cli.main(list(argv))


def test_cli_gen_and_stages(tmp_path, capsys):
    gpath = tmp_path / "h.graph"
    assert run_cli("--seed", "3", "--out", str(gpath), "gen", "--n", "20000", "--eps", "0.3") == 0
    assert gpath.exists() and (tmp_path / "h.graph.prov").exists()
    capsys.readouterr()

    assert run_cli("--seed", "1", "gw", "--mu", "0.5", "--draws", "2000", "--kmax", "5") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "k,p_exact,p_empirical,se" and len(lines) == 7

    out = tmp_path / "o"
    assert run_cli("--seed", "1", "--out", str(out), "resist", "--graph", str(gpath),
                   "--pairs", "random:5") == 0
    assert (out / "resist.csv").read_text().splitlines()[0] == "v,w,dist,reff,residual,method"
    assert run_cli("--seed", "1", "--out", str(out), "gff", "--graph", str(gpath),
                   "--replicas", "100") == 0
    summary = json.loads((out / "gff_summary.json").read_text())
    assert {"M", "se", "sigma2", "radius"} <= set(summary)
    assert run_cli("--seed", "1", "--out", str(out), "cover", "--graph", str(gpath),
                   "--starts", "0", "--replicas", "10", "--gff-replicas", "100") == 0
    assert (out / "cover.csv").read_text().splitlines()[0] == "start,replica,steps"
    assert run_cli("--out", str(out), "skeleton", "--graph", str(gpath),
                   "--prov", str(gpath) + ".prov", "--chains", str(out / "chains.csv")) == 0
    sk = json.loads((out / "skeleton.json").read_text())
    assert sk["budget_violations"] == 0 and sk["properties"]["ok"]


def test_cli_exact_cover(tmp_path, capsys):
    g = tmp_path / "p3.graph"
    g.write_text("#giantwalk-graph v1 n=3 m=2\nV 0 kernel\nV 1 kernel\nV 2 kernel\nE 0 1\nE 1 2\n")
    assert run_cli("--seed", "1", "cover", "--graph", str(g), "--starts", "0,1",
                   "--replicas", "100", "--exact") == 0
    captured = capsys.readouterr()
    summary = json.loads(captured.err)
    assert summary["exact"] == {"0": pytest.approx(4.0), "1": pytest.approx(5.0)}
    assert summary["exact_max"] == pytest.approx(5.0)


def test_cli_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("seed=1\neps=1.5\n")
    assert run_cli("report", "--config", str(cfg)) == 2
    assert run_cli("--seed", "1", "resist", "--graph", str(tmp_path / "nope"), "--pairs", "random:1") == 2
    bad = tmp_path / "bad.graph"
    bad.write_text("not a graph\n")
    assert run_cli("--seed", "1", "resist", "--graph", str(bad), "--pairs", "random:1") == 2
    # gen without a seed: no clock-based default
    assert run_cli("--out", str(tmp_path / "x"), "gen", "--n", "20000", "--eps", "0.3") == 2
    with pytest.raises(SystemExit) as exc:
        run_cli("frobnicate")
    assert exc.value.code == 2
    capsys.readouterr()


def test_cli_verify_fault_and_report(tmp_path, capsys):
    out = tmp_path / "v"
    assert run_cli("--seed", "0", "--out", str(out), "verify", "--only", "commute-identity") == 0
    assert run_cli("--seed", "0", "--out", str(out), "verify", "--only", "commute-identity",
                   "--commute-convention", "literal") == 1
    assert run_cli("--seed", "0", "verify", "--only", "no-such-claim") == 2
    assert run_cli("report", "--from", str(out)) == 0
    assert "commute-identity" in capsys.readouterr().out


def test_console_script_runs():
    r = subprocess.run([sys.executable, "-m", "giantwalk.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "verify" in r.stdout
