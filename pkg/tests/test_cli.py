import json
import os

import pytest

from gffperc.cli import run
from gffperc.renorm import easy_sequences


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def test_renorm_easy_csv_matches_module(tmp_path):
    code = run(["renorm", "--mode", "easy", "--delta0", "0.5", "--n0", "100",
                "--K", "2", "--out", str(tmp_path), "--experiment-id", "r1"])
    assert code == 0
    rows = (tmp_path / "r1.renorm.csv").read_text().strip().splitlines()
    assert rows[0] == "k,delta_k,n_k,h_k,schema_version"
    seq = easy_sequences(0.5, 100.0, 1.0, 2)
    for k, row in enumerate(rows[1:]):
        _, delta, scale, height, _ = row.split(",")
        assert float(delta) == seq.deltas[k]
        assert float(scale) == seq.scales[k]
        assert float(height) == seq.heights[k]


def test_estimate_forced_open(tmp_path):
    code = run(["estimate", "--n", "3", "--h", "-1e6", "--event",
                "crossing:vertical", "--M", "100", "--seed", "7",
                "--out", str(tmp_path)])
    assert code == 0
    doc = read_json(tmp_path / "estimate-s7.json")
    assert doc["estimates"][0]["p_hat"] == "1.0"
    csv_text = (tmp_path / "estimates.csv").read_text()
    assert csv_text.startswith("experiment_id,event,h,n,M,p_hat,ci_lo,ci_hi,"
                               "seed,schema_version")
    meta = read_json(tmp_path / "estimate-s7.meta.json")
    assert meta["config"]["seed"] == 7
    assert len(meta["config_sha256"]) == 64
    assert "timestamp" in meta


def test_check_fkg_writes_jsonl(tmp_path):
    code = run(["check", "--name", "fkg", "--n", "6", "--M", "2000",
                "--seed", "1", "--out", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "checks.jsonl").read_text().strip().splitlines()
    doc = json.loads(lines[0])
    assert doc["name"] == "fkg"
    assert doc["verdict"] == "holds"
    assert set(doc) >= {"lhs", "rhs", "margin", "se", "params", "seed"}


def test_reruns_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run(["estimate", "--n", "5", "--h", "0.2", "--event",
                    "site:2,2", "--M", "500", "--seed", "3",
                    "--out", str(out)]) == 0
    assert (a / "estimates.csv").read_bytes() == (b / "estimates.csv").read_bytes()
    assert (a / "estimate-s3.json").read_bytes() == (b / "estimate-s3.json").read_bytes()
    meta_a = read_json(a / "estimate-s3.meta.json")
    meta_b = read_json(b / "estimate-s3.meta.json")
    for meta in (meta_a, meta_b):
        meta.pop("timestamp")
        meta.pop("artifacts")  # carries the output paths
    assert meta_a == meta_b


def test_estimates_csv_appends(tmp_path):
    for seed in (1, 2):
        run(["estimate", "--n", "4", "--h", "0.0", "--event", "site:1,1",
             "--M", "50", "--seed", str(seed), "--out", str(tmp_path)])
    rows = (tmp_path / "estimates.csv").read_text().strip().splitlines()
    assert len(rows) == 3  # header + two runs
    assert rows[1].split(",")[0] == "estimate-s1"
    assert rows[2].split(",")[0] == "estimate-s2"


def test_scan_h_rows_monotone(tmp_path):
    code = run(["scan-h", "--n", "6", "--h-grid=-2:2:5", "--event",
                "crossing:vertical:1,4,1,4", "--M", "400", "--seed", "5",
                "--out", str(tmp_path)])
    assert code == 0
    doc = read_json(tmp_path / "scan-h-s5.json")
    p = [float(row["p_hat"]) for row in doc["estimates"]]
    assert p == sorted(p, reverse=True)


def test_curve_emits_fit(tmp_path):
    code = run(["curve", "--h", "0.0", "--n-list", "4,6,8", "--M", "400",
                "--seed", "9", "--out", str(tmp_path)])
    assert code == 0
    doc = read_json(tmp_path / "curve-s9.json")
    assert "decay_fit" in doc
    assert len(doc["estimates"]) == 3


def test_critical_command(tmp_path):
    code = run(["critical", "--criterion", "crossing", "--n", "3", "--M", "80",
                "--tol", "1.0", "--seed", "2", "--out", str(tmp_path)])
    assert code == 0
    doc = read_json(tmp_path / "critical-s2.critical.json")
    assert doc["h_lo"] <= doc["h_hi"]
    assert doc["criterion"] == "crossing"


def test_green_and_sample_commands(tmp_path):
    assert run(["green", "--n", "4", "--out", str(tmp_path),
                "--experiment-id", "g"]) == 0
    rows = (tmp_path / "g.green.csv").read_text().strip().splitlines()
    assert rows[0] == "row,col,value"
    assert len(rows) == 1 + 16
    assert run(["sample", "--n", "4", "--count", "2", "--out", str(tmp_path),
                "--experiment-id", "s"]) == 0
    rows = (tmp_path / "s.fields.csv").read_text().strip().splitlines()
    assert rows[0].startswith("replica,x,y,phi")
    assert len(rows) == 1 + 2 * 4


def test_killed_vertices_flag(tmp_path):
    assert run(["green", "--n", "4", "--killed", "1,2;2,2",
                "--out", str(tmp_path), "--experiment-id", "g2"]) == 0
    rows = (tmp_path / "g2.green.csv").read_text().strip().splitlines()
    assert len(rows) == 1 + 4  # two live vertices


def test_unknown_subcommand_exits_two(capsys):
    with pytest.raises(SystemExit) as info:
        run(["frobnicate"])
    assert info.value.code == 2


def test_missing_required_option_exits_two(tmp_path):
    assert run(["estimate", "--n", "4", "--h", "0.0", "--M", "10",
                "--out", str(tmp_path)]) == 2


def test_bad_event_exits_two(tmp_path):
    assert run(["estimate", "--n", "4", "--h", "0.0", "--event", "bogus",
                "--M", "10", "--out", str(tmp_path)]) == 2


def test_zero_replicas_exits_two(tmp_path):
    assert run(["estimate", "--n", "4", "--h", "0.0", "--event", "site:1,1",
                "--M", "0", "--out", str(tmp_path)]) == 2


def test_malformed_config_exits_two(tmp_path):
    cfg = tmp_path / "broken.json"
    cfg.write_text("{not json")
    assert run(["estimate", "--config", str(cfg)]) == 2


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({
        "seed": 4,
        "out_dir": str(tmp_path),
        "options": {"n": 4, "h": -1e6, "event": "site:1,1", "M": 20},
    }))
    assert run(["estimate", "--config", str(cfg)]) == 0
    doc = read_json(tmp_path / "estimate-s4.json")
    assert doc["estimates"][0]["p_hat"] == "1.0"
    # the flag wins over the config field
    assert run(["estimate", "--config", str(cfg), "--h", "1e6",
                "--experiment-id", "override"]) == 0
    doc = read_json(tmp_path / "override.json")
    assert doc["estimates"][0]["p_hat"] == "0.0"


def test_unwritable_output_exits_three(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code = run(["estimate", "--n", "4", "--h", "0.0", "--event", "site:1,1",
                "--M", "10", "--out", str(blocker / "sub")])
    assert code == 3


def test_strict_escalates_numeric_flags(tmp_path):
    args = ["renorm", "--mode", "hard", "--n0", "4", "--h0", "2.0",
            "--h", "1.0", "--K", "4", "--out", str(tmp_path)]
    assert run(args) == 0
    assert run(args + ["--strict"]) == 4
    meta = read_json(tmp_path / "renorm-s0.meta.json")
    assert any("ScaleWarning" in f for f in meta["numeric_flags"])


def test_env_defaults(tmp_path, monkeypatch):
    monkeypatch.setenv("GFFPERC_OUTPUT_DIR", str(tmp_path))
    monkeypatch.setenv("GFFPERC_SEED", "123")
    assert run(["estimate", "--n", "4", "--h", "0.0", "--event", "site:1,1",
                "--M", "10"]) == 0
    assert (tmp_path / "estimate-s123.json").exists()
