import csv
import hashlib
import json
import subprocess
import sys

import pytest

from grew import io
from grew.cli import main

KEY = "0xDEADBEEFCAFE"
SMALL = dict(n_items=400, d=16, n_clusters=4, n_users=300, seq_len=8, k_cand=40, top_k=10,
             calib_batches=60, calib_batch_size=50, attack_sequences=200, attack_length=6)


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def records(path):
    return path.read_text().splitlines()[1:]


@pytest.fixture(scope="module")
def cfg_path(tmp_path_factory):
    p = tmp_path_factory.mktemp("cfg") / "run.json"
    p.write_text(json.dumps(SMALL))
    return p


@pytest.fixture(scope="module")
def world(tmp_path_factory, cfg_path):
    d = tmp_path_factory.mktemp("world")
    base = ["--config", str(cfg_path), "--out", str(d)]
    assert main(base + ["gen-data"]) == 0
    assert main(base + ["--key", KEY, "recommend"]) == 0
    assert main(base + ["recommend", "--watermark", "off", "--output",
                        str(d / "clean.jsonl")]) == 0
    return d, base


def run_verify(world, lists, key=KEY, extra=()):
    d, base = world
    return main(base + ["verify", "--key", key, "--lists", str(lists),
                        "--embeddings", str(d / io.CATALOG_BIN), *extra])


def test_gen_data_files_and_determinism(tmp_path, cfg_path, world):
    d, _ = world
    for name in (io.CATALOG_BIN, io.CATALOG_JSON, io.INTERACTIONS):
        assert (d / name).exists()
    again = tmp_path / "again"
    other = tmp_path / "other"
    assert main(["--config", str(cfg_path), "--out", str(again), "gen-data"]) == 0
    assert main(["--config", str(cfg_path), "--seed", "7", "--out", str(other), "gen-data"]) == 0
    for name in (io.CATALOG_BIN, io.CATALOG_JSON, io.INTERACTIONS):
        assert digest(d / name) == digest(again / name)
        assert digest(d / name) != digest(other / name)
    header, _ = io.read_jsonl(d / io.INTERACTIONS)
    assert header["config"]["n_items"] == 400


def test_recommend_header_echoes_config(world):
    d, _ = world
    header, lists = io.read_recommendations(d / "recommendations.jsonl")
    assert header["config"]["k_cand"] == 40 and header["watermark"] is True
    assert header["calibrated"] is True and 0.01 <= header["alpha_global"] <= 5.0
    assert len(lists) == 300 and all(len(r.items) == 10 for r in lists)


def test_key_never_written(world):
    d, _ = world
    secret = str(int(KEY, 16))
    for f in d.iterdir():
        assert secret not in f.read_text(errors="ignore"), f.name


def test_verify_exit_codes(world, capsys):
    d, _ = world
    assert run_verify(world, d / "recommendations.jsonl") == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["owned"] and rep["z_score"] > 4 and rep["config"]["gamma"] == 0.5
    assert json.loads((d / "report.json").read_text()) == rep
    assert run_verify(world, d / "clean.jsonl") == 1
    assert run_verify(world, d / "recommendations.jsonl", key="424242") == 1
    # a calibrated clean base rate can be supplied instead of the density law
    assert run_verify(world, d / "recommendations.jsonl", extra=("--null-rate", "0.9")) == 1


def test_verify_accepts_csv_embeddings(world, tmp_path, capsys):
    d, base = world
    E = io.read_embeddings(d / io.CATALOG_BIN)
    io.write_embeddings_csv(tmp_path / "e.csv", E)
    run_verify(world, d / "recommendations.jsonl")
    a = json.loads(capsys.readouterr().out)
    main(base + ["verify", "--key", KEY, "--lists", str(d / "recommendations.jsonl"),
                 "--embeddings", str(tmp_path / "e.csv")])
    assert json.loads(capsys.readouterr().out) == a


def test_errors_exit_two(world, tmp_path):
    d, base = world
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{not json\n")
    assert run_verify(world, bad) == 2
    assert main(["--out", str(tmp_path / "empty"), "--key", "1", "recommend"]) == 2
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"colour": "green"}))
    assert main(["--config", str(cfg), "--out", str(tmp_path), "gen-data"]) == 2
    assert main(base + ["verify", "--lists", str(d / "clean.jsonl"),
                        "--embeddings", str(d / io.CATALOG_BIN)]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--param", "colour", "--values", "1"])
    assert exc.value.code == 2


def test_noop_watermark_matches_clean(world, tmp_path):
    d, base = world
    cfg = json.loads(open(base[1]).read())
    cfg["gamma"] = 0.0
    p = tmp_path / "g0.json"
    p.write_text(json.dumps(cfg))
    args = ["--config", str(p), "--out", str(d)]
    assert main(args + ["--key", KEY, "recommend", "--output", str(tmp_path / "on.jsonl")]) == 0
    assert main(args + ["recommend", "--watermark", "off",
                        "--output", str(tmp_path / "off.jsonl")]) == 0
    assert records(tmp_path / "on.jsonl") == records(tmp_path / "off.jsonl")


def test_attack_reports(world, capsys):
    d, base = world
    assert main(base + ["--key", KEY, "attack"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["student"]["z_score"] > 4 and doc["queries"] == "synthetic"
    assert 0.0 <= doc["agreement@10"] <= 1.0
    assert (d / "student_lists.jsonl").exists() and (d / "attack_report.json").exists()
    assert main(base + ["--key", KEY, "attack", "--watermark", "off"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert abs(doc["student"]["z_score"]) < 4 and abs(doc["teacher"]["z_score"]) < 4
    assert main(base + ["--key", KEY, "attack", "--queries",
                        str(d / "recommendations.jsonl")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["queries"] == "file" and doc["student"]["owned"]


def test_sweep_csv(world, capsys):
    d, base = world
    assert main(base + ["--key", KEY, "sweep", "--param", "delta_base",
                        "--values", "0.05,0.5,2"]) == 0
    rows = list(csv.DictReader((d / "sweep_delta_base.csv").open()))
    assert [r["value"] for r in rows] == ["0.05", "0.5", "2.0"]
    assert list(rows[0]) == ["value", "R@10", "N@10", "green_rate", "Z"]
    rates = [float(r["green_rate"]) for r in rows]
    assert rates == sorted(rates)
    assert json.loads((d / "sweep_delta_base.json").read_text())["param"] == "delta_base"
    assert main(base + ["--key", KEY, "sweep", "--param", "k_cand", "--values", "60",
                        "--data", str(d)]) == 0
    assert len((d / "sweep_k_cand.csv").read_text().splitlines()) == 2
    capsys.readouterr()


def test_console_entry_point(world):
    out = subprocess.run([sys.executable, "-m", "grew.cli", "--help"], capture_output=True,
                         text=True, check=True).stdout
    for cmd in ("gen-data", "recommend", "verify", "attack", "sweep"):
        assert cmd in out
