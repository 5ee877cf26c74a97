import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from vidprobe.cli import load_config, main
from vidprobe.store import EmbeddingStore, write_store

from conftest import make_record, random_store

DATA = Path(__file__).parent / "data"


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture()
def good_store(tmp_path):
    rng = np.random.default_rng(1)
    path = tmp_path / "good.vaeb"
    write_store(random_store(rng, 12, 6, model_id="enc-x"), path)
    return path


class TestVerifyStore:
    def test_good_store(self, good_store, capsys):
        assert run_cli("verify-store", str(good_store)) == 0
        out = capsys.readouterr()
        assert "model_id: enc-x" in out.out
        assert "dim: 6" in out.out
        assert "records: 12" in out.out
        assert out.err == ""

    def test_corrupt_store_exits_2(self, good_store, tmp_path, capsys):
        bad = tmp_path / "bad.vaeb"
        bad.write_bytes(good_store.read_bytes()[:-3])
        assert run_cli("verify-store", str(bad)) == 2
        assert "corrupt store" in capsys.readouterr().err

    def test_wrong_magic_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.vaeb"
        bad.write_bytes(b"NOPE" + b"\x00" * 40)
        assert run_cli("verify-store", str(bad)) == 2
        assert "unsupported format" in capsys.readouterr().err

    def test_single_class_store_warns(self, tmp_path, capsys):
        path = tmp_path / "single.vaeb"
        recs = [make_record(f"r{i}", 0, "youtube-vos", [float(i)]) for i in range(3)]
        write_store(EmbeddingStore("m", 1, recs), path)
        assert run_cli("verify-store", str(path)) == 0
        assert "warning" in capsys.readouterr().err

    def test_missing_file_exits_2(self, tmp_path):
        assert run_cli("verify-store", str(tmp_path / "ghost.vaeb")) == 2


class TestUsageErrors:
    def test_train_missing_flags(self, capsys):
        assert run_cli("train") == 1
        err = capsys.readouterr().err
        assert "--store" in err and "--out" in err and "--seed" in err

    def test_unknown_flag(self, capsys):
        assert run_cli("train", "--bogus") == 1
        assert "usage" in capsys.readouterr().err

    def test_no_subcommand(self, capsys):
        assert run_cli() == 1

    def test_unknown_subcommand(self):
        assert run_cli("frobnicate") == 1

    def test_help_exits_zero(self, capsys):
        assert run_cli("--help") == 0
        assert "vidprobe" in capsys.readouterr().out


class TestTrainCommand:
    def test_train_writes_probe_and_provenance(self, tmp_path, capsys):
        rng = np.random.default_rng(2)
        store_path = tmp_path / "train.vaeb"
        from conftest import gaussian_records

        write_store(EmbeddingStore("enc", 6, gaussian_records(rng, 20, 6)), store_path)
        out = tmp_path / "probe.vapm"
        code = run_cli("train", "--store", str(store_path), "--out", str(out),
                       "--seed", "5", "--epochs", "3", "--quiet")
        assert code == 0
        assert out.exists()
        prov = json.loads((tmp_path / "probe.vapm.provenance.json").read_text())
        assert prov["command"] == "train"
        assert prov["config"]["epochs"] == 3
        assert prov["config"]["seed"] == 5
        assert str(store_path) in prov["inputs"]
        assert len(prov["inputs"][str(store_path)]) == 64  # sha256 hex

    def test_single_class_store_is_data_error(self, tmp_path, capsys):
        store_path = tmp_path / "oneclass.vaeb"
        recs = [make_record(f"r{i}", 0, "youtube-vos", [float(i), 0.0]) for i in range(6)]
        write_store(EmbeddingStore("m", 2, recs), store_path)
        code = run_cli("train", "--store", str(store_path),
                       "--out", str(tmp_path / "p.vapm"), "--seed", "1")
        assert code == 2
        assert "degenerate labels" in capsys.readouterr().err


class TestConfigFile:
    def test_flags_override_config(self, tmp_path):
        rng = np.random.default_rng(3)
        from conftest import gaussian_records

        store_path = tmp_path / "t.vaeb"
        write_store(EmbeddingStore("enc", 4, gaussian_records(rng, 10, 4)), store_path)
        config_path = tmp_path / "run.json"
        config_path.write_text(json.dumps({
            "store": str(store_path), "out": str(tmp_path / "p.vapm"),
            "seed": 9, "epochs": 100,
        }))
        assert run_cli("train", "--config", str(config_path), "--epochs", "5",
                       "--quiet") == 0
        prov = json.loads((tmp_path / "p.vapm.provenance.json").read_text())
        assert prov["config"]["epochs"] == 5  # flag beat the config file
        assert prov["config"]["seed"] == 9

    def test_empty_config_plus_flags(self, tmp_path):
        config_path = tmp_path / "empty.json"
        config_path.write_text("{}")
        assert load_config(config_path) == {}

    def test_malformed_config_is_data_error(self, tmp_path, capsys):
        config_path = tmp_path / "broken.json"
        config_path.write_text("{not json")
        assert run_cli("stats", "--config", str(config_path)) == 2
        assert "invalid JSON" in capsys.readouterr().err

    def test_unknown_key_reported(self, tmp_path, capsys):
        config_path = tmp_path / "odd.json"
        config_path.write_text(json.dumps({"bogus_key": 1}))
        assert run_cli("stats", "--config", str(config_path),
                       "--manifest", "x.jsonl") == 2
        assert "bogus_key" in capsys.readouterr().err

    def test_provenance_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        from conftest import gaussian_records

        store_path = tmp_path / "t.vaeb"
        write_store(EmbeddingStore("enc", 4, gaussian_records(rng, 10, 4)), store_path)
        first = tmp_path / "first.vapm"
        assert run_cli("train", "--store", str(store_path), "--out", str(first),
                       "--seed", "3", "--epochs", "4", "--quiet") == 0
        # rerun purely from the echoed provenance, overriding only --out
        second = tmp_path / "second.vapm"
        assert run_cli("train", "--config", str(tmp_path / "first.vapm.provenance.json"),
                       "--out", str(second), "--quiet") == 0
        assert first.read_bytes() == second.read_bytes()
        c1 = json.loads((tmp_path / "first.vapm.provenance.json").read_text())["config"]
        c2 = json.loads((tmp_path / "second.vapm.provenance.json").read_text())["config"]
        assert c2["out"] == str(second)
        assert {k: v for k, v in c1.items() if k != "out"} == {
            k: v for k, v in c2.items() if k != "out"
        }


class TestPipelineGoldenFixture:
    def test_full_pipeline_matches_committed_outputs(self, tmp_path):
        manifest_out = tmp_path / "manifest.jsonl"
        assert run_cli("ingest", "--listing", str(DATA / "listing.jsonl"),
                       "--allow-unknown-source", "--out", str(manifest_out),
                       "--quiet") == 0
        assert manifest_out.read_bytes() == (DATA / "expected_manifest.jsonl").read_bytes()

        report_d = tmp_path / "distance.csv"
        assert run_cli("eval", "--protocol", "many-to-many", "--method", "distance",
                       "--train-sources", "gen-a,gen-b",
                       "--store", str(DATA / "features.vaeb"),
                       "--manifest", str(manifest_out), "--seed", "7",
                       "--report", str(report_d), "--format", "csv",
                       "--threads", "1", "--quiet") == 0
        assert report_d.read_bytes() == (DATA / "expected_eval_distance.csv").read_bytes()

        report_p = tmp_path / "probe.csv"
        assert run_cli("eval", "--protocol", "one-to-many", "--method", "probe",
                       "--train-source", "gen-b",
                       "--store", str(DATA / "features.vaeb"),
                       "--manifest", str(manifest_out), "--seed", "7",
                       "--epochs", "10", "--report", str(report_p), "--format", "csv",
                       "--threads", "1", "--quiet") == 0
        assert report_p.read_bytes() == (DATA / "expected_eval_probe.csv").read_bytes()

    def test_stats_command(self, tmp_path, capsys):
        manifest_out = tmp_path / "m.jsonl"
        run_cli("ingest", "--listing", str(DATA / "listing.jsonl"),
                "--allow-unknown-source", "--out", str(manifest_out), "--quiet")
        assert run_cli("stats", "--manifest", str(manifest_out)) == 0
        out = capsys.readouterr().out
        assert "youtube-vos" in out and "total" in out

    def test_eval_distance_command(self, tmp_path):
        rng = np.random.default_rng(6)
        refs = tmp_path / "refs.vaeb"
        tests = tmp_path / "tests.vaeb"
        write_store(random_store(rng, 30, 5), refs)
        write_store(random_store(rng, 20, 5), tests)
        report = tmp_path / "r.csv"
        assert run_cli("eval-distance", "--refs", str(refs), "--tests", str(tests),
                       "--per-source", "--report", str(report), "--quiet") == 0
        lines = report.read_text().splitlines()
        assert lines[0].startswith("train,model,test")
        assert any(",overall," in ln for ln in lines)

    def test_report_reformat(self, tmp_path, capsys):
        report_j = tmp_path / "r.jsonl"
        rng = np.random.default_rng(8)
        refs = tmp_path / "refs.vaeb"
        tests = tmp_path / "tests.vaeb"
        write_store(random_store(rng, 10, 4), refs)
        write_store(random_store(rng, 10, 4), tests)
        assert run_cli("eval-distance", "--refs", str(refs), "--tests", str(tests),
                       "--report", str(report_j), "--format", "jsonl", "--quiet") == 0
        assert run_cli("report", "--in", str(report_j), "--format", "table") == 0
        out = capsys.readouterr().out
        assert "F1-Real" in out and "F1-Fake" in out


class TestDeterminism:
    def test_two_runs_byte_identical(self, tmp_path):
        outputs = []
        for name in ("a", "b"):
            workdir = tmp_path / name
            workdir.mkdir()
            manifest = workdir / "m.jsonl"
            run_cli("ingest", "--listing", str(DATA / "listing.jsonl"),
                    "--allow-unknown-source", "--out", str(manifest), "--quiet")
            report = workdir / "report.csv"
            run_cli("eval", "--protocol", "many-to-many", "--method", "probe",
                    "--train-sources", "gen-a,gen-b,gen-c",
                    "--store", str(DATA / "features.vaeb"), "--manifest", str(manifest),
                    "--seed", "11", "--epochs", "5", "--report", str(report),
                    "--threads", "1", "--quiet")
            outputs.append((manifest.read_bytes(), report.read_bytes(),
                            (workdir / "report.csv.provenance.json").read_bytes()))
        assert outputs[0][0] == outputs[1][0]
        assert outputs[0][1] == outputs[1][1]


def test_module_entrypoint_runs():
    result = subprocess.run(
        [sys.executable, "-m", "vidprobe.cli", "--version"],
        capture_output=True, text=True,
    )
    assert result.returncode == 0
    assert "vidprobe" in result.stdout
