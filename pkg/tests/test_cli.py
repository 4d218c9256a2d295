"""CLI contract: exit codes, artifacts, manifests, reproducibility."""

import json

import numpy as np
import pytest

from amtransfer.cli import EXIT_OK, EXIT_VALIDATION, OUTPUT_ROOT_ENV, main
from amtransfer.structuring import WindowSet


def run(argv, capsys=None):
    code = main(argv)
    if capsys is None:
        return code, "", ""
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture(scope="session")
def pipeline(tmp_path_factory):
    """One tiny synth -> structure -> train -> transfer -> evaluate run."""
    root = tmp_path_factory.mktemp("cli_pipeline")
    paths = {
        "src_frames": root / "src_frames",
        "tgt_frames": root / "tgt_frames",
        "src_windows": root / "src_windows.npz",
        "tgt_train": root / "tgt_train.npz",
        "tgt_test": root / "tgt_test.npz",
        "model": root / "source_model.mpae",
        "transfer_dir": root / "transfer",
        "eval_report": root / "eval" / "report.json",
    }
    steps = [
        ["synth", "--profile", "lpbf_like", "--frame-size", "16",
         "--frames", "40", "--seed", "3", "--out", str(paths["src_frames"])],
        ["synth", "--profile", "ded_like", "--frame-size", "16",
         "--frames", "48", "--seed", "4", "--anomaly-mix", "spatter=0.1",
         "--out", str(paths["tgt_frames"])],
        ["structure", "--dataset", str(paths["src_frames"]),
         "--out", str(paths["src_windows"])],
        ["structure", "--dataset", str(paths["tgt_frames"]),
         "--train-out", str(paths["tgt_train"]),
         "--test-out", str(paths["tgt_test"]), "--n-train", "12"],
        ["train", "--windows", str(paths["src_windows"]), "--epochs", "1",
         "--batch-size", "8", "--seed", "0", "--out", str(paths["model"])],
        ["transfer", "--checkpoint", str(paths["model"]),
         "--train", str(paths["tgt_train"]), "--test", str(paths["tgt_test"]),
         "--strategy", "retrain_all", "--budget", "2", "--no-plots",
         "--out", str(paths["transfer_dir"])],
        ["evaluate", "--checkpoint", str(paths["model"]),
         "--train", str(paths["tgt_train"]), "--test", str(paths["tgt_test"]),
         "--out", str(paths["eval_report"])],
    ]
    for argv in steps:
        assert main(argv) == EXIT_OK, argv[0]
    return paths


class TestPipelineArtifacts:
    def test_synth_writes_frames_and_manifest(self, pipeline):
        frames = sorted(pipeline["src_frames"].glob("*.png"))
        assert len(frames) == 40
        manifest = json.loads(
            (pipeline["src_frames"] / "synth_manifest.json").read_text()
        )
        assert manifest["params"]["profile"]["name"] == "lpbf_like"
        assert manifest["params"]["seed"] == 3

    def test_structure_split_contract(self, pipeline):
        train_set = WindowSet.load(pipeline["tgt_train"])
        test_set = WindowSet.load(pipeline["tgt_test"])
        assert len(train_set) == 12
        assert all(lab.value == "normal" for lab in train_set.labels)
        assert len(test_set.anomalous_indices()) > 0

    def test_train_manifest_records_history(self, pipeline):
        manifest = json.loads(
            pipeline["model"].with_suffix(".manifest.json").read_text()
        )
        assert manifest["params"]["epochs"] == 1
        assert len(manifest["params"]["loss_history"]) == 1
        assert manifest["inputs"]["windows"]["sha256"]

    def test_transfer_artifacts(self, pipeline):
        d = pipeline["transfer_dir"]
        for name in (
            "transfer_retrain_all.json",
            "model_retrain_all.mpae",
            "scratch_report.json",
            "scratch_model.mpae",
            "knowledge_record.jsonl",
            "manifest.json",
        ):
            assert (d / name).is_file(), name
        doc = json.loads((d / "transfer_retrain_all.json").read_text())
        assert doc["strategy"]["name"] == "retrain_all"
        assert doc["verdict"] in (
            "positive_transfer", "neutral", "negative_transfer"
        )

    def test_evaluate_report(self, pipeline):
        doc = json.loads(pipeline["eval_report"].read_text())
        assert doc["schema_version"] == 1
        assert doc["n_anomalous"] > 0
        assert 0.0 <= doc["accuracy_pct"] <= 100.0

    def test_report_renders_transfer_dir(self, pipeline, capsys):
        code, out, _ = run(["report", "--run", str(pipeline["transfer_dir"])], capsys)
        assert code == EXIT_OK
        assert "retrain_all: accuracy" in out
        assert "verdict" in out


class TestAnalyze:
    def test_bundled_case_study(self, tmp_path, capsys):
        out = tmp_path / "analysis"
        code, stdout, _ = run(
            ["analyze", "--source", "lpbf_nist", "--target", "ded_msu",
             "--out", str(out)],
            capsys,
        )
        assert code == EXIT_OK
        report = json.loads((out / "pretransfer_report.json").read_text())
        assert report["pre_transfer_score_display"] == 0.73
        assert report["significant"] is True
        plan = json.loads((out / "transfer_plan.json").read_text())
        assert plan["scenario"] == "transductive"
        assert plan["method_family"] == "parameter_based"
        assert "(3 + 5)/11" in stdout

    def test_ranked_sources(self, tmp_path, capsys):
        out = tmp_path / "ranked"
        code, stdout, _ = run(
            ["analyze", "--source", "lpbf_nist", "--source", "ded_msu",
             "--target", "ded_msu", "--out", str(out)],
            capsys,
        )
        assert code == EXIT_OK
        ranked = json.loads((out / "ranked_sources.json").read_text())
        assert [r["source_id"] for r in ranked["ranked"]][0] == "ded_msu"
        assert "ranked sources:" in stdout

    def test_override_changes_score(self, tmp_path):
        base_dir, forced_dir = tmp_path / "base", tmp_path / "forced"
        run(["analyze", "--source", "lpbf_nist", "--target", "ded_msu",
             "--out", str(base_dir)])
        run(["analyze", "--source", "lpbf_nist", "--target", "ded_msu",
             "--override", "AM_P=1", "--out", str(forced_dir)])
        base = json.loads((base_dir / "pretransfer_report.json").read_text())
        forced = json.loads((forced_dir / "pretransfer_report.json").read_text())
        assert forced["similarity_index"] > base["similarity_index"]


class TestFailureModes:
    def test_missing_context_exits_2(self, tmp_path, capsys):
        code, _, err = run(
            ["analyze", "--source", "no_such_context", "--target", "ded_msu",
             "--out", str(tmp_path / "x")],
            capsys,
        )
        assert code == EXIT_VALIDATION
        doc = json.loads(err)
        assert doc["error"]["type"]
        assert "no_such_context" in doc["error"]["message"]

    def test_bad_override_exits_2(self, tmp_path, capsys):
        code, _, err = run(
            ["analyze", "--source", "lpbf_nist", "--target", "ded_msu",
             "--override", "BOGUS=1", "--out", str(tmp_path / "x")],
            capsys,
        )
        assert code == EXIT_VALIDATION
        assert "knowledge level" in json.loads(err)["error"]["message"]

    def test_structure_missing_dataset_exits_2(self, tmp_path, capsys):
        code, _, err = run(
            ["structure", "--dataset", str(tmp_path / "missing"),
             "--out", str(tmp_path / "w.npz")],
            capsys,
        )
        assert code == EXIT_VALIDATION
        assert json.loads(err)["error"]["message"]

    def test_evaluate_without_anomalies_exits_2(self, pipeline, tmp_path, capsys):
        code, _, err = run(
            ["evaluate", "--checkpoint", str(pipeline["model"]),
             "--train", str(pipeline["tgt_train"]),
             "--test", str(pipeline["tgt_train"]),
             "--out", str(tmp_path / "r.json")],
            capsys,
        )
        assert code == EXIT_VALIDATION
        assert "no anomalous windows" in json.loads(err)["error"]["message"]

    def test_overwrite_guard(self, pipeline, tmp_path, capsys):
        argv = ["synth", "--profile", "lpbf_like", "--frame-size", "16",
                "--frames", "8", "--seed", "0",
                "--out", str(pipeline["src_frames"])]
        code, _, err = run(argv, capsys)
        assert code == EXIT_VALIDATION
        assert "--force" in json.loads(err)["error"]["message"]
        # and --force clears it, into a scratch copy to keep the fixture intact
        fresh = tmp_path / "fresh"
        assert main(argv[:-1] + [str(fresh)]) == EXIT_OK


class TestReproducibility:
    def test_train_is_deterministic(self, pipeline, tmp_path):
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub / "model.mpae"
            code = main(
                ["train", "--windows", str(pipeline["src_windows"]),
                 "--epochs", "1", "--batch-size", "8", "--seed", "0",
                 "--out", str(out)]
            )
            assert code == EXIT_OK
            outs.append(out)
        assert outs[0].read_bytes() == outs[1].read_bytes()
        manifests = [
            json.loads(p.with_suffix(".manifest.json").read_text()) for p in outs
        ]
        assert manifests[0] == manifests[1]

    def test_synth_is_deterministic(self, tmp_path):
        digests = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            main(["synth", "--profile", "ded_like", "--frame-size", "16",
                  "--frames", "6", "--seed", "9", "--out", str(out)])
            blob = b"".join(
                p.read_bytes() for p in sorted(out.glob("*.png"))
            )
            digests.append(blob)
        assert digests[0] == digests[1]


class TestOutputRoot:
    def test_relative_paths_land_under_env_root(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path))
        code = main(["synth", "--profile", "lpbf_like", "--frame-size", "16",
                     "--frames", "6", "--seed", "1", "--out", "rooted/frames"])
        assert code == EXIT_OK
        assert (tmp_path / "rooted" / "frames" / "synth_manifest.json").is_file()

    def test_absolute_paths_ignore_env_root(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "root"))
        out = tmp_path / "absolute"
        code = main(["synth", "--profile", "lpbf_like", "--frame-size", "16",
                     "--frames", "6", "--seed", "1", "--out", str(out)])
        assert code == EXIT_OK
        assert out.is_dir()
        assert not (tmp_path / "root").exists()
