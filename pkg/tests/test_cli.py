import csv
import json

import numpy as np
import pytest

from slowwave.cli import main
from slowwave.npyio import save_json
from slowwave.synth import EventSpec, make_recording


def build_dataset(root):
    """Two tiny recordings (two events each) plus a fast pipeline config."""
    root.mkdir(parents=True, exist_ok=True)
    recordings = []
    truths = []
    for i, cond in enumerate(("awake", "anesth")):
        schedule = [
            EventSpec(1.0, 0.6, 0.20, source_center=(6, 6)),
            EventSpec(3.0, 0.6, 0.15, source_center=(6, 18)),
        ]
        rec, truth = make_recording(
            shape=(12, 24), fs=50.0, duration_s=6.0, schedule=schedule,
            noise_sigma=0.002, condition=cond, seed=10 + i,
        )
        stem = f"rec{i:03d}"
        np.save(root / f"{stem}.npy", rec.frames.astype(np.float64))
        np.save(root / f"{stem}_left.npy", rec.mask_left)
        np.save(root / f"{stem}_right.npy", rec.mask_right)
        recordings.append({
            "stack": f"{stem}.npy", "fs": 50.0,
            "mask_left": f"{stem}_left.npy",
            "mask_right": f"{stem}_right.npy",
            "condition": cond,
        })
        truths.append(truth)
    config = {
        "recordings": recordings,
        "output_dir": "out",
        "seed": 0,
        "hs": {"max_iters": 40, "tol": 1e-4},
        "features": {"trace_len": 16, "map_size": [6, 12]},
        "vae": {"epochs": 3, "hidden_sizes": [16, 8], "batch_size": 8, "grid_n": 2},
        "gmm": {"k": 2},
    }
    cfg_path = root / "config.json"
    save_json(cfg_path, config)
    return cfg_path, truths


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Run the full chain once; tests inspect the shared output tree."""
    root = tmp_path_factory.mktemp("pipeline")
    cfg_path, truths = build_dataset(root)
    codes = {}
    for stage in (["detect"], ["flow"], ["decompose"], ["features"],
                  ["embed", "--variant", "1"], ["prototypes", "--variant", "1"],
                  ["report"]):
        codes[stage[0]] = main([stage[0], "--config", str(cfg_path), *stage[1:]])
    return root, cfg_path, truths, codes


class TestPipeline:
    def test_all_stages_exit_zero(self, pipeline):
        _, _, _, codes = pipeline
        assert all(code == 0 for code in codes.values()), codes

    def test_detect_matches_truth(self, pipeline):
        root, _, truths, _ = pipeline
        for r, truth in enumerate(truths):
            meta = json.loads((root / "out" / "events" / f"rec{r:03d}.json").read_text())
            assert len(meta["events"]) == len(truth["events"])
            for got, want in zip(meta["events"], truth["events"]):
                assert abs(got["onset_frame"] - want["onset_frame"]) <= 2
                assert abs(got["offset_frame"] - want["offset_frame"]) <= 2
                assert abs(got["peak_amplitude"] - want["amplitude"]) < 0.02

    def test_features_csv_row_count(self, pipeline):
        root, _, truths, _ = pipeline
        n_events = sum(len(t["events"]) for t in truths)
        with open(root / "out" / "features" / "features.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == n_events
        for row in rows:
            assert float(row["peak_amplitude"]) >= 0.05
            assert (root / "out" / row["trace"]).exists()

    def test_embeddings_cover_all_events(self, pipeline):
        root, _, truths, _ = pipeline
        n_events = sum(len(t["events"]) for t in truths)
        with open(root / "out" / "embed" / "v1" / "embeddings.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == n_events
        assert {r["condition"] for r in rows} == {"awake", "anesth"}
        for r in rows:
            assert np.isfinite(float(r["z1"])) and np.isfinite(float(r["z2"]))

    def test_prototypes_json(self, pipeline):
        root, _, _, _ = pipeline
        protos = json.loads(
            (root / "out" / "prototypes" / "v1" / "prototypes.json").read_text())
        assert set(protos) == {"awake", "anesth"}
        for cond, entry in protos.items():
            assert len(entry["prototype_event_ids"]) == len(entry["weights"])
            assert sum(entry["weights"]) == pytest.approx(1.0)

    def test_report_counts(self, pipeline):
        root, _, truths, _ = pipeline
        report = json.loads((root / "out" / "report" / "report.json").read_text())
        assert report["total_events"] == sum(len(t["events"]) for t in truths)
        assert set(report["conditions"]) == {"awake", "anesth"}

    def test_manifest_covers_outputs(self, pipeline):
        root, _, _, _ = pipeline
        entries = json.loads((root / "out" / "manifest.json").read_text())
        assert "features/features.csv" in entries
        for rel in entries:
            assert (root / "out" / rel).exists()


class TestErrorPaths:
    def test_flow_without_detect(self, tmp_path):
        cfg_path, _ = build_dataset(tmp_path)
        assert main(["flow", "--config", str(cfg_path)]) == 1

    def test_missing_config_file(self, tmp_path):
        assert main(["detect", "--config", str(tmp_path / "nope.json")]) == 2

    def test_config_without_recordings(self, tmp_path):
        p = tmp_path / "config.json"
        save_json(p, {"recordings": [], "output_dir": "out"})
        assert main(["detect", "--config", str(p)]) == 2

    def test_no_output_dir_anywhere(self, tmp_path, monkeypatch):
        monkeypatch.delenv("SLOWWAVE_OUT", raising=False)
        p = tmp_path / "config.json"
        save_json(p, {"recordings": [{"stack": "x.npy"}]})
        assert main(["detect", "--config", str(p)]) == 2

    def test_env_var_output_dir(self, tmp_path, monkeypatch):
        cfg_path, _ = build_dataset(tmp_path)
        cfg = json.loads(cfg_path.read_text())
        del cfg["output_dir"]
        save_json(cfg_path, cfg)
        monkeypatch.setenv("SLOWWAVE_OUT", str(tmp_path / "envout"))
        assert main(["detect", "--config", str(cfg_path)]) == 0
        assert (tmp_path / "envout" / "manifest.json").exists()

    def test_bad_variant_rejected(self, tmp_path):
        cfg_path, _ = build_dataset(tmp_path)
        with pytest.raises(SystemExit):
            main(["embed", "--config", str(cfg_path), "--variant", "9"])

    def test_unreadable_recording_partial(self, tmp_path, capsys):
        cfg_path, _ = build_dataset(tmp_path)
        cfg = json.loads(cfg_path.read_text())
        cfg["recordings"][1]["stack"] = "missing.npy"
        save_json(cfg_path, cfg)
        assert main(["detect", "--config", str(cfg_path)]) == 1
        # the good recording is still processed
        assert (tmp_path / "out" / "events" / "rec000.json").exists()


class TestSynthCommand:
    def test_synth_writes_runnable_config(self, tmp_path):
        out = tmp_path / "demo"
        assert main(["synth", "--out", str(out), "--seed", "1",
                     "--conditions", "a", "b"]) == 0
        cfg = json.loads((out / "config.json").read_text())
        assert len(cfg["recordings"]) == 2
        for entry in cfg["recordings"]:
            assert (out / entry["stack"]).exists()
            assert (out / entry["mask_left"]).exists()
        assert (out / "rec000_truth.json").exists()
