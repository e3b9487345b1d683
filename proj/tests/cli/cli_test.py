"""End-to-end run of the pose2press tool on a small synthetic dataset."""

import json
import subprocess
import sys
import tempfile
import unittest
from pathlib import Path

import jsonschema

TOOL = None
SCHEMA = None

SMALL_MODEL = {
    "input_dim": 48,
    "stem_fc_out": 96,
    "stem_reshape": [4, 3, 8],
    "block_scales": [[2, 1], [2, 2], [2, 2], [2, 2]],
    "block_out_channels": [4, 4, 4, 4],
    "block_fc_bottleneck": 4,
    "head_fc_sizes": [4, 2520],
    "head_crop": [60, 21],
    "output_channels": 2,
    "dropout_rate": 0.1,
    "leaky_alpha": 0.2,
}


def run(*args):
    return subprocess.run([TOOL, *map(str, args)], capture_output=True, text=True)


class CliTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.dir = Path(cls.tmp.name)
        spec = cls.dir / "spec.json"
        spec.write_text(json.dumps({"n_subjects": 2, "takes": 2, "frames_per_take": 40}))
        r = run("synth", "--spec", spec, "--out", cls.dir / "data")
        assert r.returncode == 0, r.stderr
        cls.manifest = cls.dir / "data" / "manifest.json"
        cls.config = cls.dir / "train.json"
        cls.config.write_text(json.dumps({"epochs": 2, "batch_size": 8, "model": SMALL_MODEL}))

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def train(self, out, config=None):
        return run("train", "--manifest", self.manifest, "--split-subject", "S01",
                   "--config", config or self.config, "--out", out)

    def test_synth_same_seed_same_bytes(self):
        r = run("synth", "--spec", self.dir / "spec.json", "--out", self.dir / "again")
        self.assertEqual(r.returncode, 0, r.stderr)
        for f in sorted((self.dir / "data").rglob("*.csv")):
            twin = self.dir / "again" / f.relative_to(self.dir / "data")
            self.assertEqual(f.read_bytes(), twin.read_bytes(), f.name)

    def test_pipeline_report_matches_schema(self):
        ckpt = self.dir / "ckpt"
        r = self.train(ckpt)
        self.assertEqual(r.returncode, 0, r.stderr)
        for name in ["model.p2p", "model.json", "normalization.json", "footmask.csv",
                     "train_config.json", "train_log.json"]:
            self.assertTrue((ckpt / name).exists(), name)
        log = json.loads((ckpt / "train_log.json").read_text())
        self.assertEqual(len(log["epochs"]), 2)

        index = self.dir / "index.json"
        r = run("knn-build", "--manifest", self.manifest, "--split-subject", "S01",
                "--factor", 5, "--out", index)
        self.assertEqual(r.returncode, 0, r.stderr)

        report = self.dir / "report.json"
        frames = self.dir / "frames.csv"
        r = run("eval", "--manifest", self.manifest, "--split-subject", "S01",
                "--checkpoint", ckpt, "--knn-index", index, "--report", report,
                "--frames-csv", frames)
        self.assertEqual(r.returncode, 0, r.stderr)
        doc = json.loads(report.read_text())
        jsonschema.validate(doc, SCHEMA)
        self.assertEqual([m["method"] for m in doc["methods"]], ["pressnet", "knn"])
        self.assertIsNotNone(doc["ttest"])
        rows = frames.read_text().splitlines()
        self.assertEqual(len(rows), 1 + 2 * doc["test_frames"])

        # Index of another split is refused.
        r = run("eval", "--manifest", self.manifest, "--split-subject", "S02",
                "--knn-index", index, "--report", self.dir / "bad.json")
        self.assertEqual(r.returncode, 2)
        self.assertIn("split", r.stderr)

    def test_knn_only_report_matches_schema(self):
        index = self.dir / "index2.json"
        self.assertEqual(run("knn-build", "--manifest", self.manifest, "--split-subject", "S02",
                             "--out", index).returncode, 0)
        report = self.dir / "knn_report.json"
        r = run("eval", "--manifest", self.manifest, "--split-subject", "S02",
                "--knn-index", index, "--report", report)
        self.assertEqual(r.returncode, 0, r.stderr)
        doc = json.loads(report.read_text())
        jsonschema.validate(doc, SCHEMA)
        self.assertIsNone(doc["ttest"])

    def test_cop_and_plot(self):
        take = self.dir / "data" / "S01" / "sess1_take1_pressure.csv"
        mask = self.dir / "data" / "footmask.csv"
        out = self.dir / "cop.csv"
        r = run("cop", "--pressure", take, "--mask", mask, "--out", out)
        self.assertEqual(r.returncode, 0, r.stderr)
        lines = out.read_text().splitlines()
        self.assertEqual(lines[0], "frame_id,left_x_mm,left_y_mm,right_x_mm,right_y_mm")
        self.assertEqual(len(lines), 41)

        first = lines[1].split(",")[0]
        r = run("plot", "--frame", first, "--gt", take, "--pred", take, "--mask", mask,
                "--out", self.dir / "img")
        self.assertEqual(r.returncode, 0, r.stderr)
        ppm = (self.dir / "img" / f"frame_{first}.ppm").read_bytes()
        self.assertTrue(ppm.startswith(b"P6\n"))

    def test_exit_codes(self):
        self.assertEqual(run().returncode, 1)
        self.assertEqual(run("train", "--manifest", self.manifest).returncode, 1)
        self.assertEqual(run("frobnicate").returncode, 1)

        r = run("train", "--manifest", self.manifest, "--split-subject", "S09",
                "--config", self.config, "--out", self.dir / "nope")
        self.assertEqual(r.returncode, 2)

        broken = self.dir / "broken.json"
        broken.write_text("{ not json")
        r = run("train", "--manifest", broken, "--split-subject", "S01", "--out", self.dir / "nope")
        self.assertEqual(r.returncode, 2)

        bad_cfg = self.dir / "bad_model.json"
        model = dict(SMALL_MODEL, stem_fc_out=95)
        bad_cfg.write_text(json.dumps({"epochs": 1, "model": model}))
        r = self.train(self.dir / "nope", bad_cfg)
        self.assertEqual(r.returncode, 1)
        self.assertIn("stem_fc_out", r.stderr)

        diverge = self.dir / "diverge.json"
        diverge.write_text(json.dumps({"epochs": 1, "batch_size": 8, "lr_initial": 1e30,
                                       "model": SMALL_MODEL}))
        r = self.train(self.dir / "nan", diverge)
        self.assertEqual(r.returncode, 3, r.stderr)
        self.assertIn("epoch 1", r.stderr)


if __name__ == "__main__":
    TOOL = sys.argv.pop(1)
    SCHEMA = json.loads(Path(sys.argv.pop(1)).read_text())
    unittest.main()
