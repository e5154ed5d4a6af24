"""End-to-end checks for the survkit command-line surface.

Runs the real binary (path in SURVKIT_BIN) through the full chain:
synth -> engineer -> compare -> select -> train -> predict.
"""

import csv
import os
import subprocess
import tempfile
import unittest
from pathlib import Path

BIN = os.environ.get("SURVKIT_BIN", "survkit")

MODEL_NAMES = ["tree", "forest", "cox", "elastic-net", "boosted"]


def run(*args, expect=0):
    proc = subprocess.run([BIN, *map(str, args)], capture_output=True, text=True)
    if expect is not None and proc.returncode != expect:
        raise AssertionError(
            f"{args[0]} exited {proc.returncode}, wanted {expect}\n"
            f"stdout: {proc.stdout}\nstderr: {proc.stderr}"
        )
    return proc


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class CliChainTest(unittest.TestCase):
    """One shared cohort, reused read-only by the chain tests."""

    @classmethod
    def setUpClass(cls):
        cls._tmp = tempfile.TemporaryDirectory()
        root = Path(cls._tmp.name)
        cls.synth_dir = root / "synth"
        cls.eng_dir = root / "eng"
        run("synth", "--out", cls.synth_dir, "--n", 120, "--seed", 7)
        run(
            "engineer",
            "--statics", cls.synth_dir / "statics.csv",
            "--longitudinal", cls.synth_dir / "longitudinal.csv",
            "--outcomes", cls.synth_dir / "outcomes.csv",
            "--out", cls.eng_dir,
        )
        cls.features = cls.eng_dir / "features.csv"
        cls.outcomes = cls.synth_dir / "outcomes.csv"

    @classmethod
    def tearDownClass(cls):
        cls._tmp.cleanup()

    def fresh_dir(self, name):
        path = Path(self._tmp.name) / name
        return path

    def test_synth_writes_cohort_files(self):
        for name in ("statics.csv", "longitudinal.csv", "outcomes.csv",
                     "ground_truth.csv", "run_config.resolved"):
            self.assertTrue((self.synth_dir / name).exists(), name)
        rows = read_rows(self.synth_dir / "outcomes.csv")
        self.assertEqual(rows[0], ["subject_id", "time_days", "event"])
        self.assertEqual(len(rows) - 1, 120)
        self.assertTrue(all(r[2] in ("0", "1") for r in rows[1:]))

    def test_synth_same_seed_reproduces(self):
        a = self.fresh_dir("det_a")
        b = self.fresh_dir("det_b")
        c = self.fresh_dir("det_c")
        run("synth", "--out", a, "--n", 50, "--seed", 42)
        run("synth", "--out", b, "--n", 50, "--seed", 42)
        run("synth", "--out", c, "--n", 50, "--seed", 43)
        for name in ("statics.csv", "longitudinal.csv", "outcomes.csv", "ground_truth.csv"):
            self.assertEqual((a / name).read_bytes(), (b / name).read_bytes(), name)
        self.assertNotEqual((a / "outcomes.csv").read_bytes(), (c / "outcomes.csv").read_bytes())

    def test_engineer_outputs(self):
        rows = read_rows(self.features)
        self.assertEqual(rows[0][0], "subject_id")
        self.assertIn("score_mean", rows[0])
        self.assertEqual(len(rows) - 1, 120)
        dropped = read_rows(self.eng_dir / "dropped.csv")
        self.assertEqual(dropped[0], ["column", "reason", "culprit", "value"])
        reasons = {r[1] for r in dropped[1:]}
        self.assertLessEqual(reasons, {"low_coverage", "constant", "correlated"})

    def test_engineer_missing_input_fails(self):
        proc = run(
            "engineer",
            "--statics", "nope_statics.csv",
            "--longitudinal", self.synth_dir / "longitudinal.csv",
            "--outcomes", self.outcomes,
            "--out", self.fresh_dir("eng_fail"),
            expect=1,
        )
        self.assertIn("nope_statics.csv", proc.stderr)

    def test_compare_report_shape(self):
        out = self.fresh_dir("cmp")
        proc = run("compare", "--features", self.features, "--outcomes", self.outcomes,
                   "--out", out, "--k", 3, "--seed", 11)
        winner = proc.stdout.strip().split("winner: ")[-1]
        self.assertIn(winner, MODEL_NAMES)
        rows = read_rows(out / "cv_report.csv")
        self.assertEqual(rows[0], ["model", "fold", "cindex"])
        fold_rows = rows[1 : 1 + 5 * 3]
        self.assertTrue(all(r[0] in MODEL_NAMES for r in fold_rows))
        self.assertEqual(rows[1 + 5 * 3], ["model", "mean", "min", "max"])
        summary = rows[2 + 5 * 3 :]
        self.assertEqual([r[0] for r in summary], MODEL_NAMES)
        for r in summary:
            self.assertLessEqual(float(r[2]), float(r[1]))
            self.assertLessEqual(float(r[1]), float(r[3]))
        fig = read_rows(out / "fig2b.csv")
        self.assertEqual(fig[0], ["model", "mean", "lower", "upper"])
        self.assertEqual([r[0] for r in fig[1:]], MODEL_NAMES)
        best = max(summary, key=lambda r: float(r[1]))
        self.assertEqual(winner, best[0])

    def test_compare_thread_count_invariant(self):
        one = self.fresh_dir("cmp_t1")
        four = self.fresh_dir("cmp_t4")
        run("compare", "--features", self.features, "--outcomes", self.outcomes,
            "--out", one, "--k", 3, "--seed", 5, "--threads", 1)
        run("compare", "--features", self.features, "--outcomes", self.outcomes,
            "--out", four, "--k", 3, "--seed", 5, "--threads", 4)
        for name in ("cv_report.csv", "fig2b.csv"):
            self.assertEqual((one / name).read_bytes(), (four / name).read_bytes(), name)

    def test_compare_k_too_large_fails(self):
        proc = run("compare", "--features", self.features, "--outcomes", self.outcomes,
                   "--out", self.fresh_dir("cmp_badk"), "--k", 500, expect=1)
        self.assertIn("BadK", proc.stderr)

    def test_select_budget(self):
        out = self.fresh_dir("sel")
        proc = run("select", "--features", self.features, "--outcomes", self.outcomes,
                   "--out", out, "--budget", 4, "--seed", 3)
        chosen = proc.stdout.strip().split("selected: ")[-1].split()
        self.assertEqual(len(chosen), 4)
        consensus = read_rows(out / "consensus.csv")
        self.assertEqual(consensus[0], ["feature", "mean_rank", "selected"])
        selected = [r[0] for r in consensus[1:] if r[2] == "1"]
        self.assertEqual(selected, chosen)
        ranks = [float(r[1]) for r in consensus[1:]]
        self.assertEqual(ranks, sorted(ranks))
        rankings = read_rows(out / "rankings.csv")
        self.assertEqual(rankings[0], ["feature", "method", "score", "rank"])
        p = len(consensus) - 1
        self.assertEqual(len(rankings) - 1, 3 * p)
        self.assertEqual({r[1] for r in rankings[1:]},
                         {"forest-vimp", "boosted-cox", "elastic-net"})

    def test_train_predict_roundtrip(self):
        sel = self.fresh_dir("sel_for_train")
        run("select", "--features", self.features, "--outcomes", self.outcomes,
            "--out", sel, "--budget", 4, "--seed", 3)
        tr_a = self.fresh_dir("train_a")
        tr_b = self.fresh_dir("train_b")
        for out in (tr_a, tr_b):
            run("train", "--features", self.features, "--outcomes", self.outcomes,
                "--out", out, "--model", "cox", "--subset", sel / "consensus.csv",
                "--seed", 5)
        model_a = (tr_a / "model.txt").read_bytes()
        self.assertEqual(model_a, (tr_b / "model.txt").read_bytes())
        lines = model_a.decode().splitlines()
        self.assertEqual(lines[0], "survkit-model 1")
        self.assertEqual(lines[1], "kind cox")
        self.assertEqual(lines[2], "features 4")
        self.assertEqual(lines[-1], "end")

        # the saved model subsets a wider matrix by column name
        pred = self.fresh_dir("pred")
        run("predict", "--model", tr_a / "model.txt", "--features", self.features,
            "--out", pred, "--horizons", "0,365,730")
        rows = read_rows(pred / "predictions.csv")
        self.assertEqual(rows[0], ["subject_id", "horizon_days", "death_probability"])
        self.assertEqual(len(rows) - 1, 120 * 3)
        by_subject = {}
        for sid, horizon, prob in rows[1:]:
            by_subject.setdefault(sid, []).append((float(horizon), float(prob)))
        for sid, points in by_subject.items():
            self.assertEqual(points[0], (0.0, 0.0), sid)
            probs = [p for _, p in points]
            self.assertEqual(probs, sorted(probs), sid)
            self.assertTrue(all(0.0 <= p <= 1.0 for p in probs), sid)

    def test_predict_feature_mismatch_fails(self):
        tr = self.fresh_dir("train_mismatch")
        run("train", "--features", self.features, "--outcomes", self.outcomes,
            "--out", tr, "--model", "cox", "--seed", 1)
        narrowed = self.fresh_dir("narrow")
        narrowed.mkdir()
        rows = read_rows(self.features)
        header = ["subject_id"] + [c + "_renamed" for c in rows[0][1:]]
        path = narrowed / "features.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows[1:])
        proc = run("predict", "--model", tr / "model.txt", "--features", path,
                   "--out", narrowed / "pred", expect=1)
        self.assertIn("UnknownFeature", proc.stderr)

    def test_train_model_names(self):
        proc = run("train", "--features", self.features, "--outcomes", self.outcomes,
                   "--out", self.fresh_dir("train_bogus"), "--model", "gbm", expect=1)
        self.assertIn("gbm", proc.stderr)


class ConfigFileTest(unittest.TestCase):
    def test_config_sections_and_flag_priority(self):
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            cfg = root / "run.toml"
            cfg.write_text("[synth]\nn = 60\nseed = 9\n")

            run("synth", "--config", cfg, "--out", root / "from_cfg")
            rows = read_rows(root / "from_cfg" / "outcomes.csv")
            self.assertEqual(len(rows) - 1, 60)

            # explicit flags beat the file
            run("synth", "--config", cfg, "--out", root / "flag_wins", "--n", 25)
            rows = read_rows(root / "flag_wins" / "outcomes.csv")
            self.assertEqual(len(rows) - 1, 25)
            resolved = (root / "flag_wins" / "run_config.resolved").read_text()
            self.assertIn("n=25", resolved)
            self.assertIn("seed=9", resolved)

            bad = root / "bad.toml"
            bad.write_text("[synth]\nn = 60\nbogus_key = 1\n")
            proc = run("synth", "--config", bad, "--out", root / "rejected", expect=1)
            self.assertIn("bogus_key", proc.stderr)

    def test_run_config_echo_lists_defaults(self):
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp) / "synth"
            run("synth", "--out", out, "--n", 30, "--seed", 2)
            resolved = (out / "run_config.resolved").read_text()
            self.assertIn("n=30", resolved)
            self.assertIn("seed=2", resolved)
            # defaults are echoed too, so a run is fully reconstructable
            self.assertIn("noise-features=", resolved)


if __name__ == "__main__":
    unittest.main(verbosity=2)
