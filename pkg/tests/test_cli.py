from __future__ import annotations

import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from depfuse.cli import main

DATA = Path(__file__).parent / "data"


def run_cli(args, env_extra=None):
    env = dict(os.environ)
    env.setdefault("PYTHONPATH", "")
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [sys.executable, "-m", "depfuse.cli", *args],
        capture_output=True, text=True, env=env)


class TestFuse:
    def test_fuse_report(self, tmp_path):
        out = tmp_path / "report.json"
        rc = main(["fuse", str(DATA / "affiliations_snapshot.csv"),
                   "--out", str(out)])
        assert rc == 0
        report = json.loads(out.read_text())
        assert report["report"] == "fusion"
        assert report["naive"]["dong"]["chosen"] == "uw"
        assert not report["naive"]["dong"]["tied"]
        assert report["items"]["dong"]["chosen"] == "at&t"
        assert not report["items"]["dong"]["tied"]
        assert report["fixpoint"]["converged"]
        assert report["version"]
        assert report["config"]["tau"] == 0.5

    def test_naive_tie_visible_with_three_sources(self, tmp_path):
        import depfuse
        ds = depfuse.parse_observations(
            (DATA / "affiliations_snapshot.csv").read_text())
        sub = ds.restrict_sources(["s1", "s2", "s3"])
        path = tmp_path / "three.csv"
        path.write_text(depfuse.to_csv(sub))
        out = tmp_path / "r.json"
        assert main(["fuse", str(path), "--out", str(out)]) == 0
        report = json.loads(out.read_text())
        assert report["naive"]["dong"]["tied"]

    def test_text_format(self, capsys):
        rc = main(["fuse", str(DATA / "affiliations_snapshot.csv"),
                   "--format", "text"])
        assert rc == 0
        text = capsys.readouterr().out
        assert "dong: at&t" in text
        assert "# fusion" in text


class TestDetect:
    def test_detect_flags_copier_trio(self, tmp_path):
        out = tmp_path / "dep.json"
        rc = main(["detect", str(DATA / "affiliations_snapshot.csv"),
                   "--out", str(out)])
        assert rc == 0
        report = json.loads(out.read_text())
        flagged = {tuple(p["pair"]) for p in report["pairs"] if p["flagged"]}
        assert flagged == {("s3", "s4"), ("s3", "s5"), ("s4", "s5")}
        posts = [p["posterior"] for p in report["pairs"]]
        assert posts == sorted(posts, reverse=True)

    def test_detect_temporal(self, tmp_path):
        out = tmp_path / "tdep.json"
        rc = main(["detect-temporal", str(DATA / "affiliations_history.csv"),
                   "--out", str(out)])
        assert rc == 0
        report = json.loads(out.read_text())
        by_pair = {tuple(p["pair"]): p for p in report["pairs"]}
        assert by_pair[("s1", "s3")]["classification"] == "LazyCopier"
        assert by_pair[("s1", "s2")]["classification"] == "Independent"

    def test_detect_dissim(self, tmp_path):
        out = tmp_path / "dis.json"
        rc = main(["detect-dissim", str(DATA / "movie_ratings.csv"),
                   "--out", str(out)])
        assert rc == 0
        report = json.loads(out.read_text())
        top = report["pairs"][0]
        assert tuple(top["pair"]) == ("r1", "r4")
        assert top["flagged"]
        matrix = report["consensus"]["the matrix"]
        assert matrix["debiased"]["bad"] > matrix["naive"]["bad"]


class TestRank:
    def test_rank_order(self, tmp_path):
        out = tmp_path / "rank.json"
        rc = main(["rank", str(DATA / "affiliations_snapshot.csv"),
                   "-k", "5", "--out", str(out)])
        assert rc == 0
        report = json.loads(out.read_text())
        order = [r["source"] for r in report["ranking"]]
        assert order[0] == "s1"
        assert order.index("s3") < order.index("s4")


class TestSimulate:
    def write_spec(self, tmp_path, seed=None):
        spec = {
            "items": 40, "domain_size": 3,
            "sources": [
                {"id": "a", "accuracy": 0.85, "coverage": 0.9},
                {"id": "b", "accuracy": 0.7, "coverage": 0.9},
                {"id": "c", "role": "copier", "target": "a",
                 "copy_rate": 0.9, "accuracy": 0.6},
            ],
        }
        if seed is not None:
            spec["seed"] = seed
        path = tmp_path / "spec.json"
        path.write_text(json.dumps(spec))
        return path

    def test_simulate_requires_seed(self, tmp_path, capsys):
        path = self.write_spec(tmp_path)
        assert main(["simulate", str(path)]) == 1
        assert "seed" in capsys.readouterr().err

    def test_simulate_deterministic_bytes(self, tmp_path):
        path = self.write_spec(tmp_path)
        outs = []
        for name in ("r1.json", "r2.json"):
            out = tmp_path / name
            rc = main(["simulate", str(path), "--seed", "7", "--eval",
                       "--out", str(out)])
            assert rc == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_simulate_eval_sections(self, tmp_path):
        path = self.write_spec(tmp_path)
        out = tmp_path / "r.json"
        data_out = tmp_path / "data.csv"
        rc = main(["simulate", str(path), "--seed", "3", "--eval",
                   "--out", str(out), "--dump-data", str(data_out)])
        assert rc == 0
        report = json.loads(out.read_text())
        assert report["scenario"]["seed"] == 3
        assert report["scenario"]["hash"]
        assert "dependence_eval" in report and "fusion_eval" in report
        assert data_out.exists()
        import depfuse
        ds = depfuse.parse_observations(data_out.read_text())
        assert len(ds) == report["observations"]


class TestEvalCommand:
    def test_eval_from_reports(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({
            "items": 60, "domain_size": 3, "seed": 5,
            "sources": [
                {"id": "a", "accuracy": 0.85},
                {"id": "b1", "accuracy": 0.85},
                {"id": "b2", "accuracy": 0.85},
                {"id": "c", "role": "copier", "target": "a", "copy_rate": 0.95,
                 "accuracy": 0.6},
            ]}))
        sim_out = tmp_path / "sim.json"
        assert main(["simulate", str(spec), "--seed", "5", "--eval",
                     "--out", str(sim_out)]) == 0
        eval_out = tmp_path / "eval.json"
        rc = main(["eval", "--detected", str(sim_out), "--planted", str(sim_out),
                   "--out", str(eval_out)])
        assert rc == 0
        report = json.loads(eval_out.read_text())
        assert report["dependence_eval"]["recall"] == 1.0


class TestErrors:
    def test_missing_input(self, capsys):
        assert main(["fuse", "/nonexistent.csv"]) == 1
        assert "not found" in capsys.readouterr().err

    def test_malformed_input(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("source,item,value\nonly,two\n")
        assert main(["fuse", str(bad)]) == 1
        assert "line" in capsys.readouterr().err

    def test_unknown_flag(self, capsys):
        assert main(["fuse", "x.csv", "--bogus"]) == 1

    def test_temporal_input_to_snapshot_command(self, capsys):
        assert main(["fuse", str(DATA / "affiliations_history.csv")]) == 1
        assert "--at" in capsys.readouterr().err

    def test_at_projects_temporal(self, tmp_path):
        out = tmp_path / "r.json"
        rc = main(["fuse", str(DATA / "affiliations_history.csv"),
                   "--at", "2004", "--out", str(out)])
        assert rc == 0
        report = json.loads(out.read_text())
        assert report["items"]["suciu"]["chosen"] == "uw"

    def test_strict_nonconvergence_exit_2(self, tmp_path):
        # oscillation-prone degenerate config: one iteration only
        out = tmp_path / "r.json"
        rc = main(["fuse", str(DATA / "affiliations_snapshot.csv"),
                   "--max-iterations", "1", "--strict", "--out", str(out)])
        assert rc == 2

    def test_nonstrict_nonconvergence_exit_0(self, tmp_path):
        out = tmp_path / "r.json"
        rc = main(["fuse", str(DATA / "affiliations_snapshot.csv"),
                   "--max-iterations", "1", "--out", str(out)])
        assert rc == 0
        assert not json.loads(out.read_text())["fixpoint"]["converged"]


class TestFigures:
    def test_figures_rendered(self, tmp_path):
        figdir = tmp_path / "figs"
        rc = main(["detect", str(DATA / "affiliations_snapshot.csv"),
                   "--out", str(tmp_path / "r.json"), "--figures", str(figdir)])
        assert rc == 0
        assert (figdir / "dependence_posteriors.png").exists()
        assert (figdir / "dependence_posteriors.csv").exists()
        assert (figdir / "source_accuracy.png").exists()

    def test_eval_figures(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({
            "items": 30, "domain_size": 3, "seed": 2,
            "sources": [{"id": "a", "accuracy": 0.8},
                        {"id": "b", "accuracy": 0.8},
                        {"id": "c", "role": "copier", "target": "a",
                         "copy_rate": 0.9, "accuracy": 0.6}]}))
        figdir = tmp_path / "figs"
        rc = main(["simulate", str(spec), "--seed", "2", "--eval",
                   "--out", str(tmp_path / "r.json"), "--figures", str(figdir)])
        assert rc == 0
        assert (figdir / "detection_sweep.png").exists()
        assert (figdir / "detection_sweep.csv").exists()
        assert (figdir / "fusion_accuracy.png").exists()


class TestSubprocessDeterminism:
    def test_hash_seed_independence(self, tmp_path):
        # same run, three different PYTHONHASHSEEDs: identical bytes
        blobs = []
        for hs in ("0", "1", "2"):
            out = tmp_path / f"r{hs}.json"
            proc = run_cli(["detect", str(DATA / "affiliations_snapshot.csv"),
                            "--out", str(out)],
                           env_extra={"PYTHONHASHSEED": hs})
            assert proc.returncode == 0, proc.stderr
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1] == blobs[2]
