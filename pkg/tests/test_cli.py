import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

import diffal as da
from diffal.cli import main, parse_config, run_experiment, coerce_config, ConfigError


def run_cli(*args):
    return main(list(args))


@pytest.fixture()
def small_dataset(tmp_path):
    cloud, truth = da.gen_gaussians(
        [[0.0, 0.0], [10.0, 0.0]], 0.5, [60, 60], seed=100
    )
    points = tmp_path / "points.csv"
    labels = tmp_path / "truth.txt"
    da.save_csv(points, cloud)
    da.save_labels(labels, truth)
    return points, labels, cloud, truth


class TestGenData:
    def test_writes_points_truth_manifest(self, tmp_path, capsys):
        out = tmp_path / "ds"
        assert run_cli(
            "gen-data", "--dataset", "geometric", "--seed", "3",
            "--sizes", "40,40,40", "--out", str(out),
        ) == 0
        cloud = da.load_csv(out / "points.csv")
        truth = da.load_labels(out / "truth.txt")
        assert cloud.n == 120 and len(truth) == 120
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["dataset"] == "geometric"
        assert manifest["n"] == 120

    def test_hierarchical_writes_both_truths(self, tmp_path):
        out = tmp_path / "ds"
        assert run_cli(
            "gen-data", "--dataset", "hierarchical", "--seed", "1",
            "--per-cluster", "20", "--out", str(out),
        ) == 0
        assert (out / "truth.txt").exists()
        assert len(np.unique(da.load_labels(out / "truth_coarse.txt"))) == 2

    def test_matches_library_generator(self, tmp_path):
        out = tmp_path / "ds"
        run_cli("gen-data", "--dataset", "bottleneck", "--seed", "5",
                "--sizes", "30,30,10", "--out", str(out))
        cloud, truth = da.gen_bottleneck(seed=5, sizes=(30, 30, 10))
        loaded = da.load_csv(out / "points.csv")
        assert np.allclose(loaded.points, cloud.points, atol=0)


class TestPipelineCommands:
    def test_build_graph_summary(self, small_dataset, capsys):
        points, _, _, _ = small_dataset
        assert run_cli("build-graph", "--data", str(points), "--k", "8") == 0
        out = capsys.readouterr().out
        assert "n=120" in out and "eigenvalues" in out

    def test_lund_writes_labels_and_metrics(self, small_dataset, tmp_path, capsys):
        points, labels, _, truth = small_dataset
        out = tmp_path / "lund_labels.txt"
        scores_out = tmp_path / "scores.csv"
        code = run_cli(
            "lund", "--data", str(points), "--truth", str(labels),
            "--t", "100", "--out", str(out), "--scores-out", str(scores_out),
        )
        assert code == 0
        got = da.load_labels(out)
        assert len(got) == 120
        assert "OA=" in capsys.readouterr().out
        assert scores_out.read_text().startswith("index,p,rho,score")

    def test_land_batch(self, small_dataset, tmp_path, capsys):
        points, labels, _, truth = small_dataset
        out = tmp_path / "land_labels.txt"
        code = run_cli(
            "land", "--data", str(points), "--truth", str(labels),
            "--budget", "2", "--t", "100", "--out", str(out),
        )
        assert code == 0
        got = da.load_labels(out)
        assert da.overall_accuracy(got, truth) == 1.0

    def test_land_interactive_subprocess(self, small_dataset, tmp_path):
        points, _, _, truth = small_dataset
        out = tmp_path / "labels.txt"
        proc = subprocess.run(
            [sys.executable, "-m", "diffal.cli", "land", "--data", str(points),
             "--interactive", "--budget", "2", "--t", "100", "--out", str(out)],
            input="1\n2\n", capture_output=True, text=True, timeout=120,
        )
        assert proc.returncode == 0, proc.stderr
        prompts = [l for l in proc.stdout.splitlines() if l.startswith("QUERY ")]
        assert len(prompts) == 2
        assert out.exists()

    def test_scan_t_csv(self, tmp_path):
        out = tmp_path / "scan.csv"
        code = run_cli(
            "scan-t", "--dataset", "hierarchical", "--data-seed", "7",
            "--t-grid", "2:5:0.5", "--out", str(out),
        )
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("t_log10,k_hat,d_in,d_btw,score_1")
        k_hats = [int(l.split(",")[1]) for l in lines[1:] if l.split(",")[1]]
        assert 4 in k_hats or 2 in k_hats

    @pytest.mark.filterwarnings("ignore:scan skipped")
    def test_scan_t_single_gaussian_mostly_one_cluster(self, tmp_path):
        cloud, _ = da.gen_gaussians([[0.0, 0.0]], 1.0, [150], seed=30)
        points = tmp_path / "blob.csv"
        da.save_csv(points, cloud)
        out = tmp_path / "scan.csv"
        assert run_cli(
            "scan-t", "--data", str(points), "--t-grid", "0:4:0.5", "--out", str(out)
        ) == 0
        k_hats = [
            int(l.split(",")[1])
            for l in out.read_text().strip().splitlines()[1:]
            if l.split(",")[1]
        ]
        assert sum(k == 1 for k in k_hats) > len(k_hats) / 2

    def test_scan_t_disconnected_components_stay_two(self, tmp_path):
        # once each component has internally mixed, the cross-component
        # distances never collapse, so the estimate stays 2 no matter how
        # large t gets
        rng = np.random.default_rng(31)
        pts = np.vstack([
            rng.normal(scale=0.2, size=(60, 2)),
            rng.normal(scale=0.2, size=(60, 2)) + [500.0, 0.0],
        ])
        points = tmp_path / "two.csv"
        da.save_csv(points, da.PointCloud(pts))
        out = tmp_path / "scan.csv"
        assert run_cli(
            "scan-t", "--data", str(points), "--k", "5",
            "--t-grid", "2:8:1", "--out", str(out),
        ) == 0
        k_hats = [
            int(l.split(",")[1])
            for l in out.read_text().strip().splitlines()[1:]
            if l.split(",")[1]
        ]
        assert len(k_hats) == 7 and all(k == 2 for k in k_hats)

    def test_purity_csv(self, small_dataset, tmp_path):
        points, labels, _, _ = small_dataset
        out = tmp_path / "purity.csv"
        code = run_cli(
            "purity", "--data", str(points), "--truth", str(labels),
            "--t", "100", "--levels", "5", "--out", str(out),
        )
        assert code == 0
        lines = out.read_text().strip().splitlines()
        methods = {l.split(",")[2] for l in lines[1:]}
        assert methods == {"lund", "single", "average"}
        assert len(lines) == 1 + 3 * 5


class TestBench:
    def _config(self, tmp_path, **extra):
        lines = {
            "dataset": "gaussians",
            "data_seed": "11",
            "sizes": "50,50,50",
            "stddev": "0.5",
            "means": "0,0;6,0;3,5",
            "t": "100",
            "budgets": "3,6",
            "methods": "land,land-random,cbal,lund",
            "trials": "2",
            "root_seed": "40",
        }
        lines.update(extra)
        path = tmp_path / "bench.cfg"
        path.write_text("".join(f"{k} = {v}\n" for k, v in lines.items()))
        return path

    def test_run_and_rerun_byte_identical(self, tmp_path):
        cfg_path = self._config(tmp_path)
        out1, out2 = tmp_path / "run1", tmp_path / "run2"
        cfg = parse_config(cfg_path)
        res1, man1 = run_experiment(cfg, out1)
        res2, man2 = run_experiment(parse_config(cfg_path), out2)
        assert Path(res1).read_bytes() == Path(res2).read_bytes()
        m1 = json.loads(Path(man1).read_text())
        m2 = json.loads(Path(man2).read_text())
        m1.pop("timestamp"), m2.pop("timestamp")
        assert m1 == m2

    def test_rows_cover_methods_and_budgets(self, tmp_path):
        cfg = parse_config(self._config(tmp_path))
        res, _ = run_experiment(cfg, tmp_path / "out")
        lines = Path(res).read_text().strip().splitlines()
        assert lines[0] == "dataset,method,budget_or_level,seed,oa,aa,kappa"
        rows = [l.split(",") for l in lines[1:]]
        methods = {r[1] for r in rows}
        assert methods == {"land", "land-random", "cbal", "lund"}
        land_rows = [r for r in rows if r[1] == "land"]
        assert {int(r[2]) for r in land_rows} == {3, 6}
        random_rows = [r for r in rows if r[1] == "land-random"]
        assert len(random_rows) == 4  # 2 budgets x 2 trials

    def test_full_budget_rows_are_perfect(self, tmp_path):
        cfg = parse_config(self._config(tmp_path, budgets="150", methods="land"))
        res, _ = run_experiment(cfg, tmp_path / "out")
        rows = [l.split(",") for l in Path(res).read_text().strip().splitlines()[1:]]
        assert all(float(r[4]) == 1.0 for r in rows)

    def test_cli_entrypoint(self, tmp_path, capsys):
        cfg_path = self._config(tmp_path, methods="land", budgets="3")
        code = run_cli("bench", "--config", str(cfg_path), "--out", str(tmp_path / "o"))
        assert code == 0
        assert (tmp_path / "o" / "results.csv").exists()
        assert (tmp_path / "o" / "manifest.json").exists()

    def test_manifest_records_hashes(self, tmp_path):
        cfg = parse_config(self._config(tmp_path, methods="land", budgets="3"))
        _, man = run_experiment(cfg, tmp_path / "out")
        manifest = json.loads(Path(man).read_text())
        assert len(manifest["resolved"]["points_sha256"]) == 64
        assert manifest["resolved"]["t"] == 100.0


class TestConfigAndExitCodes:
    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("nonsense = 4\n")
        with pytest.raises(ConfigError):
            parse_config(path)

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigError):
            coerce_config({"k": "many"})

    def test_config_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("mystery = 1\n")
        assert run_cli("bench", "--config", str(bad)) == 2
        assert "config error" in capsys.readouterr().err

    def test_data_error_exit_code(self, tmp_path, capsys):
        assert run_cli(
            "build-graph", "--data", str(tmp_path / "missing.csv")
        ) == 3
        assert "data error" in capsys.readouterr().err

    def test_flag_overrides_config(self, tmp_path):
        path = tmp_path / "cfg"
        path.write_text("dataset = geometric\ndata_seed = 1\n")
        out = tmp_path / "scan.csv"
        code = run_cli(
            "scan-t", "--config", str(path), "--dataset", "bottleneck",
            "--data-seed", "2", "--t-grid", "3:3:1", "--out", str(out),
        )
        assert code == 0

    def test_comments_and_blank_lines(self, tmp_path):
        path = tmp_path / "cfg"
        path.write_text("# experiment\n\ndataset = geometric  # generator\n")
        cfg = parse_config(path)
        assert cfg["dataset"] == "geometric"
