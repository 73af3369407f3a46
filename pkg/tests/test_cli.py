import json

import numpy as np
import pytest

import graphrf as gr
from graphrf.cli import main


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def strip_timing(doc):
    doc = dict(doc)
    doc.pop("timing", None)
    return doc


@pytest.fixture()
def er_file(tmp_path):
    path = tmp_path / "er.edges"
    rc = main(["gen-graph", "--family", "er", "--nodes", "24", "--p-edge", "0.3",
               "--seed", "3", "--out", str(path)])
    assert rc == 0
    return path


class TestGenGraph:
    def test_er_output_loads(self, er_file):
        g = gr.load_edge_list(er_file, directed=False)
        assert g.n == 24

    def test_grid_with_attrs(self, tmp_path):
        edges = tmp_path / "grid.edges"
        attrs = tmp_path / "grid.attrs"
        rc = main(["gen-graph", "--family", "grid", "--nu", "5", "--nv", "5",
                   "--out", str(edges), "--attrs-out", str(attrs)])
        assert rc == 0
        g = gr.load_edge_list(edges, directed=False)
        a = gr.load_attributes(attrs)
        assert g.n == 25 and a.shape == (25, 3)

    def test_unknown_family_usage_error(self, tmp_path):
        rc = main(["gen-graph", "--family", "hypercube", "--out", str(tmp_path / "x")])
        assert rc == 1


class TestEstimate:
    def test_single_run_writes_json(self, tmp_path, er_file):
        out = tmp_path / "res"
        rc = main(["estimate", "--graph", str(er_file), "--kernel", "diffusion",
                   "--sigma", "0.25", "--p-halt", "0.1", "--walks", "8",
                   "--seed", "7", "--out-dir", str(out)])
        assert rc == 0
        doc = read_json(out / "estimate.json")
        assert doc["command"] == "estimate"
        assert doc["inputs"]["seed"] == 7
        assert 0.0 < doc["metrics"]["relative_frobenius_error"] < 1.0
        assert "exact_seconds" in doc["timing"]

    def test_sweep_writes_csv_and_figure(self, tmp_path, er_file):
        out = tmp_path / "res"
        rc = main(["estimate", "--graph", str(er_file), "--kernel", "diffusion",
                   "--walks", "2,8", "--repeats", "2", "--seed", "1",
                   "--out-dir", str(out)])
        assert rc == 0
        assert (out / "estimate_sweep.csv").exists()
        assert (out / "estimate_error_vs_walks.png").exists()
        rows = (out / "estimate_sweep.csv").read_text().strip().splitlines()
        assert rows[0] == "walks,mean_error,std_error"
        assert len(rows) == 3

    def test_no_plot_flag(self, tmp_path, er_file):
        out = tmp_path / "res"
        rc = main(["estimate", "--graph", str(er_file), "--kernel", "diffusion",
                   "--walks", "2,4", "--no-plot", "--out-dir", str(out)])
        assert rc == 0
        assert not (out / "estimate_error_vs_walks.png").exists()

    def test_inverse_cosine_dispatches_to_iterative_path(self, tmp_path, er_file):
        out = tmp_path / "res"
        rc = main(["estimate", "--graph", str(er_file), "--kernel", "inverse_cosine",
                   "--walks", "4", "--out-dir", str(out)])
        assert rc == 0
        assert read_json(out / "estimate.json")["inputs"]["kernel"] == "inverse_cosine"

    def test_bundled_graph(self, tmp_path):
        out = tmp_path / "res"
        rc = main(["estimate", "--bundled", "karate", "--kernel", "diffusion",
                   "--walks", "4", "--out-dir", str(out)])
        assert rc == 0

    def test_missing_graph_is_usage_error(self, tmp_path):
        rc = main(["estimate", "--graph", str(tmp_path / "absent.edges"),
                   "--kernel", "diffusion", "--out-dir", str(tmp_path)])
        assert rc == 1

    def test_unknown_flag_is_usage_error(self, tmp_path):
        rc = main(["estimate", "--bundled", "karate", "--kernel", "diffusion",
                   "--frobble", "--out-dir", str(tmp_path)])
        assert rc == 1

    def test_divergent_series_is_numerical_error(self, tmp_path):
        rc = main(["estimate", "--bundled", "karate", "--kernel",
                   "d_regularised_laplacian", "--sigma", "60.0",
                   "--walks", "4", "--out-dir", str(tmp_path)])
        assert rc == 2

    def test_modulation_table_input(self, tmp_path, er_file):
        table = tmp_path / "f.txt"
        gr.modulation_for(gr.KernelSpec.diffusion(sigma=0.25)).save_table(table, 40)
        out = tmp_path / "res"
        rc = main(["estimate", "--graph", str(er_file), "--kernel", "diffusion",
                   "--sigma", "0.25", "--modulation-file", str(table),
                   "--walks", "6", "--out-dir", str(out)])
        assert rc == 0
        assert read_json(out / "estimate.json")["inputs"]["modulation"].startswith("table:")


class TestDeterminism:
    def test_repeat_runs_bit_identical_minus_timing(self, tmp_path, er_file):
        docs = []
        for tag in ("a", "b"):
            out = tmp_path / tag
            rc = main(["estimate", "--graph", str(er_file), "--kernel", "diffusion",
                       "--walks", "6", "--seed", "5", "--out-dir", str(out), "--no-plot"])
            assert rc == 0
            docs.append(strip_timing(read_json(out / "estimate.json")))
        docs[0]["outputs"] = docs[1]["outputs"] = None  # paths differ by design
        assert docs[0] == docs[1]

    def test_thread_flag_does_not_change_results(self, tmp_path, er_file):
        docs = []
        for tag, threads in (("t1", "1"), ("t4", "4")):
            out = tmp_path / tag
            rc = main(["estimate", "--graph", str(er_file), "--kernel", "diffusion",
                       "--walks", "6", "--seed", "5", "--threads", threads,
                       "--out-dir", str(out), "--no-plot"])
            assert rc == 0
            doc = strip_timing(read_json(out / "estimate.json"))
            doc["outputs"] = None
            doc["inputs"]["threads"] = None
            docs.append(doc)
        assert docs[0] == docs[1]


class TestOde:
    def test_basic_run(self, tmp_path, er_file):
        out = tmp_path / "res"
        rc = main(["ode", "--graph", str(er_file), "--t", "1.0", "--samples", "5",
                   "--walks", "4", "--quad", "60", "--seed", "2", "--out-dir", str(out)])
        assert rc == 0
        doc = read_json(out / "ode.json")
        assert len(doc["metrics"]["x_hat"]) == 24
        assert doc["metrics"]["normalized_error"] >= 0.0

    def test_walk_sweep(self, tmp_path, er_file):
        out = tmp_path / "res"
        rc = main(["ode", "--graph", str(er_file), "--walks", "2,8", "--samples", "4",
                   "--quad", "50", "--out-dir", str(out)])
        assert rc == 0
        assert (out / "ode_sweep.csv").exists()
        assert (out / "ode_error_vs_walks.png").exists()

    def test_drive_file(self, tmp_path, er_file):
        drive = tmp_path / "y.txt"
        drive.write_text("\n".join(["0.5"] * 24))
        out = tmp_path / "res"
        rc = main(["ode", "--graph", str(er_file), "--drive", str(drive),
                   "--samples", "3", "--walks", "2", "--quad", "40",
                   "--out-dir", str(out)])
        assert rc == 0

    def test_wrong_drive_length(self, tmp_path, er_file):
        drive = tmp_path / "y.txt"
        drive.write_text("1.0\n2.0\n")
        rc = main(["ode", "--graph", str(er_file), "--drive", str(drive),
                   "--out-dir", str(tmp_path)])
        assert rc == 1


class TestCluster:
    def test_karate_run(self, tmp_path):
        out = tmp_path / "res"
        rc = main(["cluster", "--bundled", "karate", "--k", "3", "--walks", "20",
                   "--seed", "1", "--out-dir", str(out)])
        assert rc == 0
        doc = read_json(out / "cluster.json")
        assert 0.0 <= doc["metrics"]["clustering_error"] <= 1.0
        labels = (out / "cluster_labels.csv").read_text().strip().splitlines()
        assert len(labels) == 35  # header + 34 nodes


class TestRegress:
    def test_grid_regression(self, tmp_path):
        edges = tmp_path / "grid.edges"
        attrs = tmp_path / "grid.attrs"
        main(["gen-graph", "--family", "grid", "--nu", "6", "--nv", "6",
              "--out", str(edges), "--attrs-out", str(attrs)])
        out = tmp_path / "res"
        rc = main(["regress", "--graph", str(edges), "--attrs", str(attrs),
                   "--kernel", "diffusion", "--walks", "8", "--seed", "4",
                   "--out-dir", str(out)])
        assert rc == 0
        doc = read_json(out / "regress.json")
        assert doc["metrics"]["angular_error"] >= 0.0
        assert (out / "regress_predictions.csv").exists()

    def test_missing_attrs_usage_error(self, tmp_path, er_file):
        rc = main(["regress", "--graph", str(er_file), "--kernel", "diffusion",
                   "--out-dir", str(tmp_path)])
        assert rc == 1


class TestTrainMod:
    def test_short_training_run(self, tmp_path):
        out = tmp_path / "res"
        rc = main(["train-mod", "--bundled", "er_small", "--kernel",
                   "d_regularised_laplacian", "--sigma", "0.8", "--walks", "8",
                   "--epochs", "4", "--walk-sigma", "0.39", "--seed", "3",
                   "--out-dir", str(out)])
        assert rc == 0
        doc = read_json(out / "train_mod.json")
        assert set(doc["metrics"]["params"]) == {"w1", "b1", "w2", "b2"}
        assert (out / "train_mod_trace.csv").exists()
        assert (out / "train_mod_params.json").exists()
        assert (out / "train_mod_modulation.txt").exists()
        assert (out / "train_mod_trace.png").exists()
        assert (out / "train_mod_modulation.png").exists()
        trace_rows = (out / "train_mod_trace.csv").read_text().strip().splitlines()
        assert len(trace_rows) == 5  # header + 4 epochs

    def test_trained_params_feed_estimate(self, tmp_path):
        out = tmp_path / "res"
        main(["train-mod", "--bundled", "er_small", "--kernel",
              "d_regularised_laplacian", "--sigma", "0.8", "--walks", "4",
              "--epochs", "2", "--walk-sigma", "0.39", "--out-dir", str(out)])
        out2 = tmp_path / "res2"
        rc = main(["estimate", "--bundled", "er_small", "--kernel",
                   "d_regularised_laplacian", "--sigma", "0.8",
                   "--params-file", str(out / "train_mod_params.json"),
                   "--walk-sigma", "0.39", "--walks", "4", "--out-dir", str(out2)])
        assert rc == 0


class TestBench:
    def test_small_sweep(self, tmp_path):
        out = tmp_path / "res"
        rc = main(["bench", "--nodes", "40,80", "--degree", "6", "--kernel",
                   "diffusion", "--walks", "4", "--seed", "2", "--out-dir", str(out)])
        assert rc == 0
        rows = (out / "bench.csv").read_text().strip().splitlines()
        assert rows[0] == "nodes,exact_seconds,grf_seconds,error"
        assert len(rows) == 3
        assert (out / "bench_timing.png").exists()
        doc = read_json(out / "bench.json")
        assert doc["metrics"]["exact_time_exponent"] is not None
