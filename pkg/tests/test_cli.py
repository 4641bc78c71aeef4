import json

import numpy as np
import pytest

from localcc.cli import SCHEMA, dispatch, render, strip_timing
from localcc.clustering import cost
from localcc.graph import cluster_graph, format_graph, parse_clustering, parse_graph, random_graph


def _run(capsys, *argv):
    code = dispatch(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def _json(capsys, *argv):
    code, out, _ = _run(capsys, *argv)
    return code, json.loads(out)


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_generate_planted(workdir, capsys):
    code, rep = _json(capsys, "generate", "--planted", "-n", "100", "-k", "4", "--noise", "0.05",
                      "--seed", "7")
    assert code == 0 and rep["schema"] == SCHEMA
    g = parse_graph((workdir / "graph.txt").read_text())
    lab = parse_clustering((workdir / "clustering.txt").read_text())
    assert g.n == 100 and lab.size == 100
    assert rep["planted_cost"] == cost(g, lab) and rep["positive_edges"] == g.num_positive()


def test_generate_other_families(workdir, capsys):
    code, rep = _json(capsys, "generate", "--adversarial", "-n", "80", "--eps", "0.02",
                      "--graph-out", "adv.txt", "--clustering-out", "adv.lab")
    assert code == 0 and rep["family"] == "adversarial" and (workdir / "adv.lab").exists()
    code, rep = _json(capsys, "generate", "--uniform", "-n", "20", "--p", "0.3", "--graph-out", "u.txt")
    assert code == 0 and rep["family"] == "uniform"
    assert _run(capsys, "generate", "--planted", "-n", "10")[0] == 2


def test_cluster_local_all(workdir, capsys):
    g = cluster_graph(np.repeat(np.arange(4), 10))
    (workdir / "g.txt").write_text(format_graph(g))
    code, rep = _json(capsys, "cluster", "--algo", "local", "--eps", "0.1", "--seed", "7", "--all",
                      "-i", "g.txt", "--clustering-out", "out.txt")
    assert code == 0 and rep["cost"] == 0 and rep["query_count"] > 0 and "wall_time_s" in rep
    assert cost(g, parse_clustering((workdir / "out.txt").read_text())) == 0


def test_cluster_report_is_deterministic(workdir, capsys):
    (workdir / "g.txt").write_text(format_graph(random_graph(40, 0.3, 1)))
    args = ("cluster", "--algo", "local", "--eps", "0.2", "--seed", "3", "-i", "g.txt")
    a = _json(capsys, *args)[1]
    b = _json(capsys, *args)[1]
    assert render(strip_timing(a), "json") == render(strip_timing(b), "json")


def test_env_seed_fallback(workdir, capsys, monkeypatch):
    (workdir / "g.txt").write_text(format_graph(random_graph(30, 0.3, 1)))
    monkeypatch.setenv("LOCALCC_SEED", "5")
    a = _json(capsys, "cluster", "-i", "g.txt", "--eps", "0.3")[1]
    b = _json(capsys, "cluster", "-i", "g.txt", "--eps", "0.3", "--seed", "5")[1]
    assert a["seed"] == 5 and a["labels"] == b["labels"]


def test_vertex_with_handle(workdir, capsys):
    (workdir / "g.txt").write_text(format_graph(random_graph(60, 0.2, 2)))
    base = ("cluster", "-i", "g.txt", "--eps", "0.3", "--seed", "1")
    full = _json(capsys, *base)[1]
    code, first = _json(capsys, *base, "--vertex", "7", "--handle", "h.json")
    assert code == 0 and first["label"] == full["labels"][7] and first["preprocessing_queries"] > 0
    code, again = _json(capsys, *base, "--vertex", "7", "--handle", "h.json")
    assert again["preprocessing_queries"] == 0 and again["vertex_queries"] <= len(again["pivots"])
    pure = _json(capsys, *base, "--vertex", "7")[1]
    assert pure["label"] == first["label"]


@pytest.mark.parametrize("algo", ["quick", "cc", "brute", "boost", "hybrid", "stream1", "stream2", "dist"])
def test_cluster_algorithms(workdir, capsys, algo):
    g = cluster_graph(np.repeat(np.arange(3), 4))
    (workdir / "g.txt").write_text(format_graph(g))
    code, rep = _json(capsys, "cluster", "--algo", algo, "--eps", "0.2", "-i", "g.txt", "--seed", "2")
    assert code == 0 and rep["cost"] == 0 and rep["algo"] == algo


def test_stream_algorithms_agree_with_local(workdir, capsys):
    (workdir / "g.txt").write_text(format_graph(random_graph(30, 0.3, 4)))
    labels = [_json(capsys, "cluster", "--algo", a, "--eps", "0.25", "-i", "g.txt", "--seed", "9")[1]["labels"]
              for a in ("local", "stream1", "stream2", "dist")]
    assert labels[0] == labels[1] == labels[2] == labels[3]


def test_ptas_cli_and_budget(workdir, capsys):
    (workdir / "g.txt").write_text(format_graph(random_graph(10, 0.5, 3)))
    code, rep = _json(capsys, "cluster", "--algo", "ptas", "--eps", "0.5", "-i", "g.txt")
    assert code == 0 and rep["k"] == 5
    code, rep = _json(capsys, "cluster", "--algo", "ptas", "--eps", "0.5", "-i", "g.txt",
                      "--vertex", "3", "--handle", "p.json")
    assert code == 0 and (workdir / "p.json").exists()
    (workdir / "big.txt").write_text(format_graph(random_graph(60, 0.5, 3)))
    code, _, err = _run(capsys, "cluster", "--algo", "ptas", "--eps", "0.2", "-i", "big.txt",
                        "--mode", "sampled", "--max-width", "6")
    assert code == 4 and "budget" in err


def test_query_budget_exit_code(workdir, capsys):
    (workdir / "g.txt").write_text(format_graph(random_graph(40, 0.3, 1)))
    code, _, err = _run(capsys, "cluster", "-i", "g.txt", "--eps", "0.2", "--max-queries", "10")
    assert code == 4 and "budget" in err


def test_tester_exit_codes(workdir, capsys):
    (workdir / "c.txt").write_text(format_graph(cluster_graph(np.repeat(np.arange(3), 5))))
    code, rep = _json(capsys, "test", "-i", "c.txt", "--eps", "0.2")
    assert code == 0 and rep["verdict"] == "accept"
    (workdir / "r.txt").write_text(format_graph(random_graph(12, 0.5, 503)))
    code, rep = _json(capsys, "test", "-i", "r.txt", "--eps", "0.1")
    assert code == 3 and rep["verdict"] == "reject"


def test_estimate(workdir, capsys):
    (workdir / "c.txt").write_text(format_graph(cluster_graph(np.arange(20) % 2)))
    code, rep = _json(capsys, "estimate", "-i", "c.txt", "--eps", "0.3", "--format", "json")
    assert code == 0 and rep["estimate"] == 0.0


def test_usage_errors(workdir, capsys):
    assert _run(capsys, "frobnicate")[0] == 2
    assert _run(capsys, "cluster", "-i", "missing.txt")[0] == 2
    (workdir / "bad.txt").write_text("n 3\n0 9\n")
    assert _run(capsys, "cluster", "-i", "bad.txt")[0] == 2
    (workdir / "g.txt").write_text("n 3\n0 1\n")
    assert _run(capsys, "cluster", "-i", "g.txt", "--eps", "1.5")[0] == 2
    assert _run(capsys, "cluster", "-i", "g.txt", "--algo", "quick", "--vertex", "0")[0] == 2
    assert _run(capsys, "cluster", "-i", "g.txt", "--vertex", "5")[0] == 2
    assert _run(capsys, "cluster", "-i", "g.txt", "--jobs", "0")[0] == 2
    assert _run(capsys, "--help")[0] == 0


def test_tsv_and_output_file(workdir, capsys):
    (workdir / "g.txt").write_text(format_graph(random_graph(15, 0.3, 1)))
    code, out, _ = _run(capsys, "cluster", "-i", "g.txt", "--eps", "0.3", "--format", "tsv")
    rows = dict(line.split("\t", 1) for line in out.strip().splitlines())
    assert code == 0 and rows["schema"] == SCHEMA and rows["algo"] == "local"
    code, out, _ = _run(capsys, "cluster", "-i", "g.txt", "--eps", "0.3", "-o", "rep.json")
    assert out == "" and json.loads((workdir / "rep.json").read_text())["n"] == 15


def test_bench_table(workdir, capsys):
    code, rep = _json(capsys, "bench", "--algo", "local", "--eps-grid", "0.2,0.3", "--n-grid", "32,64",
                      "--seeds", "2")
    assert code == 0 and len(rep["table"]) == 4
    assert {"n", "eps", "median_queries", "median_cost"} <= set(rep["table"][0])
    code, out, _ = _run(capsys, "bench", "--algo", "quick", "--eps-grid", "0.2", "--n-grid", "16",
                        "--seeds", "2", "--format", "tsv")
    assert out.splitlines()[0].split("\t")[:2] == ["n", "eps"]
    assert _run(capsys, "bench", "--eps-grid", "x")[0] == 2


def test_verify_single_criterion(workdir, capsys):
    code, rep = _json(capsys, "verify", "--scale", "quick", "--criteria", "9")
    assert code == 0 and rep["passed"] and rep["criteria"][0]["number"] == 9
    assert _run(capsys, "verify", "--criteria", "12")[0] == 2


def test_module_entry_point():
    import subprocess
    import sys
    res = subprocess.run([sys.executable, "-m", "localcc", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "cluster" in res.stdout
