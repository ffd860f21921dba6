import csv
import json
from pathlib import Path

import numpy as np
import pytest

from dtnkatz import cli
from dtnkatz.ingestion import parse_contacts
from dtnkatz.katz import collapse
from dtnkatz.pipeline import read_scores
from dtnkatz.trace_model import WindowConfig, build_tensor, ground_truth_slice

SMALL = ["--nodes", "15", "--duration", "3900", "--epoch", "600", "--seed", "9"]


def run(capsys, *argv) -> tuple[int, Path | None]:
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr().out.strip()
    return code, Path(out) if code == 0 else None


def files(d: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


@pytest.fixture(scope="module")
def trace(tmp_path_factory):
    out = tmp_path_factory.mktemp("gen")
    assert cli.main(["generate", "--out", str(out), *SMALL]) == 0
    (run_dir,) = out.iterdir()
    return run_dir


def write_contacts(path: Path, rows) -> Path:
    path.write_text("version=1,kind=contacts\n" + "".join(f"{a},{b},{s},{e}\n" for a, b, s, e in rows))
    return path


def test_generate_outputs_and_determinism(capsys, tmp_path, trace):
    code, d = run(capsys, "generate", "--out", tmp_path, *SMALL)
    assert code == 0
    assert files(d) == files(trace)
    params = json.loads((d / "params.json").read_text())
    assert params["node_count"] == 15 and params["seed"] == 9
    assert (d / "contacts.csv").read_text().startswith("version=1,kind=contacts\n")
    assert (d / "visits.csv").read_text().startswith("version=1,kind=visits\n")


def test_generate_config_file(capsys, tmp_path):
    cfg = tmp_path / "tvc.conf"
    cfg.write_text("# small run\nnode_count = 3\nduration=600\n")
    code, d = run(capsys, "generate", "--out", tmp_path / "o", "--config", cfg, "--seed", "1")
    assert code == 0
    assert json.loads((d / "params.json").read_text())["node_count"] == 3
    cfg.write_text("bogus = 1\n")
    assert run(capsys, "generate", "--out", tmp_path / "o", "--config", cfg)[0] == cli.EXIT_INPUT


def test_generate_single_node_has_header_only(capsys, tmp_path):
    code, d = run(capsys, "generate", "--out", tmp_path, "--nodes", "1", "--duration", "600")
    assert code == 0
    assert (d / "contacts.csv").read_text() == "version=1,kind=contacts\n"


def test_generate_invalid_params(capsys, tmp_path):
    assert run(capsys, "generate", "--out", tmp_path, "--p-switch", "0.9", "--p-roam", "0.5")[0] == cli.EXIT_USAGE


def test_score_truncated_first_term_is_scaled_collapse(capsys, tmp_path, trace):
    contacts = trace / "contacts.csv"
    code, d = run(capsys, "score", "--out", tmp_path, "--contacts", contacts, "--slices", "12",
                  "--mode", "truncated", "--lmax", "1", "--beta", "0.01")
    assert code == 0
    with contacts.open() as fh:
        events, reg = parse_contacts(fh)
    x = collapse(build_tensor(events, WindowConfig(0, 300, 12), reg.count), 0.2).dense()
    with (d / "scores.csv").open() as fh:
        s = read_scores(fh, reg.count)
    np.testing.assert_allclose(s, 0.01 * x, rtol=1e-15, atol=0)
    params = json.loads((d / "params.json").read_text())
    assert params["mode"] == "truncated-L1" and params["nodes"] == list(reg.ids)


def test_score_distributed_matches_centralized_on_small_components(capsys, tmp_path):
    contacts = write_contacts(tmp_path / "c.csv", [
        ("a", "b", 0, 100), ("b", "c", 200, 700), ("d", "e", 50, 60), ("d", "e", 400, 900), ("f", "g", 0, 1200),
    ])
    outs = []
    for mode in ("centralized", "distributed-k2"):
        code, d = run(capsys, "score", "--out", tmp_path, "--contacts", contacts, "--slices", "3", "--mode", mode)
        assert code == 0
        outs.append((d / "scores.csv").read_text())
    assert outs[0] == outs[1]


def test_eval_report_files(capsys, tmp_path, trace):
    code, d = run(capsys, "eval", "--out", tmp_path, "--contacts", trace / "contacts.csv", "--slices", "12",
                  "--mode", "distributed-k2")
    assert code == 0
    assert sorted(p.name for p in d.iterdir()) == ["cdf.csv", "report.json", "roc.csv"]
    rep = json.loads((d / "report.json").read_text())
    assert 0.5 < rep["auc"] <= 1.0
    assert rep["params"]["mode"] == "distributed-k2"
    assert (d / "roc.csv").read_text().startswith("false_positive_rate,true_positive_rate\n0.0,0.0\n")


def test_eval_oracle_scores_are_perfect(capsys, tmp_path, trace):
    contacts = trace / "contacts.csv"
    with contacts.open() as fh:
        events, reg = parse_contacts(fh)
    truth = ground_truth_slice(events, WindowConfig(0, 300, 12), reg.count)
    scores = tmp_path / "oracle.csv"
    iu, ju = np.triu_indices(reg.count, 1)
    scores.write_text("i,j,score\n" + "".join(f"{i},{j},{truth[i, j]}\n" for i, j in zip(iu, ju)))
    code, d = run(capsys, "eval", "--out", tmp_path, "--contacts", contacts, "--slices", "12", "--scores", scores)
    assert code == 0
    rep = json.loads((d / "report.json").read_text())
    assert rep["auc"] == 1.0 and rep["top_l_ratio"] == 1.0


def test_eval_new_links_regime(capsys, tmp_path, trace):
    code, d = run(capsys, "eval", "--out", tmp_path, "--contacts", trace / "contacts.csv", "--slices", "12",
                  "--regime", "new")
    assert code in (0, cli.EXIT_EVAL)
    if code == 0:
        rep = json.loads((d / "report.json").read_text())
        assert rep["regime"] == "new" and rep["candidates"] < 15 * 14 // 2


def test_eval_rerun_is_byte_identical(capsys, tmp_path, trace):
    argv = ["eval", "--contacts", trace / "contacts.csv", "--slices", "12"]
    _, a = run(capsys, *argv, "--out", tmp_path / "a")
    _, b = run(capsys, *argv, "--out", tmp_path / "b")
    assert a.name == b.name and files(a) == files(b)


def test_compare_requires_visits(capsys, tmp_path, trace):
    code = cli.main(["compare", "--out", str(tmp_path), "--contacts", str(trace / "contacts.csv")])
    assert code == cli.EXIT_INPUT
    assert "--visits" in capsys.readouterr().err


def test_compare_rows(capsys, tmp_path, trace):
    code, d = run(capsys, "compare", "--out", tmp_path, "--contacts", trace / "contacts.csv",
                  "--visits", trace / "visits.csv", "--granules", "300,1800", "--horizon", "3600")
    assert code == 0
    lines = (d / "compare.csv").read_text().splitlines()
    assert lines[0] == "method,granule,auc,top_l_ratio"
    methods = [line.split(",")[:2] for line in lines[1:]]
    assert methods == [[m, g] for g in ("300", "1800") for m in ("katz", "svd", "gap")]
    for line in lines[1:]:
        assert line.split(",")[2] != ""


def test_sweep_default_grid(capsys, tmp_path, trace):
    code, d = run(capsys, "sweep", "--out", tmp_path, "--contacts", trace / "contacts.csv", "--slices", "12",
                  "--betas", "0.001,5")
    assert code == 0
    with (d / "sweep.csv").open(newline="") as fh:
        header, *rows = list(csv.reader(fh))
    assert header == ["theta", "beta", "auc", "top_l_ratio", "error"]
    assert len(rows) == 20
    assert [r[0] for r in rows[::2]] == [repr(t) for t in cli.DEFAULT_THETAS]
    assert all(r[4] == "" for r in rows if r[1] == "0.001")
    assert all(r[4].startswith("BetaTooLarge") and r[2] == "" for r in rows if r[1] == "5.0")


def test_exit_codes(capsys, tmp_path):
    good = write_contacts(tmp_path / "good.csv", [("a", "b", 0, 900), ("b", "c", 0, 900), ("a", "c", 600, 900)])
    assert run(capsys, "score", "--out", tmp_path, "--contacts", good, "--slices", "2", "--beta", "10")[0] == cli.EXIT_BETA
    bad = tmp_path / "bad.csv"
    bad.write_text("version=1,kind=contacts\na,b,10,5\n")
    assert run(capsys, "score", "--out", tmp_path, "--contacts", bad)[0] == cli.EXIT_INPUT
    assert run(capsys, "score", "--out", tmp_path, "--contacts", tmp_path / "missing.csv")[0] == cli.EXIT_INPUT
    quiet = write_contacts(tmp_path / "quiet.csv", [("a", "b", 0, 100), ("c", "d", 0, 100)])
    assert run(capsys, "eval", "--out", tmp_path, "--contacts", quiet, "--slices", "1")[0] == cli.EXIT_EVAL
    with pytest.raises(SystemExit) as exc:
        cli.main(["score", "--mode", "nope", "--contacts", str(good)])
    assert exc.value.code == cli.EXIT_USAGE
