import csv

import pytest

from liret.cli import main
from liret.evaluation import RunList
from liret.store import read_store


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A small synthetic world generated through the CLI itself."""
    root = tmp_path_factory.mktemp("cli")
    rc = main(
        [
            "synth",
            "--out-dir",
            str(root),
            "--seed",
            "11",
            "--dim",
            "8",
            "--docs",
            "80",
            "--doc-len",
            "10",
            "--vocab-size",
            "60",
            "--n-queries",
            "6",
        ]
    )
    assert rc == 0
    return root


def common(ws, *extra):
    return [
        "--store",
        str(ws / "corpus.liv"),
        "--queries",
        str(ws / "queries.tsv"),
        "--qrels",
        str(ws / "qrels.txt"),
        "--vocab",
        str(ws / "vocab.txt"),
        "--seed",
        "11",
        "--dim",
        "8",
        "--out-dir",
        str(ws),
        *extra,
    ]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_synth_outputs(workspace):
    assert (workspace / "corpus.liv").exists()
    store = read_store(workspace / "corpus.liv")
    assert len(store.passages) == 80
    assert (workspace / "vocab.txt").read_text().splitlines()[0] == "[CLS]"


def test_index_command(workspace, capsys):
    assert main(["index"] + common(workspace)) == 0
    out = capsys.readouterr().out
    assert "80 passages" in out
    assert "dim 8" in out


def test_encode_command(workspace):
    out = workspace / "queries.liv"
    rc = main(
        ["encode"]
        + common(workspace)
        + ["--out", str(out), "--total-length", "32"]
    )
    assert rc == 0
    store = read_store(out)
    assert len(store.passages) == 6
    assert all(len(p.rows) == 32 for p in store.passages)


def test_retrieve_and_rerank(workspace):
    rc = main(["retrieve"] + common(workspace) + ["--k-per-token", "10"])
    assert rc == 0
    candidates = RunList.from_trec(workspace / "candidates.run")
    assert len(candidates) == 6

    rc = main(
        ["rerank"]
        + common(workspace)
        + ["--k-per-token", "10", "--cutoff", "20", "--phase", "both"]
    )
    assert rc == 0
    run = RunList.from_trec(workspace / "reranked.run")
    assert len(run) == 6
    assert all(len(run.ranking(q)) <= 20 for q in run.queries())


def test_eval_command(workspace):
    rc = main(
        [
            "eval",
            "--run",
            str(workspace / "reranked.run"),
            "--qrels",
            str(workspace / "qrels.txt"),
            "--out-dir",
            str(workspace),
        ]
    )
    assert rc == 0
    rows = read_csv(workspace / "metrics.csv")
    names = {r["metric"] for r in rows}
    assert {"ndcg_at10", "ndcg_at1000", "map_rel1", "mrr_rel2_at10"} <= names
    assert all(0.0 <= float(r["mean"]) <= 1.0 for r in rows)


def test_eval_with_baseline(workspace):
    rc = main(
        [
            "eval",
            "--run",
            str(workspace / "reranked.run"),
            "--baseline-run",
            str(workspace / "reranked.run"),
            "--qrels",
            str(workspace / "qrels.txt"),
            "--out-dir",
            str(workspace),
        ]
    )
    assert rc == 0
    rows = read_csv(workspace / "metrics.csv")
    assert all(r["significant"] == "false" for r in rows)
    assert all(float(r["p"]) == 1.0 for r in rows)


def test_mask_sweep_command(workspace):
    rc = main(["mask-sweep"] + common(workspace) + ["--counts", "0:9:4"])
    assert rc == 0
    rows = read_csv(workspace / "mask_sweep.csv")
    assert [r["mask_count"] for r in rows] == ["0", "4", "8"]


def test_mask_sweep_config(workspace, tmp_path):
    config = tmp_path / "sweep.json"
    config.write_text('{"mask_counts": [0, 2], "k_per_token": 10, "rerank_cutoff": 20}')
    rc = main(["mask-sweep"] + common(workspace) + ["--config", str(config)])
    assert rc == 0
    rows = read_csv(workspace / "mask_sweep.csv")
    assert len(rows) == 2


def test_remap_exp_command(workspace):
    rc = main(["remap-exp"] + common(workspace) + ["--k-per-token", "10", "--cutoff", "20"])
    assert rc == 0
    rows = read_csv(workspace / "remap_experiment.csv")
    assert len(rows) == 8
    assert {"none", "all_to_text", "mask_to_text", "mask_to_all"} <= set(rows[0])


def test_swap_exp_command(workspace):
    rc = main(["swap-exp"] + common(workspace))
    assert rc == 0
    rows = read_csv(workspace / "shift_report_unrestricted.csv")
    assert rows, "expected at least one eligible query"
    assert set(rows[0]) == {"query_id", "slot", "distance"}


def test_maxlen_exp_command(workspace):
    rc = main(
        ["maxlen-exp"]
        + common(workspace)
        + ["--lengths", "32,64", "--k-per-token", "10", "--cutoff", "20"]
    )
    assert rc == 0
    rows = read_csv(workspace / "maxlen_experiment.csv")
    assert len(rows) == 6


def test_heatmap_command(workspace):
    rc = main(["heatmap"] + common(workspace) + ["--positions", "40", "--qid", "1"])
    assert rc == 0
    rows = read_csv(workspace / "heatmap_1.csv")
    assert len(rows) == 40
    assert rows[0]["position"] == "0"


def test_missing_inputs_fail(workspace, tmp_path):
    with pytest.raises(SystemExit):
        main(["rerank", "--out-dir", str(tmp_path)])
    # a store path that does not exist exits nonzero via the error path
    rc = main(["index", "--store", str(tmp_path / "nope.liv")])
    assert rc == 1


def test_bad_store_reports_error(workspace, tmp_path, capsys):
    bad = tmp_path / "bad.liv"
    bad.write_bytes(b"XXXX0000000000000000")
    rc = main(["index", "--store", str(bad)])
    assert rc == 1
    assert "bad magic" in capsys.readouterr().err
