import asyncio
import json

import pandas as pd
import pytest

from core.config import load_config
from core.core_orchestrator import core_orchestrator
from core.errors import NoTrainingSignalError
from main import main
from tools.synthetic_data import FixtureSpec, cluster_centers, write_directional_fixture

SMALL_SPEC = FixtureSpec(n_users=6, songs_per_cluster=10, events_per_pair=5, playlist_length=10)
SMALL_OVERRIDES = {
    "recommenders": {"algorithms": ["bpr", "us-bpr"], "bpr": {"factors": 4, "epochs": 5}},
    "evaluation": {"folds": 3, "list_sizes": [20, 10], "k_values": [5]},
    "rerank": {"lambdas": [0.0, 0.5, 1.0]},
}


@pytest.fixture
def small_config(tmp_path):
    return write_directional_fixture(tmp_path / "fixture", SMALL_SPEC, SMALL_OVERRIDES)


def run(workflow, config, context=None):
    return asyncio.run(core_orchestrator.run_workflow(workflow, config, context))


def test_cluster_centers_are_well_separated():
    centers = cluster_centers(8)
    for i in range(8):
        for j in range(i + 1, 8):
            assert (abs(centers[i] - centers[j]) >= 0.4).sum() >= 4


def test_pipeline_writes_every_artifact(small_config, tmp_path):
    config = load_config(small_config, output=tmp_path / "out")
    context = {}
    state = run("pipeline", config, context)
    assert [s["stage"] for s in state["stages"]] == ["analyze", "prepare", "train", "evaluate"]
    assert state["status"] == "completed"

    out = tmp_path / "out"
    for name in ("events.csv", "catalog.csv", "provenance.json"):
        assert (out / "prepared" / name).exists()
    for fold in range(3):
        for name in ("train.csv", "test.csv", "preference_model.csv", "lists_bpr.csv", "lists_us-bpr.csv"):
            assert (out / "folds" / f"fold_{fold}" / name).exists()
    for name in ("bpr_top20.csv", "bpr_top20_table.csv", "us-bpr_top10.csv", "plot_data.csv", "best_lambda.csv", "evaluation.csv"):
        assert (out / "reports" / name).exists()
    assert (out / "analysis" / "ttests.csv").exists()
    status = json.loads((out / "run_status.json").read_text(encoding="utf-8"))
    assert all(s["status"] == "completed" for s in status["stages"])

    report = context["report"]
    # خوارزميتان × حجمان × (أولي + نموذجان × وضعان × 3 قيم λ)
    assert len(report.rows) == 2 * 2 * (1 + 2 * 2 * 3)
    table = pd.read_csv(out / "reports" / "bpr_top20_table.csv")
    assert list(table.columns) == ["k", "variant", "mode", "metric", "lambda=0.0", "lambda=0.5", "lambda=1.0"]
    assert list(table["variant"].unique()) == ["initial", "global", "personalized"]
    initial = table[table["variant"] == "initial"]
    assert (initial["lambda=0.0"] == initial["lambda=1.0"]).all()
    ttests = pd.read_csv(out / "analysis" / "ttests.csv")
    assert len(ttests) == 6 * 9


def test_zero_lambda_reproduces_initial_rows(small_config, tmp_path):
    overrides = dict(SMALL_OVERRIDES, rerank={"lambdas": [0.0]})
    config = load_config(write_directional_fixture(tmp_path / "fx", SMALL_SPEC, overrides), output=tmp_path / "out")
    context = {}
    run("pipeline", config, context)
    report = context["report"]
    for row in report.rows:
        initial = report.initial_row(row.algorithm, row.list_size, row.k)
        assert (row.prec_at_k, row.map_at_k) == (initial.prec_at_k, initial.map_at_k)


def test_reports_are_byte_identical_across_runs_and_job_counts(small_config, tmp_path):
    first = load_config(small_config, output=tmp_path / "run1", jobs=1)
    second = load_config(small_config, output=tmp_path / "run2", jobs=3)
    run("pipeline", first)
    run("pipeline", second)
    for sub in ("reports", "analysis"):
        names = sorted(p.name for p in (tmp_path / "run1" / sub).iterdir())
        assert names == sorted(p.name for p in (tmp_path / "run2" / sub).iterdir())
        for name in names:
            assert (tmp_path / "run1" / sub / name).read_bytes() == (tmp_path / "run2" / sub / name).read_bytes()


def test_stages_resume_from_disk(small_config, tmp_path):
    config = load_config(small_config, output=tmp_path / "out")
    run("prepare", config)
    run("train", config)
    context = {}
    run("evaluate", config, context)
    assert context["report"].rows
    assert not (tmp_path / "out" / "analysis").exists()


def test_failed_stage_is_recorded(small_config, tmp_path, monkeypatch):
    config = load_config(small_config, output=tmp_path / "out")

    async def boom(context, **kwargs):
        raise NoTrainingSignalError("nothing to learn")

    monkeypatch.setattr(core_orchestrator.stages["train"], "process_task", boom)
    with pytest.raises(NoTrainingSignalError):
        run("pipeline", config)
    status = json.loads((tmp_path / "out" / "run_status.json").read_text(encoding="utf-8"))
    by_stage = {s["stage"]: s for s in status["stages"]}
    assert status["status"] == "failed"
    assert by_stage["prepare"]["status"] == "completed"
    assert by_stage["train"]["status"] == "failed"
    assert "nothing to learn" in by_stage["train"]["error"]
    assert by_stage["evaluate"]["status"] == "pending"


# --- سطر الأوامر ---

def cli(*argv):
    return asyncio.run(main(list(argv)))


def test_cli_pipeline_and_standalone_rerank(small_config, tmp_path):
    out = tmp_path / "cli_out"
    assert cli("pipeline", "--config", str(small_config), "--output", str(out), "--log-level", "WARNING") == 0

    payload = json.loads(small_config.read_text(encoding="utf-8"))
    payload["standalone_rerank"] = {
        "model": str(out / "folds" / "fold_0" / "preference_model.csv"),
        "lists": str(out / "folds" / "fold_0" / "lists_bpr.csv"),
        "lambda": 0.5,
    }
    rerank_config = small_config.parent / "rerank.json"
    rerank_config.write_text(json.dumps(payload), encoding="utf-8")
    assert cli("rerank", "--config", str(rerank_config), "--output", str(out)) == 0

    reranked = pd.read_csv(out / "reranked" / "lists_bpr_personalized_regular.csv")
    assert list(reranked.columns) == ["user_id", "condition", "rank", "song_id", "score", "sim", "rec_norm", "new_score"]
    original = pd.read_csv(out / "folds" / "fold_0" / "lists_bpr.csv")
    assert len(reranked) == len(original)
    first = reranked[(reranked["user_id"] == reranked["user_id"][0]) & (reranked["condition"] == reranked["condition"][0])]
    assert first["new_score"].is_monotonic_decreasing


def test_cli_exit_codes(small_config, tmp_path):
    assert cli("prepare", "--config", str(tmp_path / "missing.json")) == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"evaluation": {"list_sizes": [5], "k_values": [10]}}), encoding="utf-8")
    assert cli("evaluate", "--config", str(bad)) == 1
    # 'rerank' بلا قسم standalone_rerank
    assert cli("rerank", "--config", str(small_config), "--output", str(tmp_path / "o")) == 1
    with pytest.raises(SystemExit) as err:
        cli("unknown-command")
    assert err.value.code == 1


def test_cli_runtime_failure_exits_2(small_config, tmp_path, monkeypatch):
    async def boom(context, **kwargs):
        raise NoTrainingSignalError("diverged")

    monkeypatch.setattr(core_orchestrator.stages["prepare"], "process_task", boom)
    assert cli("prepare", "--config", str(small_config), "--output", str(tmp_path / "o")) == 2


def test_cli_synthesize(tmp_path):
    target = tmp_path / "synthetic"
    assert cli("synthesize", "--output", str(target), "--seed", "3") == 0
    for name in ("catalog.csv", "events.csv", "playlists.csv", "config.json"):
        assert (target / name).exists()
    events = pd.read_csv(target / "events.csv")
    assert len(events) == 40 * 4 * 30


@pytest.mark.slow
def test_directional_context_effects(tmp_path):
    """السياق يحدد التفضيل: التخصيص يحسن MAP@10 والترتيب المعاكس يضره."""
    config = load_config(write_directional_fixture(tmp_path / "fixture"), output=tmp_path / "out")
    context = {}
    run("pipeline", config, context)
    report = context["report"]

    def map_at(variant, mode, lam):
        rows = report.select(algorithm="bpr", list_size=50, k=10, variant=variant, mode=mode, lambda_=lam)
        assert len(rows) == 1
        return rows[0].map_at_k

    initial = report.initial_row("bpr", 50, 10).map_at_k
    personalized = {lam: map_at("personalized", "regular", lam) for lam in report.lambdas()}
    assert max(personalized.values()) >= 1.1 * initial
    for lam in (0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0):
        assert personalized[lam] >= map_at("global", "regular", lam)
    assert map_at("personalized", "opposite", 1.0) < initial
