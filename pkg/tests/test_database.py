"""
Tests for the SQLAlchemy results store
"""

import pytest

from swarmrec.database.connection import ResultsStore
from swarmrec.exceptions import ConfigurationError
from swarmrec.models.reports import KMetrics, MetricsReport, RunReport, SweepRow, SweepStatus


@pytest.fixture
def store():
    with ResultsStore("sqlite://") as results:
        yield results


def _report(hr):
    metrics = MetricsReport(
        metrics={"10": KMetrics(hr=hr, mrr=hr / 2, ndcg=hr / 2, precision=hr / 10, recall=hr)},
        users_evaluated=4,
    )
    return RunReport(config={"seed": 7}, metrics=metrics)


def test_save_and_get_run(store):
    run_id = store.save_run(_report(0.5))
    loaded = store.get_run(run_id)
    assert loaded.metrics.at(10).hr == 0.5
    assert loaded.config["seed"] == 7


def test_get_unknown_run(store):
    assert store.get_run("missing") is None


def test_list_runs_summarizes(store):
    store.save_run(_report(0.25), run_id="a")
    store.save_run(RunReport(config={"seed": 1}, error="stage 'load' failed"), run_id="b")
    summaries = {row["id"]: row for row in store.list_runs()}
    assert summaries["a"]["hr_at_10"] == 0.25
    assert summaries["a"]["status"] == "ok"
    assert summaries["b"]["status"] == "failed"
    assert len(store.list_runs(limit=1)) == 1


def test_sweep_cells_round_trip(store):
    store.save_sweep_cell("s", SweepRow(cell=1, settings={"dim": 8}, status=SweepStatus.ERROR, error="boom"))
    store.save_sweep_cell("s", SweepRow(cell=0, settings={"dim": 4}, status=SweepStatus.OK, metrics={"hr@10": 0.5}))
    cells = store.list_sweep_cells("s")
    assert [c.cell for c in cells] == [0, 1]
    assert cells[0].metrics == {"hr@10": 0.5}
    assert cells[1].error == "boom"
    assert store.list_sweep_cells("other") == []


def test_bad_url_is_configuration_error():
    with pytest.raises(ConfigurationError):
        ResultsStore("notadialect://nowhere")
