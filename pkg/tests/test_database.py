"""
Тесты истории запусков в SQLite
"""
import pytest

from factories import micro_config
from src.database import Database
from src.exp_harness import ResultRow, SweepSpec

SPEC = SweepSpec(axis="N", values=(2, 4), realizations=3, base=micro_config(5),
                 schemes=("jcorams", "local"))


def _rows():
    return [
        ResultRow("local", "N", 4.0, 0.0, 0.0, 8.9, 0.1, 0.0),
        ResultRow("jcorams", "N", 4.0, 0.75, 0.1, 4.2, 0.3, 2.0),
        ResultRow("jcorams", "N", 2.0, 1.0, 0.0, 1.9, 0.2, 1.0),
    ]


def test_fresh_database_is_healthy(tmp_db):
    health = tmp_db.health_check()
    assert health["status"] == "healthy"
    assert all(health["checks"].values())


def test_uninitialised_database():
    database = Database("sqlite:///:memory:")
    assert database.health_check()["status"] == "unhealthy"
    with pytest.raises(RuntimeError):
        database.get_session()
    assert database.save_sweep(SPEC, _rows()) is None


def test_save_and_read_back(tmp_db):
    run = tmp_db.save_sweep(SPEC, _rows(), csv_path="results/users.csv", wall_seconds=1.5,
                            paper_mode=True)
    assert run is not None and run.id is not None

    recent = tmp_db.get_recent_runs()
    assert len(recent) == 1
    saved = recent[0]
    assert (saved.axis, saved.values_text, saved.realizations) == ("N", "2,4", 3)
    assert (saved.base_seed, saved.schemes, saved.paper_mode) == (5, "jcorams,local", 1)
    assert saved.csv_path == "results/users.csv"

    results = tmp_db.get_run_results(run.id)
    assert [(r.scheme, r.axis_value) for r in results] == [
        ("jcorams", 2.0), ("jcorams", 4.0), ("local", 4.0)]
    assert results[1].overhead_mean == pytest.approx(4.2)


def test_recent_runs_newest_first(tmp_db):
    first = tmp_db.save_sweep(SPEC, _rows())
    second = tmp_db.save_sweep(SPEC, _rows()[:1])
    runs = tmp_db.get_recent_runs(limit=5)
    assert [r.id for r in runs] == [second.id, first.id]
    assert len(tmp_db.get_recent_runs(limit=1)) == 1
    assert len(tmp_db.get_run_results(second.id)) == 1
