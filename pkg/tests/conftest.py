"""
Общие фикстуры тестов
"""
import logging

import pytest
from hypothesis import HealthCheck, settings

from factories import micro_config
from src.channel_scenario import ScenarioConfig, generate
from src.database import Database

# Решатель работает миллисекунды-секунды на пример, дедлайн hypothesis мешает
settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_logs(caplog):
    caplog.set_level(logging.WARNING)


@pytest.fixture
def default_scenario():
    """Базовая установка: M=9, N=36, S=4"""
    return generate(ScenarioConfig(seed=7))


@pytest.fixture
def micro_scenario():
    return generate(micro_config(seed=11))


@pytest.fixture
def tmp_db(tmp_path):
    """Чистая БД истории в tmp_path"""
    database = Database(f"sqlite:///{tmp_path / 'history.db'}")
    assert database.init_db()
    yield database
    database.engine.dispose()
