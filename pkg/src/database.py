"""
Модуль для работы с базой данных SQLite (история запусков sweep)
"""
import logging
from datetime import datetime
from pathlib import Path
from typing import List, Optional, Sequence

from sqlalchemy import (
    create_engine,
    Column,
    Integer,
    String,
    Text,
    DateTime,
    ForeignKey,
    Float,
    text,
    inspect,
)
from sqlalchemy.engine import make_url
from sqlalchemy.orm import declarative_base, sessionmaker, relationship, Session

import config

logger = logging.getLogger(__name__)

# Базовый класс для моделей
Base = declarative_base()


class SweepRun(Base):
    """Модель запуска sweep"""

    __tablename__ = "sweep_runs"

    id = Column(Integer, primary_key=True)
    created_at = Column(DateTime, default=datetime.utcnow, index=True)
    axis = Column(String(20), nullable=False, index=True)
    values_text = Column(Text)  # значения оси через запятую
    realizations = Column(Integer, nullable=False)
    base_seed = Column(Integer, nullable=False)
    schemes = Column(String(200))
    paper_mode = Column(Integer, default=0)  # 1 = эталонное число реализаций
    interference_free = Column(Integer, default=0)
    csv_path = Column(String(500))
    wall_seconds = Column(Float)

    results = relationship("SweepResult", back_populates="run", cascade="all, delete-orphan")

    def __repr__(self):
        return f"<SweepRun(id={self.id}, axis='{self.axis}', realizations={self.realizations})>"


class SweepResult(Base):
    """Модель усреднённого результата схемы в точке sweep"""

    __tablename__ = "sweep_results"

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey("sweep_runs.id"), nullable=False, index=True)
    scheme = Column(String(20), nullable=False)
    axis_value = Column(Float, nullable=False)
    offload_pct_mean = Column(Float)
    offload_pct_std = Column(Float)
    overhead_mean = Column(Float)
    overhead_std = Column(Float)
    iterations_mean = Column(Float)

    run = relationship("SweepRun", back_populates="results")

    def __repr__(self):
        return f"<SweepResult(run_id={self.run_id}, scheme='{self.scheme}', axis_value={self.axis_value})>"


REQUIRED_TABLES = {
    "sweep_runs": ["id", "created_at", "axis", "values_text", "realizations", "base_seed",
                   "schemes", "paper_mode", "interference_free", "csv_path", "wall_seconds"],
    "sweep_results": ["id", "run_id", "scheme", "axis_value", "offload_pct_mean",
                      "offload_pct_std", "overhead_mean", "overhead_std", "iterations_mean"],
}


class Database:
    """Класс для работы с базой данных"""

    def __init__(self, database_url: str = None):
        """
        Инициализация подключения к БД

        Args:
            database_url: URL базы данных (по умолчанию из config)
        """
        self.database_url = database_url or config.DATABASE_URL
        self.engine = None
        self.SessionLocal = None

    def init_db(self) -> bool:
        """Инициализация базы данных"""
        try:
            # Создать директорию для файла SQLite
            db_file = make_url(self.database_url).database
            if db_file and db_file != ":memory:":
                Path(db_file).parent.mkdir(parents=True, exist_ok=True)

            self.engine = create_engine(
                self.database_url,
                echo=False,
                connect_args={"check_same_thread": False}  # Для SQLite
            )
            Base.metadata.create_all(self.engine)
            self.SessionLocal = sessionmaker(autoflush=False, bind=self.engine)

            logger.info(f"База данных инициализирована: {db_file}")
            return True

        except Exception as e:
            logger.error(f"Ошибка при инициализации БД: {e}", exc_info=True)
            return False

    def health_check(self) -> dict:
        """
        Проверить здоровье базы данных

        Returns:
            dict: {
                'status': 'healthy' | 'degraded' | 'unhealthy',
                'checks': {'connection': bool, 'tables': bool, 'schema': bool},
                'details': dict
            }
        """
        result = {
            'status': 'healthy',
            'checks': {'connection': False, 'tables': False, 'schema': False},
            'details': {}
        }

        try:
            if not self.engine:
                result['status'] = 'unhealthy'
                result['details']['connection'] = 'Engine not initialized'
                return result

            with self.engine.connect() as conn:
                conn.execute(text("SELECT 1"))
                result['checks']['connection'] = True

            inspector = inspect(self.engine)
            table_names = inspector.get_table_names()
            missing_tables = [t for t in REQUIRED_TABLES if t not in table_names]
            if missing_tables:
                result['details']['missing_tables'] = missing_tables
            else:
                result['checks']['tables'] = True

            missing_columns = {}
            for table, required in REQUIRED_TABLES.items():
                if table not in table_names:
                    continue
                columns = [col['name'] for col in inspector.get_columns(table)]
                missing = [c for c in required if c not in columns]
                if missing:
                    missing_columns[table] = missing
            if missing_columns:
                result['details']['missing_columns'] = missing_columns
            elif not missing_tables:
                result['checks']['schema'] = True

            if all(result['checks'].values()):
                result['status'] = 'healthy'
            elif result['checks']['connection']:
                result['status'] = 'degraded'
            else:
                result['status'] = 'unhealthy'
            return result

        except Exception as e:
            result['status'] = 'unhealthy'
            result['details']['error'] = str(e)
            return result

    def get_session(self) -> Session:
        """Получить сессию базы данных"""
        if not self.SessionLocal:
            raise RuntimeError("База данных не инициализирована. Вызовите init_db() сначала.")
        return self.SessionLocal()

    def save_sweep(self, spec, rows: Sequence, csv_path: Optional[str] = None,
                   wall_seconds: Optional[float] = None,
                   paper_mode: bool = False) -> Optional[SweepRun]:
        """
        Сохранить запуск sweep и его строки

        Args:
            spec: SweepSpec запуска
            rows: ResultRow из run_sweep
            csv_path: путь к записанному CSV
            wall_seconds: общее время выполнения
            paper_mode: запуск с эталонным числом реализаций

        Returns:
            SweepRun или None при ошибке (ошибка БД не прерывает sweep)
        """
        try:
            with self.get_session() as session:
                run = SweepRun(
                    axis=spec.axis,
                    values_text=",".join(f"{v:g}" for v in spec.values),
                    realizations=spec.realizations,
                    base_seed=spec.base.seed,
                    schemes=",".join(spec.schemes),
                    paper_mode=1 if paper_mode else 0,
                    interference_free=1 if spec.interference_free else 0,
                    csv_path=str(csv_path) if csv_path else None,
                    wall_seconds=wall_seconds,
                )
                for row in rows:
                    run.results.append(SweepResult(
                        scheme=row.scheme,
                        axis_value=row.axis_value,
                        offload_pct_mean=row.offload_pct_mean,
                        offload_pct_std=row.offload_pct_std,
                        overhead_mean=row.overhead_mean,
                        overhead_std=row.overhead_std,
                        iterations_mean=row.iterations_mean,
                    ))
                session.add(run)
                session.commit()
                session.refresh(run)
                logger.info(f"✅ Sweep сохранён в БД: run_id={run.id}, {len(rows)} строк")
                return run

        except Exception as e:
            logger.error(f"❌ Ошибка при сохранении sweep: {e}", exc_info=True)
            return None

    def get_recent_runs(self, limit: int = 10) -> List[SweepRun]:
        """Получить последние запуски sweep"""
        with self.get_session() as session:
            return (session.query(SweepRun)
                    .order_by(SweepRun.created_at.desc(), SweepRun.id.desc())
                    .limit(limit)
                    .all())

    def get_run_results(self, run_id: int) -> List[SweepResult]:
        """Получить строки запуска, упорядоченные по (схема, значение оси)"""
        with self.get_session() as session:
            return (session.query(SweepResult)
                    .filter(SweepResult.run_id == run_id)
                    .order_by(SweepResult.scheme, SweepResult.axis_value)
                    .all())


# Глобальный экземпляр БД
db = Database()
