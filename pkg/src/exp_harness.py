"""
Модуль экспериментов: sweep по параметру, усреднение по реализациям, CSV, проверка трендов
"""
import csv
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from dotenv import dotenv_values

import config
from src.baselines import hjtora_greedy, hoda_single_cell, local_only, offloading_only
from src.channel_scenario import ConfigError, ScenarioConfig, generate, parse_scenario_values
from src.jcorams_solver import Solution, SolverParams, solver
from src.net_model import Scenario

logger = logging.getLogger(__name__)

# Ось sweep -> (поле ScenarioConfig, тип значения)
AXES: Dict[str, Tuple[str, type]] = {
    "N": ("N", int),
    "alpha": ("alpha_bits", float),
    "beta": ("beta_cycles", float),
    "lambda_t": ("lambda_t", float),
    "p_max": ("p_max_w", float),
    "f0": ("f_server", float),
}

SCHEME_RUNNERS: Dict[str, Callable[[Scenario, SolverParams], Solution]] = {
    "jcorams": lambda scn, params: solver.solve(scn, params),
    "local": lambda scn, params: local_only(scn),
    "offload": lambda scn, params: offloading_only(scn, params),
    "hoda": lambda scn, params: hoda_single_cell(scn, params),
    "hjtora": lambda scn, params: hjtora_greedy(scn, params),
}

SWEEP_KEYS = ("SWEEP_AXIS", "SWEEP_VALUES", "REALIZATIONS", "SCHEMES")


@dataclass(frozen=True)
class SweepSpec:
    """Описание эксперимента"""

    axis: str
    values: Tuple[float, ...]
    realizations: int = config.DEFAULT_REALIZATIONS
    base: ScenarioConfig = field(default_factory=ScenarioConfig)
    schemes: Tuple[str, ...] = config.DEFAULT_SCHEMES
    interference_free: bool = False

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        if self.axis not in AXES:
            raise ConfigError(f"Неизвестная ось sweep: {self.axis} (допустимо: {', '.join(AXES)})")
        if not self.values:
            raise ConfigError("Список значений sweep пуст")
        if self.realizations < 1:
            raise ConfigError(f"realizations={self.realizations} < 1")
        unknown = [s for s in self.schemes if s not in SCHEME_RUNNERS]
        if unknown or not self.schemes:
            raise ConfigError(f"Неизвестные схемы: {unknown or 'пустой список'}")
        for value in self.values:
            problems = config_for(self.base, self.axis, value).validate()
            if problems:
                raise ConfigError(f"{self.axis}={value}: " + "; ".join(problems))

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "SweepSpec":
        """
        Прочитать sweep из файла KEY=VALUE

        Ключи sweep: SWEEP_AXIS, SWEEP_VALUES (список через запятую или
        start:stop:step), REALIZATIONS, SCHEMES; остальные ключи - параметры сценария.
        """
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Файл sweep не найден: {path}")
        values = {k.strip().upper(): v for k, v in dotenv_values(path).items()}
        base = parse_scenario_values(values, extra_keys=SWEEP_KEYS)

        axis_raw = (values.get("SWEEP_AXIS") or "").strip()
        axis = next((a for a in AXES if a.lower() == axis_raw.lower()), axis_raw)
        if "SWEEP_VALUES" not in values:
            raise ConfigError("Не задан SWEEP_VALUES")
        try:
            realizations = int(values.get("REALIZATIONS") or config.DEFAULT_REALIZATIONS)
        except ValueError:
            raise ConfigError(f"REALIZATIONS: не целое ({values.get('REALIZATIONS')!r})") from None
        schemes_raw = values.get("SCHEMES")
        schemes = tuple(s.strip().lower() for s in schemes_raw.split(",") if s.strip()) \
            if schemes_raw else config.DEFAULT_SCHEMES
        return cls(axis=axis, values=parse_values(values["SWEEP_VALUES"] or ""),
                   realizations=realizations, base=base, schemes=schemes)


@dataclass(frozen=True)
class ResultRow:
    """Усреднённый результат одной схемы в одной точке sweep"""

    scheme: str
    axis: str
    axis_value: float
    offload_pct_mean: float
    offload_pct_std: float
    overhead_mean: float
    overhead_std: float
    iterations_mean: float
    wall_time_mean: float = 0.0


def parse_values(raw: str) -> Tuple[float, ...]:
    """
    Разобрать список значений: "1,2,3" или "start:stop:step" (stop включительно)

    Raises:
        ConfigError: пустой список или нечисловые значения
    """
    raw = raw.strip()
    try:
        if ":" in raw:
            start, stop, step = (float(x) for x in raw.split(":"))
            if step <= 0 or stop < start:
                raise ConfigError(f"Некорректный диапазон: {raw}")
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            values = tuple(round(start + i * step, 12) for i in range(count))
        else:
            values = tuple(float(x) for x in raw.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"Значения sweep не числа: {raw!r}") from None
    if not values:
        raise ConfigError("Список значений sweep пуст")
    return values


def config_for(base: ScenarioConfig, axis: str, value: float) -> ScenarioConfig:
    """Конфигурация сценария для точки sweep"""
    name, kind = AXES[axis]
    return replace(base, **{name: kind(value)})


def reference_sweep(name: str, realizations: int = config.FULL_REALIZATIONS,
                    base: Optional[ScenarioConfig] = None,
                    schemes: Sequence[str] = config.DEFAULT_SCHEMES) -> SweepSpec:
    """SweepSpec одного из шести эталонных экспериментов"""
    if name not in REFERENCE_EXPERIMENTS:
        raise ConfigError(f"Неизвестный эксперимент: {name} (допустимо: {', '.join(REFERENCE_EXPERIMENTS)})")
    axis, values = REFERENCE_EXPERIMENTS[name]
    return SweepSpec(axis=axis, values=values, realizations=realizations,
                     base=base or ScenarioConfig(), schemes=tuple(schemes))


REFERENCE_EXPERIMENTS: Dict[str, Tuple[str, Tuple[float, ...]]] = {
    "users": ("N", tuple(float(n) for n in range(10, 51, 4))),
    "data_size": ("alpha", tuple(kb * 8e3 for kb in range(100, 1001, 100))),
    "workload": ("beta", tuple(mc * 1e6 for mc in range(500, 2501, 500))),
    "weights": ("lambda_t", tuple(round(0.1 * i, 1) for i in range(1, 10))),
    "power": ("p_max", tuple(round(0.05 * i, 2) for i in range(1, 12))),
    "server_cpu": ("f0", tuple(0.5e9 * i for i in range(1, 9))),
}


@dataclass(frozen=True)
class _Record:
    scheme: str
    axis_value: float
    offload_pct: float
    overhead: float
    iterations: int
    wall_time: float


def _run_realization(spec: SweepSpec, params: SolverParams, value: float,
                     realization: int) -> List[_Record]:
    cfg = replace(config_for(spec.base, spec.axis, value), seed=spec.base.seed + realization)
    scn = generate(cfg)
    records = []
    for scheme in spec.schemes:
        started = time.perf_counter()
        solution = SCHEME_RUNNERS[scheme](scn, params)
        records.append(_Record(scheme, float(value), solution.offload_ratio,
                               solution.total_overhead, solution.iterations,
                               time.perf_counter() - started))
    return records


def run_sweep(spec: SweepSpec, params: Optional[SolverParams] = None,
              workers: int = config.SWEEP_WORKERS) -> List[ResultRow]:
    """
    Выполнить sweep

    Реализация r использует seed = base.seed + r во всех точках оси; все схемы
    одной реализации видят один и тот же сценарий.

    Returns:
        Строки, отсортированные по (схема, значение оси)
    """
    params = replace(params or SolverParams(), interference_free=spec.interference_free)
    tasks = [(value, r) for value in spec.values for r in range(spec.realizations)]
    logger.info(f"🔄 Sweep {spec.axis}: {len(spec.values)} точек x {spec.realizations} реализаций, "
                f"схемы {', '.join(spec.schemes)}")

    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        batches = list(pool.map(lambda t: _run_realization(spec, params, *t), tasks))

    grouped: Dict[Tuple[str, float], List[_Record]] = {}
    for batch in batches:
        for record in batch:
            grouped.setdefault((record.scheme, record.axis_value), []).append(record)

    rows = []
    for (scheme, value), records in sorted(grouped.items()):
        pct = np.array([r.offload_pct for r in records])
        z = np.array([r.overhead for r in records])
        rows.append(ResultRow(
            scheme=scheme,
            axis=spec.axis,
            axis_value=value,
            offload_pct_mean=float(pct.mean()),
            offload_pct_std=float(pct.std()),
            overhead_mean=float(z.mean()),
            overhead_std=float(z.std()),
            iterations_mean=float(np.mean([r.iterations for r in records])),
            wall_time_mean=float(np.mean([r.wall_time for r in records])),
        ))
    logger.info(f"✅ Sweep {spec.axis} завершён: {len(rows)} строк")
    return rows


CSV_COLUMNS = ["scheme", "axis", "axis_value", "offload_pct_mean", "offload_pct_std",
               "overhead_mean", "overhead_std", "iterations_mean"]


def emit_csv(rows: Sequence[ResultRow], path: Union[str, Path], timing: bool = False) -> Path:
    """
    Записать строки в CSV (6 значащих цифр)

    Время выполнения пишется только при timing=True, чтобы повторные запуски
    давали побайтно одинаковые файлы.

    Raises:
        OSError: с путём файла в сообщении
    """
    path = Path(path)
    header = CSV_COLUMNS + (["wall_time_mean"] if timing else [])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            for row in rows:
                values = [row.scheme, row.axis] + [f"{getattr(row, name):.6g}" for name in header[2:]]
                writer.writerow(values)
    except OSError as e:
        raise OSError(f"Не удалось записать CSV {path}: {e}") from e
    logger.info(f"📊 CSV записан: {path} ({len(rows)} строк)")
    return path


def parse_csv(path: Union[str, Path]) -> List[ResultRow]:
    """Прочитать CSV, записанный emit_csv"""
    path = Path(path)
    numeric = {f.name for f in fields(ResultRow)} - {"scheme", "axis"}
    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        for record in csv.DictReader(f):
            kwargs = {k: (float(v) if k in numeric else v) for k, v in record.items()}
            rows.append(ResultRow(**kwargs))
    return rows


@dataclass(frozen=True)
class Expectation:
    """
    Ожидаемое качественное поведение кривой

    kind: non_increasing | non_decreasing | dominates | saturates
    Допуск применяется как tolerance * max(|a|, |b|, 1).
    """

    kind: str
    scheme: str
    metric: str = "offload_pct_mean"
    other: Optional[str] = None
    min_axis: Optional[float] = None
    tolerance: float = 0.0

    def describe(self) -> str:
        text = f"{self.scheme}.{self.metric} {self.kind}"
        if self.other:
            text += f" {self.other}"
        if self.min_axis is not None:
            text += f" (ось >= {self.min_axis:g})"
        return text


@dataclass
class TrendReport:
    """Результат проверки трендов"""

    results: List[Tuple[Expectation, bool, str]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.results)

    @property
    def failures(self) -> List[Tuple[Expectation, str]]:
        return [(e, msg) for e, ok, msg in self.results if not ok]


def _series(rows: Sequence[ResultRow], scheme: str, metric: str,
            min_axis: Optional[float] = None) -> List[Tuple[float, float]]:
    points = sorted((r.axis_value, getattr(r, metric)) for r in rows if r.scheme == scheme)
    if min_axis is not None:
        points = [p for p in points if p[0] >= min_axis]
    return points


def _slack(tol: float, a: float, b: float) -> float:
    return tol * max(abs(a), abs(b), 1.0)


def _check(rows: Sequence[ResultRow], exp: Expectation) -> Tuple[bool, str]:
    series = _series(rows, exp.scheme, exp.metric, exp.min_axis)
    if not series:
        return False, f"нет данных для схемы {exp.scheme}"

    if exp.kind in ("non_increasing", "non_decreasing"):
        sign = 1.0 if exp.kind == "non_increasing" else -1.0
        for (x0, y0), (x1, y1) in zip(series, series[1:]):
            if sign * (y1 - y0) > _slack(exp.tolerance, y0, y1):
                return False, f"нарушение между {x0:g} ({y0:.6g}) и {x1:g} ({y1:.6g})"
        return True, f"{len(series)} точек"

    if exp.kind == "dominates":
        other = dict(_series(rows, exp.other, exp.metric, exp.min_axis))
        common = [(x, y) for x, y in series if x in other]
        if not common:
            return False, f"нет общих точек с {exp.other}"
        for x, y in common:
            if y - other[x] > _slack(exp.tolerance, y, other[x]):
                return False, f"в точке {x:g}: {y:.6g} > {other[x]:.6g}"
        return True, f"{len(common)} точек"

    if exp.kind == "saturates":
        if len(series) < 2:
            return False, "меньше двух точек"
        (_, a), (_, b) = series[-2], series[-1]
        if abs(b - a) > exp.tolerance * max(abs(a), abs(b)):
            return False, f"последние точки {a:.6g} и {b:.6g} различаются больше чем на {exp.tolerance:.0%}"
        return True, f"{a:.6g} -> {b:.6g}"

    return False, f"неизвестный вид ожидания: {exp.kind}"


def trend_check(rows: Sequence[ResultRow], expectations: Sequence[Expectation]) -> TrendReport:
    """Проверить ожидания на строках завершённого sweep"""
    report = TrendReport()
    for exp in expectations:
        ok, message = _check(rows, exp)
        report.results.append((exp, ok, message))
        if not ok:
            logger.warning(f"⚠️ Тренд не выполнен: {exp.describe()}: {message}")
    return report


def default_expectations(axis: str, schemes: Sequence[str],
                         base: Optional[ScenarioConfig] = None,
                         tolerance: float = 0.02) -> List[Expectation]:
    """
    Стандартные ожидания для оси sweep

    Для JCORAMS: Z не выше local и offload в каждой точке; доля выгружающих
    не растёт по N (после насыщения ёмкости M*min(q, S)) и по alpha, не убывает
    по beta, p_max и f0; по p_max кривые насыщаются.
    """
    base = base or ScenarioConfig()
    result: List[Expectation] = []
    if "jcorams" not in schemes:
        return result

    for other in ("local", "offload"):
        if other in schemes:
            result.append(Expectation("dominates", "jcorams", "overhead_mean", other=other,
                                      tolerance=1e-6))

    capacity = float(base.M * min(base.quota, base.S))
    if axis == "N":
        result.append(Expectation("non_increasing", "jcorams", min_axis=capacity,
                                  tolerance=tolerance))
        if "offload" in schemes:
            result.append(Expectation("non_increasing", "offload", min_axis=capacity,
                                      tolerance=tolerance))
    elif axis == "alpha":
        result.append(Expectation("non_increasing", "jcorams", tolerance=tolerance))
    elif axis in ("beta", "f0"):
        result.append(Expectation("non_decreasing", "jcorams", tolerance=tolerance))
    elif axis == "p_max":
        result.append(Expectation("non_decreasing", "jcorams", tolerance=tolerance))
        result.append(Expectation("non_increasing", "jcorams", "overhead_mean", tolerance=tolerance))
        result.append(Expectation("saturates", "jcorams", "overhead_mean", tolerance=0.02))
    return result
