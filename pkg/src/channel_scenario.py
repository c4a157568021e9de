"""
Модуль генерации сценариев сети (размещение, path-loss, неоднородность задач)

Генерация детерминирована: для одного seed получается побитово одинаковый
Scenario. Генератор: numpy PCG64 через np.random.default_rng(seed).
"""
import csv
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np
from dotenv import dotenv_values

import config
from src.net_model import MecServer, MobileUser, Scenario, TaskProfile

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Ошибка файла конфигурации сценария или sweep"""


def dbm_to_watts(dbm: float) -> float:
    """Перевести dBm в Вт"""
    return 10.0 ** ((dbm - 30.0) / 10.0)


def path_loss_gain(d_km: Union[float, np.ndarray],
                   d_min_km: float = config.DEFAULT_D_MIN_M / 1000.0) -> Union[float, np.ndarray]:
    """
    Линейный коэффициент усиления по модели PL(dB) = -140.7 - 36.7*log10(d)

    Расстояния меньше d_min (включая неположительные) прижимаются к d_min.

    Args:
        d_km: расстояние в км (скаляр или массив)
        d_min_km: минимальное расстояние в км

    Returns:
        10^(PL/10) той же формы, что и d_km
    """
    d = np.maximum(np.asarray(d_km, dtype=float), d_min_km)
    pl_db = config.PATH_LOSS_INTERCEPT_DB - config.PATH_LOSS_SLOPE_DB * np.log10(d)
    gain = np.power(10.0, pl_db / 10.0)
    if np.ndim(d_km) == 0:
        return float(gain)
    return gain


@dataclass(frozen=True)
class ScenarioConfig:
    """Параметры генерации сценария (значения по умолчанию - базовая HetNet установка)"""

    M: int = config.DEFAULT_M
    N: int = config.DEFAULT_N
    S: int = config.DEFAULT_S
    area_m: float = config.DEFAULT_AREA_M
    bandwidth_hz: float = config.DEFAULT_BANDWIDTH_HZ
    noise_dbm: float = config.DEFAULT_NOISE_DBM
    p_max_w: float = config.DEFAULT_P_MAX_W
    alpha_bits: float = config.DEFAULT_ALPHA_BITS
    beta_cycles: float = config.DEFAULT_BETA_CYCLES
    f_local_choices: Tuple[float, ...] = config.DEFAULT_F_LOCAL_CHOICES
    f_server: float = config.DEFAULT_F_SERVER
    kappa: float = config.DEFAULT_KAPPA
    lambda_t: float = config.DEFAULT_LAMBDA_T
    zeta: float = config.DEFAULT_ZETA
    quota: int = config.DEFAULT_QUOTA
    seed: int = config.DEFAULT_SEED
    shadowing_db: float = config.DEFAULT_SHADOWING_DB
    d_min_m: float = config.DEFAULT_D_MIN_M

    @property
    def lambda_e(self) -> float:
        return 1.0 - self.lambda_t

    @property
    def noise_w(self) -> float:
        return dbm_to_watts(self.noise_dbm)

    def validate(self) -> List[str]:
        """
        Проверить параметры

        Returns:
            Список сообщений об ошибках (пустой, если конфигурация корректна)
        """
        errors = []
        for name in ("M", "N", "S", "quota"):
            if getattr(self, name) < 1:
                errors.append(f"{name} должно быть >= 1")
        for name in ("area_m", "bandwidth_hz", "p_max_w", "alpha_bits", "beta_cycles",
                     "f_server", "d_min_m"):
            if getattr(self, name) <= 0:
                errors.append(f"{name} должно быть > 0")
        if not self.f_local_choices or any(f <= 0 for f in self.f_local_choices):
            errors.append("f_local_choices должен быть непустым списком положительных частот")
        if self.kappa < 0:
            errors.append("kappa должно быть >= 0")
        if not 0.0 <= self.lambda_t <= 1.0:
            errors.append("lambda_t должно лежать в [0, 1]")
        if not 0.0 < self.zeta <= 1.0:
            errors.append("zeta должно лежать в (0, 1]")
        if self.shadowing_db < 0:
            errors.append("shadowing_db должно быть >= 0")
        if not 0 <= self.seed < 2 ** 64:
            errors.append("seed должен быть 64-битным неотрицательным целым")
        return errors

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ScenarioConfig":
        """Прочитать конфигурацию из файла KEY=VALUE"""
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Файл конфигурации не найден: {path}")
        return parse_scenario_values(dotenv_values(path))


# Ключ файла -> (поле ScenarioConfig, тип)
SCENARIO_KEYS: Dict[str, Tuple[str, type]] = {
    "M": ("M", int),
    "N": ("N", int),
    "S": ("S", int),
    "AREA_M": ("area_m", float),
    "BANDWIDTH_HZ": ("bandwidth_hz", float),
    "NOISE_DBM": ("noise_dbm", float),
    "P_MAX_W": ("p_max_w", float),
    "ALPHA_BITS": ("alpha_bits", float),
    "BETA_CYCLES": ("beta_cycles", float),
    "F_LOCAL_CHOICES": ("f_local_choices", tuple),
    "F_SERVER": ("f_server", float),
    "KAPPA": ("kappa", float),
    "LAMBDA_T": ("lambda_t", float),
    "ZETA": ("zeta", float),
    "QUOTA": ("quota", int),
    "SEED": ("seed", int),
    "SHADOWING_DB": ("shadowing_db", float),
    "D_MIN_M": ("d_min_m", float),
}


def _parse_number(key: str, raw: Optional[str], kind: type):
    if raw is None or not str(raw).strip():
        raise ConfigError(f"{key}: пустое значение")
    raw = str(raw).strip()
    try:
        if kind is int:
            value = float(raw)
            if not value.is_integer():
                raise ValueError(raw)
            return int(value)
        if kind is tuple:
            return tuple(float(item) for item in raw.split(",") if item.strip())
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: не число ({raw!r})") from None


def parse_scenario_values(values: Mapping[str, Optional[str]],
                          extra_keys: Iterable[str] = ()) -> ScenarioConfig:
    """
    Разобрать плоский словарь KEY=VALUE в ScenarioConfig

    Args:
        values: пары ключ-значение (регистр ключей не важен)
        extra_keys: ключи, которые разбирает вызывающий код (например, ключи sweep)

    Raises:
        ConfigError: неизвестный ключ, нечисловое значение или невалидная конфигурация
    """
    allowed_extra = {k.upper() for k in extra_keys}
    overrides = {}
    for raw_key, raw_value in values.items():
        key = raw_key.strip().upper()
        if key in allowed_extra:
            continue
        if key == "P_MAX_DBM":
            overrides["p_max_w"] = dbm_to_watts(_parse_number(key, raw_value, float))
            continue
        if key not in SCENARIO_KEYS:
            raise ConfigError(f"Неизвестный ключ конфигурации: {raw_key}")
        name, kind = SCENARIO_KEYS[key]
        overrides[name] = _parse_number(key, raw_value, kind)

    cfg = replace(ScenarioConfig(), **overrides)
    problems = cfg.validate()
    if problems:
        raise ConfigError("Некорректная конфигурация: " + "; ".join(problems))
    return cfg


def generate(cfg: ScenarioConfig) -> Scenario:
    """
    Сгенерировать случайный сценарий

    Порядок выборок из генератора фиксирован: позиции серверов, позиции
    пользователей, индексы f_local, затенение (только при shadowing_db > 0).

    Raises:
        ConfigError: конфигурация не прошла validate()
    """
    problems = cfg.validate()
    if problems:
        raise ConfigError("Некорректная конфигурация: " + "; ".join(problems))

    rng = np.random.default_rng(cfg.seed)
    server_pos = rng.uniform(0.0, cfg.area_m, size=(cfg.M, 2))
    user_pos = rng.uniform(0.0, cfg.area_m, size=(cfg.N, 2))
    f_idx = rng.integers(0, len(cfg.f_local_choices), size=cfg.N)

    dist_m = np.linalg.norm(user_pos[:, None, :] - server_pos[None, :, :], axis=2)
    gain_nm = path_loss_gain(dist_m / 1000.0, cfg.d_min_m / 1000.0)
    if cfg.shadowing_db > 0:
        shadow_db = rng.normal(0.0, cfg.shadowing_db, size=(cfg.N, cfg.M))
        gain_nm = gain_nm * np.power(10.0, shadow_db / 10.0)
    gains = np.repeat(gain_nm[:, :, None], cfg.S, axis=2)

    task = TaskProfile(alpha=cfg.alpha_bits, beta=cfg.beta_cycles)
    users = tuple(
        MobileUser(
            id=n,
            position=(float(user_pos[n, 0]), float(user_pos[n, 1])),
            task=task,
            f_local=float(cfg.f_local_choices[f_idx[n]]),
            kappa=cfg.kappa,
            p_max=cfg.p_max_w,
            zeta=cfg.zeta,
            lambda_t=cfg.lambda_t,
            lambda_e=cfg.lambda_e,
        )
        for n in range(cfg.N)
    )
    servers = tuple(
        MecServer(
            id=m,
            position=(float(server_pos[m, 0]), float(server_pos[m, 1])),
            f_max=cfg.f_server,
            quota=cfg.quota,
        )
        for m in range(cfg.M)
    )
    logger.debug(f"Сценарий seed={cfg.seed}: N={cfg.N}, M={cfg.M}, S={cfg.S}")
    return Scenario(users=users, servers=servers, S=cfg.S,
                    bandwidth=cfg.bandwidth_hz, noise=cfg.noise_w, gains=gains)


def export_scenario_csv(scn: Scenario, out_dir: Union[str, Path]) -> List[Path]:
    """
    Выгрузить сценарий в набор CSV: users.csv, servers.csv, gains.csv

    Returns:
        Пути созданных файлов
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / "users.csv", out_dir / "servers.csv", out_dir / "gains.csv"]

    try:
        with open(paths[0], "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["user", "x_m", "y_m", "alpha_bits", "beta_cycles", "f_local",
                             "kappa", "p_max", "zeta", "lambda_t", "lambda_e"])
            for u in scn.users:
                writer.writerow([u.id, f"{u.position[0]:.6g}", f"{u.position[1]:.6g}",
                                 f"{u.task.alpha:.6g}", f"{u.task.beta:.6g}", f"{u.f_local:.6g}",
                                 f"{u.kappa:.6g}", f"{u.p_max:.6g}", f"{u.zeta:.6g}",
                                 f"{u.lambda_t:.6g}", f"{u.lambda_e:.6g}"])

        with open(paths[1], "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["server", "x_m", "y_m", "f_max", "quota"])
            for s in scn.servers:
                writer.writerow([s.id, f"{s.position[0]:.6g}", f"{s.position[1]:.6g}",
                                 f"{s.f_max:.6g}", s.quota])

        with open(paths[2], "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["user", "server", "subchannel", "gain"])
            for n in range(scn.N):
                for m in range(scn.M):
                    for s in range(scn.S):
                        writer.writerow([n, m, s, f"{scn.gains[n, m, s]:.6g}"])
    except OSError as e:
        raise OSError(f"Не удалось записать сценарий в {out_dir}: {e}") from e

    logger.info(f"✅ Сценарий выгружен в {out_dir}")
    return paths
