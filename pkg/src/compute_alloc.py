"""
Модуль распределения вычислительных ресурсов MEC серверов
"""
import logging
from typing import Sequence, Tuple

import numpy as np

from src.net_model import Assignment, ComputeAlloc, Scenario

logger = logging.getLogger(__name__)


def allocate_compute(f_max: float, offloaders: Sequence[Tuple[float, float]]) -> np.ndarray:
    """
    Оптимальное разбиение ресурса сервера: f_n = f_max * sqrt(lt*b) / sum sqrt(lt*b)

    Остаток округления добавляется к наибольшей доле, так что sum f = f_max.
    Если у всех lambda_t = 0, ресурс делится поровну.

    Args:
        f_max: ресурс сервера, циклы/с
        offloaders: пары (lambda_t, beta)

    Returns:
        Массив долей той же длины, что offloaders
    """
    if not offloaders:
        return np.zeros(0)
    weights = np.sqrt(np.array([lt * beta for lt, beta in offloaders], dtype=float))
    if weights.sum() <= 0:
        logger.warning(f"⚠️ У всех {len(offloaders)} пользователей lambda_t = 0, ресурс делится поровну")
        weights = np.ones(len(offloaders))

    f = f_max * weights / weights.sum()
    top = int(np.argmax(f))
    f[top] += f_max - f.sum()
    return f


def cra_objective(offloaders: Sequence[Tuple[float, float]], f: Sequence[float]) -> float:
    """
    sum lambda_t * beta / f

    Raises:
        ValueError: какая-либо доля f <= 0
    """
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise ValueError("cra_objective определена только при f > 0")
    lt_beta = np.array([lt * beta for lt, beta in offloaders], dtype=float)
    return float(np.sum(lt_beta / f))


def allocate_compute_all(scn: Scenario, asg: Assignment) -> ComputeAlloc:
    """Распределить ресурсы всех серверов между их выгружающими пользователями"""
    f = np.zeros((scn.N, scn.M))
    for m, server in enumerate(scn.servers):
        users = asg.users_on(m)
        if not users:
            continue
        shares = allocate_compute(
            server.f_max, [(scn.users[n].lambda_t, scn.users[n].task.beta) for n in users])
        f[users, m] = shares
    return ComputeAlloc(f)
