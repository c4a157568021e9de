"""
Модуль распределения мощности передачи

Задача одного пользователя квазивыпукла: минимум eta(p) на (0, p_max]
находится бисекцией по знаку phi(p). Помеха внутри группы одного подканала
оценивается в два прохода: сначала все соседи на p_max, затем по мощностям
первого прохода.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

import config
from src.net_model import Assignment, PowerAlloc, Scenario

logger = logging.getLogger(__name__)

Number = Union[float, np.ndarray]

LN2 = math.log(2.0)


@dataclass(frozen=True)
class PowerProblem:
    """
    Параметры задачи минимизации eta(p) одного пользователя

    Поля могут быть numpy-массивами одинаковой формы (пакетный режим).
    """

    lam_t: Number
    lam_e: Number
    alpha_bits: Number
    u: Number  # alpha / zeta
    B: Number
    h: Number
    noise_plus_I: Number
    p_max: Number

    @property
    def a_coef(self) -> Number:
        """Постоянная часть числителя: lambda_t * alpha / B"""
        return self.lam_t * self.alpha_bits / self.B

    @property
    def b_coef(self) -> Number:
        """Коэффициент при p в числителе: lambda_e * u / B"""
        return self.lam_e * self.u / self.B


def eta(prob: PowerProblem, p: Number) -> Number:
    """
    Удельные накладные расходы передачи eta(p) = (a + b*p) / log2(1 + p*h/c)

    Raises:
        ValueError: p <= 0
    """
    if np.any(np.asarray(p) <= 0):
        raise ValueError(f"eta определена только при p > 0, получено {p}")
    return (prob.a_coef + prob.b_coef * p) / np.log2(1.0 + p * prob.h / prob.noise_plus_I)


def phi(prob: PowerProblem, p: Number) -> Number:
    """Функция знака производной eta: eta'(p) имеет тот же знак, что и phi(p)"""
    c = prob.noise_plus_I
    return (prob.b_coef * np.log2(1.0 + p * prob.h / c)
            - (prob.h / LN2) * (prob.a_coef + prob.b_coef * p) / (c + p * prob.h))


def phi_prime(prob: PowerProblem, p: Number) -> Number:
    """Производная phi: h^2 (a + b*p) / (ln2 * (c + p*h)^2) > 0"""
    c = prob.noise_plus_I
    return prob.h ** 2 * (prob.a_coef + prob.b_coef * p) / (LN2 * (c + p * prob.h) ** 2)


class BisectionResult(NamedTuple):
    p_star: float
    iterations: int


def bisect_power(prob: PowerProblem, eps: float = config.BISECTION_EPS) -> BisectionResult:
    """
    Найти оптимальную мощность бисекцией по знаку phi

    Если phi(p_max) <= 0, eta убывает на всём интервале и возвращается p_max.
    Иначе отрезок сужается до ширины <= eps, возвращается его середина
    (не меньше eps, так как мощность выгружающего пользователя должна быть > 0).

    Args:
        prob: параметры задачи
        eps: точность по мощности, Вт

    Returns:
        (p_star, число итераций)
    """
    if eps <= 0:
        raise ValueError(f"eps должен быть > 0, получено {eps}")
    p_max = float(prob.p_max)
    if phi(prob, p_max) <= 0:
        return BisectionResult(p_max, 0)

    lo, hi = 0.0, p_max
    iterations = 0
    while hi - lo > eps:
        mid = 0.5 * (lo + hi)
        if phi(prob, mid) > 0:
            hi = mid
        else:
            lo = mid
        iterations += 1

    p_star = min(max(0.5 * (lo + hi), eps), p_max)
    return BisectionResult(p_star, iterations)


def bisect_power_batch(prob: PowerProblem, eps: float = config.BISECTION_EPS) -> np.ndarray:
    """
    Векторизованная бисекция для набора задач (поля prob - массивы одной формы)

    Результат поэлементно совпадает с bisect_power.
    """
    if eps <= 0:
        raise ValueError(f"eps должен быть > 0, получено {eps}")
    shape = np.broadcast(prob.lam_t, prob.lam_e, prob.alpha_bits, prob.u, prob.B,
                         prob.h, prob.noise_plus_I, prob.p_max).shape
    p_max = np.broadcast_to(np.asarray(prob.p_max, dtype=float), shape).copy()
    saturated = phi(prob, p_max) <= 0

    lo = np.zeros_like(p_max)
    hi = p_max.copy()
    active = ~saturated & (hi - lo > eps)
    while active.any():
        mid = 0.5 * (lo + hi)
        positive = phi(prob, mid) > 0
        hi = np.where(active & positive, mid, hi)
        lo = np.where(active & ~positive, mid, lo)
        active = active & (hi - lo > eps)

    p_star = np.minimum(np.maximum(0.5 * (lo + hi), eps), p_max)
    return np.where(saturated, p_max, p_star)


def power_problem(scn: Scenario, n: int, m: int, s: int, interference: Number) -> PowerProblem:
    """Задача мощности пользователя n на (m, s) при заданной помехе"""
    user = scn.users[n]
    return PowerProblem(
        lam_t=user.lambda_t,
        lam_e=user.lambda_e,
        alpha_bits=user.task.alpha,
        u=user.task.alpha / user.zeta,
        B=scn.bandwidth,
        h=scn.gains[n, m, s],
        noise_plus_I=scn.noise + interference,
        p_max=user.p_max,
    )


def _group_problem(scn: Scenario, members: Sequence[Tuple[int, int]], s: int,
                   interference: np.ndarray) -> PowerProblem:
    users = [scn.users[n] for _, n in members]
    return PowerProblem(
        lam_t=np.array([u.lambda_t for u in users]),
        lam_e=np.array([u.lambda_e for u in users]),
        alpha_bits=np.array([u.task.alpha for u in users]),
        u=np.array([u.task.alpha / u.zeta for u in users]),
        B=scn.bandwidth,
        h=np.array([scn.gains[n, m, s] for m, n in members]),
        noise_plus_I=scn.noise + interference,
        p_max=np.array([u.p_max for u in users]),
    )


def group_interference(scn: Scenario, members: Sequence[Tuple[int, int]], s: int,
                       powers: np.ndarray) -> np.ndarray:
    """
    Помеха каждому члену группы подканала s от остальных членов

    Args:
        members: пары (сервер, пользователь), все на подканале s
        powers: мощности членов в том же порядке

    Returns:
        Массив помех, Вт
    """
    servers = np.array([m for m, _ in members], dtype=int)
    users = np.array([n for _, n in members], dtype=int)
    # cross[i, j] - вклад члена j в помеху на SeNB члена i
    cross = powers[None, :] * scn.gains[users[None, :], servers[:, None], s]
    cross[servers[:, None] == servers[None, :]] = 0.0
    return cross.sum(axis=1)


def allocate_power_group(scn: Scenario, members: Sequence[Tuple[int, int]], s: int,
                         eps: float = config.BISECTION_EPS,
                         refinements: int = config.POWER_REFINEMENTS) -> Dict[int, float]:
    """
    Распределить мощность в группе пользователей одного подканала

    Первый проход: соседи излучают на p_max (худший случай). Затем
    refinements проходов с помехой от мощностей предыдущего прохода.

    Args:
        members: пары (сервер, пользователь) на подканале s
        refinements: число уточняющих проходов (1 - стандартная двухпроходная схема)

    Returns:
        Словарь пользователь -> мощность, Вт
    """
    members = list(members)
    if not members:
        return {}
    p_max = np.array([scn.users[n].p_max for _, n in members])
    powers = bisect_power_batch(
        _group_problem(scn, members, s, group_interference(scn, members, s, p_max)), eps)
    for _ in range(max(refinements, 0)):
        powers = bisect_power_batch(
            _group_problem(scn, members, s, group_interference(scn, members, s, powers)), eps)
    return {n: float(p) for (_, n), p in zip(members, powers)}


def subchannel_groups(asg: Assignment) -> Dict[int, List[Tuple[int, int]]]:
    """Группы (сервер, пользователь) по подканалам"""
    groups: Dict[int, List[Tuple[int, int]]] = {}
    for n, (m, s) in sorted(asg.pairs().items()):
        groups.setdefault(s, []).append((m, n))
    return groups


def allocate_power(scn: Scenario, asg: Assignment, eps: float = config.BISECTION_EPS,
                   refinements: int = config.POWER_REFINEMENTS) -> PowerAlloc:
    """Распределить мощность всем выгружающим пользователям назначения"""
    p = np.zeros((scn.N, scn.S))
    for s, members in subchannel_groups(asg).items():
        for n, power in allocate_power_group(scn, members, s, eps, refinements).items():
            p[n, s] = power
    return PowerAlloc(p)
