"""
Модуль сетевой модели: доменные типы и вся арифметика накладных расходов

Единицы измерения везде SI (биты, Гц, Вт, циклы, с, Дж). Перевод из dBm/dB
выполняется только при разборе конфигурации (см. src.channel_scenario).
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)


class ModelError(ValueError):
    """Базовая ошибка доменной модели"""


class InconsistentSolutionError(ModelError):
    """Тензоры A, P, F не согласованы между собой (ошибка солвера)"""


class InfeasibleAssignmentError(ModelError):
    """Назначение нарушает ограничения или не может быть оценено"""


def _frozen_array(values, dtype=float) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class TaskProfile:
    """Вычислительная задача пользователя (alpha, beta, omega)"""

    alpha: float  # входные данные, бит
    beta: float  # требуемые CPU циклы
    omega: float = 0.0  # размер результата, бит (хранится, в целевой функции не участвует)

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0 or self.omega < 0:
            raise ModelError(
                f"Некорректная задача: alpha={self.alpha}, beta={self.beta}, omega={self.omega}"
            )


@dataclass(frozen=True)
class MobileUser:
    """Мобильный пользователь"""

    id: int
    position: Tuple[float, float]
    task: TaskProfile
    f_local: float  # циклы/с
    kappa: float  # Дж*с^2/цикл^3
    p_max: float  # Вт
    zeta: float = 1.0  # КПД усилителя мощности
    lambda_t: float = 0.5
    lambda_e: float = 0.5

    def __post_init__(self):
        problems = []
        if self.f_local <= 0:
            problems.append(f"f_local={self.f_local} <= 0")
        if self.kappa < 0:
            problems.append(f"kappa={self.kappa} < 0")
        if self.p_max <= 0:
            problems.append(f"p_max={self.p_max} <= 0")
        if not 0 < self.zeta <= 1:
            problems.append(f"zeta={self.zeta} вне (0, 1]")
        if not 0 <= self.lambda_t <= 1:
            problems.append(f"lambda_t={self.lambda_t} вне [0, 1]")
        if not math.isclose(self.lambda_t + self.lambda_e, 1.0, abs_tol=1e-9):
            problems.append(f"lambda_t + lambda_e = {self.lambda_t + self.lambda_e} != 1")
        if problems:
            raise ModelError(f"Пользователь {self.id}: " + "; ".join(problems))


@dataclass(frozen=True)
class MecServer:
    """MEC сервер, совмещённый с SeNB"""

    id: int
    position: Tuple[float, float]
    f_max: float  # циклы/с
    quota: int  # максимум обслуживаемых пользователей

    def __post_init__(self):
        if self.f_max <= 0 or self.quota < 1:
            raise ModelError(f"Сервер {self.id}: f_max={self.f_max}, quota={self.quota}")


@dataclass(frozen=True, eq=False)
class Scenario:
    """
    Неизменяемый экземпляр сети

    gains[n][m][s] - линейный коэффициент усиления канала от пользователя n
    к SeNB m на подканале s.
    """

    users: Tuple[MobileUser, ...]
    servers: Tuple[MecServer, ...]
    S: int
    bandwidth: float  # Гц на подканал (B_s)
    noise: float  # Вт на подканал (n_0)
    gains: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "servers", tuple(self.servers))
        gains = _frozen_array(self.gains)
        object.__setattr__(self, "gains", gains)

        if self.S < 1:
            raise ModelError(f"S={self.S} < 1")
        if self.noise <= 0 or self.bandwidth <= 0:
            raise ModelError(f"noise={self.noise}, bandwidth={self.bandwidth} должны быть > 0")
        expected = (len(self.users), len(self.servers), self.S)
        if gains.shape != expected:
            raise ModelError(f"gains.shape={gains.shape}, ожидалось {expected}")
        if gains.size and not np.all(gains > 0):
            raise ModelError("Все коэффициенты усиления должны быть > 0")

    @property
    def N(self) -> int:
        return len(self.users)

    @property
    def M(self) -> int:
        return len(self.servers)

    def effective_quota(self, m: int) -> int:
        """Квота сервера, ограниченная числом подканалов (не больше S пользователей на соту)"""
        return min(self.servers[m].quota, self.S)

    def restrict(self, user_idx: Sequence[int], server_idx: Sequence[int]) -> "Scenario":
        """
        Под-сценарий из части пользователей и серверов

        Порядок индексов сохраняется: пользователь i под-сценария - это user_idx[i].
        """
        user_idx = list(user_idx)
        server_idx = list(server_idx)
        gains = self.gains[np.ix_(user_idx, server_idx, range(self.S))] if user_idx and server_idx \
            else np.zeros((len(user_idx), len(server_idx), self.S))
        return Scenario(
            users=tuple(self.users[i] for i in user_idx),
            servers=tuple(self.servers[j] for j in server_idx),
            S=self.S,
            bandwidth=self.bandwidth,
            noise=self.noise,
            gains=gains,
        )


@dataclass(frozen=True, eq=False)
class Assignment:
    """Бинарный тензор решений о выгрузке a[n][m][s]"""

    a: np.ndarray

    def __post_init__(self):
        a = _frozen_array(self.a, dtype=np.int8)
        object.__setattr__(self, "a", a)
        if a.ndim != 3:
            raise InfeasibleAssignmentError(f"Ожидался 3-мерный тензор, получено ndim={a.ndim}")
        if not np.all((a == 0) | (a == 1)):
            raise InfeasibleAssignmentError("C2: элементы A должны быть 0 или 1")
        if a.size and a.sum(axis=(1, 2)).max() > 1:
            raise InfeasibleAssignmentError("C3: пользователь выгружает больше чем на один (сервер, подканал)")
        if a.size and a.sum(axis=0).max() > 1:
            raise InfeasibleAssignmentError("C4: подканал соты занят более чем одним пользователем")

    @classmethod
    def empty(cls, N: int, M: int, S: int) -> "Assignment":
        return cls(np.zeros((N, M, S), dtype=np.int8))

    @classmethod
    def from_pairs(cls, N: int, M: int, S: int,
                   pairs: Mapping[int, Tuple[int, int]]) -> "Assignment":
        """Построить A из словаря {пользователь: (сервер, подканал)}"""
        a = np.zeros((N, M, S), dtype=np.int8)
        for n, (m, s) in pairs.items():
            a[n, m, s] = 1
        return cls(a)

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.a.shape

    @property
    def a_nm(self) -> np.ndarray:
        return self.a.sum(axis=2)

    @property
    def a_n(self) -> np.ndarray:
        return self.a.sum(axis=(1, 2))

    def placement(self, n: int) -> Optional[Tuple[int, int]]:
        """(сервер, подканал) пользователя n или None при локальном исполнении"""
        idx = np.argwhere(self.a[n] == 1)
        if len(idx) == 0:
            return None
        m, s = idx[0]
        return int(m), int(s)

    def server_of(self, n: int) -> Optional[int]:
        place = self.placement(n)
        return place[0] if place else None

    def subchannel_of(self, n: int) -> Optional[int]:
        place = self.placement(n)
        return place[1] if place else None

    def offloaders(self) -> List[int]:
        return [int(n) for n in np.flatnonzero(self.a_n)]

    def users_on(self, m: int) -> List[int]:
        return [int(n) for n in np.flatnonzero(self.a[:, m, :].sum(axis=1))]

    def pairs(self) -> Dict[int, Tuple[int, int]]:
        return {int(n): (int(m), int(s)) for n, m, s in np.argwhere(self.a == 1)}

    def without(self, n: int) -> "Assignment":
        """Копия назначения, где пользователь n исполняет задачу локально"""
        a = self.a.copy()
        a[n] = 0
        return Assignment(a)


@dataclass(frozen=True, eq=False)
class PowerAlloc:
    """Мощности передачи p[n][s], Вт"""

    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", _frozen_array(self.p))

    @classmethod
    def zeros(cls, N: int, S: int) -> "PowerAlloc":
        return cls(np.zeros((N, S)))


@dataclass(frozen=True, eq=False)
class ComputeAlloc:
    """Выделенные вычислительные ресурсы f[n][m], циклы/с"""

    f: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "f", _frozen_array(self.f))

    @classmethod
    def zeros(cls, N: int, M: int) -> "ComputeAlloc":
        return cls(np.zeros((N, M)))


class LocalOverhead(NamedTuple):
    t_l: float
    E_l: float
    Z_l: float


class RemoteOverhead(NamedTuple):
    t_off: float
    t_exe: float
    E_off: float
    Z_r: float


def local_overhead(user: MobileUser) -> LocalOverhead:
    """Время, энергия и взвешенные накладные расходы локального исполнения"""
    t_l = user.task.beta / user.f_local
    E_l = user.kappa * user.task.beta * user.f_local ** 2
    Z_l = user.lambda_t * t_l + user.lambda_e * E_l
    return LocalOverhead(t_l, E_l, Z_l)


def rate_from_sinr(bandwidth: float, gamma: float) -> float:
    """Скорость Шеннона B*log2(1 + SINR), бит/с"""
    return bandwidth * math.log2(1.0 + gamma)


def interference(scn: Scenario, asg: Assignment, pw: PowerAlloc, n: int, m: int, s: int) -> float:
    """Межсотовая помеха на SeNB m на подканале s для пользователя n, Вт"""
    others = asg.a[:, :, s].copy()
    others[:, m] = 0
    mask = others.any(axis=1)
    mask[n] = False
    if not mask.any():
        return 0.0
    return float(np.sum(pw.p[mask, s] * scn.gains[mask, m, s]))


def sinr(scn: Scenario, asg: Assignment, pw: PowerAlloc, n: int, m: int, s: int) -> float:
    """
    SINR пользователя n на SeNB m по подканалу s

    Помеху создают только пользователи ДРУГИХ сот на ТОМ ЖЕ подканале.
    """
    signal = pw.p[n, s] * scn.gains[n, m, s]
    return float(signal / (scn.noise + interference(scn, asg, pw, n, m, s)))


def offload_rate(scn: Scenario, asg: Assignment, pw: PowerAlloc, n: int, m: int, s: int) -> float:
    """
    Скорость выгрузки пользователя n, бит/с

    Raises:
        InconsistentSolutionError: у активного выгружающего пользователя нулевая мощность
    """
    if pw.p[n, s] <= 0:
        raise InconsistentSolutionError(
            f"Пользователь {n} выгружает на ({m}, {s}) с нулевой мощностью"
        )
    return rate_from_sinr(scn.bandwidth, sinr(scn, asg, pw, n, m, s))


def remote_overhead(user: MobileUser, rate: float, f_assigned: float,
                    p_total: float) -> RemoteOverhead:
    """
    Накладные расходы удалённого исполнения

    При lambda_t = 0 слагаемое lambda_t * t_exe считается нулевым даже при
    f_assigned = 0 (предел целевой функции).

    Raises:
        InfeasibleAssignmentError: нулевая скорость или нулевой ресурс при lambda_t > 0
    """
    if rate <= 0:
        raise InfeasibleAssignmentError(f"Пользователь {user.id}: скорость выгрузки {rate} <= 0")
    if f_assigned <= 0 and user.lambda_t > 0:
        raise InfeasibleAssignmentError(
            f"Пользователь {user.id}: вычислительный ресурс {f_assigned} <= 0"
        )

    t_off = user.task.alpha / rate
    E_off = (p_total / user.zeta) * t_off
    t_exe = user.task.beta / f_assigned if f_assigned > 0 else math.inf
    time_term = user.lambda_t * (t_off + t_exe) if user.lambda_t > 0 else 0.0
    Z_r = time_term + user.lambda_e * E_off
    return RemoteOverhead(t_off, t_exe, E_off, Z_r)


def _check_shapes(scn: Scenario, asg: Assignment, pw: PowerAlloc, cmp: ComputeAlloc):
    if asg.shape != (scn.N, scn.M, scn.S):
        raise InconsistentSolutionError(f"A.shape={asg.shape} не совпадает со сценарием")
    if pw.p.shape != (scn.N, scn.S):
        raise InconsistentSolutionError(f"P.shape={pw.p.shape} не совпадает со сценарием")
    if cmp.f.shape != (scn.N, scn.M):
        raise InconsistentSolutionError(f"F.shape={cmp.f.shape} не совпадает со сценарием")


def user_remote_overhead(scn: Scenario, asg: Assignment, pw: PowerAlloc, cmp: ComputeAlloc,
                         n: int, interference_free: bool = False) -> RemoteOverhead:
    """Удалённые накладные расходы пользователя n при текущем (A, P, F)"""
    place = asg.placement(n)
    if place is None:
        raise InconsistentSolutionError(f"Пользователь {n} не выгружает задачу")
    m, s = place
    if interference_free:
        if pw.p[n, s] <= 0:
            raise InconsistentSolutionError(f"Пользователь {n} выгружает с нулевой мощностью")
        rate = rate_from_sinr(scn.bandwidth, pw.p[n, s] * scn.gains[n, m, s] / scn.noise)
    else:
        rate = offload_rate(scn, asg, pw, n, m, s)
    return remote_overhead(scn.users[n], rate, float(cmp.f[n, m]), float(pw.p[n].sum()))


def per_user_overheads(scn: Scenario, asg: Assignment, pw: PowerAlloc, cmp: ComputeAlloc,
                       interference_free: bool = False) -> np.ndarray:
    """
    Накладные расходы каждого пользователя Z_n

    Args:
        interference_free: оценивать скорости без межсотовой помехи

    Returns:
        Массив длины N
    """
    _check_shapes(scn, asg, pw, cmp)
    result = np.empty(scn.N)
    offloading = set(asg.offloaders())
    for n, user in enumerate(scn.users):
        if n in offloading:
            result[n] = user_remote_overhead(scn, asg, pw, cmp, n, interference_free).Z_r
        else:
            result[n] = local_overhead(user).Z_l
    return result


def system_overhead(scn: Scenario, asg: Assignment, pw: PowerAlloc, cmp: ComputeAlloc,
                    interference_free: bool = False) -> float:
    """Системная целевая функция Z = sum_n [(1 - a_n) Z_l + a_n Z_r]"""
    return float(per_user_overheads(scn, asg, pw, cmp, interference_free).sum())


def rewritten_objective(scn: Scenario, asg: Assignment, pw: PowerAlloc, cmp: ComputeAlloc) -> float:
    """
    Переписанная целевая функция: sum Z_l + sum a_n * (выигрыш от выгрузки)

    Алгебраически совпадает с system_overhead; используется как независимая проверка.
    """
    _check_shapes(scn, asg, pw, cmp)
    base = sum(local_overhead(u).Z_l for u in scn.users)
    delta = 0.0
    for n, (m, s) in asg.pairs().items():
        user = scn.users[n]
        rate = offload_rate(scn, asg, pw, n, m, s)
        p_n = float(pw.p[n].sum())
        transfer = (user.lambda_t * user.task.alpha
                    + user.lambda_e * p_n * user.task.alpha / user.zeta) / rate
        execution = user.lambda_t * user.task.beta / cmp.f[n, m] if user.lambda_t > 0 else 0.0
        delta += transfer + execution - local_overhead(user).Z_l
    return float(base + delta)


def check_constraints(scn: Scenario, asg: Assignment, pw: PowerAlloc, cmp: ComputeAlloc,
                      rtol: float = 1e-9) -> List[str]:
    """
    Проверить ограничения C1-C7

    Returns:
        Список нарушений (пустой, если решение допустимо)
    """
    problems: List[str] = []
    try:
        _check_shapes(scn, asg, pw, cmp)
    except InconsistentSolutionError as e:
        return [str(e)]

    offloading = set(asg.offloaders())
    for n, user in enumerate(scn.users):
        place = asg.placement(n)
        if np.any(pw.p[n] < 0) or np.any(pw.p[n] > user.p_max * (1 + rtol)):
            problems.append(f"C1: мощность пользователя {n} вне [0, p_max]")
        if place is None:
            if np.any(pw.p[n] > 0):
                problems.append(f"C1: локальный пользователь {n} излучает")
            if np.any(cmp.f[n] > 0):
                problems.append(f"C6: локальному пользователю {n} выделен ресурс")
            continue
        m, s = place
        if pw.p[n, s] <= 0:
            problems.append(f"C1: выгружающий пользователь {n} с нулевой мощностью")
        if np.count_nonzero(pw.p[n]) > 1:
            problems.append(f"C1: пользователь {n} излучает на нескольких подканалах")
        if cmp.f[n, m] <= 0 and user.lambda_t > 0:
            problems.append(f"C6: пользователю {n} не выделен ресурс на сервере {m}")
        other = np.delete(cmp.f[n], m)
        if np.any(other > 0):
            problems.append(f"C6: пользователю {n} выделен ресурс на чужом сервере")

    for m, server in enumerate(scn.servers):
        load = int(asg.a[:, m, :].sum())
        if load > server.quota:
            problems.append(f"C5: сервер {m} обслуживает {load} > quota {server.quota}")
        total = float(cmp.f[:, m].sum())
        if total > server.f_max * (1 + rtol):
            problems.append(f"C7: сервер {m} выделил {total:.6g} > f_max {server.f_max:.6g}")

    if offloading and logger.isEnabledFor(logging.DEBUG) and problems:
        logger.debug(f"Нарушения ограничений: {problems}")
    return problems
