"""
Модуль локального поиска по перемещениям одного пользователя

Перемещение - на свободный (сервер, подканал) в пределах квоты или в
локальное исполнение. После перемещения пересчитываются только группы двух
подканалов (бисекцией) и ресурсы двух серверов (замкнутая формула), поэтому
результат совпадает с полным пересчётом allocate_power / allocate_compute_all.

Используется жадным hJTORA и доводкой решения JCORAMS.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

import numpy as np

import config
from src.compute_alloc import allocate_compute
from src.net_model import Scenario, local_overhead, rate_from_sinr, remote_overhead
from src.power_alloc import PowerProblem, allocate_power_group, bisect_power_batch, eta, group_interference

logger = logging.getLogger(__name__)

Placement = Optional[Tuple[int, int]]

# Допуски доводки строже допуска weak_pareto_violations (1e-9)
MOVER_RTOL = 5e-10
OTHERS_RTOL = 2e-9
BOUND_SLACK = 1e-6


class MoveState:
    """
    Текущее назначение с кэшем мощностей, скоростей, ресурсов и накладных расходов
    """

    def __init__(self, scn: Scenario, eps: float, refinements: int,
                 pairs: Optional[Dict[int, Tuple[int, int]]] = None):
        self.scn = scn
        self.eps = eps
        self.refinements = refinements
        self.pairs: Dict[int, Tuple[int, int]] = {}
        self.power = np.zeros(scn.N)
        self.rate = np.zeros(scn.N)
        self.f = np.zeros(scn.N)
        self.z_local = np.array([local_overhead(u).Z_l for u in scn.users])
        self.z = self.z_local.copy()
        if pairs:
            pairs = dict(pairs)
            subchannels = {s for _, s in pairs.values()}
            servers = {m for m, _ in pairs.values()}
            self.apply(self._recompute(pairs, subchannels, servers, set(pairs)))

    @staticmethod
    def _group(pairs, s: int) -> List[Tuple[int, int]]:
        # тот же порядок членов, что в subchannel_groups
        return [(m, n) for n, (m, j) in sorted(pairs.items()) if j == s]

    @staticmethod
    def _server(pairs, m: int) -> List[int]:
        return sorted(n for n, (j, _) in pairs.items() if j == m)

    def _recompute(self, pairs, subchannels, servers, touched):
        scn = self.scn
        power, rate, f = {}, {}, {}

        for s in subchannels:
            members = self._group(pairs, s)
            if not members:
                continue
            alloc = allocate_power_group(scn, members, s, self.eps, self.refinements)
            powers = np.array([alloc[k] for _, k in members])
            interference = group_interference(scn, members, s, powers)
            for (m, k), pk, ik in zip(members, powers, interference):
                power[k] = pk
                rate[k] = rate_from_sinr(scn.bandwidth, pk * scn.gains[k, m, s] / (scn.noise + ik))

        for m in servers:
            users = self._server(pairs, m)
            shares = allocate_compute(
                scn.servers[m].f_max, [(scn.users[k].lambda_t, scn.users[k].task.beta) for k in users])
            f.update(zip(users, shares))

        new_z = {}
        for k in set(power) | set(f) | set(touched):
            if k not in pairs:
                new_z[k] = self.z_local[k]
                continue
            p_k = power.get(k, self.power[k])
            r_k = rate.get(k, self.rate[k])
            f_k = f.get(k, self.f[k])
            new_z[k] = remote_overhead(scn.users[k], r_k, f_k, p_k).Z_r
        return pairs, power, rate, f, new_z

    def evaluate(self, n: int, target: Placement):
        """
        Оценить перемещение пользователя n

        Returns:
            (изменение суммарного Z, обновление для apply)
        """
        pairs = dict(self.pairs)
        old = pairs.pop(n, None)
        if target is not None:
            pairs[n] = target
        subchannels = {place[1] for place in (old, target) if place is not None}
        servers = {place[0] for place in (old, target) if place is not None}
        update = self._recompute(pairs, subchannels, servers, {n})
        new_z = update[4]
        delta = sum(new_z[k] - self.z[k] for k in new_z)
        return delta, update

    def apply(self, update):
        pairs, power, rate, f, new_z = update
        for k in set(self.pairs) - set(pairs):
            self.power[k] = self.rate[k] = self.f[k] = 0.0
        self.pairs = pairs
        for k, v in power.items():
            self.power[k] = v
        for k, v in rate.items():
            self.rate[k] = v
        for k, v in f.items():
            self.f[k] = v
        for k, v in new_z.items():
            self.z[k] = v

    def moves(self, users: Optional[Iterable[int]] = None) -> Iterator[Tuple[int, Placement]]:
        """Допустимые перемещения: на свободный (m, s) или в локальное исполнение"""
        scn = self.scn
        occupied = set(self.pairs.values())
        load = {m: 0 for m in range(scn.M)}
        for m, _ in self.pairs.values():
            load[m] += 1
        for n in (range(scn.N) if users is None else users):
            current = self.pairs.get(n)
            if current is not None:
                yield n, None
            for m in range(scn.M):
                extra = 0 if current is not None and current[0] == m else 1
                if load[m] + extra > scn.effective_quota(m):
                    continue
                for s in range(scn.S):
                    if (m, s) not in occupied:
                        yield n, (m, s)

    def arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        """Матрицы мощностей (N, S) и ресурсов (N, M)"""
        p = np.zeros((self.scn.N, self.scn.S))
        f = np.zeros((self.scn.N, self.scn.M))
        for n, (m, s) in self.pairs.items():
            p[n, s] = self.power[n]
            f[n, m] = self.f[n]
        return p, f


def transfer_lower_bounds(scn: Scenario, users: Sequence[int],
                          eps: float = config.BISECTION_EPS) -> np.ndarray:
    """
    min_p eta(p) без межсотовой помехи для каждого (n, m, s)

    Помеха только увеличивает eta, поэтому это нижняя граница затрат
    передачи пользователя на любом подканале.

    Returns:
        Массив (len(users), M, S)
    """
    users = list(users)
    shape = (len(users), scn.M, scn.S)
    if not users or scn.M == 0:
        return np.zeros(shape)
    chosen = [scn.users[n] for n in users]

    def per_user(values):
        return np.broadcast_to(np.asarray(values, dtype=float)[:, None, None], shape).ravel()

    prob = PowerProblem(
        lam_t=per_user([u.lambda_t for u in chosen]),
        lam_e=per_user([u.lambda_e for u in chosen]),
        alpha_bits=per_user([u.task.alpha for u in chosen]),
        u=per_user([u.task.alpha / u.zeta for u in chosen]),
        B=scn.bandwidth,
        h=scn.gains[users].ravel(),
        noise_plus_I=scn.noise,
        p_max=per_user([u.p_max for u in chosen]),
    )
    p = bisect_power_batch(prob, eps)
    return np.asarray(eta(prob, p)).reshape(shape)


@dataclass
class PolishResult:
    """Итог доводки: назначение, мощности (N, S), ресурсы (N, M), число перемещений"""

    pairs: Dict[int, Tuple[int, int]]
    power: np.ndarray
    compute: np.ndarray
    moves: int = 0
    dropped: Set[int] = field(default_factory=set)


class ParetoPolisher:
    """
    Доводка назначения перемещениями одного пользователя

    Шаг 1: невыгодный выгружающий (Z_r > Z_l) с наименьшим Z_l возвращается
    к локальному исполнению. Шаг 2: перемещение, при котором перемещаемый
    строго выигрывает, а остальные не проигрывают. Повторяется, пока
    применимо хоть одно правило.
    """

    def __init__(self, scn: Scenario, movable: Iterable[int], eps: float = config.BISECTION_EPS,
                 refinements: int = config.POWER_REFINEMENTS):
        self.scn = scn
        self.movable = sorted(set(movable))
        self.eps = eps
        self.refinements = refinements
        self._row = {n: i for i, n in enumerate(self.movable)}
        self._bounds = transfer_lower_bounds(scn, self.movable, eps)
        self._weight = np.sqrt([u.lambda_t * u.task.beta for u in scn.users])

    def _lower_bound(self, state: MoveState, loads: np.ndarray, n: int, m: int, s: int) -> float:
        """Нижняя граница Z_r пользователя n на (m, s)"""
        w = self._weight[n]
        current = state.pairs.get(n)
        others = loads[m] - (w if current is not None and current[0] == m else 0.0)
        compute = w * (others + w) / self.scn.servers[m].f_max if w > 0 else 0.0
        return (self._bounds[self._row[n], m, s] + compute) * (1 - BOUND_SLACK)

    @staticmethod
    def _strip_move(state: MoveState):
        bad = [n for n in state.pairs if state.z[n] > state.z_local[n]]
        if not bad:
            return None
        n = min(bad, key=lambda k: (state.z_local[k], k))
        return n, None, state.evaluate(n, None)[1]

    def _pareto_move(self, state: MoveState):
        loads = np.zeros(self.scn.M)
        for k, (m, _) in state.pairs.items():
            loads[m] += self._weight[k]

        for n, target in state.moves(self.movable):
            threshold = state.z[n] * (1 - MOVER_RTOL)
            if target is None:
                if state.z_local[n] >= threshold:
                    continue
            elif self._lower_bound(state, loads, n, *target) >= threshold:
                continue
            _, update = state.evaluate(n, target)
            new_z = update[4]
            if new_z[n] >= threshold:
                continue
            if all(new_z[k] <= state.z[k] * (1 + OTHERS_RTOL) for k in new_z if k != n):
                return n, target, update
        return None

    def polish(self, pairs: Dict[int, Tuple[int, int]], max_moves: Optional[int] = None) -> PolishResult:
        """
        Довести назначение до состояния без улучшающих перемещений

        Args:
            pairs: исходное назначение пользователь -> (сервер, подканал)
            max_moves: предел числа перемещений (по умолчанию 4*N*(M*S+1))

        Returns:
            PolishResult; dropped - пользователи, возвращённые к локальному исполнению
        """
        scn = self.scn
        state = MoveState(scn, self.eps, self.refinements, pairs)
        max_moves = max_moves if max_moves is not None else 4 * scn.N * (scn.M * scn.S + 1)
        seen = {frozenset(state.pairs.items())}
        dropped: Set[int] = set()
        moves = 0

        while moves < max_moves:
            step = self._strip_move(state) or self._pareto_move(state)
            if step is None:
                break
            n, target, update = step
            state.apply(update)
            moves += 1
            if target is None:
                dropped.add(n)
            else:
                dropped.discard(n)
            key = frozenset(state.pairs.items())
            if key in seen:
                logger.warning(f"⚠️ Доводка вернулась к уже пройденному назначению после {moves} перемещений")
                break
            seen.add(key)
        else:
            logger.warning(f"⚠️ Доводка: достигнут предел {max_moves} перемещений")

        p, f = state.arrays()
        return PolishResult(dict(state.pairs), p, f, moves, dropped)
