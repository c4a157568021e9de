"""
Модуль распределения подканалов внутри соты (one-to-one matching)

Соты обрабатываются по возрастанию индекса сервера. Пока сота не
сопоставлена, её пользователи считаются активными на всех подканалах с
мощностью p_max/S; после сопоставления - только на своём подканале.
"""
import copy
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

import config
from src.matching_association import AssocMatching, deferred_acceptance
from src.net_model import Assignment, Scenario, rate_from_sinr

logger = logging.getLogger(__name__)


class SubchannelOverflowError(ValueError):
    """Пользователей в соте больше, чем подканалов"""


@dataclass(frozen=True)
class CAWeights:
    """Веса предпочтения подканала: скорость и штраф за помеху соседним SeNB"""

    phi_ca: float = config.PHI_CA
    delta: Union[float, np.ndarray] = config.DELTA_CA  # скаляр или (M, S)

    def __post_init__(self):
        if self.phi_ca < 0 or np.any(np.asarray(self.delta) < 0):
            raise ValueError(f"Веса CA должны быть >= 0: {self}")

    def delta_at(self, m: int, s: int) -> float:
        delta = np.asarray(self.delta, dtype=float)
        return float(delta) if delta.ndim == 0 else float(delta[m, s])


@dataclass(frozen=True)
class SubchMatching:
    """Сопоставление пользователей соты m её подканалам"""

    server: int
    subch_of: Mapping[int, int]

    @property
    def user_of(self) -> Dict[int, int]:
        return {s: n for n, s in self.subch_of.items()}


@dataclass
class InterferenceState:
    """
    Текущее предположение о том, кто и с какой мощностью излучает

    cell[n] - сервер пользователя n (-1, если не ассоциирован),
    tx[n][s] - мощность пользователя n на подканале s.
    """

    cell: np.ndarray
    tx: np.ndarray

    @classmethod
    def initial(cls, scn: Scenario, assoc: AssocMatching) -> "InterferenceState":
        cell = np.full(scn.N, -1, dtype=int)
        tx = np.zeros((scn.N, scn.S))
        for n, m in assoc.server_of.items():
            cell[n] = m
            tx[n, :] = scn.users[n].p_max / scn.S
        return cls(cell, tx)

    @classmethod
    def silent(cls, scn: Scenario) -> "InterferenceState":
        return cls(np.full(scn.N, -1, dtype=int), np.zeros((scn.N, scn.S)))

    def at(self, scn: Scenario, m: int, s: int, n: Optional[int] = None) -> float:
        """Помеха на SeNB m по подканалу s от пользователей других сот, Вт"""
        mask = (self.cell != m) & (self.cell >= 0)
        if n is not None:
            mask[n] = False
        if not mask.any():
            return 0.0
        return float(np.sum(self.tx[mask, s] * scn.gains[mask, m, s]))

    def commit(self, scn: Scenario, matching: SubchMatching):
        """Зафиксировать сопоставление соты: пользователь излучает только на своём подканале"""
        for n, s in matching.subch_of.items():
            self.tx[n, :] = 0.0
            self.tx[n, s] = scn.users[n].p_max / scn.S


def user_pref_ca(scn: Scenario, n: int, m: int, s: int,
                 state: Optional[InterferenceState] = None) -> float:
    """Скорость пользователя n на подканале s соты m при мощности p_max/S, бит/с"""
    interference = state.at(scn, m, s, n) if state is not None else 0.0
    p = scn.users[n].p_max / scn.S
    return rate_from_sinr(scn.bandwidth, p * scn.gains[n, m, s] / (scn.noise + interference))


def subchannel_pref_ca(scn: Scenario, m: int, s: int, n: int,
                       weights: Optional[CAWeights] = None,
                       state: Optional[InterferenceState] = None) -> float:
    """
    Предпочтение подканала s соты m к пользователю n (больше - лучше)

    phi_CA * R - sum_{m' != m} delta[m'][s] * h[n][m'][s] * p
    """
    weights = weights or CAWeights()
    p = scn.users[n].p_max / scn.S
    leakage = sum(weights.delta_at(j, s) * scn.gains[n, j, s] * p
                  for j in range(scn.M) if j != m)
    return weights.phi_ca * user_pref_ca(scn, n, m, s, state) - leakage


def _preference_tables(scn: Scenario, m: int, users: List[int], weights: CAWeights,
                       state: Optional[InterferenceState]) -> Tuple[Dict[int, List[int]], Dict[int, Dict[int, int]]]:
    user_orders = {}
    for n in users:
        scores = [user_pref_ca(scn, n, m, s, state) for s in range(scn.S)]
        user_orders[n] = sorted(range(scn.S), key=lambda s: (-scores[s], s))

    subch_ranks = {}
    for s in range(scn.S):
        scores = {n: subchannel_pref_ca(scn, m, s, n, weights, state) for n in users}
        order = sorted(users, key=lambda n: (-scores[n], n))
        subch_ranks[s] = {n: rank for rank, n in enumerate(order)}
    return user_orders, subch_ranks


def match_users_subchannels(scn: Scenario, m: int, assoc: AssocMatching,
                            weights: Optional[CAWeights] = None,
                            state: Optional[InterferenceState] = None) -> SubchMatching:
    """
    Распределить подканалы соты m между её пользователями

    Raises:
        SubchannelOverflowError: пользователей в соте больше S
    """
    weights = weights or CAWeights()
    users = assoc.users_on(m)
    if len(users) > scn.S:
        raise SubchannelOverflowError(
            f"Сота {m}: {len(users)} пользователей на {scn.S} подканалов"
        )
    if not users:
        return SubchMatching(m, {})

    user_orders, subch_ranks = _preference_tables(scn, m, users, weights, state)
    matched = deferred_acceptance(user_orders, subch_ranks, {s: 1 for s in range(scn.S)})
    return SubchMatching(m, dict(sorted(matched.items())))


def find_subchannel_blocking_pair(scn: Scenario, matching: SubchMatching, users: List[int],
                                  weights: Optional[CAWeights] = None,
                                  state: Optional[InterferenceState] = None) -> Optional[Tuple[int, int]]:
    """
    Найти блокирующую пару (пользователь, подканал) в соте

    Returns:
        Пара или None, если сопоставление стабильно
    """
    weights = weights or CAWeights()
    if not users:
        return None
    m = matching.server
    user_orders, subch_ranks = _preference_tables(scn, m, users, weights, state)
    holder = matching.user_of
    for n in sorted(users):
        order = user_orders[n]
        current = matching.subch_of.get(n)
        limit = order.index(current) if current is not None else len(order)
        for s in order[:limit]:
            other = holder.get(s)
            if other is None or subch_ranks[s][n] < subch_ranks[s][other]:
                return n, s
    return None


@dataclass
class CellMatchings:
    """Сопоставления всех сот одной итерации и состояние помех для каждой соты"""

    matchings: Dict[int, SubchMatching]
    states: Dict[int, InterferenceState] = field(default_factory=dict)

    def pairs(self) -> Dict[int, Tuple[int, int]]:
        return {n: (m, s) for m, sm in self.matchings.items() for n, s in sm.subch_of.items()}

    def to_assignment(self, scn: Scenario) -> Assignment:
        return Assignment.from_pairs(scn.N, scn.M, scn.S, self.pairs())


def match_all_cells(scn: Scenario, assoc: AssocMatching,
                    weights: Optional[CAWeights] = None) -> CellMatchings:
    """Последовательно сопоставить подканалы во всех сотах"""
    state = InterferenceState.initial(scn, assoc)
    result = CellMatchings({})
    for m in range(scn.M):
        result.states[m] = copy.deepcopy(state)
        matching = match_users_subchannels(scn, m, assoc, weights, state)
        state.commit(scn, matching)
        result.matchings[m] = matching
    logger.debug(f"Подканалы: {len(result.pairs())} пользователей получили подканал")
    return result


def replay_cells(scn: Scenario, assoc: AssocMatching, asg: Assignment) -> CellMatchings:
    """
    Восстановить сопоставления сот и состояния помех по готовому назначению

    Соты проходятся в том же порядке, что в match_all_cells, поэтому для
    назначения, полученного match_all_cells, состояния совпадают.
    """
    state = InterferenceState.initial(scn, assoc)
    result = CellMatchings({})
    pairs = asg.pairs()
    for m in range(scn.M):
        result.states[m] = copy.deepcopy(state)
        matching = SubchMatching(m, {n: s for n, (j, s) in sorted(pairs.items()) if j == m})
        state.commit(scn, matching)
        result.matchings[m] = matching
    return result
