"""
Модуль ассоциации пользователей с MEC серверами (many-to-one matching)

Предпочтения строятся один раз при равномерной мощности p_max/S и равномерном
ресурсе f_max/q и не меняются во время работы deferred acceptance. Все прочие
кандидаты считаются активными на всех подканалах (худший случай помехи).
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Hashable, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

import config
from src.net_model import Scenario

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class UAWeights:
    """Веса предпочтения пользователя (скорость и вычислительный ресурс)"""

    phi_ua: float = config.PHI_UA
    eps_ua: float = config.EPS_UA

    def __post_init__(self):
        if self.phi_ua < 0 or self.eps_ua < 0:
            raise ValueError(f"Веса UA должны быть >= 0: {self}")


@dataclass(frozen=True)
class AssocMatching:
    """Результат ассоциации: пользователь -> сервер"""

    server_of: Mapping[int, int]
    candidates: Tuple[int, ...] = ()

    @property
    def users_of(self) -> Dict[int, List[int]]:
        result: Dict[int, List[int]] = {}
        for n, m in sorted(self.server_of.items()):
            result.setdefault(m, []).append(n)
        return result

    def users_on(self, m: int) -> List[int]:
        return self.users_of.get(m, [])

    def is_matched(self, n: int) -> bool:
        return n in self.server_of


def deferred_acceptance(proposer_prefs: Mapping[Hashable, Sequence[Hashable]],
                        receiver_rank: Mapping[Hashable, Mapping[Hashable, int]],
                        quotas: Mapping[Hashable, int]) -> Dict[Hashable, Hashable]:
    """
    Deferred acceptance с квотами (предлагают proposers)

    Каждый proposer предлагает по своему списку, receiver держит лучших
    quota предложений по своему рангу (меньше - лучше) и отклоняет остальных.

    Args:
        proposer_prefs: упорядоченные списки приемлемых receivers
        receiver_rank: ранг каждого proposer у каждого receiver
        quotas: квоты receivers

    Returns:
        Словарь proposer -> receiver для сопоставленных
    """
    next_choice = {p: 0 for p in proposer_prefs}
    held: Dict[Hashable, List[Hashable]] = {r: [] for r in quotas}
    free = sorted(proposer_prefs, key=lambda p: p)
    proposals = 0

    while free:
        p = free.pop(0)
        prefs = proposer_prefs[p]
        if next_choice[p] >= len(prefs):
            continue
        r = prefs[next_choice[p]]
        next_choice[p] += 1
        proposals += 1

        held[r].append(p)
        held[r].sort(key=lambda x: receiver_rank[r][x])
        if len(held[r]) > quotas[r]:
            rejected = held[r].pop()
            free.append(rejected)
            free.sort()

    logger.debug(f"Deferred acceptance: {proposals} предложений")
    return {p: r for r, members in held.items() for p in members}


def _uniform_sinr_sum(scn: Scenario, candidates: Sequence[int]) -> np.ndarray:
    """
    Sum_s SINR[n, m, s] при мощности p_max/S у всех кандидатов на всех подканалах

    Returns:
        Массив (len(candidates), M)
    """
    cand = np.asarray(candidates, dtype=int)
    if cand.size == 0:
        return np.zeros((0, scn.M))
    p_uniform = np.array([scn.users[n].p_max / scn.S for n in cand])
    rx = p_uniform[:, None, None] * scn.gains[cand]  # (C, M, S)
    total = rx.sum(axis=0)  # (M, S)
    interference = total[None, :, :] - rx
    return (rx / (scn.noise + interference)).sum(axis=2)


@dataclass
class UAPreferences:
    """Замороженные таблицы предпочтений одной итерации ассоциации"""

    candidates: Tuple[int, ...]
    user_scores: np.ndarray  # (C, M), больше - лучше
    server_costs: np.ndarray  # (C, M), меньше - лучше
    _row: Dict[int, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._row = {n: i for i, n in enumerate(self.candidates)}

    def user_score(self, n: int, m: int) -> float:
        return float(self.user_scores[self._row[n], m])

    def server_cost(self, m: int, n: int) -> float:
        return float(self.server_costs[self._row[n], m])

    def user_order(self, n: int) -> List[int]:
        """Серверы в порядке убывания предпочтения (при равенстве - меньший индекс)"""
        scores = self.user_scores[self._row[n]]
        return sorted(range(len(scores)), key=lambda m: (-scores[m], m))

    def server_rank(self, m: int) -> Dict[int, int]:
        """Ранг каждого кандидата у сервера m (0 - лучший)"""
        order = sorted(self.candidates, key=lambda n: (self.server_costs[self._row[n], m], n))
        return {n: rank for rank, n in enumerate(order)}


def build_preferences(scn: Scenario, candidates: Iterable[int],
                      weights: Optional[UAWeights] = None) -> UAPreferences:
    """Построить таблицы предпочтений пользователей и серверов для кандидатов"""
    weights = weights or UAWeights()
    cand = tuple(sorted(set(candidates)))
    sinr_sum = _uniform_sinr_sum(scn, cand)
    user_scores = np.zeros((len(cand), scn.M))
    server_costs = np.zeros((len(cand), scn.M))
    f_share = np.array([s.f_max / s.quota for s in scn.servers])

    for i, n in enumerate(cand):
        user = scn.users[n]
        log_term = np.log2(1.0 + sinr_sum[i])
        user_scores[i] = (weights.phi_ua / user.task.alpha * log_term
                          + weights.eps_ua / user.task.beta * f_share)
        rate = scn.bandwidth * log_term
        transfer = user.lambda_t * user.task.alpha + user.lambda_e * user.p_max * user.task.alpha / user.zeta
        server_costs[i] = transfer / rate + user.lambda_t * user.task.beta / f_share

    return UAPreferences(cand, user_scores, server_costs)


def user_pref_ua(scn: Scenario, n: int, m: int, weights: Optional[UAWeights] = None,
                 candidates: Optional[Iterable[int]] = None) -> float:
    """
    Предпочтение пользователя n к серверу m (больше - лучше)

    Args:
        candidates: множество потенциальных выгружающих (по умолчанию все пользователи)
    """
    cand = set(range(scn.N) if candidates is None else candidates) | {n}
    return build_preferences(scn, cand, weights).user_score(n, m)


def server_pref_ua(scn: Scenario, m: int, n: int,
                   candidates: Optional[Iterable[int]] = None) -> float:
    """Стоимость пользователя n для сервера m (меньше - лучше)"""
    cand = set(range(scn.N) if candidates is None else candidates) | {n}
    return build_preferences(scn, cand).server_cost(m, n)


def association_quotas(scn: Scenario) -> Dict[int, int]:
    return {m: scn.effective_quota(m) for m in range(scn.M)}


def match_users_servers(scn: Scenario, candidates: Iterable[int],
                        weights: Optional[UAWeights] = None,
                        prefs: Optional[UAPreferences] = None) -> AssocMatching:
    """
    Сопоставить кандидатов серверам алгоритмом deferred acceptance

    Квота сервера ограничена числом подканалов, чтобы каждый принятый
    пользователь гарантированно получил подканал.

    Args:
        scn: сценарий
        candidates: потенциальные выгружающие пользователи
        weights: веса предпочтений пользователей
        prefs: заранее построенные таблицы (иначе строятся здесь)

    Returns:
        Стабильное сопоставление
    """
    if prefs is None:
        prefs = build_preferences(scn, candidates, weights)
    cand = prefs.candidates
    if not cand:
        return AssocMatching({}, ())

    proposer_prefs = {n: prefs.user_order(n) for n in cand}
    receiver_rank = {m: prefs.server_rank(m) for m in range(scn.M)}
    matched = deferred_acceptance(proposer_prefs, receiver_rank, association_quotas(scn))
    logger.debug(f"Ассоциация: {len(matched)}/{len(cand)} кандидатов сопоставлено")
    return AssocMatching(dict(sorted(matched.items())), cand)


def find_blocking_pair(scn: Scenario, matching: AssocMatching,
                       weights: Optional[UAWeights] = None,
                       prefs: Optional[UAPreferences] = None) -> Optional[Tuple[int, int]]:
    """
    Найти блокирующую пару (пользователь, сервер)

    Пара блокирует, если пользователь строго предпочитает сервер текущему
    (или не сопоставлен), а сервер имеет свободную квоту или строго
    предпочитает пользователя кому-то из своих.

    Returns:
        Первая найденная пара в порядке (пользователь, сервер) или None
    """
    if prefs is None:
        prefs = build_preferences(scn, matching.candidates, weights)
    quotas = association_quotas(scn)
    users_of = matching.users_of
    ranks = {m: prefs.server_rank(m) for m in range(scn.M)}

    for n in prefs.candidates:
        order = prefs.user_order(n)
        current = matching.server_of.get(n)
        limit = order.index(current) if current is not None else len(order)
        for m in order[:limit]:
            members = users_of.get(m, [])
            if len(members) < quotas[m]:
                return n, m
            if any(ranks[m][n] < ranks[m][k] for k in members):
                return n, m
    return None

