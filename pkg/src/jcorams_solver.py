"""
Модуль решателя JCORAMS: совместная выгрузка вычислений и распределение ресурсов

Фазы:
1. Предварительный фильтр - пользователи, которым выгрузка заведомо невыгодна,
   исполняют задачу локально.
2. Итерации: ассоциация с серверами -> подканалы -> мощность -> ресурсы.
3. Пост-фильтр: после каждой итерации удаляется один невыгодный пользователь
   (с наименьшими локальными накладными расходами); итерации продолжаются,
   пока удалять некого.
4. Доводка: перемещения одного пользователя, пока кто-то может выиграть,
   не ухудшив остальных (слабая оптимальность по Парето).
"""
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

import config
from src.compute_alloc import allocate_compute_all
from src.matching_association import (
    AssocMatching,
    UAWeights,
    build_preferences,
    find_blocking_pair,
    match_users_servers,
)
from src.local_search import ParetoPolisher
from src.matching_subchannel import (
    CAWeights,
    CellMatchings,
    find_subchannel_blocking_pair,
    match_all_cells,
    replay_cells,
)
from src.net_model import (
    Assignment,
    ComputeAlloc,
    PowerAlloc,
    Scenario,
    local_overhead,
    per_user_overheads,
    rate_from_sinr,
    user_remote_overhead,
)
from src.power_alloc import allocate_power

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverParams:
    """Параметры решателя"""

    ua: UAWeights = field(default_factory=UAWeights)
    ca: CAWeights = field(default_factory=CAWeights)
    eps: float = config.BISECTION_EPS
    refinements: int = config.POWER_REFINEMENTS
    pre_filter: bool = True
    post_filter: bool = True
    keep_best_iterate: bool = True  # доводить черновики всех итераций и брать лучший
    polish: bool = True  # без доводки выдаётся последний черновик как есть
    interference_free: bool = False  # только для итоговой оценки Z


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    candidates: int
    matched: int
    removed: Optional[int]
    total_overhead: float


@dataclass
class Solution:
    """Решение (A, P, F) с накладными расходами и диагностикой"""

    scheme: str
    assignment: Assignment
    power: PowerAlloc
    compute: ComputeAlloc
    per_user_overhead: np.ndarray
    total_overhead: float
    iterations: int = 0
    candidates: Optional[Tuple[int, ...]] = None  # прошедшие предфильтр; None - не задано
    final_candidates: Tuple[int, ...] = ()  # кандидаты, для которых проверялась ассоциация
    history: List[IterationRecord] = field(default_factory=list)
    diagnostics: Dict[str, object] = field(default_factory=dict)

    @property
    def offloader_count(self) -> int:
        return len(self.assignment.offloaders())

    @property
    def offload_ratio(self) -> float:
        N = self.assignment.shape[0]
        return self.offloader_count / N if N else 0.0

    def summary_row(self, seed: Optional[int] = None) -> Dict[str, object]:
        """Строка сводки: seed, N, M, S, доля выгружающих, Z, итерации"""
        N, M, S = self.assignment.shape
        return {
            "scheme": self.scheme,
            "seed": seed if seed is not None else "",
            "N": N,
            "M": M,
            "S": S,
            "offload_pct": f"{self.offload_ratio:.6g}",
            "total_overhead": f"{self.total_overhead:.6g}",
            "iterations": self.iterations,
        }


def build_solution(scheme: str, scn: Scenario, asg: Assignment, pw: PowerAlloc, cmp: ComputeAlloc,
                   interference_free: bool = False, **extra) -> Solution:
    """Собрать Solution, посчитав накладные расходы по (A, P, F)"""
    per_user = per_user_overheads(scn, asg, pw, cmp, interference_free)
    return Solution(scheme=scheme, assignment=asg, power=pw, compute=cmp,
                    per_user_overhead=per_user, total_overhead=float(per_user.sum()), **extra)


def local_solution(scheme: str, scn: Scenario, **extra) -> Solution:
    return build_solution(scheme, scn, Assignment.empty(scn.N, scn.M, scn.S),
                          PowerAlloc.zeros(scn.N, scn.S), ComputeAlloc.zeros(scn.N, scn.M), **extra)


def offload_gain(scn: Scenario, n: int, p: float, rate: float, f: float) -> float:
    """
    Выигрыш от выгрузки Y = (lt*alpha + le*p*alpha/zeta)/R + lt*beta/f - Z_l

    Y >= 0 означает, что локальное исполнение не хуже.
    """
    user = scn.users[n]
    transfer = (user.lambda_t * user.task.alpha
                + user.lambda_e * p * user.task.alpha / user.zeta) / rate
    execution = user.lambda_t * user.task.beta / f if user.lambda_t > 0 else 0.0
    return transfer + execution - local_overhead(user).Z_l


def pre_filter(scn: Scenario) -> Tuple[List[int], List[int]]:
    """
    Разбить пользователей на локальных и потенциальных выгружающих

    Оценка выгрузки оптимистична: лучший канал без помех при p_max,
    энергия при p_min = p_max/S, весь ресурс самого мощного сервера.

    Returns:
        (N_loc, N_pof)
    """
    f0 = max(s.f_max for s in scn.servers) if scn.servers else 0.0
    local, potential = [], []
    for n, user in enumerate(scn.users):
        if not scn.servers:
            local.append(n)
            continue
        r_max = rate_from_sinr(scn.bandwidth, user.p_max * float(scn.gains[n].max()) / scn.noise)
        if offload_gain(scn, n, user.p_max / scn.S, r_max, f0) >= 0:
            local.append(n)
        else:
            potential.append(n)
    logger.debug(f"Предфильтр: {len(local)} локальных, {len(potential)} кандидатов")
    return local, potential


def unbeneficial_offloaders(scn: Scenario, asg: Assignment, pw: PowerAlloc,
                            cmp: ComputeAlloc) -> Dict[int, float]:
    """Выгружающие пользователи с Y* > 0 и их значения Y*"""
    result = {}
    for n in asg.offloaders():
        remote = user_remote_overhead(scn, asg, pw, cmp, n)
        gain = remote.Z_r - local_overhead(scn.users[n]).Z_l
        if gain > 0:
            result[n] = gain
    return result


def post_filter(scn: Scenario, asg: Assignment, pw: PowerAlloc, cmp: ComputeAlloc) -> Optional[int]:
    """
    Выбрать пользователя для возврата к локальному исполнению

    Среди пользователей с Y* > 0 выбирается тот, у кого наименьшие локальные
    накладные расходы (при равенстве - меньший индекс).

    Returns:
        Индекс пользователя или None, если все выгружающие в выигрыше
    """
    bad = unbeneficial_offloaders(scn, asg, pw, cmp)
    if not bad:
        return None
    return min(bad, key=lambda n: (local_overhead(scn.users[n]).Z_l, n))


@dataclass
class _Draft:
    assoc: AssocMatching
    cells: CellMatchings
    assignment: Assignment
    power: PowerAlloc
    compute: ComputeAlloc


@dataclass
class _Outcome:
    source: Optional[int]  # итерация черновика; None - черновик по всем пользователям
    z: float
    assignment: Assignment
    power: PowerAlloc
    compute: ComputeAlloc
    candidates: Tuple[int, ...]
    moves: int = 0


class JcoramsSolver:
    """Децентрализованный решатель на основе двух matching-игр"""

    def __init__(self, params: Optional[SolverParams] = None):
        self.params = params or SolverParams()

    def phase_two(self, scn: Scenario, candidates: Sequence[int],
                  params: Optional[SolverParams] = None) -> _Draft:
        """Одна итерация: ассоциация, подканалы, мощность, ресурсы"""
        params = params or self.params
        prefs = build_preferences(scn, candidates, params.ua)
        assoc = match_users_servers(scn, candidates, prefs=prefs)
        cells = match_all_cells(scn, assoc, params.ca)
        asg = cells.to_assignment(scn)
        pw = allocate_power(scn, asg, params.eps, params.refinements)
        cmp = allocate_compute_all(scn, asg)
        return _Draft(assoc, cells, asg, pw, cmp)

    def check_stability(self, scn: Scenario, asg: Assignment, candidates: Iterable[int],
                        params: Optional[SolverParams] = None) -> Dict[str, object]:
        """
        Проверить блокирующие пары обеих игр для назначения

        Предпочтения ассоциации строятся для candidates (выгружающие
        добавляются всегда), состояния помех сот восстанавливаются по
        самому назначению.
        """
        params = params or self.params
        pairs = asg.pairs()
        cand = tuple(sorted(set(candidates) | set(pairs)))
        assoc = AssocMatching({n: m for n, (m, _) in sorted(pairs.items())}, cand)
        assoc_block = find_blocking_pair(scn, assoc, params.ua)

        cells = replay_cells(scn, assoc, asg)
        subch_block = None
        for m, matching in cells.matchings.items():
            subch_block = find_subchannel_blocking_pair(
                scn, matching, assoc.users_on(m), params.ca, cells.states[m])
            if subch_block is not None:
                break
        return {
            "association_blocking_pair": assoc_block,
            "subchannel_blocking_pair": subch_block,
            "stable": assoc_block is None and subch_block is None,
        }

    def _polished(self, scn: Scenario, polisher: ParetoPolisher, source: Optional[int],
                  candidates: Sequence[int], draft: _Draft, allowed: Iterable[int]) -> _Outcome:
        allowed = set(allowed)
        start = {n: place for n, place in draft.assignment.pairs().items() if n in allowed}
        result = polisher.polish(start)
        asg = Assignment.from_pairs(scn.N, scn.M, scn.S, result.pairs)
        pw, cmp = PowerAlloc(result.power), ComputeAlloc(result.compute)
        z = float(per_user_overheads(scn, asg, pw, cmp).sum())
        final = tuple(sorted((set(candidates) - result.dropped) | set(result.pairs)))
        return _Outcome(source, z, asg, pw, cmp, final, result.moves)

    def solve(self, scn: Scenario, params: Optional[SolverParams] = None,
              scheme: str = "jcorams") -> Solution:
        """
        Решить задачу для сценария

        Итерации идут, пока пост-фильтр кого-то удаляет: без удаления набор
        кандидатов, а с ним и сопоставление следующей итерации, не меняется.
        Затем черновик доводится перемещениями одного пользователя; при
        keep_best_iterate доводятся черновики всех итераций (и черновик по
        всем пользователям, если предфильтр кого-то отсеял) и выбирается
        лучший по Z. Диагностика считается по выданному назначению.

        Args:
            scn: сценарий
            params: параметры (по умолчанию параметры экземпляра)
            scheme: имя схемы в Solution

        Returns:
            Solution
        """
        params = params or self.params
        if params.pre_filter:
            _, potential = pre_filter(scn)
        else:
            potential = list(range(scn.N))

        candidates = list(potential)
        history: List[IterationRecord] = []
        drafts: List[Tuple[int, Tuple[int, ...], _Draft]] = []
        iterations = 0

        while candidates:
            iterations += 1
            draft = self.phase_two(scn, candidates, params)
            drafts.append((iterations, tuple(candidates), draft))
            z = float(per_user_overheads(scn, draft.assignment, draft.power, draft.compute).sum())
            removed = post_filter(scn, draft.assignment, draft.power, draft.compute) \
                if params.post_filter else None
            history.append(IterationRecord(iterations, len(candidates),
                                           len(draft.assignment.offloaders()), removed, z))
            logger.debug(f"Итерация {iterations}: кандидатов {len(candidates)}, "
                         f"сопоставлено {len(draft.assignment.offloaders())}, удалён {removed}, Z={z:.6g}")
            if removed is None:
                break
            candidates.remove(removed)

        if not drafts:
            return local_solution(scheme, scn, candidates=tuple(potential),
                                  history=history, interference_free=params.interference_free)

        last_iteration, last_candidates, last = drafts[-1]
        if not params.polish:
            best = _Outcome(last_iteration, 0.0, last.assignment, last.power, last.compute, last_candidates)
        else:
            polisher = ParetoPolisher(scn, potential, params.eps, params.refinements)
            seeds = [(it, cand, d, cand) for it, cand, d in reversed(drafts)]
            if not params.keep_best_iterate:
                seeds = seeds[:1]
            elif len(potential) < scn.N:
                # черновик по всем пользователям; отсеянные предфильтром остаются локальными
                seeds.append((None, tuple(potential), self.phase_two(scn, range(scn.N), params), potential))
            best = None
            for source, cand, draft, allowed in seeds:
                outcome = self._polished(scn, polisher, source, cand, draft, allowed)
                if best is None or outcome.z < best.z * (1 - 1e-12):
                    best = outcome

        diagnostics = self.check_stability(scn, best.assignment, best.candidates, params)
        diagnostics.update(source_iteration=best.source, polish_moves=best.moves)
        solution = build_solution(scheme, scn, best.assignment, best.power, best.compute,
                                  params.interference_free, iterations=iterations,
                                  candidates=tuple(potential), final_candidates=best.candidates,
                                  history=history, diagnostics=diagnostics)
        logger.debug(f"JCORAMS: {solution.offloader_count}/{scn.N} выгружают, "
                     f"Z={solution.total_overhead:.6g}, итераций {iterations}, "
                     f"перемещений доводки {best.moves}")
        return solution


solver = JcoramsSolver()


def _evaluate_pairs(scn: Scenario, pairs: Dict[int, Tuple[int, int]],
                    params: SolverParams) -> np.ndarray:
    asg = Assignment.from_pairs(scn.N, scn.M, scn.S, pairs)
    pw = allocate_power(scn, asg, params.eps, params.refinements)
    cmp = allocate_compute_all(scn, asg)
    return per_user_overheads(scn, asg, pw, cmp)


def weak_pareto_violations(scn: Scenario, solution: Solution,
                           params: Optional[SolverParams] = None,
                           rtol: float = 1e-9) -> List[Tuple[int, Optional[Tuple[int, int]]]]:
    """
    Перебрать перемещения одного пользователя и найти улучшения по Парето

    Перемещение - на любой свободный (сервер, подканал) с учётом квоты или
    в локальное исполнение; мощность и ресурсы пересчитываются. Нарушение -
    когда перемещаемый строго выигрывает, а остальные не проигрывают.
    Перемещаются только кандидаты решения (отсеянные предфильтром не
    рассматриваются). Перебор квадратичен по N*M*S, предназначен для малых
    экземпляров.

    Returns:
        Список (пользователь, новое размещение или None для локального)
    """
    params = params or SolverParams()
    base_pairs = solution.assignment.pairs()
    base = _evaluate_pairs(scn, base_pairs, params)
    violations = []
    movable = set(range(scn.N)) if solution.candidates is None else set(solution.candidates)

    for n in sorted(movable):
        current = base_pairs.get(n)
        targets: List[Optional[Tuple[int, int]]] = [None] if current is not None else []
        occupied = {place for k, place in base_pairs.items() if k != n}
        for m in range(scn.M):
            load = sum(1 for k, (j, _) in base_pairs.items() if j == m and k != n)
            if load >= scn.effective_quota(m):
                continue
            for s in range(scn.S):
                if (m, s) not in occupied and (m, s) != current:
                    targets.append((m, s))

        for target in targets:
            pairs = {k: v for k, v in base_pairs.items() if k != n}
            if target is not None:
                pairs[n] = target
            moved = _evaluate_pairs(scn, pairs, params)
            others = np.arange(scn.N) != n
            if (moved[n] < base[n] * (1 - rtol)
                    and np.all(moved[others] <= base[others] * (1 + rtol))):
                violations.append((n, target))
    return violations


def group_swap_blocks(scn: Scenario, solution: Solution, params: Optional[SolverParams] = None,
                      rtol: float = 1e-9) -> List[Tuple[int, int]]:
    """
    Найти пары пользователей одной соты, которым выгоден обмен подканалами

    Пара блокирует, если после обмена (с пересчётом мощности) оба не
    проигрывают и хотя бы один строго выигрывает.
    """
    params = params or SolverParams()
    base_pairs = solution.assignment.pairs()
    base = _evaluate_pairs(scn, base_pairs, params)
    blocks = []
    for m in range(scn.M):
        members = sorted(n for n, (j, _) in base_pairs.items() if j == m)
        for i, n1 in enumerate(members):
            for n2 in members[i + 1:]:
                pairs = dict(base_pairs)
                pairs[n1], pairs[n2] = (m, base_pairs[n2][1]), (m, base_pairs[n1][1])
                swapped = _evaluate_pairs(scn, pairs, params)
                pair = np.array([n1, n2])
                no_worse = np.all(swapped[pair] <= base[pair] * (1 + rtol))
                better = np.any(swapped[pair] < base[pair] * (1 - rtol))
                if no_worse and better:
                    blocks.append((n1, n2))
    return blocks


def write_solution_csv(scn: Scenario, solution: Solution, path: Union[str, Path]) -> Path:
    """Подробный CSV по пользователям: размещение, мощность, ресурс, Z_l, Z"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["user", "server", "subchannel", "power_w", "f_cycles",
                             "local_overhead", "overhead"])
            for n, user in enumerate(scn.users):
                place = solution.assignment.placement(n)
                m, s = place if place else ("", "")
                power = solution.power.p[n, s] if place else 0.0
                f_assigned = solution.compute.f[n, m] if place else 0.0
                writer.writerow([n, m, s, f"{power:.6g}", f"{f_assigned:.6g}",
                                 f"{local_overhead(user).Z_l:.6g}",
                                 f"{solution.per_user_overhead[n]:.6g}"])
    except OSError as e:
        raise OSError(f"Не удалось записать решение в {path}: {e}") from e
    return path


def write_summary_csv(rows: Sequence[Dict[str, object]], path: Union[str, Path]) -> Path:
    """CSV сводок решений (по строке на схему/реализацию)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ["scheme", "seed", "N", "M", "S", "offload_pct", "total_overhead", "iterations"]
    try:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=header)
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
    except OSError as e:
        raise OSError(f"Не удалось записать сводку в {path}: {e}") from e
    return path
