"""
Модуль базовых схем для сравнения

- local_only: все пользователи исполняют задачи локально
- offloading_only: одна итерация matching + распределения без фильтров и доводки
- hoda_single_cell: каждая сота решается независимо (пользователь привязан
  к SeNB с наилучшим каналом)
- hjtora_greedy: централизованный жадный поиск по перемещениям пользователей
"""
import logging
from typing import Dict, Optional, Tuple

import numpy as np

from src.jcorams_solver import Solution, SolverParams, build_solution, local_solution, solver
from src.local_search import MoveState
from src.net_model import Assignment, ComputeAlloc, PowerAlloc, Scenario

logger = logging.getLogger(__name__)


def local_only(scn: Scenario) -> Solution:
    """Все пользователи исполняют задачи локально"""
    return local_solution("local", scn)


def offloading_only(scn: Scenario, params: Optional[SolverParams] = None) -> Solution:
    """Все пользователи пытаются выгрузить задачу; отклонённые matching исполняют локально"""
    params = params or SolverParams()
    everyone = tuple(range(scn.N))
    if not everyone:
        return local_solution("offload", scn)
    draft = solver.phase_two(scn, everyone, params)
    return build_solution("offload", scn, draft.assignment, draft.power, draft.compute,
                          params.interference_free, iterations=1, candidates=everyone,
                          final_candidates=everyone,
                          diagnostics=solver.check_stability(scn, draft.assignment, everyone, params))


def strongest_server(scn: Scenario) -> np.ndarray:
    """Индекс SeNB с наибольшим усилением для каждого пользователя"""
    if scn.N == 0:
        return np.zeros(0, dtype=int)
    return scn.gains.max(axis=2).argmax(axis=1)


def hoda_single_cell(scn: Scenario, params: Optional[SolverParams] = None) -> Solution:
    """
    Независимое решение в каждой соте без учёта соседних сот

    Каждая сота решается тем же конвейером, что и JCORAMS, на под-сценарии
    из её пользователей и одного сервера. Итоговое Z считается с межсотовой
    помехой, если не задан params.interference_free.
    """
    params = params or SolverParams()
    attach = strongest_server(scn)
    pairs: Dict[int, Tuple[int, int]] = {}
    p = np.zeros((scn.N, scn.S))
    f = np.zeros((scn.N, scn.M))
    iterations = 0

    for m in range(scn.M):
        users = [int(n) for n in np.flatnonzero(attach == m)]
        if not users:
            continue
        cell = solver.solve(scn.restrict(users, [m]), params, scheme="hoda")
        iterations += cell.iterations
        for i, (_, s) in cell.assignment.pairs().items():
            n = users[i]
            pairs[n] = (m, s)
            p[n, s] = cell.power.p[i, s]
            f[n, m] = cell.compute.f[i, 0]

    asg = Assignment.from_pairs(scn.N, scn.M, scn.S, pairs)
    logger.debug(f"HODA: {len(pairs)}/{scn.N} выгружают")
    return build_solution("hoda", scn, asg, PowerAlloc(p), ComputeAlloc(f),
                          params.interference_free, iterations=iterations)


def hjtora_greedy(scn: Scenario, params: Optional[SolverParams] = None,
                  max_moves: Optional[int] = None) -> Solution:
    """
    Централизованный жадный поиск

    Из состояния "все локально" на каждом шаге применяется лучшее строго
    улучшающее перемещение одного пользователя (с пересчётом мощности
    бисекцией и ресурсов по замкнутой формуле). Поиск останавливается, когда
    улучшающих перемещений нет.
    """
    params = params or SolverParams()
    state = MoveState(scn, params.eps, params.refinements)
    max_moves = max_moves if max_moves is not None else 4 * scn.N * max(scn.S, 1)
    steps = 0

    while steps < max_moves:
        tol = 1e-12 * max(float(state.z.sum()), 1.0)
        best_delta, best_update = -tol, None
        for n, target in state.moves():
            delta, update = state.evaluate(n, target)
            if delta < best_delta:
                best_delta, best_update = delta, update
        if best_update is None:
            break
        state.apply(best_update)
        steps += 1
    else:
        logger.warning(f"⚠️ hJTORA: достигнут предел {max_moves} перемещений")

    p, f = state.arrays()
    asg = Assignment.from_pairs(scn.N, scn.M, scn.S, state.pairs)
    logger.debug(f"hJTORA: {len(state.pairs)}/{scn.N} выгружают за {steps} шагов")
    return build_solution("hjtora", scn, asg, PowerAlloc(p), ComputeAlloc(f),
                          params.interference_free, iterations=steps)
