"""
Независимые оракулы для тестов

Перебор назначений для микро-экземпляров, поиск мощности по сетке,
численное решение задачи распределения ресурса сервера и полный перебор
блокирующих пар. Вся арифметика записана здесь заново и не импортирует
производственный код (читаются только поля Scenario).
"""
import itertools
import math
from typing import Callable, Dict, Hashable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

MAX_USERS = 4
MAX_SERVERS = 2
MAX_SUBCHANNELS = 2


class OracleRefusal(ValueError):
    """Экземпляр слишком велик для полного перебора"""


def _local_z(user) -> float:
    t = user.task.beta / user.f_local
    energy = user.kappa * user.task.beta * user.f_local ** 2
    return user.lambda_t * t + user.lambda_e * energy


def _remote_z(user, rate, f, p):
    """Z_r для массивов скоростей и мощностей при фиксированном ресурсе f"""
    t_off = user.task.alpha / rate
    energy = p / user.zeta * t_off
    time = user.lambda_t * (t_off + user.task.beta / f) if user.lambda_t > 0 else 0.0
    return time + user.lambda_e * energy


def _closed_form_shares(users, f_max: float) -> np.ndarray:
    w = np.sqrt(np.array([u.lambda_t * u.task.beta for u in users], dtype=float))
    if w.sum() <= 0:
        w = np.ones(len(users))
    return f_max * w / w.sum()


def _best_group(scn, group: List[Tuple[int, int]], s: int, f: Dict[int, float],
                size: int) -> float:
    """Минимум суммы Z_r группы одного подканала по сетке мощностей (группа из 1-2 членов)"""
    grids = [np.geomspace(scn.users[n].p_max * 1e-3, scn.users[n].p_max, size) for n, _ in group]
    if len(group) == 1:
        (n, m), = group
        p = grids[0]
        rate = scn.bandwidth * np.log2(1.0 + p * scn.gains[n, m, s] / scn.noise)
        return float(np.min(_remote_z(scn.users[n], rate, f[n], p)))

    (n1, m1), (n2, m2) = group
    p1, p2 = np.meshgrid(grids[0], grids[1], indexing="ij")
    r1 = scn.bandwidth * np.log2(1.0 + p1 * scn.gains[n1, m1, s] / (scn.noise + p2 * scn.gains[n2, m1, s]))
    r2 = scn.bandwidth * np.log2(1.0 + p2 * scn.gains[n2, m2, s] / (scn.noise + p1 * scn.gains[n1, m2, s]))
    total = _remote_z(scn.users[n1], r1, f[n1], p1) + _remote_z(scn.users[n2], r2, f[n2], p2)
    return float(np.min(total))


def exhaustive_best(scn, power_grid_size: int = 64) -> Tuple[float, Dict[int, Tuple[int, int]]]:
    """
    Глобальный оптимум по всем допустимым назначениям

    Для каждого назначения ресурс серверов берётся по замкнутой формуле, а
    мощности каждой группы подканала перебираются по логарифмической сетке
    из power_grid_size точек в [p_max/1000, p_max].

    Raises:
        OracleRefusal: N > 4, M > 2 или S > 2

    Returns:
        (лучшее Z, назначение {пользователь: (сервер, подканал)})
    """
    if scn.N > MAX_USERS or scn.M > MAX_SERVERS or scn.S > MAX_SUBCHANNELS:
        raise OracleRefusal(f"Экземпляр N={scn.N}, M={scn.M}, S={scn.S} слишком велик для перебора")

    z_local = [_local_z(u) for u in scn.users]
    options: List[Optional[Tuple[int, int]]] = [None] + [
        (m, s) for m in range(scn.M) for s in range(scn.S)]

    best_z, best_pairs = math.inf, {}
    for choice in itertools.product(options, repeat=scn.N):
        pairs = {n: place for n, place in enumerate(choice) if place is not None}
        places = list(pairs.values())
        if len(set(places)) != len(places):
            continue
        if any(sum(1 for m, _ in places if m == j) > scn.servers[j].quota for j in range(scn.M)):
            continue

        f: Dict[int, float] = {}
        for j in range(scn.M):
            members = sorted(n for n, (m, _) in pairs.items() if m == j)
            if members:
                shares = _closed_form_shares([scn.users[n] for n in members], scn.servers[j].f_max)
                f.update(zip(members, shares))

        z = sum(z_local[n] for n in range(scn.N) if n not in pairs)
        for s in range(scn.S):
            group = sorted((n, m) for n, (m, j) in pairs.items() if j == s)
            if group:
                z += _best_group(scn, group, s, f, power_grid_size)

        if z < best_z:
            best_z, best_pairs = z, pairs
    return best_z, best_pairs


def _project_simplex(v: np.ndarray, total: float) -> np.ndarray:
    """Евклидова проекция на {x >= 0, sum x = total}"""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    idx = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def numeric_cra(offloaders: Sequence[Tuple[float, float]], f_max: float, tol: float = 1e-8,
                max_iter: int = 200_000) -> Tuple[np.ndarray, bool]:
    """
    Минимизировать sum lambda_t*beta/f на симплексе sum f = f_max проекцией градиента

    Шаг подбирается backtracking'ом. Сходимость: относительный разброс
    w/x^2 по пользователям с w > 0 не больше tol.

    Returns:
        (распределение, признак сходимости)
    """
    w = np.array([lt * beta for lt, beta in offloaders], dtype=float)
    n = len(w)
    if n == 0:
        return np.zeros(0), True
    if w.max() <= 0:
        return np.full(n, f_max / n), True

    w = w / w.max()
    floor = 1e-12
    positive = w > 0

    def objective(x):
        return float(np.sum(w[positive] / x[positive]))

    def project(v):
        return _project_simplex(v - floor, 1.0 - n * floor) + floor

    x = np.full(n, 1.0 / n)
    step = 1e-3
    for _ in range(max_iter):
        marginal = w[positive] / x[positive] ** 2
        if np.ptp(marginal) <= tol * marginal.max():
            return x * f_max, True

        grad = -w / x ** 2
        g_x = objective(x)
        step *= 2.0
        while True:
            x_new = project(x - step * grad)
            diff = x_new - x
            if objective(x_new) <= g_x + grad @ diff + (diff @ diff) / (2.0 * step):
                break
            step *= 0.5
            if step < 1e-30:
                return x * f_max, False
        x = x_new
    return x * f_max, False


def _eta(p, lam_t, lam_e, alpha, u, B, h, c):
    return (lam_t * alpha / B + lam_e * u / B * p) / np.log2(1.0 + p * h / c)


def dense_grid_argmin(lam_t, lam_e, alpha, u, B, h, c, p_max,
                      points: int = 20001) -> Tuple[float, float]:
    """
    Argmin eta на равномерной сетке (0, p_max]

    Returns:
        (p на сетке, шаг сетки)
    """
    grid = np.linspace(p_max / points, p_max, points)
    values = _eta(grid, lam_t, lam_e, alpha, u, B, h, c)
    return float(grid[int(np.argmin(values))]), float(grid[1] - grid[0])


def scipy_argmin(lam_t, lam_e, alpha, u, B, h, c, p_max, xatol: float = 1e-9) -> float:
    """Argmin eta на [p_max*1e-9, p_max] ограниченным методом Брента"""
    result = minimize_scalar(lambda p: float(_eta(p, lam_t, lam_e, alpha, u, B, h, c)),
                             bounds=(p_max * 1e-9, p_max), method="bounded",
                             options={"xatol": xatol})
    return float(result.x)


def _prefers(value: Callable[[Hashable, Hashable], float], agent, a, b) -> bool:
    """agent строго предпочитает a перед b (большее значение, при равенстве меньший индекс)"""
    va, vb = value(agent, a), value(agent, b)
    return va > vb or (va == vb and a < b)


def enumerate_stability(matching: Mapping[Hashable, Hashable],
                        proposers: Sequence[Hashable],
                        receivers: Sequence[Hashable],
                        proposer_value: Callable[[Hashable, Hashable], float],
                        receiver_value: Callable[[Hashable, Hashable], float],
                        quotas: Mapping[Hashable, int]) -> List[Tuple[Hashable, Hashable]]:
    """
    Все блокирующие пары сопоставления полным перебором

    Пара (n, r) блокирует, если n строго предпочитает r текущему партнёру
    (несопоставленный предпочитает любого), а у r есть свободное место или r
    строго предпочитает n кому-то из своих.

    Args:
        matching: proposer -> receiver
        proposer_value: ценность receiver для proposer (больше - лучше)
        receiver_value: ценность proposer для receiver (больше - лучше)
    """
    members: Dict[Hashable, List[Hashable]] = {r: [] for r in receivers}
    for n, r in matching.items():
        members[r].append(n)

    blocks = []
    for n in proposers:
        current = matching.get(n)
        for r in receivers:
            if r == current:
                continue
            if current is not None and not _prefers(proposer_value, n, r, current):
                continue
            if len(members[r]) < quotas[r] or any(
                    _prefers(receiver_value, r, n, k) for k in members[r]):
                blocks.append((n, r))
    return blocks
