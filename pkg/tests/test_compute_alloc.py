"""
Тесты распределения вычислительного ресурса сервера
"""
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factories import make_scenario, make_user
from oracles import numeric_cra
from src.compute_alloc import allocate_compute, allocate_compute_all, cra_objective
from src.net_model import Assignment


def _exact_sum(f, f_max):
    return abs(float(np.sum(f)) - f_max) <= 4 * np.spacing(f_max)


class TestAllocateCompute:
    def test_identical_users_split_evenly(self):
        f = allocate_compute(4e9, [(0.5, 1e9), (0.5, 1e9)])
        np.testing.assert_allclose(f, [2e9, 2e9])

    def test_square_root_ratios(self):
        offloaders = [(1.0, 1.0), (1.0, 4.0), (1.0, 9.0)]
        f = allocate_compute(6.0, offloaders)
        np.testing.assert_allclose(f, [1.0, 2.0, 3.0], rtol=1e-12)
        reference, converged = numeric_cra(offloaders, 6.0)
        assert converged
        np.testing.assert_allclose(f, reference, rtol=1e-4)

    def test_single_user_gets_everything(self):
        np.testing.assert_array_equal(allocate_compute(4e9, [(0.3, 2e9)]), [4e9])

    def test_shares_sum_to_capacity(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            k = int(rng.integers(1, 9))
            offloaders = list(zip(rng.uniform(0.05, 1.0, k), rng.uniform(1e8, 3e9, k)))
            assert _exact_sum(allocate_compute(4e9, offloaders), 4e9)

    def test_energy_only_users_split_evenly_with_warning(self, caplog):
        with caplog.at_level(logging.WARNING):
            f = allocate_compute(3e9, [(0.0, 1e9), (0.0, 2e9), (0.0, 5e8)])
        np.testing.assert_allclose(f, [1e9, 1e9, 1e9])
        assert any("lambda_t = 0" in r.getMessage() for r in caplog.records)

    def test_no_offloaders(self):
        assert allocate_compute(4e9, []).size == 0


_offloaders = st.lists(st.tuples(st.floats(0.05, 1.0), st.floats(1e8, 1e10)), min_size=2, max_size=8)


class TestShareMonotonicity:
    @pytest.mark.property_based
    @given(offloaders=_offloaders)
    def test_larger_weight_gets_no_smaller_share(self, offloaders):
        f = allocate_compute(4e9, offloaders)
        weight = [lt * beta for lt, beta in offloaders]
        for i in range(len(f)):
            for j in range(len(f)):
                if weight[i] >= weight[j]:
                    assert f[i] >= f[j] * (1 - 1e-12)

    @pytest.mark.property_based
    @given(offloaders=_offloaders, k=st.integers(0, 7), factor=st.floats(1.1, 10.0))
    def test_raising_one_weight_takes_share_from_others(self, offloaders, k, factor):
        k %= len(offloaders)
        before = allocate_compute(4e9, offloaders)
        raised = list(offloaders)
        raised[k] = (offloaders[k][0], offloaders[k][1] * factor)
        after = allocate_compute(4e9, raised)
        assert after[k] > before[k]
        others = np.arange(len(offloaders)) != k
        assert np.all(after[others] <= before[others] * (1 + 1e-12))

    @pytest.mark.property_based
    @given(seed=st.integers(0, 2 ** 32 - 1), k=st.integers(2, 8))
    @settings(max_examples=100)
    def test_equal_workloads_favour_largest_time_weight(self, seed, k):
        lambda_t = np.random.default_rng(seed).dirichlet(np.ones(k))
        f = allocate_compute(4e9, [(lt, 1e9) for lt in lambda_t])
        assert f[int(np.argmax(lambda_t))] == pytest.approx(f.max(), rel=1e-12)


class TestObjective:
    def test_unit_case(self):
        assert cra_objective([(1.0, 1.0)], [1.0]) == 1.0

    def test_doubling_compute_halves_objective(self):
        offloaders = [(0.5, 1e9), (0.8, 2e9)]
        f = np.array([1e9, 3e9])
        assert cra_objective(offloaders, 2 * f) == pytest.approx(cra_objective(offloaders, f) / 2)

    def test_zero_share_rejected(self):
        with pytest.raises(ValueError):
            cra_objective([(0.5, 1e9)], [0.0])

    def test_closed_form_beats_random_feasible_allocations(self):
        rng = np.random.default_rng(11)
        offloaders = list(zip(rng.uniform(0.1, 1.0, 5), rng.uniform(2e8, 2e9, 5)))
        best = cra_objective(offloaders, allocate_compute(4e9, offloaders))
        for share in rng.dirichlet(np.ones(5), size=1000):
            assert best <= cra_objective(offloaders, 4e9 * share) * (1 + 1e-12)


class TestNumericOracle:
    def test_closed_form_matches_numeric_solution(self):
        """200 случайных экземпляров: совпадение целевой функции до 1e-6"""
        rng = np.random.default_rng(2024)
        for _ in range(200):
            k = int(rng.integers(1, 9))
            offloaders = list(zip(rng.uniform(0.05, 1.0, k), rng.uniform(1e8, 3e9, k)))
            f_closed = allocate_compute(4e9, offloaders)
            f_numeric, converged = numeric_cra(offloaders, 4e9)
            assert converged
            assert cra_objective(offloaders, f_closed) == pytest.approx(
                cra_objective(offloaders, f_numeric), rel=1e-6)
            assert _exact_sum(f_closed, 4e9)

    def test_single_user(self):
        f, converged = numeric_cra([(0.5, 1e9)], 4e9)
        assert converged
        np.testing.assert_allclose(f, [4e9])

    def test_equal_weights(self):
        f, converged = numeric_cra([(0.5, 1e9)] * 4, 4e9)
        assert converged
        np.testing.assert_allclose(f, [1e9] * 4)


def test_allocate_compute_all_per_server():
    users = [make_user(0, lambda_t=0.5), make_user(1, lambda_t=0.5, beta=4e9), make_user(2)]
    scn = make_scenario(np.full((3, 2, 2), 1e-12), users=users)
    asg = Assignment.from_pairs(3, 2, 2, {0: (0, 0), 1: (0, 1)})
    f = allocate_compute_all(scn, asg).f
    np.testing.assert_allclose(f[:, 0], [4e9 / 3, 8e9 / 3, 0.0])
    assert np.all(f[:, 1] == 0)
