"""
Тесты ассоциации пользователей с серверами (deferred acceptance с квотами)
"""
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factories import flat_gains, make_scenario, micro_config
from oracles import enumerate_stability
from src.channel_scenario import generate
from src.matching_association import (
    AssocMatching,
    UAWeights,
    association_quotas,
    build_preferences,
    deferred_acceptance,
    find_blocking_pair,
    match_users_servers,
    server_pref_ua,
    user_pref_ua,
)

NOISE = 1e-13


def _assoc_blocks(scn, matching, prefs):
    """Все блокирующие пары по оракулу"""
    return enumerate_stability(
        matching.server_of,
        proposers=prefs.candidates,
        receivers=list(range(scn.M)),
        proposer_value=prefs.user_score,
        receiver_value=lambda m, n: -prefs.server_cost(m, n),
        quotas=association_quotas(scn),
    )


def _crossed_scenario():
    """Пользователь 0 рядом с сервером 0, пользователь 1 рядом с сервером 1"""
    return make_scenario(flat_gains([[1e-10, 1e-13], [1e-13, 1e-10]], 2), quota=1)


def _contested_scenario():
    """Оба пользователя предпочитают сервер 0, у пользователя 0 канал лучше"""
    return make_scenario(flat_gains([[1e-10, 1e-12], [5e-11, 1e-12]], 2), quota=1)


class TestUserPreference:
    def test_closer_server_scores_higher(self):
        scn = make_scenario(flat_gains([[1e-10, 1e-12]], 2))
        assert user_pref_ua(scn, 0, 0) > user_pref_ua(scn, 0, 1)

    def test_zero_compute_weight_ranks_by_channel_only(self):
        scn = make_scenario(flat_gains([[3e-12, 2e-12]], 1))
        weights = UAWeights(phi_ua=8e6, eps_ua=0.0)
        user = scn.users[0]
        for m, g in enumerate((3e-12, 2e-12)):
            expected = 8e6 / user.task.alpha * math.log2(1 + 0.1 * g / NOISE)
            assert user_pref_ua(scn, 0, m, weights) == pytest.approx(expected, rel=1e-12)

    def test_two_user_fixture_matches_hand_evaluation(self):
        g = np.array([[2e-11, 4e-12], [6e-12, 1e-11]])
        scn = make_scenario(flat_gains(g, 2), f_max=4e9, quota=2)
        p = 0.1 / 2
        for n, m in itertools.product(range(2), range(2)):
            k = 1 - n
            sinr_sum = 2 * p * g[n, m] / (NOISE + p * g[k, m])
            expected = 8e6 / 3.36e6 * math.log2(1 + sinr_sum) + 0.2 / 1e9 * (4e9 / 2)
            assert user_pref_ua(scn, n, m) == pytest.approx(expected, rel=1e-12)

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            UAWeights(phi_ua=-1.0)


class TestServerPreference:
    def test_higher_rate_user_is_cheaper(self):
        scn = make_scenario(flat_gains([[1e-10], [1e-12]], 1), quota=2)
        assert server_pref_ua(scn, 0, 0) < server_pref_ua(scn, 0, 1)

    def test_energy_only_users_cost_energy_term(self):
        scn = make_scenario(flat_gains([[5e-12]], 2), lambda_t=0.0)
        rate = 5e6 * math.log2(1 + 2 * 0.05 * 5e-12 / NOISE)
        expected = 0.1 * 3.36e6 / rate
        assert server_pref_ua(scn, 0, 0) == pytest.approx(expected, rel=1e-12)

    def test_fixture_matches_direct_formula(self):
        g = np.array([[2e-11, 4e-12], [6e-12, 1e-11]])
        scn = make_scenario(flat_gains(g, 2), f_max=4e9, quota=2)
        p = 0.05
        n, m = 1, 0
        rate = 5e6 * math.log2(1 + 2 * p * g[n, m] / (NOISE + p * g[0, m]))
        expected = (0.5 * 3.36e6 + 0.5 * 0.1 * 3.36e6) / rate + 0.5 * 1e9 / (4e9 / 2)
        assert server_pref_ua(scn, m, n) == pytest.approx(expected, rel=1e-12)


class TestMatchUsersServers:
    def test_crossed_preferences_give_each_user_its_favourite(self):
        matching = match_users_servers(_crossed_scenario(), [0, 1])
        assert dict(matching.server_of) == {0: 0, 1: 1}

    def test_contested_server_keeps_preferred_user(self):
        scn = _contested_scenario()
        prefs = build_preferences(scn, [0, 1])
        assert prefs.user_order(0)[0] == 0 and prefs.user_order(1)[0] == 0

        matching = match_users_servers(scn, [0, 1], prefs=prefs)
        assert dict(matching.server_of) == {0: 0, 1: 1}

        # единственное стабильное сопоставление среди всех допустимых
        stable = []
        for choice in itertools.product([None, 0, 1], repeat=2):
            server_of = {n: m for n, m in enumerate(choice) if m is not None}
            if len(set(server_of.values())) < len(server_of):
                continue
            if not _assoc_blocks(scn, AssocMatching(server_of, (0, 1)), prefs):
                stable.append(server_of)
        assert stable == [{0: 0, 1: 1}]

    def test_no_candidates_gives_empty_matching(self):
        matching = match_users_servers(_crossed_scenario(), [])
        assert dict(matching.server_of) == {}
        assert matching.users_of == {}

    def test_quota_limited_by_subchannels(self):
        scn = make_scenario(flat_gains(np.full((5, 1), 1e-11), 2), quota=4)
        matching = match_users_servers(scn, range(5))
        assert len(matching.server_of) == 2

    def test_generic_deferred_acceptance(self):
        """Классический пример: две больницы, три кандидата"""
        prefs = {"a": ["x", "y"], "b": ["x", "y"], "c": ["x"]}
        rank = {"x": {"c": 0, "a": 1, "b": 2}, "y": {"a": 0, "b": 1, "c": 2}}
        matched = deferred_acceptance(prefs, rank, {"x": 1, "y": 1})
        assert matched == {"c": "x", "a": "y"}


class TestBlockingPairs:
    def test_matching_output_has_no_blocking_pair(self):
        scn = _contested_scenario()
        assert find_blocking_pair(scn, match_users_servers(scn, [0, 1])) is None

    def test_swapped_assignment_is_blocked(self):
        scn = _crossed_scenario()
        swapped = AssocMatching({0: 1, 1: 0}, (0, 1))
        assert find_blocking_pair(scn, swapped) in {(0, 0), (1, 1)}
        assert set(_assoc_blocks(scn, swapped, build_preferences(scn, [0, 1]))) == {(0, 0), (1, 1)}

    def test_empty_matching_with_candidates_is_blocked(self):
        scn = _crossed_scenario()
        assert find_blocking_pair(scn, AssocMatching({}, (0, 1))) is not None

    @pytest.mark.property_based
    @given(seed=st.integers(0, 10_000), data=st.data())
    @settings(max_examples=60)
    def test_verdict_agrees_with_exhaustive_scan(self, seed, data):
        """Вердикт find_blocking_pair совпадает с полным перебором на произвольных сопоставлениях"""
        scn = generate(micro_config(seed, N=6, M=3, S=2))
        prefs = build_preferences(scn, range(scn.N))
        quotas = association_quotas(scn)
        load = {m: 0 for m in range(scn.M)}
        server_of = {}
        for n in range(scn.N):
            m = data.draw(st.sampled_from([None] + list(range(scn.M))))
            if m is not None and load[m] < quotas[m]:
                server_of[n] = m
                load[m] += 1
        matching = AssocMatching(server_of, prefs.candidates)
        found = find_blocking_pair(scn, matching, prefs=prefs)
        blocks = _assoc_blocks(scn, matching, prefs)
        assert (found is None) == (not blocks)
        if found is not None:
            assert found in blocks


@pytest.mark.slow
def test_stability_suite_on_random_instances():
    """1000 случайных экземпляров (N <= 20, M <= 5): результат без блокирующих пар"""
    rng = np.random.default_rng(2024)
    for seed in range(1000):
        N, M, S = int(rng.integers(1, 21)), int(rng.integers(1, 6)), int(rng.integers(1, 5))
        scn = generate(micro_config(seed, N=N, M=M, S=S))
        candidates = sorted(rng.choice(N, size=int(rng.integers(1, N + 1)), replace=False).tolist())
        prefs = build_preferences(scn, candidates)
        matching = match_users_servers(scn, candidates, prefs=prefs)
        assert find_blocking_pair(scn, matching, prefs=prefs) is None, f"seed={seed}"
        assert _assoc_blocks(scn, matching, prefs) == [], f"seed={seed}"
