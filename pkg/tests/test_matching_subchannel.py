"""
Тесты распределения подканалов внутри соты
"""
import itertools
import math

import numpy as np
import pytest

from factories import make_scenario, micro_config
from oracles import enumerate_stability
from src.channel_scenario import generate
from src.matching_association import AssocMatching, match_users_servers
from src.matching_subchannel import (
    CAWeights,
    InterferenceState,
    SubchannelOverflowError,
    SubchMatching,
    find_subchannel_blocking_pair,
    match_all_cells,
    match_users_subchannels,
    subchannel_pref_ca,
    user_pref_ca,
)

NOISE = 1e-13


def _subch_blocks(scn, m, matching, users, weights=None, state=None):
    weights = weights or CAWeights()
    return enumerate_stability(
        matching.subch_of,
        proposers=sorted(users),
        receivers=list(range(scn.S)),
        proposer_value=lambda n, s: user_pref_ca(scn, n, m, s, state),
        receiver_value=lambda s, n: subchannel_pref_ca(scn, m, s, n, weights, state),
        quotas={s: 1 for s in range(scn.S)},
    )


def _ordered_cell():
    """Два пользователя соты 0: оба предпочитают подканал 1, затем 2, затем 0"""
    gains = np.full((2, 2, 3), 1e-13)
    gains[0, 0] = [1e-12, 5e-12, 2e-12]
    gains[1, 0] = [0.9e-12, 4e-12, 1.8e-12]
    return make_scenario(gains)


class TestUserPreference:
    def test_flat_gains_tie_and_lowest_index_wins(self):
        scn = make_scenario(np.full((1, 1, 4), 1e-12))
        scores = [user_pref_ca(scn, 0, 0, s) for s in range(4)]
        assert len(set(scores)) == 1
        matching = match_users_subchannels(scn, 0, AssocMatching({0: 0}, (0,)))
        assert dict(matching.subch_of) == {0: 0}

    def test_interferer_pushes_user_off_its_subchannel(self):
        scn = make_scenario(np.full((2, 2, 2), 1e-12))
        state = InterferenceState.silent(scn)
        state.cell[1] = 1
        state.tx[1, 1] = 0.05
        assert user_pref_ca(scn, 0, 0, 0, state) > user_pref_ca(scn, 0, 0, 1, state)

        matching = match_users_subchannels(scn, 0, AssocMatching({0: 0}, (0,)), state=state)
        assert dict(matching.subch_of) == {0: 0}

    def test_score_is_rate_at_uniform_power(self):
        gains = np.array([[[2e-12, 7e-13]]])
        scn = make_scenario(gains)
        for s, g in enumerate(gains[0, 0]):
            assert user_pref_ca(scn, 0, 0, s) == pytest.approx(5e6 * math.log2(1 + 0.05 * g / NOISE))

    def test_single_user_takes_best_subchannel(self):
        gains = np.array([[[1e-12, 3e-12, 2e-12, 0.5e-12]]])
        scn = make_scenario(gains)
        matching = match_users_subchannels(scn, 0, AssocMatching({0: 0}, (0,)))
        assert dict(matching.subch_of) == {0: 1}


class TestSubchannelPreference:
    def test_zero_penalty_scores_rate_only(self):
        scn = _ordered_cell()
        weights = CAWeights(phi_ca=1.0, delta=0.0)
        for n, s in itertools.product(range(2), range(3)):
            assert subchannel_pref_ca(scn, 0, s, n, weights) == pytest.approx(user_pref_ca(scn, n, 0, s))

    def test_leakage_penalty_breaks_rate_tie(self):
        gains = np.full((2, 2, 1), 1e-12)
        gains[1, 1, 0] = 1e-9
        scn = make_scenario(gains)
        assert subchannel_pref_ca(scn, 0, 0, 0) > subchannel_pref_ca(scn, 0, 0, 1)

    def test_fixture_matches_formula(self):
        scn = _ordered_cell()
        delta = np.array([[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]])
        weights = CAWeights(phi_ca=2.0, delta=delta)
        n, s = 1, 2
        p = 0.1 / 3
        rate = 5e6 * math.log2(1 + p * 1.8e-12 / NOISE)
        expected = 2.0 * rate - delta[1, s] * 1e-13 * p
        assert subchannel_pref_ca(scn, 0, s, n, weights) == pytest.approx(expected, rel=1e-12)

    def test_negative_penalty_rejected(self):
        with pytest.raises(ValueError):
            CAWeights(delta=-0.1)


class TestMatchUsersSubchannels:
    def test_contested_subchannel_goes_to_higher_scorer(self):
        scn = _ordered_cell()
        assoc = AssocMatching({0: 0, 1: 0}, (0, 1))
        matching = match_users_subchannels(scn, 0, assoc)
        assert dict(matching.subch_of) == {0: 1, 1: 2}

        stable = []
        for s0, s1 in itertools.permutations(range(3), 2):
            candidate = SubchMatching(0, {0: s0, 1: s1})
            if not _subch_blocks(scn, 0, candidate, [0, 1]):
                stable.append((s0, s1))
        assert stable == [(1, 2)]

    def test_empty_cell(self):
        scn = _ordered_cell()
        matching = match_users_subchannels(scn, 1, AssocMatching({0: 0}, (0,)))
        assert dict(matching.subch_of) == {}

    def test_more_users_than_subchannels_rejected(self):
        scn = make_scenario(np.full((3, 1, 2), 1e-12), quota=3)
        with pytest.raises(SubchannelOverflowError):
            match_users_subchannels(scn, 0, AssocMatching({0: 0, 1: 0, 2: 0}, (0, 1, 2)))

    def test_swapped_matching_is_blocked(self):
        scn = _ordered_cell()
        swapped = SubchMatching(0, {0: 2, 1: 1})
        assert find_subchannel_blocking_pair(scn, swapped, [0, 1]) == (0, 1)
        assert (0, 1) in _subch_blocks(scn, 0, swapped, [0, 1])

    def test_commit_leaves_power_on_matched_subchannel_only(self):
        scn = _ordered_cell()
        assoc = AssocMatching({0: 0, 1: 0}, (0, 1))
        state = InterferenceState.initial(scn, assoc)
        np.testing.assert_allclose(state.tx[0], [0.1 / 3] * 3)
        state.commit(scn, SubchMatching(0, {0: 1, 1: 2}))
        np.testing.assert_allclose(state.tx[0], [0.0, 0.1 / 3, 0.0])


def test_every_associated_user_gets_a_subchannel():
    scn = generate(micro_config(3, N=20, M=4, S=3))
    assoc = match_users_servers(scn, range(scn.N))
    cells = match_all_cells(scn, assoc)
    asg = cells.to_assignment(scn)
    assert sorted(asg.offloaders()) == sorted(assoc.server_of)
    for n, m in assoc.server_of.items():
        assert asg.server_of(n) == m


@pytest.mark.slow
def test_stability_suite_on_random_instances():
    """1000 случайных экземпляров: в каждой соте нет блокирующих пар (user, subchannel)"""
    rng = np.random.default_rng(7)
    for seed in range(1000):
        N, M, S = int(rng.integers(1, 21)), int(rng.integers(1, 6)), int(rng.integers(1, 5))
        scn = generate(micro_config(seed, N=N, M=M, S=S, shadowing_db=float(rng.choice([0.0, 6.0]))))
        assoc = match_users_servers(scn, range(N))
        cells = match_all_cells(scn, assoc)
        for m, matching in cells.matchings.items():
            users = assoc.users_on(m)
            state = cells.states[m]
            assert find_subchannel_blocking_pair(scn, matching, users, state=state) is None, f"seed={seed}"
            assert _subch_blocks(scn, m, matching, users, state=state) == [], f"seed={seed}"
