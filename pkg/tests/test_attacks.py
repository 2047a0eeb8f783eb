import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from disclosure.attacks import (
    AttackKind,
    SingularSystemError,
    UndefinedEstimate,
    estimate_background,
    lsda,
    run_attack,
    sda,
    sda0,
    sda1,
    sda2,
)
from disclosure.core import MixConfig, ObservationPair, SenderFrequencies
from disclosure.traffic import ring_profiles, simulate

from conftest import HAND_X, HAND_Y, random_observations
from oracles import cramer_2x2, gauss_solve


# -- background ---------------------------------------------------------------

def test_background_when_user_absent_is_grand_mean():
    x = np.array([[0, 2], [0, 2], [0, 2]])
    y = np.array([[1, 1], [2, 0], [0, 2]])
    bg = estimate_background(ObservationPair(x, y), 0, 2)
    assert bg.rounds_used == 3
    np.testing.assert_allclose(bg.value, y.mean(axis=0) / 2)


def test_background_single_selected_round():
    obs = ObservationPair([[0, 2], [1, 1]], [[2, 0], [0, 2]])
    bg = estimate_background(obs, 0, 2)
    assert bg.rounds_used == 1 and bg.value[0] == 1.0


def test_background_undefined_when_always_sending():
    obs = ObservationPair([[1, 1], [2, 0]], [[2, 0], [0, 2]])
    bg = estimate_background(obs, 0, 2)
    assert not bg.defined and bg.value is None


def test_background_matches_subset_mean():
    _, _, obs = random_observations(4, 6, 3, 300)
    for i in range(6):
        rows = [r for r in range(obs.rounds) if obs.x[r, i] == 0]
        brute = np.array([sum(obs.y[r, j] for r in rows) / len(rows) / 3 for j in range(6)])
        bg = estimate_background(obs, i, 3)
        assert bg.rounds_used == len(rows)
        np.testing.assert_allclose(bg.value, brute, rtol=1e-14)
        assert bg.value.sum() == pytest.approx(1.0, abs=1e-12)


# -- SDA ----------------------------------------------------------------------

def test_sda_t1_is_empirical_frequency():
    x = np.array([[1, 0], [0, 1], [1, 0], [1, 0]])
    y = np.array([[0, 1], [1, 0], [1, 0], [0, 1]])
    np.testing.assert_allclose(sda(ObservationPair(x, y), 0, 1, 2), [1 / 3, 2 / 3])


def test_sda_constant_output():
    x = np.array([[1, 2], [1, 2]])
    y = np.array([[2, 1], [2, 1]])
    np.testing.assert_allclose(sda(ObservationPair(x, y), 0, 3, 2), [2 - 1, 1 - 1])


def test_sda_undefined_for_silent_user():
    with pytest.raises(UndefinedEstimate):
        sda(ObservationPair([[0, 2]], [[1, 1]]), 0, 2, 2)


# -- SDA0 / SDA1 --------------------------------------------------------------

def test_sda0_hand_instance():
    # user 0 sends once in round 0; user 1 fills the rest
    obs = ObservationPair([[1, 1], [0, 2]], [[1, 1], [0, 2]])
    # selector [1,0]; x_b = [1,2]; background from round 1 = [0, 1]
    np.testing.assert_allclose(sda0(obs, 0, 2), [1.0 - 1.0 * 0.0, 1.0 - 1.0 * 1.0])


def test_sda0_equals_sda_under_original_assumptions():
    # i sends exactly one message when active and the idle rounds look uniform
    t, n = 3, 3
    x = np.array([[1, 1, 1], [1, 2, 0], [0, 2, 1], [0, 1, 2], [0, 0, 3]])
    y = np.array([[1, 1, 1], [2, 0, 1], [1, 1, 1], [1, 1, 1], [1, 1, 1]])
    obs = ObservationPair(x, y)
    assert np.allclose(estimate_background(obs, 0, t).value, 1 / n)
    np.testing.assert_allclose(sda0(obs, 0, t), sda(obs, 0, t, n), atol=1e-15)


def test_sda1_equals_sda0_for_binary_sender():
    # with t = 1 nobody can send twice in a round
    _, _, obs = random_observations(8, 6, 1, 500)
    for i in range(6):
        np.testing.assert_array_equal(sda1(obs, i, 1), sda0(obs, i, 1))


def test_sda1_weights_by_message_count():
    x = np.array([[2, 0], [1, 1], [0, 2]])
    y = np.array([[1, 1], [2, 0], [0, 2]])
    obs = ObservationPair(x, y)
    x2 = x.copy()
    x2[1] = [2, 0]
    # x_i^T y_j is linear in x_i, so one round's contribution doubles
    contrib = x[:, 0] @ y
    contrib2 = x2[:, 0] @ y
    np.testing.assert_array_equal(contrib2 - contrib, y[1])
    assert sda1(obs, 0, 2).sum() == pytest.approx(1.0)


@pytest.mark.parametrize("attack", [sda0, sda1])
def test_sda0_sda1_undefined_cases(attack):
    with pytest.raises(UndefinedEstimate, match="never sends"):
        attack(ObservationPair([[0, 2]], [[1, 1]]), 0, 2)
    with pytest.raises(UndefinedEstimate, match="every round"):
        attack(ObservationPair([[1, 1], [2, 0]], [[1, 1], [0, 2]]), 0, 2)


# -- SDA2 ---------------------------------------------------------------------

def test_sda2_matches_cramer_on_hand_instance():
    x = np.array([[2, 1], [0, 3], [1, 2]])
    y = np.array([[1, 2], [2, 1], [0, 3]])
    obs = ObservationPair(x, y)
    xi, xb = x[:, 0], 3 - x[:, 0]
    a, b, d = int(xi @ xi), int(xi @ xb), int(xb @ xb)
    for j in range(2):
        z = cramer_2x2(a, b, b, d, int(xi @ y[:, j]), int(xb @ y[:, j]))
        p, pb = sda2(obs, 0, 3, with_background=True)
        assert abs(p[j] - z[0]) <= 1e-12 and abs(pb[j] - z[1]) <= 1e-12


def test_sda2_joint_solution_sums_to_one_one():
    _, _, obs = random_observations(1, 7, 4, 400)
    for i in range(7):
        p, pb = sda2(obs, i, 4, with_background=True)
        assert abs(p.sum() - 1) < 1e-9 and abs(pb.sum() - 1) < 1e-9


def test_sda2_singular_when_constant_sender():
    obs = ObservationPair([[1, 1], [1, 1], [1, 1]], [[2, 0], [0, 2], [1, 1]])
    with pytest.raises(UndefinedEstimate, match="proportional"):
        sda2(obs, 0, 2)


def test_sda2_equals_lsda_with_two_users():
    _, _, obs = random_observations(2, 2, 5, 300)
    est = lsda(obs).profiles.est
    for i in range(2):
        np.testing.assert_allclose(sda2(obs, i, 5), est[:, i], rtol=0, atol=1e-12)


# -- LSDA ---------------------------------------------------------------------

def test_lsda_matches_exact_gaussian_elimination(hand_obs):
    gram = HAND_X.T @ HAND_X
    rhs = HAND_X.T @ HAND_Y
    exact = gauss_solve(gram.tolist(), rhs.tolist())
    res = lsda(hand_obs)
    for k in range(3):
        for j in range(3):
            assert abs(res.profiles.est[j, k] - float(exact[k][j])) <= 1e-12
    assert res.rank == 3 and np.isfinite(res.condition_number)


def test_lsda_diagonal_case_is_per_user_average():
    # exactly one sender per round
    x = np.array([[3, 0, 0], [0, 3, 0], [0, 0, 3], [3, 0, 0], [0, 3, 0], [0, 0, 3]])
    y = np.array([[2, 1, 0], [0, 3, 0], [1, 1, 1], [3, 0, 0], [0, 2, 1], [0, 0, 3]])
    est = lsda(ObservationPair(x, y)).profiles.est
    for i in range(3):
        rows = x[:, i] > 0
        np.testing.assert_allclose(est[:, i], y[rows].mean(axis=0) / 3, atol=1e-14)


def test_lsda_singular_names_rank():
    x = np.array([[2, 0, 0], [0, 2, 0], [1, 1, 0]])
    y = np.array([[1, 1, 0], [0, 1, 1], [2, 0, 0]])
    with pytest.raises(SingularSystemError, match="rank 2 < 3"):
        lsda(ObservationPair(x, y))
    res = lsda(ObservationPair(x, y), min_norm=True)
    assert res.rank == 2 and np.isinf(res.condition_number)


def test_lsda_warns_when_ill_conditioned():
    # users 0 and 1 differ in a single round, so X^T X is nearly rank 2
    x = np.array([[1000, 1000, 0]] * 999 + [[1001, 999, 0], [0, 0, 2000]])
    y = x.copy()
    with pytest.warns(UserWarning, match="ill-conditioned"):
        lsda(ObservationPair(x, y))


def test_lsda_ignores_ground_truth_interface():
    import inspect

    for fn in (lsda, sda, sda0, sda1, sda2, run_attack):
        params = inspect.signature(fn).parameters
        assert "profiles" not in params and "freqs" not in params


# -- dispatch -----------------------------------------------------------------

def test_run_attack_lsda_full_rank():
    _, _, obs = random_observations(3, 5, 3, 500)
    est = run_attack(AttackKind.LSDA, obs)
    assert est.undefined_users == frozenset() and est.attack_name == "lsda"


def test_run_attack_flags_silent_user():
    f = SenderFrequencies(np.r_[np.full(7, 1 / 9), 0.0, 1 / 9, 1 / 9] / (9 / 9))
    obs = simulate(MixConfig(10, 3, 300, 1), f, ring_profiles(10, 3))
    est = run_attack("sda0", obs)
    assert est.undefined_users == {7}
    assert np.isnan(est.est[:, 7]).all()
    assert not np.isnan(np.delete(est.est, 7, axis=1)).any()


def test_run_attack_checks_config():
    _, _, obs = random_observations(3, 5, 3, 50)
    with pytest.raises(ValueError, match="does not match"):
        run_attack("sda1", obs, MixConfig(5, 4, 50))
    with pytest.raises(ValueError, match="unknown attack"):
        run_attack("pmda", obs)


def test_all_attacks_are_deterministic():
    _, _, a = random_observations(6, 6, 3, 400)
    _, _, b = random_observations(6, 6, 3, 400)
    for kind in AttackKind:
        ea, eb = run_attack(kind, a), run_attack(kind, b)
        np.testing.assert_array_equal(ea.est, eb.est)
        assert ea.undefined_users == eb.undefined_users


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 9), st.integers(1, 6), st.integers(30, 300), st.integers(0, 2**31))
def test_profile_sum_identity(n, t, rho, seed):
    _, _, obs = random_observations(seed, n, t, rho)
    for kind in AttackKind:
        try:
            est = run_attack(kind, obs)
        except SingularSystemError:
            continue
        assert est.column_sum_violations(1e-9) == []
