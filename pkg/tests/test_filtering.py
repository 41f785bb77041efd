import numpy as np
import pytest

from flowdesign import (
    ConvergenceError,
    FilterState,
    FlowModel,
    ValidationError,
    diffuse_state,
    iterate_to_steady_state,
    predict_update,
    predicted_info,
    steady_state_info,
)

from oracles import riccati_bisect, riccati_iterate


def fm2():
    return FlowModel(sigma2=[0.25, 1.0], mu=[100.0, 100.0])


# -------------------------------------------------------------- predict/update


def test_diffuse_absorbs_first_observation():
    fm = FlowModel(sigma2=[1.0], mu=[10.0])
    s1 = predict_update(diffuse_state(1), fm, m=[5.0], y=[42.0])
    assert s1.info[0] == 5.0
    assert s1.mean[0] == 42.0
    assert s1.t == 1


def test_two_step_hand_value():
    # info after the second unit-information update with sigma2 = 1:
    # 1/(1+1) + 1 = 1.5; mean is the information-weighted blend.
    fm = FlowModel(sigma2=[1.0], mu=[10.0])
    s = predict_update(diffuse_state(1), fm, m=[1.0], y=[0.0])
    s = predict_update(s, fm, m=[1.0], y=[3.0])
    assert s.info[0] == pytest.approx(1.5, rel=1e-12)
    assert s.mean[0] == pytest.approx((0.5 / 1.5) * 0.0 + (1.0 / 1.5) * 3.0, rel=1e-12)


def test_pure_prediction_keeps_mean_shrinks_info():
    fm = fm2()
    s = FilterState(info=[4.0, 2.0], mean=[7.0, -1.0])
    s2 = predict_update(s, fm, m=[0.0, 0.0])
    assert np.array_equal(s2.mean, s.mean)
    assert s2.info[0] == pytest.approx(4.0 / (1 + 0.25 * 4.0))
    assert s2.info[1] == pytest.approx(2.0 / (1 + 1.0 * 2.0))


def test_mixed_observed_unobserved():
    fm = fm2()
    s = FilterState(info=[4.0, 2.0], mean=[7.0, -1.0])
    s2 = predict_update(s, fm, m=[3.0, 0.0], y=[10.0, np.nan])
    prior = 4.0 / (1 + 0.25 * 4.0)
    assert s2.info[0] == pytest.approx(prior + 3.0)
    gain = 3.0 / (prior + 3.0)
    assert s2.mean[0] == pytest.approx(7.0 + gain * (10.0 - 7.0))
    assert s2.mean[1] == -1.0


def test_predict_update_validation():
    fm = fm2()
    s = diffuse_state(2)
    with pytest.raises(ValidationError):
        predict_update(s, fm, m=[1.0, 1.0])  # missing y
    with pytest.raises(ValidationError):
        predict_update(s, fm, m=[-1.0, 0.0], y=[0.0, 0.0])
    with pytest.raises(ValidationError):
        predict_update(s, fm, m=[1.0], y=[0.0])
    with pytest.raises(ValidationError):
        predict_update(s, fm, m=[1.0, 0.0], y=[np.nan, 0.0])


def test_filter_state_validation():
    with pytest.raises(ValidationError):
        FilterState(info=[-1.0], mean=[0.0])
    with pytest.raises(ValidationError):
        FilterState(info=[1.0], mean=[np.nan])
    # NaN mean is fine while diffuse
    FilterState(info=[0.0], mean=[np.nan])


def test_predicted_info_zero_is_fixed():
    assert predicted_info(np.zeros(3), np.ones(3)).tolist() == [0.0, 0.0, 0.0]


# -------------------------------------------------------------- steady state


def test_golden_ratio_case():
    # sigma2 = 1, m = 1: fixed point of u/(1+u) + 1 is the golden ratio
    assert steady_state_info(1.0, 1.0) == pytest.approx(
        (1 + np.sqrt(5)) / 2, rel=1e-15
    )


def test_quoted_example_value():
    v = steady_state_info(25.0, 0.01)
    assert v == pytest.approx(64.0388, abs=5e-5)
    assert v == pytest.approx(riccati_iterate(25.0, 0.01), rel=1e-11)
    assert v == pytest.approx(riccati_bisect(25.0, 0.01), rel=1e-11)


def test_zero_information_gives_zero():
    assert steady_state_info(0.0, 0.5) == 0.0


def test_against_both_oracles_across_regimes():
    rng = np.random.default_rng(7)
    for _ in range(200):
        m = 10.0 ** rng.uniform(-4, 4)
        s2 = 10.0 ** rng.uniform(-6, 4)
        closed = steady_state_info(m, s2)
        assert closed == pytest.approx(riccati_bisect(m, s2), rel=1e-10)
        if s2 * closed > 1e-3:  # plain iteration only trustworthy when quick
            assert closed == pytest.approx(riccati_iterate(m, s2), rel=1e-9)


def test_slow_contraction_corner():
    # sigma2 tiny and m small: plain iteration is useless here, the
    # bisection oracle is not.
    for m, s2 in [(0.01, 1e-6), (1.0, 1e-6), (0.5, 1e-5)]:
        assert steady_state_info(m, s2) == pytest.approx(
            riccati_bisect(m, s2), rel=1e-12
        )


def test_monotone_in_m_and_sigma2():
    ms = np.linspace(0.0, 50.0, 101)
    v = steady_state_info(ms, 0.1)
    assert np.all(np.diff(v) > 0)
    s2s = np.logspace(-4, 3, 50)
    w = steady_state_info(5.0, s2s)
    assert np.all(np.diff(w) < 0)


def test_bounds_and_large_sigma2_limit():
    # m <= m_tilde always; as sigma2 -> inf the filter forgets, m_tilde -> m
    for m in [0.1, 1.0, 10.0]:
        assert steady_state_info(m, 0.3) > m
        v = steady_state_info(m, 1e12)
        assert m <= v <= m + 1e-5


def test_fixed_point_identity():
    rng = np.random.default_rng(11)
    m = 10.0 ** rng.uniform(-3, 3, size=64)
    s2 = 10.0 ** rng.uniform(-4, 3, size=64)
    u = steady_state_info(m, s2)
    back = u / (1.0 + s2 * u) + m
    assert np.allclose(back, u, rtol=1e-10)


def test_steady_state_rejects_bad_sigma2():
    with pytest.raises(ValidationError):
        steady_state_info(1.0, 0.0)
    with pytest.raises(ValidationError):
        steady_state_info(1.0, -0.5)
    with pytest.raises(ValidationError):
        steady_state_info(-1.0, 0.5)


def test_broadcasting_shapes():
    out = steady_state_info(np.ones((3, 2)), 0.5)
    assert out.shape == (3, 2)
    assert isinstance(steady_state_info(1.0, 0.5), float)


# -------------------------------------------------------------- iteration


def test_iterate_matches_closed_form():
    fm = FlowModel(sigma2=[0.04], mu=[100.0])
    it = iterate_to_steady_state(fm, [25.0])
    assert it[0] == pytest.approx(steady_state_info(25.0, 0.04), rel=1e-10)


def test_iterate_zero_information():
    fm = FlowModel(sigma2=[0.04], mu=[100.0])
    assert iterate_to_steady_state(fm, [0.0])[0] == 0.0


def test_iterate_convergence_error_carries_iterate():
    fm = FlowModel(sigma2=[0.04], mu=[100.0])
    with pytest.raises(ConvergenceError) as exc:
        iterate_to_steady_state(fm, [25.0], max_iter=3)
    last = exc.value.last_iterate
    assert last.shape == (1,)
    assert 0 < last[0] < steady_state_info(25.0, 0.04)


def test_recursion_contracts_from_any_start():
    # three different priors end at the same limit
    fm = FlowModel(sigma2=[0.5], mu=[100.0])
    target = steady_state_info(4.0, 0.5)
    for start in [0.0, 1.0, 250.0]:
        info = np.array([start])
        for _ in range(200):
            info = info / (1.0 + fm.sigma2 * info) + 4.0
        assert info[0] == pytest.approx(target, rel=1e-12)


def test_predict_update_reproduces_recursion_trajectory():
    fm = FlowModel(sigma2=[0.3, 2.0], mu=[50.0, 50.0])
    m = np.array([2.0, 0.7])
    state = diffuse_state(2)
    info = np.zeros(2)
    rng = np.random.default_rng(3)
    for _ in range(25):
        y = rng.normal(size=2)
        state = predict_update(state, fm, m, y=y)
        info = info / (1.0 + fm.sigma2 * info) + m
        assert np.allclose(state.info, info, rtol=1e-14)
