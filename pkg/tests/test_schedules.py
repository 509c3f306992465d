import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import alpha_bars, exp_then_const_betas
from smlb import schedules as sc
from smlb.errors import ConfigError


def quiet_exp(T, c, delta):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return sc.make_exp_then_const(T, c, delta)


def test_constant_step_value():
    s = sc.make_constant(100, 2.0)
    assert np.allclose(s.beta, 2 * math.log(100) / 100, rtol=0, atol=1e-15)
    assert s.beta[0] == pytest.approx(0.0921034, abs=1e-6)


def test_constant_alpha_bar_below_one_over_T():
    s = sc.make_constant(10_000, 2.0)
    assert s.alpha_bar_at(s.T) < 1 / s.T


@pytest.mark.parametrize("T,c", [(100, 1.0), (100, 0.5), (10, 5.0), (1, 2.0)])
def test_constant_rejects_bad_parameters(T, c):
    with pytest.raises(ConfigError):
        sc.make_constant(T, c)


def test_exp_then_const_first_step_and_plateau():
    s = quiet_exp(1000, 3.0, 1e-4)
    assert s.beta_at(1) == 1e-4
    plateau = 3 * math.log(1000) / 1000
    t_star = s.report.crossover
    assert t_star is not None
    assert np.all(s.beta[t_star - 1:] == plateau)
    assert np.all(s.beta[1:t_star - 1] < plateau)


def test_exp_then_const_matches_loop_oracle():
    s = quiet_exp(1000, 3.0, 1e-4)
    assert np.allclose(s.beta, exp_then_const_betas(1000, 3.0, 1e-4), rtol=1e-12, atol=0)


def test_exp_then_const_rejects_small_c():
    with pytest.raises(ConfigError):
        sc.make_exp_then_const(1000, 0.5, 0.5)


def test_exp_then_const_delta_condition_warns_or_raises():
    with pytest.warns(UserWarning, match="delta"):
        s = sc.make_exp_then_const(1000, 3.0, 1e-4)
    assert s.report.warnings
    with pytest.raises(ConfigError):
        sc.make_exp_then_const(1000, 3.0, 1e-4, strict=True)
    ok = sc.make_exp_then_const(1000, 3.0, 0.1, strict=True)
    assert not ok.report.warnings


def test_sigma_t_formula_and_constancy():
    s = sc.make_constant(100, 2.0)
    vals = {round(s.sigma_at(t), 15) for t in range(1, 101)}
    assert len(vals) == 1
    b = s.beta_at(1)
    assert s.sigma_at(1) == pytest.approx(math.sqrt(b / (1 - b)), rel=1e-15)


def test_sigma_t_at_alpha_099():
    s = sc.NoiseSchedule(2, np.array([0.01, 0.01]), "custom")
    assert sc.sigma_t(s, 1) == pytest.approx(0.100504, abs=1e-6)
    tiny = sc.NoiseSchedule(2, np.array([1e-14, 1e-14]), "custom")
    assert sc.sigma_t(tiny, 2) < 1e-6


def test_index_out_of_range():
    s = sc.make_constant(100, 2.0)
    for bad in (0, 101, -1):
        with pytest.raises(IndexError):
            s.sigma_at(bad)
    assert s.alpha_bar_at(0) == 1.0


def test_alpha_bar_T_times_T_decreases():
    vals = [sc.make_constant(T, 2.0).report.alpha_bar_T_times_T for T in (10**3, 10**4, 10**5)]
    assert vals[0] > vals[1] > vals[2]


def test_log_domain_survives_underflow():
    s = sc.make_constant(10**6, 100.0)
    assert s.alpha_bar_at(s.T) == 0.0  # underflows as a float
    assert np.isfinite(s.log_alpha_bar[-1])
    assert sc.coefficient_sum(s, 1.0) > 0


def test_coefficient_sum_requires_delta_p_below_one():
    s = quiet_exp(1000, 3.0, 0.4)
    with pytest.raises(ConfigError):
        sc.coefficient_sum(s, 3.0)


def test_second_order_expansion_tracks_exact_sum():
    s = sc.make_constant(100_000, 2.0)
    tol = 20 * (math.log(s.T) / s.T) ** 2
    for p in (1.0, 2.0, 3.0):
        assert abs(sc.coefficient_sum(s, p) - sc.constant_sum_second_order(s.T, 2.0, p)) <= tol


def test_make_schedule_parsing():
    s = sc.make_schedule({"kind": "constant", "T": 100, "c": 2})
    assert s.kind == "constant"
    with pytest.raises(ConfigError, match="unknown"):
        sc.make_schedule({"kind": "constant", "T": 100, "c": 2, "delta": 0.1})
    with pytest.raises(ConfigError, match="missing"):
        sc.make_schedule({"kind": "exp_then_const", "T": 100, "c": 2})
    with pytest.raises(ConfigError):
        sc.make_schedule({"kind": "cosine", "T": 100})


def test_rows_export():
    s = sc.make_constant(10, 2.0)
    rows = list(s.rows())
    assert len(rows) == 10 and rows[0][0] == 1
    assert rows[-1][2] == pytest.approx(s.alpha_bar_at(10))


schedules = st.one_of(
    st.builds(lambda T, c: sc.make_constant(T, c), st.integers(20, 5000), st.floats(1.01, 4.0)),
    st.builds(quiet_exp, st.integers(20, 5000), st.floats(1.01, 4.0), st.floats(1e-4, 0.5)),
)


@given(schedules)
def test_alpha_bar_log_domain_matches_serial_product(s):
    serial = alpha_bars(s.beta)
    assert np.allclose(s.alpha_bar, serial, rtol=1e-12, atol=0)


@given(schedules)
def test_schedule_invariants(s):
    assert np.all((s.alpha > 0) & (s.alpha < 1))
    assert np.all(np.diff(s.alpha_bar) < 0)
    assert s.report.max_scaled_step < np.inf
    if s.kind == "exp_then_const":
        plateau = s.params["c"] * math.log(s.T) / s.T
        assert s.beta[0] == s.params["delta"]
        assert np.all(s.beta[1:] <= plateau)
        assert np.all(np.diff(s.beta[1:]) >= 0)  # nondecreasing from t = 2 on


@given(schedules, st.floats(0.1, 1.5), st.floats(0.1, 1.5))
def test_coefficient_sum_decreasing_in_p(s, p, q):
    if s.kind == "exp_then_const" and s.params["delta"] * max(p, q) >= 1:
        return
    lo, hi = sorted((p, q))
    if hi - lo < 1e-6:
        return
    assert sc.coefficient_sum(s, hi) < sc.coefficient_sum(s, lo)
