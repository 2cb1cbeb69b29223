import math

import numpy as np
import pytest

from qclsense import fileio
from qclsense.analysis import (
    DeltaIResult,
    ResponseCurve,
    default_tie_tol,
    delta_I_model,
    delta_I_sweep,
    dynamic_range,
    make_grid,
    monotonicity_violations,
    range_summary,
    response_curve,
)
from qclsense.ansatz import AnsatzConfig, CompiledAnsatz, model_expectation, random_params, zero_params
from qclsense.errors import DegenerateRangeError, DivergenceError
from qclsense.qcore import evolve, expectation, pauli_embed, plus_state, total_magnetization, variance
from qclsense.sensing import GradientFieldSpec, delta_I_theory, sample_model

from conftest import make_model

BARE = AnsatzConfig(D=1, grad=GradientFieldSpec(0.0))


def curve_of(f, start=-1.0, stop=1.0, step=0.01):
    g = make_grid(start, stop, step)
    return ResponseCurve(g, f(g))


def test_make_grid():
    g = make_grid(-1, 1, 0.01)
    assert g.size == 201 and g[0] == -1 and g[-1] == 1 and g[100] == 0
    assert make_grid(-0.8, 0.8, 0.05).size == 33
    with pytest.raises(ValueError):
        make_grid(0, 1, 0)
    with pytest.raises(ValueError):
        make_grid(1, 0, 0.1)


def test_response_curve_validation():
    with pytest.raises(ValueError):
        ResponseCurve([0.0, 0.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        ResponseCurve([0.0, 1.0], [1.0])


def test_response_curve_single_point(model3):
    cfg = AnsatzConfig(D=2)
    th = random_params(model3, cfg, 0)
    c = response_curve(th, model3, cfg, [0.35])
    assert c.values[0] == pytest.approx(model_expectation(th, model3, cfg, 0.35), abs=1e-13)


def test_response_curve_bounded_and_threaded(model3):
    cfg = AnsatzConfig(D=3)
    th = random_params(model3, cfg, 1)
    g = make_grid(-1, 1, 0.1)
    serial = response_curve(th, model3, cfg, g)
    threaded = response_curve(th, model3, cfg, g, workers=3)
    assert np.all(np.abs(serial.values) <= 3 + 1e-12)
    assert np.array_equal(serial.values, threaded.values)


def test_response_curve_single_qubit_closed_form():
    h1 = 1.8
    c = response_curve(np.zeros(3), make_model([h1]), BARE, make_grid(-1, 1, 0.05))
    assert np.max(np.abs(c.values + np.cos(h1 * c.grid))) < 1e-12


def test_response_curve_file_round_trip(tmp_path, model3):
    c = response_curve(np.zeros(6), model3, AnsatzConfig(D=2), make_grid(-1, 1, 0.25))
    c.save(tmp_path / "r.csv")
    back = ResponseCurve.load(tmp_path / "r.csv")
    assert np.array_equal(back.grid, c.grid) and np.array_equal(back.values, c.values)
    assert (tmp_path / "r.csv").read_text().startswith("I,expectation\n")


def test_monotonicity_examples():
    assert monotonicity_violations(curve_of(np.sin)) == 0
    assert monotonicity_violations(curve_of(lambda x: np.sin(3 * x))) == 2
    assert monotonicity_violations(curve_of(lambda x: 0 * x + 2.0), 1e-9) == 0


def test_monotonicity_shift_and_flip_invariant():
    c = curve_of(lambda x: np.sin(5 * x) + 0.3 * x)
    base = monotonicity_violations(c, 1e-6)
    assert monotonicity_violations(c.values + 4.2, 1e-6) == base
    assert monotonicity_violations(-c.values, 1e-6) == base


def test_monotonicity_ignores_ties():
    vals = np.array([0.0, 1.0, 1.0 + 1e-9, 2.0, 3.0])
    assert monotonicity_violations(vals, 1e-6) == 0
    assert monotonicity_violations(np.array([0, 1, 1 - 1e-9, 2.0]), 1e-6) == 0
    assert monotonicity_violations(np.array([0, 1, 1 - 1e-9, 2.0]), 0.0) == 2


def test_dynamic_range_full_for_monotone_curves():
    for f in (np.sin, lambda x: 3 * x - 1):
        dr = dynamic_range(curve_of(f))
        assert (dr.I_lo, dr.I_hi) == (-1.0, 1.0)
        assert dr.width == 2.0
    assert dynamic_range(curve_of(lambda x: -x)).width == 2.0


def test_dynamic_range_sin3x_snaps_to_extrema():
    dr = dynamic_range(curve_of(lambda x: np.sin(3 * x)), 1e-6)
    # extrema at +-pi/6 = +-0.5236; the grid maximum sits at 0.52
    assert (dr.I_lo, dr.I_hi) == (-0.52, 0.52)
    assert abs(dr.I_hi - math.pi / 6) <= 0.01


def test_dynamic_range_contains_zero_on_asymmetric_curve():
    dr = dynamic_range(curve_of(lambda x: np.cos(2 * (x - 0.3))), 1e-6)
    assert dr.I_lo <= 0 <= dr.I_hi
    # rising from the grid edge up to the peak at 0.3
    assert dr.I_lo == -1.0
    assert dr.I_hi == pytest.approx(0.3, abs=1e-12)


def test_dynamic_range_flat_and_bad_grid():
    with pytest.raises(DegenerateRangeError):
        dynamic_range(curve_of(lambda x: 0 * x), 1e-9)
    with pytest.raises(ValueError):
        dynamic_range(curve_of(np.sin, 0.1, 1.0))


def test_range_summary_keys():
    s = range_summary(curve_of(lambda x: np.sin(3 * x)), default_tie_tol(2))
    assert set(s) == {"I_lo", "I_hi", "violations", "grid_step", "slope_tie_tol"}
    assert s["violations"] == 2 and s["slope_tie_tol"] == 2e-6
    assert s["grid_step"] == pytest.approx(0.01)


def test_delta_I_single_qubit_closed_form():
    h1 = 1.4
    m = make_model([h1])
    for I in (-0.7, 0.2, 0.9):
        assert delta_I_model(np.zeros(3), m, BARE, I) == pytest.approx(1 / h1, rel=1e-6)


def test_delta_I_flat_response_diverges():
    with pytest.raises(DivergenceError):
        delta_I_model(np.zeros(3), make_model([1.1]), BARE, 0.0)


def test_delta_I_scales_with_shots(model3):
    cfg = AnsatzConfig(D=2)
    th = random_params(model3, cfg, 4)
    one = delta_I_model(th, model3, cfg, 0.25, M=1)
    assert abs(delta_I_model(th, model3, cfg, 0.25, M=4) - one / 2) <= 1e-12 * one


def test_delta_I_derivative_step_convergence(model3):
    cfg = AnsatzConfig(D=2)
    th = random_params(model3, cfg, 5)
    comp = CompiledAnsatz(model3, cfg)
    for I in (-0.5, 0.1, 0.6):
        slope = (model_expectation(th, model3, cfg, I + 1e-4, comp)
                 - model_expectation(th, model3, cfg, I - 1e-4, comp)) / 2e-4
        if abs(slope) > 1e-3:
            a = delta_I_model(th, model3, cfg, I, dI=1e-4, compiled=comp)
            b = delta_I_model(th, model3, cfg, I, dI=5e-5, compiled=comp)
            assert abs(a - b) / a < 1e-3


def test_delta_I_rejects_bad_arguments(model3):
    with pytest.raises(ValueError):
        delta_I_model(np.zeros(6), model3, AnsatzConfig(D=2), 0.1, dI=0)
    with pytest.raises(ValueError):
        delta_I_model(np.zeros(6), model3, AnsatzConfig(D=2), 0.1, M=0)


def ramsey_analog():
    """J=0, no gradient field, one y quarter-turn: the circuit reads out M_x."""
    m = make_model([0.7, 1.3, 2.1])
    return m, BARE, np.array([0.0, math.pi / 2, 0.0])


def test_delta_I_matches_closed_form_without_interaction():
    m, cfg, th = ramsey_analog()
    for I in make_grid(-0.8, 0.8, 0.2):
        assert delta_I_model(th, m, cfg, I) == pytest.approx(delta_I_theory(m.h, I, 1.0), rel=1e-2)


def test_two_sensing_conventions_agree():
    # z coupling from |+> read out along y, simulated directly
    m, cfg, th = ramsey_analog()
    L = m.L
    My = total_magnetization("y", L)
    for I in (-0.6, 0.15, 0.7):
        def signal(cur):
            H = sum(m.h[j] * cur / 2 * pauli_embed("z", j + 1, L) for j in range(L))
            return evolve(plus_state(L), H, 1.0)
        psi = signal(I)
        slope = (expectation(signal(I + 1e-5), My) - expectation(signal(I - 1e-5), My)) / 2e-5
        direct = math.sqrt(variance(psi, My)) / abs(slope)
        assert direct == pytest.approx(delta_I_theory(m.h, I, 1.0), rel=1e-8)
        assert delta_I_model(th, m, cfg, I, dI=1e-5) == pytest.approx(direct, rel=1e-7)


def test_sweep_shape_and_theory_column(model3):
    cfg = AnsatzConfig(D=2)
    a = delta_I_sweep(random_params(model3, cfg, 1), model3, cfg)
    b = delta_I_sweep(random_params(model3, cfg, 2), model3, cfg)
    assert a.grid.size == 33 and a.delta_model.size == 33
    assert np.array_equal(a.delta_theory, b.delta_theory)
    assert a.delta_theory[16] == pytest.approx(math.sqrt(3) / np.sum(model3.h), abs=1e-15)
    finite = a.delta_model[np.isfinite(a.delta_model)]
    assert np.all(finite > 0)


def test_sweep_matches_pointwise(model3):
    cfg = AnsatzConfig(D=2)
    th = random_params(model3, cfg, 3)
    res = delta_I_sweep(th, model3, cfg, -0.4, 0.4, 0.2)
    for I, d in zip(res.grid, res.delta_model):
        # batch and single-state circuit paths round differently; the slope amplifies it
        assert d == pytest.approx(delta_I_model(th, model3, cfg, I), rel=1e-9)


def test_sweep_flags_divergence(tmp_path):
    res = delta_I_sweep(np.zeros(3), make_model([1.1]), BARE, -0.2, 0.2, 0.1)
    assert res.flags == ["ok", "ok", "divergent", "ok", "ok"]
    assert math.isinf(res.delta_model[2])
    res.save(tmp_path / "d.csv")
    header, rows = fileio.read_csv(tmp_path / "d.csv", numeric=False)
    assert header == ["I", "delta_model", "delta_theory", "flag"]
    assert rows[2][1] == "inf" and rows[2][3] == "divergent"


def test_delta_result_flags():
    r = DeltaIResult(np.array([0.0, 1.0]), np.array([1.0, np.inf]), np.array([1.0, 1.0]), 1)
    assert r.flags == ["ok", "divergent"]


def test_untrained_zero_params_curve_bounded():
    for L in (2, 4):
        m = sample_model(L, 0)
        cfg = AnsatzConfig(D=20)
        c = response_curve(zero_params(m, cfg), m, cfg, make_grid(-1, 1, 0.1))
        assert np.all(np.abs(c.values) <= L + 1e-12)
