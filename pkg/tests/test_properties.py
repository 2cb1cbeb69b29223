"""Randomized invariants, driven by hypothesis."""

import math

import numpy as np
from hypothesis import given, settings, strategies as st

from qclsense import fileio
from qclsense.analysis import ResponseCurve, dynamic_range, make_grid, monotonicity_violations
from qclsense.ansatz import AnsatzConfig, CompiledAnsatz, global_rotation, model_expectation
from qclsense.qcore import eigendecompose, evolve, expectation, total_magnetization
from qclsense.sensing import delta_I_theory, input_state, interaction_hamiltonian, sample_model
from qclsense.training import TargetSpec, TrainingSet, cost, target_f

from conftest import random_hermitian, random_state

seeds = st.integers(0, 2**32 - 1)
fast = settings(max_examples=25, deadline=None)


@fast
@given(seeds, st.integers(1, 4), st.floats(-5, 5))
def test_evolution_preserves_norm(seed, L, t):
    rng = np.random.default_rng(seed)
    psi = evolve(random_state(rng, L), random_hermitian(rng, 2**L), t)
    assert abs(np.linalg.norm(psi) ** 2 - 1) <= 1e-10


@fast
@given(seeds, st.integers(1, 4))
def test_spectral_reconstruction(seed, L):
    H = random_hermitian(np.random.default_rng(seed), 2**L)
    assert np.max(np.abs(eigendecompose(H).reconstruct() - H)) <= 1e-9


@fast
@given(seeds, st.floats(-3, 3), st.floats(-3, 3))
def test_evolution_composes(seed, t1, t2):
    rng = np.random.default_rng(seed)
    H, psi = random_hermitian(rng, 8), random_state(rng, 3)
    assert np.max(np.abs(evolve(evolve(psi, H, t1), H, t2) - evolve(psi, H, t1 + t2))) <= 1e-10


@fast
@given(seeds, st.integers(1, 4))
def test_expectation_is_real(seed, L):
    rng = np.random.default_rng(seed)
    psi = random_state(rng, L)
    O = random_hermitian(rng, 2**L)
    value = expectation(psi, O)
    assert abs(np.vdot(psi, O @ psi).imag) <= 1e-10 and isinstance(value, float)


@fast
@given(seeds, st.integers(2, 5))
def test_interaction_isotropy(seed, L):
    H = interaction_hamiltonian(sample_model(L, seed))
    for a in "xyz":
        M = total_magnetization(a, L)
        assert np.max(np.abs(H @ M - M @ H)) <= 1e-10


@fast
@given(seeds, st.integers(2, 5), st.floats(-7, 7), st.sampled_from("xyz"))
def test_rotation_commutes_with_interaction(seed, L, theta, axis):
    H = interaction_hamiltonian(sample_model(L, seed))
    R = global_rotation(axis, theta, L)
    assert np.max(np.abs(R @ H - H @ R)) <= 1e-10


@fast
@given(seeds, st.integers(1, 6))
def test_sample_model_determinism(seed, L):
    assert sample_model(L, seed) == sample_model(L, seed)


@fast
@given(seeds, st.floats(-1, 1))
def test_input_state_normalized(seed, I):
    assert abs(np.linalg.norm(input_state(sample_model(3, seed), I)) - 1) <= 1e-10


@fast
@given(seeds, st.floats(-1, 1), st.floats(0.1, 3), st.floats(0.1, 3))
def test_target_odd(seed, I, A, B):
    m = sample_model(3, seed)
    spec = TargetSpec(A, B)
    assert abs(target_f(m, spec, I) + target_f(m, spec, -I)) <= 1e-12


@fast
@given(st.floats(0.5, 2.5), st.integers(1, 5), st.floats(0.01, 1.5))
def test_delta_theory_even_for_equal_couplings(h, L, I):
    try:
        a = delta_I_theory([h] * L, I, 1.0)
    except ArithmeticError:
        return
    assert abs(a - delta_I_theory([h] * L, -I, 1.0)) <= 1e-12 * a


@fast
@given(seeds, st.integers(0, 2**31))
def test_cost_permutation_invariant(seed, perm_seed):
    m = sample_model(2, 0)
    cfg = AnsatzConfig(D=2)
    comp = _compiled(m, cfg)
    rng = np.random.default_rng(seed)
    I = rng.uniform(-1, 1, 15)
    y = rng.normal(size=15)
    th = rng.uniform(-6, 6, 6)
    p = np.random.default_rng(perm_seed).permutation(15)
    assert abs(cost(th, TrainingSet(I, y), m, cfg, comp) - cost(th, TrainingSet(I[p], y[p]), m, cfg, comp)) <= 1e-9


_COMPILED = {}


def _compiled(m, cfg):
    key = (m.seed, m.L, cfg)
    if key not in _COMPILED:
        _COMPILED[key] = CompiledAnsatz(m, cfg)
    return _COMPILED[key]


@fast
@given(seeds, st.integers(0, 5), st.sampled_from([0, 1, 2]))
def test_four_pi_periodicity(seed, index, axis):
    m = sample_model(2, 1)
    cfg = AnsatzConfig(D=2)
    rng = np.random.default_rng(seed)
    th = rng.uniform(-6, 6, 6)
    shifted = th.copy()
    shifted[3 * (index % 2) + axis] += 4 * math.pi
    comp = _compiled(m, cfg)
    I = rng.uniform(-1, 1)
    assert abs(model_expectation(th, m, cfg, I, comp) - model_expectation(shifted, m, cfg, I, comp)) <= 1e-10


@settings(max_examples=5, deadline=None)
@given(seeds)
def test_response_is_continuous_in_current(seed):
    m = sample_model(2, seed % 50)
    cfg = AnsatzConfig(D=3)
    th = np.random.default_rng(seed).uniform(-6, 6, 9)
    grid = np.linspace(-0.05, 0.05, 1001)
    vals = _compiled(m, cfg).expectations(th, grid)
    jumps = np.abs(np.diff(vals))
    assert np.max(jumps) <= 100 * max(np.median(jumps), 1e-12)


@fast
@given(st.lists(st.floats(0.001, 10), min_size=2, max_size=50), st.booleans())
def test_strictly_monotone_curve_has_full_range(increments, decreasing):
    values = np.cumsum(increments) * (-1 if decreasing else 1)
    grid = np.linspace(-1, 1, len(values))
    dr = dynamic_range(ResponseCurve(grid, values))
    assert (dr.I_lo, dr.I_hi) == (-1.0, 1.0)


@fast
@given(st.lists(st.integers(-80, 80), min_size=3, max_size=60), st.integers(-800, 800))
def test_violations_invariant_under_shift_and_flip(values, c):
    # eighths keep the shifted slopes exact
    v = np.array(values) / 8.0
    n = monotonicity_violations(v, 1e-6)
    assert monotonicity_violations(-v, 1e-6) == n
    assert monotonicity_violations(v + c / 8.0, 1e-6) == n


@fast
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=30))
def test_csv_round_trip(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("csv") / "v.csv"
    fileio.write_csv(path, ["v"], [(float(v),) for v in values])
    _, rows = fileio.read_csv(path)
    assert [r[0] for r in rows] == [float(v) for v in values]


def test_grid_points_are_exact_decimals():
    g = make_grid(-1, 1, 0.01)
    assert np.all(np.abs(g * 100 - np.round(g * 100)) < 1e-9)
