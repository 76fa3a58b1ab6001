import math

import mc_suites
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from critqfi.errors import BracketError, DomainError, ParameterError
from critqfi.estimate import (
    EstimationRun,
    MeasurementModel,
    copy_uniforms,
    counts_from_uniforms,
    crb_report,
    ml_estimate,
    optimal_run,
    outcome_distribution,
    sample_run,
    two_stage_run,
)
from critqfi.model import Mode, ModelParams, momentum_grid
from critqfi.qfi import qfi, qfi_thermal_exact, qfi_zero_t

couplings = st.floats(0.3, 2.0)
betas = st.one_of(st.just(math.inf), st.floats(0.2, 20.0))


@settings(max_examples=40)
@given(couplings, couplings, couplings, betas, couplings)
def test_table_is_distribution(J, g, h, beta, J0):
    model = MeasurementModel.build(ModelParams(J, g, h, 8, beta), J0)
    tab, dtab = model.table(J, with_derivative=True)
    assert tab.shape == (model.n_rows, 4)
    assert np.all(tab >= -1e-15)
    np.testing.assert_allclose(tab.sum(axis=1), 1.0, atol=1e-13)
    np.testing.assert_allclose(dtab.sum(axis=1), 0.0, atol=1e-10)


@settings(max_examples=20)
@given(couplings, couplings, couplings, betas, couplings)
def test_table_derivative_matches_finite_difference(J, g, h, beta, J0):
    model = MeasurementModel.build(ModelParams(J, g, h, 8, beta), J0)
    s = 1e-6
    fd = (model.table(J + s) - model.table(J - s)) / (2 * s)
    np.testing.assert_allclose(model.table(J, with_derivative=True)[1], fd, atol=1e-6 * (1 + min(beta, 50.0)))


@settings(max_examples=40)
@given(couplings, couplings, couplings, betas)
def test_fisher_at_truth_equals_qfi_per_mode(J, g, h, beta):
    p = ModelParams(J, g, h, 10, beta)
    fisher = MeasurementModel.build(p, J).fisher(J)
    if p.ground:
        np.testing.assert_allclose(fisher, qfi_zero_t(p).per_mode[:, 1], rtol=1e-8, atol=1e-12)
    else:
        rep = qfi_thermal_exact(p)
        np.testing.assert_allclose(fisher[:-2], rep.per_mode[:, 1], rtol=1e-8, atol=1e-12)
        assert fisher[-2:].sum() == pytest.approx(rep.unpaired_contribution, rel=1e-8, abs=1e-12)
    assert fisher.sum() == pytest.approx(qfi(p).value, rel=1e-8, abs=1e-12)


@settings(max_examples=30)
@given(couplings, couplings, couplings, couplings)
def test_zero_t_any_in_plane_reference_is_optimal(J, g, h, J0):
    # the pure block state moves on a great circle, so every in-plane basis is optimal
    p = ModelParams(J, g, h, 10)
    ref = qfi_zero_t(p).value
    assert MeasurementModel.build(p, J0).fisher(J).sum() == pytest.approx(ref, rel=1e-7)


def test_finite_t_off_reference_loses_information():
    run = optimal_run(ModelParams(1.0, 1.0, 0.5, 8, beta=8.0), 0.8, 1000, seed=1)
    assert run.fisher_ratio == pytest.approx(0.8432, abs=1e-3)


def test_high_temperature_outcomes_equiprobable():
    model = MeasurementModel.build(ModelParams(1.0, 1.0, 0.7, 8, beta=1e-9), 1.0)
    tab = model.table(1.0)
    np.testing.assert_allclose(tab[:-2], 0.25, atol=1e-8)
    np.testing.assert_allclose(tab[-2:], [[0.5, 0.5, 0, 0]] * 2, atol=1e-8)


def test_zero_field_ground_state_uninformative():
    p = ModelParams(1.0, 1.0, 0.0, 8)
    model = MeasurementModel.build(p, 1.0)
    assert not model.informative.any()
    assert not model.fisher(1.0).any()
    k = momentum_grid(p)[0][0]
    table, informative = outcome_distribution(p, 1.0, k)
    assert not informative and table[0] == pytest.approx(0.5)


def test_outcome_distribution_rejects_foreign_momentum():
    with pytest.raises(DomainError):
        outcome_distribution(ModelParams(1.0, 1.0, 0.5, 8), 1.0, Mode(0.1, 0, 0, 1, 0))


def test_uniform_streams_are_keyed():
    a = copy_uniforms(3, 100, seed=5, replica=2)
    np.testing.assert_array_equal(a, copy_uniforms(3, 100, seed=5, replica=2))
    # longer runs extend, never reshuffle, a stream; extra rows leave existing rows alone
    np.testing.assert_array_equal(a, copy_uniforms(4, 200, seed=5, replica=2)[:3, :100])
    assert not np.array_equal(a, copy_uniforms(3, 100, seed=5, replica=3))


def test_counts_sum_and_inverse_cdf():
    table = np.array([[0.1, 0.2, 0.3, 0.4]])
    u = np.array([[0.05, 0.2, 0.45, 0.65, 0.99]])
    np.testing.assert_array_equal(counts_from_uniforms(table, u), [[1, 1, 1, 2]])
    counts = sample_run(ModelParams(1, 1, 0.5, 16, beta=2.0), 1.0, 777, seed=3)
    np.testing.assert_array_equal(counts.sum(axis=1), 777)
    with pytest.raises(ParameterError):
        sample_run(ModelParams(1, 1, 0.5, 16), 1.0, 0, seed=3)


def test_single_mode_binomial():
    p = ModelParams(1.0, 1.0, 0.6, 4)
    M = 10**6
    prob = outcome_distribution(p, 0.7, momentum_grid(p)[0][0])[0][0]
    n = sample_run(p, 0.7, M, seed=11)[0, 0]
    assert abs(n - M * prob) < 4 * math.sqrt(M * prob * (1 - prob))


def test_ml_recovers_truth_from_expected_counts():
    p = ModelParams(1.1, 0.8, 0.9, 16, beta=3.0)
    model = MeasurementModel.build(p, 1.0)
    counts = 1e6 * model.table(1.1)
    assert ml_estimate(counts, p, 1.0) == pytest.approx(1.1, abs=1e-7)


def test_ml_bracket_failure():
    p = ModelParams(1.0, 1.0, 0.9, 16)
    counts = 1e6 * MeasurementModel.build(p, 1.0).table(1.0)
    with pytest.raises(BracketError) as exc:
        ml_estimate(counts, p, 1.0, bracket=(1.2, 1.5))
    assert exc.value.stage == "ml"


def test_runs_are_deterministic():
    p = ModelParams(1.0, 1.0, 1.05, 16)
    assert optimal_run(p, 1.0, 2000, seed=9, replica=4) == optimal_run(p, 1.0, 2000, seed=9, replica=4)
    assert two_stage_run(p, 1.1, 2000, seed=9) == two_stage_run(p, 1.1, 2000, seed=9)


def test_two_stage_bookkeeping():
    run = two_stage_run(ModelParams(1.0, 1.0, 1.05, 16), 1.1, 10_000, seed=1)
    assert run.stage_split == pytest.approx(0.01)
    assert run.reference_J0 == run.stage1_estimate != 1.1
    assert two_stage_run(ModelParams(1.0, 1.0, 1.05, 16), 1.1, 1000, split=0.25, seed=1).stage_split == 0.25


@pytest.mark.parametrize("split, M", [(1.0, 1000), (0.0, 1000), (None, 1), (0.0001, 100)])
def test_two_stage_split_errors(split, M):
    with pytest.raises(ParameterError):
        two_stage_run(ModelParams(1.0, 1.0, 1.05, 16), 1.1, M, split=split)


def _fake_runs(n, crb, spread, seed=0):
    rng = np.random.default_rng(seed)
    return [EstimationRun(1.0, 1.0, 100, 0, float(x), 0.0, crb, 1.0, 0.0) for x in 1.0 + spread * rng.standard_normal(n)]


def test_crb_report_statistics():
    rep = crb_report(_fake_runs(2000, 1e-4, 1e-2))
    assert rep.ratio == pytest.approx(1.0, abs=0.1)
    assert rep.ratio_sigma == pytest.approx(math.sqrt(2 / 2000), rel=0.2)
    assert rep.bound_ok and not rep.zero_information
    assert not crb_report(_fake_runs(2000, 1e-4, 0.5e-2)).bound_ok


def test_crb_report_zero_information_and_minimum():
    rep = crb_report(_fake_runs(100, math.inf, 1e-2))
    assert rep.zero_information and rep.bound_ok is None and math.isnan(rep.ratio)
    with pytest.raises(DomainError):
        crb_report(_fake_runs(99, 1e-4, 1e-2))


def test_zero_field_run_flags_zero_information():
    # h = 0 at T = 0 carries no information on J, so the bound is undefined
    p = ModelParams(1.0, 1.0, 0.0, 16)
    assert qfi(p).value == 0.0
    assert MeasurementModel.build(p, 1.0).fisher(1.0).sum() == 0.0


def test_two_stage_exact_guess_matches_single_stage():
    _, single, _ = mc_suites.suite()
    _, two, _ = mc_suites.suite(initial_guess=mc_suites.PARAMS.J)
    assert two.empirical_variance / single.empirical_variance == pytest.approx(1.0, abs=0.1)
    assert two.bound_ok and single.bound_ok


def test_far_reference_ratio_exceeds_one():
    # measurement defined at J0 = 1.45 J, far from the truth
    runs, rep, _ = mc_suites.suite(reference_J0=1.45)
    assert runs[0].reference_J0 == 1.45
    print(f"far reference: M var H = {rep.ratio:.4f} +- {rep.ratio_sigma:.4f}")
    assert rep.ratio > 1.0 + 3.0 * rep.ratio_sigma
