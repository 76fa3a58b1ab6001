import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from critqfi.errors import BracketError, DomainError, ParameterError
from critqfi.model import ModelParams
from critqfi.qfi import qfi_zero_t_batch
from critqfi.scaling import (
    extensivity_probe,
    metric_density,
    pseudo_critical_point,
    read_grid_csv,
    scaling_collapse,
    shift_amplitude,
    shift_exponent,
    write_grid_csv,
)

LS = [64, 96, 128, 192, 256, 384, 512]


def _pseudo_points(J, gamma, Ls=LS):
    p = ModelParams(J, gamma, J, 64)
    return [(L, pseudo_critical_point(p, L)) for L in Ls]


@given(st.floats(0.5, 2.0), st.floats(2.0, 100.0), st.floats(-50.0, 50.0).filter(lambda c: abs(c) > 1e-3))
def test_synthetic_power_law_recovered(J, a, c):
    pts = [(L, J + c * L ** (-a)) for L in (64, 128, 256, 512, 1024)]
    if min(abs(h - J) for _, h in pts) <= 1e-9 * max(J, 1.0):
        return
    fit = shift_exponent(pts, J)
    assert fit.exponent == pytest.approx(a, rel=1e-8)
    assert fit.coefficient == pytest.approx(c, rel=1e-6)


def test_synthetic_fixed_amplitude():
    pts = [(L, 1.0 + 30.0 / L**2 - 200.0 / L**3) for L in LS]
    assert shift_amplitude(pts, 1.0) == pytest.approx(30.0, rel=1e-10)


def test_shift_fit_input_checks():
    with pytest.raises(DomainError):
        shift_exponent([(L, 1.0 + 1.0 / L**2) for L in LS[:4]], 1.0)
    with pytest.raises(DomainError):
        shift_exponent([(L, 1.0 + 1.0 / L**2) for L in (32, 64, 128, 256, 512)], 1.0)
    with pytest.raises(DomainError):
        shift_exponent([(L, 1.0 + (-1) ** i / L**2) for i, L in enumerate(LS)], 1.0)


def test_shift_gamma_two():
    fit = shift_exponent(_pseudo_points(1.0, 2.0), 1.0)
    assert fit.exponent == pytest.approx(2.0, abs=0.05)
    assert fit.coefficient > 0
    assert fit.coefficient_fixed == pytest.approx(90.0, rel=0.02)


def test_shift_gamma_half_amplitude():
    fit = shift_exponent(_pseudo_points(1.0, 0.5), 1.0)
    assert fit.coefficient_fixed == pytest.approx(-22.5, rel=0.05)
    assert fit.exponent == pytest.approx(2.0, abs=0.1)


def test_shift_vanishes_for_isotropic_pairing():
    pts = _pseudo_points(1.0, 1.0)
    with pytest.raises(DomainError):
        shift_exponent(pts, 1.0)
    assert abs(shift_amplitude(pts, 1.0)) < 1e-3


def test_pseudo_critical_point_l100():
    assert pseudo_critical_point(ModelParams(1.0, 2.0, 1.0, 100)) == pytest.approx(1.0090, rel=0.05)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.3, 3.0), st.sampled_from([0.5, 2.0]), st.sampled_from([32, 64, 100]))
def test_pseudo_critical_homogeneous_in_j(J, g, L):
    a = pseudo_critical_point(ModelParams(1.0, g, 1.0, L))
    b = pseudo_critical_point(ModelParams(J, g, J, L))
    assert b == pytest.approx(J * a, rel=1e-7)


@pytest.mark.parametrize("g", [0.5, 2.0])
def test_pseudo_critical_is_grid_argmax(g):
    L = 80
    hs = np.linspace(0.8, 1.2, 40001)
    dense = hs[np.argmax(qfi_zero_t_batch(1.0, g, hs, L))]
    assert pseudo_critical_point(ModelParams(1.0, g, 1.0, L)) == pytest.approx(dense, abs=2e-5)


def test_pseudo_critical_errors():
    with pytest.raises(BracketError):
        pseudo_critical_point(ModelParams(1.0, 2.0, 1.0, 16), bracket=0.01)
    with pytest.raises(ParameterError):
        pseudo_critical_point(ModelParams(1.0, 0.0, 1.0, 16))
    with pytest.raises(ParameterError):
        pseudo_critical_point(ModelParams(0.0, 1.0, 1.0, 16))


def test_scaling_collapse_gamma_two():
    # sizes large enough that the 90/L^2 peak shift stays small against the z window
    fit = scaling_collapse(ModelParams(1.0, 2.0, 1.0, 64), [128, 256, 512, 1024, 2048], np.linspace(-2, 2, 9))
    assert fit.delta_g == pytest.approx(1.0, abs=0.02)
    assert fit.nu == pytest.approx(1.0, abs=0.1)
    assert fit.phi0 == pytest.approx(1.0 / (24 * 4), rel=0.01)
    assert fit.shift is not None and fit.shift.exponent == pytest.approx(2.0, abs=0.05)


def test_scaling_collapse_input_checks():
    p = ModelParams(1.0, 2.0, 1.0, 64)
    with pytest.raises(DomainError):
        scaling_collapse(p, [64, 128], np.linspace(-1, 1, 5))
    with pytest.raises(DomainError):
        scaling_collapse(p, LS, [0.0, 1.0])


def test_isotropic_collapse_records_missing_shift():
    fit = scaling_collapse(ModelParams(1.0, 1.0, 1.0, 64), LS, np.linspace(-2, 2, 9))
    assert fit.shift is None
    assert any("shift exponent" in w for w in fit.warnings)


def test_extensivity():
    Ls = [64, 128, 256, 512, 1024]
    assert extensivity_probe(ModelParams(1.0, 1.0, 1.0, 64), Ls) == pytest.approx(2.0, abs=0.05)
    assert extensivity_probe(ModelParams(1.0, 1.0, 1.5, 64), Ls, at_critical=False) == pytest.approx(1.0, abs=0.02)
    with pytest.raises(DomainError):
        extensivity_probe(ModelParams(1.0, 1.0, 1.0, 64), [64, 128])


@pytest.mark.parametrize("h", [1.2, 1.5, 2.0, 0.3, 0.6, 0.8])
def test_off_critical_density_closed_form(h):
    J = 1.0
    exact = 1 / (4 * (h * h - J * J)) if h > J else h * h / (4 * J * J * (J * J - h * h))
    assert metric_density(ModelParams(J, 1.0, h, 8192), [h])[0] == pytest.approx(exact, rel=1e-6)


def test_off_critical_density_diverges_as_inverse_distance():
    # above the critical field H/L |h - J| = 1/(4 (h + J)) stays within 10% near h = J
    hs = np.linspace(1.02, 1.2, 10)
    scaled = metric_density(ModelParams(1.0, 1.0, 1.0, 8192), hs) * (hs - 1.0)
    assert scaled.max() / scaled.min() - 1 < 0.1
    assert scaled[0] == pytest.approx(1 / (4 * 2.02), rel=1e-3)


def test_grid_csv_roundtrip(tmp_path):
    rows = [(64, 1.0, 2.0, 1.0 + 1 / 3, 64 / 3, 1.234567890123e3), (128, 1.0, 2.0, 0.9, -12.8, 5.0)]
    path = tmp_path / "grid.csv"
    write_grid_csv(path, rows)
    assert read_grid_csv(path) == rows
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ParameterError):
        read_grid_csv(path)
