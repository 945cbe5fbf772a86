import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from biphoton.errors import InvalidArgument
from biphoton.fitting import fit_gaussian_1d
from biphoton.poling import apodized_duty_cycle, dfg_scan, phase_matching_amplitude
from biphoton.spectral import (DispersionModel, FrequencyGrid, PumpSpectrum, build_grid,
                               calibrate_gvm, carrier, delta_k, detuning_to_wavelength,
                               pump_amplitude, wavelength_to_detuning)
from oracles import freq_fwhm_hz


def test_grid_16nm_window_edges():
    g = build_grid(1582, 16, 128)
    lam = g.wavelengths_nm
    assert lam.max() == pytest.approx(1590, abs=1e-9)
    assert lam.min() == pytest.approx(1574, abs=1e-9)


def test_grid_6p6nm_window_edges():
    lam = build_grid(1582, 6.6, 128).wavelengths_nm
    assert lam.min() == pytest.approx(1578.7, abs=1e-9)
    assert lam.max() == pytest.approx(1585.3, abs=1e-9)


def test_two_point_grid_round_trip():
    g = build_grid(1582, 20, 2)
    assert g.nu.size == 2
    back = g.to_detuning(g.wavelengths_nm)
    assert np.allclose(back, g.nu, rtol=1e-12, atol=0)


def test_grid_axis_is_uniform():
    g = build_grid(1582, 20, 512)
    d = np.diff(g.nu)
    assert np.allclose(d, g.step, rtol=1e-9)


@pytest.mark.parametrize("span,points", [(0, 10), (-1, 10), (20, 1), (20, 0)])
def test_grid_rejects_bad_arguments(span, points):
    with pytest.raises(InvalidArgument):
        build_grid(1582, span, points)


@given(st.floats(1000, 2000), st.floats(0.5, 60), st.integers(2, 600))
def test_wavelength_detuning_round_trip(center, span, points):
    g = FrequencyGrid(center, span, points)
    lam = g.wavelengths_nm
    nu = wavelength_to_detuning(lam, center)
    rel = np.abs(detuning_to_wavelength(nu, center) - lam) / lam
    assert rel.max() < 1e-12
    # relative to the absolute optical frequency
    assert np.max(np.abs(nu - g.nu)) / carrier(center) < 1e-12


def test_pump_peak_is_one():
    assert pump_amplitude(PumpSpectrum(0.95), 0.0) == 1.0


def test_pump_095nm_frequency_width():
    pump = PumpSpectrum(0.95)
    expected = 2 * np.pi * freq_fwhm_hz(0.95, 791)
    assert expected == pytest.approx(2 * np.pi * 0.455e12, rel=2e-3)
    # brute-force half-maximum of |α|² on a fine axis
    x = np.linspace(-3 * expected, 3 * expected, 200001)
    inten = pump_amplitude(pump, x) ** 2
    above = x[inten >= 0.5]
    assert above[-1] - above[0] == pytest.approx(expected, rel=1e-3)


def test_aperture_clipped_zero_outside():
    pump = PumpSpectrum(5.0, shape="aperture_clipped", cutoff_nm=2.0)
    nu_out = wavelength_to_detuning(791 + 2.5, 791)
    nu_in = wavelength_to_detuning(791 + 1.5, 791)
    assert pump_amplitude(pump, nu_out) == 0.0
    assert pump_amplitude(pump, nu_in) > 0.0


def test_aperture_clipped_needs_cutoff():
    with pytest.raises(InvalidArgument):
        PumpSpectrum(1.0, shape="aperture_clipped")


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_pump_rejects_nonpositive_fwhm(bad):
    with pytest.raises(InvalidArgument):
        PumpSpectrum(bad)


@given(st.floats(0.3, 8.0), st.floats(-1e14, 1e14))
def test_pump_amplitude_bounds(fwhm, nu):
    a = pump_amplitude(PumpSpectrum(fwhm), nu)
    assert 0.0 <= a <= 1.0


@pytest.mark.parametrize("fwhm", [0.74, 0.95, 2.4, 5.6])
@pytest.mark.parametrize("points", [256, 512])
def test_pump_fitted_wavelength_fwhm(fwhm, points):
    pump = PumpSpectrum(fwhm)
    nu = np.linspace(-4, 4, points) * pump.fwhm_nu
    lam = detuning_to_wavelength(nu, 791)
    fit = fit_gaussian_1d(lam, pump_amplitude(pump, nu) ** 2)
    assert fit.fwhm == pytest.approx(fwhm, rel=1e-3)


def test_delta_k_zero_on_diagonal():
    m = DispersionModel(1.3e-10)
    nu = np.linspace(-1e13, 1e13, 11)
    assert np.all(delta_k(m, nu, nu) == 0)


def test_delta_k_antisymmetric_line():
    m = DispersionModel(1.3e-10)
    nu = 3.7e12
    assert delta_k(m, nu, -nu) == pytest.approx(2 * m.gvm_antidiag * nu)


@given(st.floats(-5, 5), st.floats(-1e13, 1e13), st.floats(-1e13, 1e13),
       st.floats(-1e-10, 1e-10))
def test_delta_k_linear(a, ns, ni, eps):
    m = DispersionModel(1.3e-10, eps)
    assert delta_k(m, a * ns, a * ni) == pytest.approx(a * delta_k(m, ns, ni), rel=1e-12,
                                                        abs=1e-9)


def test_epm_quality():
    assert DispersionModel(1e-10).epm_quality == 0.0
    assert DispersionModel(1e-10, 2e-11).epm_quality == pytest.approx(0.2)


def test_calibration_hits_target(apodized, model):
    scan = dfg_scan(apodized, model, 16.0, 2001)
    assert scan.fwhm_nm == pytest.approx(2.2, abs=0.011)
    assert model.gvm_diag == 0


def test_calibrated_delta_k_at_half_maximum(apodized, model):
    # probe 1.1 nm off degeneracy sits on the half-maximum of the DFG curve
    for lam in (1582 - 1.1, 1582 + 1.1):
        nu_i = wavelength_to_detuning(lam)
        phi = phase_matching_amplitude(apodized, delta_k(model, -nu_i, nu_i)
                                       + apodized.grating_wavevector)
        peak = phase_matching_amplitude(apodized, apodized.grating_wavevector)
        assert abs(phi) ** 2 / abs(peak) ** 2 == pytest.approx(0.5, abs=0.02)


def test_calibration_round_trip(apodized, model):
    width = dfg_scan(apodized, model, 16.0, 2001).fwhm_nm
    again = calibrate_gvm(width, 18.0, apodized)
    assert again.gvm_antidiag == pytest.approx(model.gvm_antidiag, rel=5e-3)


def test_calibration_scales_inversely_with_length(model):
    long = apodized_duty_cycle(46.1, 36.0)
    m2 = calibrate_gvm(2.2, 36.0, long)
    assert m2.gvm_antidiag == pytest.approx(model.gvm_antidiag / 2, rel=0.01)
    # brute-force check: the short-crystal δ halved gives the target width on the long crystal
    scan = dfg_scan(long, DispersionModel(model.gvm_antidiag / 2, 0, 36.0), 16.0, 2001)
    assert scan.fwhm_nm == pytest.approx(2.2, rel=0.01)


def test_calibration_rejects_length_mismatch(apodized):
    with pytest.raises(InvalidArgument):
        calibrate_gvm(2.2, 20.0, apodized)


def test_calibration_rejects_nonpositive_target(apodized):
    with pytest.raises(InvalidArgument):
        calibrate_gvm(0.0, 18.0, apodized)
