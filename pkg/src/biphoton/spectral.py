"""Frequency grid, pump envelope and linearized crystal dispersion.

Frequencies are angular detunings (rad/s) from the degenerate signal/idler
carrier. Wavelengths are in nm at the API surface, SI internally.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.constants import c as C_LIGHT

from .errors import CalibrationError, InvalidArgument

NM = 1e-9

DEFAULT_SIGNAL_NM = 1582.0
DEFAULT_PUMP_NM = 791.0
DEFAULT_GRID_POINTS = 512
DEFAULT_SPAN_NM = 20.0


def carrier(wavelength_nm):
    """Angular frequency (rad/s) of light at ``wavelength_nm``."""
    return 2 * np.pi * C_LIGHT / (np.asarray(wavelength_nm, dtype=float) * NM)


def wavelength_to_detuning(wavelength_nm, center_nm=DEFAULT_SIGNAL_NM):
    return carrier(wavelength_nm) - carrier(center_nm)


def detuning_to_wavelength(nu, center_nm=DEFAULT_SIGNAL_NM):
    return 2 * np.pi * C_LIGHT / (np.asarray(nu, dtype=float) + carrier(center_nm)) / NM


def bandwidth_nm_to_hz(fwhm_nm, center_nm):
    """Linearized conversion Δf = cΔλ/λ²."""
    return C_LIGHT * fwhm_nm * NM / (center_nm * NM) ** 2


def bandwidth_hz_to_nm(fwhm_hz, center_nm):
    return fwhm_hz * (center_nm * NM) ** 2 / C_LIGHT / NM


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform detuning axis shared by the signal and the idler.

    The axis runs from the detuning of ``center + span/2`` to that of
    ``center - span/2`` so the wavelength window is exactly the requested one.
    """

    center_wavelength_nm: float = DEFAULT_SIGNAL_NM
    span_nm: float = DEFAULT_SPAN_NM
    points: int = DEFAULT_GRID_POINTS
    nu: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.points) != self.points or self.points < 2:
            raise InvalidArgument(f"grid needs at least 2 points, got {self.points}")
        if not self.span_nm > 0:
            raise InvalidArgument(f"grid span must be positive, got {self.span_nm}")
        if not 0 < self.span_nm / 2 < self.center_wavelength_nm:
            raise InvalidArgument("span exceeds twice the center wavelength")
        half = self.span_nm / 2
        lo = wavelength_to_detuning(self.center_wavelength_nm + half, self.center_wavelength_nm)
        hi = wavelength_to_detuning(self.center_wavelength_nm - half, self.center_wavelength_nm)
        nu = np.linspace(lo, hi, int(self.points))
        nu.flags.writeable = False
        object.__setattr__(self, "points", int(self.points))
        object.__setattr__(self, "nu", nu)

    @property
    def step(self) -> float:
        """Detuning spacing Δν (rad/s)."""
        return float(self.nu[1] - self.nu[0])

    @property
    def wavelengths_nm(self) -> np.ndarray:
        return detuning_to_wavelength(self.nu, self.center_wavelength_nm)

    def to_detuning(self, wavelength_nm):
        return wavelength_to_detuning(wavelength_nm, self.center_wavelength_nm)

    def to_wavelength(self, nu):
        return detuning_to_wavelength(nu, self.center_wavelength_nm)

    def mesh(self):
        """Signal (rows) and idler (columns) detuning meshes."""
        return np.meshgrid(self.nu, self.nu, indexing="ij")


def build_grid(center_wavelength_nm=DEFAULT_SIGNAL_NM, span_nm=DEFAULT_SPAN_NM,
               points=DEFAULT_GRID_POINTS) -> FrequencyGrid:
    return FrequencyGrid(float(center_wavelength_nm), float(span_nm), points)


PUMP_SHAPES = ("gaussian", "aperture_clipped")


@dataclass(frozen=True)
class PumpSpectrum:
    """Pump spectral envelope.

    ``fwhm_nm`` is the intensity FWHM in pump wavelength. For the
    ``aperture_clipped`` shape the Gaussian is zeroed beyond ``cutoff_nm``
    from the center, as a slit in the Fourier plane of a 4f shaper would.
    """

    fwhm_nm: float
    center_wavelength_nm: float = DEFAULT_PUMP_NM
    shape: str = "gaussian"
    cutoff_nm: float | None = None

    def __post_init__(self):
        if not self.fwhm_nm > 0:
            raise InvalidArgument(f"pump fwhm must be positive, got {self.fwhm_nm}")
        if self.shape not in PUMP_SHAPES:
            raise InvalidArgument(f"unknown pump shape {self.shape!r}")
        if self.shape == "aperture_clipped":
            if self.cutoff_nm is None or not self.cutoff_nm > 0:
                raise InvalidArgument("aperture_clipped pump needs a positive cutoff_nm")

    @property
    def half_width_nu(self) -> float:
        """Half of the intensity FWHM in angular frequency.

        Chosen so the half-maximum points land exactly ``fwhm_nm`` apart in
        wavelength: solves 2πc·2h/(ω0² − h²) = Δλ for h.
        """
        w0 = float(carrier(self.center_wavelength_nm))
        dl = self.fwhm_nm * NM
        a = 4 * np.pi * C_LIGHT
        return 2 * dl * w0**2 / (a + math.sqrt(a * a + 4 * dl * dl * w0**2))

    @property
    def fwhm_nu(self) -> float:
        return 2 * self.half_width_nu

    @property
    def sigma_nu(self) -> float:
        """Standard deviation of the intensity |α|² in rad/s."""
        return self.fwhm_nu / (2 * math.sqrt(2 * math.log(2)))


def pump_amplitude(pump: PumpSpectrum, nu_plus):
    """Real, peak-normalized pump amplitude α at pump detuning ``nu_plus``."""
    nu_plus = np.asarray(nu_plus, dtype=float)
    alpha = np.exp(-(nu_plus**2) / (4 * pump.sigma_nu**2))
    if pump.shape == "aperture_clipped":
        lam = detuning_to_wavelength(nu_plus, pump.center_wavelength_nm)
        alpha = np.where(np.abs(lam - pump.center_wavelength_nm) <= pump.cutoff_nm, alpha, 0.0)
    return alpha


@dataclass(frozen=True)
class DispersionModel:
    """First-order wavevector mismatch Δk = δ(ν_s − ν_i) + ε(ν_s + ν_i).

    ``gvm_antidiag`` is δ and ``gvm_diag`` is ε, both in s/m.
    """

    gvm_antidiag: float
    gvm_diag: float = 0.0
    crystal_length_mm: float = 18.0

    def __post_init__(self):
        if not self.crystal_length_mm > 0:
            raise InvalidArgument("crystal length must be positive")
        if not (math.isfinite(self.gvm_antidiag) and math.isfinite(self.gvm_diag)):
            raise InvalidArgument("dispersion coefficients must be finite")

    @property
    def epm_quality(self) -> float:
        """|ε/δ|; zero means ideal extended phase matching."""
        if self.gvm_diag == 0:
            return 0.0
        if self.gvm_antidiag == 0:
            return math.inf
        return abs(self.gvm_diag / self.gvm_antidiag)


def delta_k(model: DispersionModel, nu_s, nu_i):
    nu_s = np.asarray(nu_s, dtype=float)
    nu_i = np.asarray(nu_i, dtype=float)
    return model.gvm_antidiag * (nu_s - nu_i) + model.gvm_diag * (nu_s + nu_i)


def calibrate_gvm(target_dfg_fwhm_nm, length_mm, poling, *,
                  center_wavelength_nm=DEFAULT_SIGNAL_NM, rtol=1e-4) -> DispersionModel:
    """Find δ so the simulated DFG scan of ``poling`` has the target FWHM.

    The DFG width scales as 1/δ, so a bracket around a single-probe estimate
    is bisected until the width matches to ``rtol``.
    """
    from .poling import dfg_scan, phase_matching_fwhm

    if not target_dfg_fwhm_nm > 0:
        raise InvalidArgument("target DFG FWHM must be positive")
    if not math.isclose(length_mm, poling.length_mm, rel_tol=1e-9):
        raise InvalidArgument(
            f"length {length_mm} mm does not match poling length {poling.length_mm} mm")

    dk_fwhm = phase_matching_fwhm(poling)
    # DFG: Δk = δ(ν_s − ν_i) = −2δν_i at ν_s = −ν_i
    half = target_dfg_fwhm_nm / 2
    nu_fwhm = (wavelength_to_detuning(center_wavelength_nm - half, center_wavelength_nm)
               - wavelength_to_detuning(center_wavelength_nm + half, center_wavelength_nm))
    estimate = dk_fwhm / (2 * nu_fwhm)
    probe_span = max(8 * target_dfg_fwhm_nm, 16.0)

    def mismatch(log_delta):
        model = DispersionModel(math.exp(log_delta), 0.0, length_mm)
        width = dfg_scan(poling, model, probe_span, 2001,
                         center_wavelength_nm=center_wavelength_nm).fwhm_nm
        if not math.isfinite(width):
            width = probe_span
        return width / target_dfg_fwhm_nm - 1.0

    lo, hi = math.log(estimate / 2), math.log(estimate * 2)
    for _ in range(8):
        f_lo, f_hi = mismatch(lo), mismatch(hi)
        if f_lo > 0 > f_hi:
            break
        if f_lo <= 0:
            lo -= math.log(2)
        if f_hi >= 0:
            hi += math.log(2)
    else:
        raise CalibrationError(
            f"no bracketing interval for a {target_dfg_fwhm_nm} nm DFG width")
    log_delta = optimize.bisect(mismatch, lo, hi, xtol=rtol / 10, maxiter=200)
    return DispersionModel(math.exp(log_delta), 0.0, length_mm)
