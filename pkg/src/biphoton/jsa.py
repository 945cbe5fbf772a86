"""Joint spectral amplitude construction and its Schmidt analysis."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import FitError, InvalidArgument, ResolutionError
from .fitting import SIGMA_TO_FWHM, fit_gaussian_1d, fit_gaussian_2d, moments_1d
from .poling import PolingDesign, phase_matching_amplitude, phase_matching_fwhm
from .spectral import (DispersionModel, FrequencyGrid, PumpSpectrum,
                       bandwidth_hz_to_nm, bandwidth_nm_to_hz, delta_k,
                       pump_amplitude)

TIME_BANDWIDTH = 2 * math.log(2) / math.pi
MIN_POINTS_ACROSS = 8
MIN_SPAN_FACTOR = 3.0
PHASE_MATCHING_MODES = ("exact", "gaussian")


class SpanWarning(UserWarning):
    """The grid window clips a noticeable part of the biphoton spectrum."""


@dataclass(frozen=True)
class JointSpectralAmplitude:
    """f(ν_s, ν_i) on ``grid``; rows index the signal, columns the idler."""

    grid: FrequencyGrid
    values: np.ndarray = field(repr=False)
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        n = self.grid.points
        if v.shape != (n, n):
            raise InvalidArgument(f"JSA must be {n}x{n}, got {v.shape}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def cell(self) -> float:
        return self.grid.step**2

    @property
    def jsi(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.jsi.sum() * self.cell))

    @property
    def normalized(self) -> bool:
        return abs(self.norm - 1.0) < 1e-9

    def normalize(self) -> "JointSpectralAmplitude":
        n = self.norm
        if n == 0:
            raise InvalidArgument("cannot normalize an all-zero JSA")
        return replace(self, values=self.values / n)

    def transpose(self) -> "JointSpectralAmplitude":
        return replace(self, values=self.values.T.copy())

    def asymmetry(self) -> float:
        """‖f − fᵀ‖ / ‖f‖."""
        v = self.values
        return float(np.linalg.norm(v - v.T) / np.linalg.norm(v))


def _pm_bandwidth_nu(poling, model):
    """|φ|² FWHM expressed in ν_s − ν_i (rad/s); inf without phase matching."""
    if model.gvm_antidiag == 0:
        return math.inf
    return phase_matching_fwhm(poling) / abs(model.gvm_antidiag)


def build_jsa(pump: PumpSpectrum, poling: PolingDesign, model: DispersionModel,
              grid: FrequencyGrid, phase_matching="exact") -> JointSpectralAmplitude:
    """f = α(ν_s + ν_i)·φ(Δk + 2π/Λ), normalized to Σ|f|²Δν² = 1.

    ``phase_matching="exact"`` uses the domain sum with its phase referenced
    to the crystal center. ``"gaussian"`` replaces |φ| by the Gaussian with
    the same intensity FWHM in Δk, the idealized limit of the apodization.
    """
    if phase_matching not in PHASE_MATCHING_MODES:
        raise InvalidArgument(f"phase_matching must be one of {PHASE_MATCHING_MODES}")
    step = grid.step
    pump_bw = pump.fwhm_nu
    pm_bw = _pm_bandwidth_nu(poling, model)
    narrow = min(pump_bw, pm_bw)
    if narrow / step < MIN_POINTS_ACROSS:
        raise ResolutionError(
            f"grid step {step:.3e} rad/s resolves only {narrow / step:.1f} points across "
            f"the {narrow:.3e} rad/s bandwidth (need {MIN_POINTS_ACROSS})")
    span_nu = grid.nu[-1] - grid.nu[0]
    wide = max(pump_bw, pm_bw if math.isfinite(pm_bw) else 0.0)
    if span_nu < MIN_SPAN_FACTOR * wide:
        warnings.warn(f"grid span covers {span_nu / wide:.2f}x the widest bandwidth "
                      f"(recommended {MIN_SPAN_FACTOR}x)", SpanWarning, stacklevel=2)

    nu = grid.nu
    n = nu.size
    alpha = pump_amplitude(pump, nu[:, None] + nu[None, :])

    if phase_matching == "gaussian":
        dk = delta_k(model, nu[:, None], nu[None, :])
        sigma_k = phase_matching_fwhm(poling) / SIGMA_TO_FWHM
        phi = np.exp(-(dk**2) / (4 * sigma_k**2)).astype(complex)
    elif model.gvm_diag == 0:
        # Δk only depends on j − k: evaluate 2N−1 values, then index
        offsets = np.arange(-(n - 1), n)
        line = phase_matching_amplitude(
            poling, model.gvm_antidiag * offsets * step + poling.grating_wavevector,
            origin=poling.length / 2)
        jk = np.arange(n)[:, None] - np.arange(n)[None, :]
        phi = line[jk + n - 1]
    else:
        dk = delta_k(model, nu[:, None], nu[None, :])
        phi = phase_matching_amplitude(poling, dk + poling.grating_wavevector,
                                       origin=poling.length / 2)

    meta = {
        "pump_fwhm_nm": pump.fwhm_nm,
        "pump_shape": pump.shape,
        "poling": poling.kind,
        "gvm_antidiag": model.gvm_antidiag,
        "gvm_diag": model.gvm_diag,
        "phase_matching": phase_matching,
        "filters": [],
    }
    return JointSpectralAmplitude(grid, alpha * phi, meta).normalize()


@dataclass(frozen=True)
class Marginals:
    wavelength_nm: np.ndarray = field(repr=False)
    signal: np.ndarray = field(repr=False)
    idler: np.ndarray = field(repr=False)
    signal_fwhm_nm: float
    idler_fwhm_nm: float
    fitted: bool = True


def _fwhm_nm(lam, y):
    try:
        return fit_gaussian_1d(lam, y).fwhm, True
    except FitError:
        return SIGMA_TO_FWHM * moments_1d(lam, y)[1], False


def marginals(jsa: JointSpectralAmplitude) -> Marginals:
    """Signal and idler spectra Σ|f|²Δν with Gaussian-fit FWHMs in nm.

    If either fit fails, FitError is raised and its ``fallback`` holds the
    marginals with moment-based widths.
    """
    jsi = jsa.jsi
    dnu = jsa.grid.step
    ms = jsi.sum(axis=1) * dnu
    mi = jsi.sum(axis=0) * dnu
    lam = jsa.grid.wavelengths_nm
    ws, ok_s = _fwhm_nm(lam, ms)
    wi, ok_i = _fwhm_nm(lam, mi)
    result = Marginals(lam, ms, mi, ws, wi, ok_s and ok_i)
    if not result.fitted:
        raise FitError("marginal Gaussian fit did not converge", fallback=result)
    return result


@dataclass(frozen=True)
class SchmidtReport:
    singular_values: np.ndarray = field(repr=False)
    coefficients: np.ndarray = field(repr=False)
    schmidt_number: float
    purity: float
    upper_bound: bool = False

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.coefficients > 1e-15))


def schmidt_decompose(matrix, cell=1.0) -> SchmidtReport:
    """Schmidt spectrum of a discretized biphoton amplitude.

    ``matrix`` may be a JointSpectralAmplitude, in which case the grid cell
    scaling is applied automatically.
    """
    if isinstance(matrix, JointSpectralAmplitude):
        cell = matrix.grid.step
        matrix = matrix.values
    m = np.asarray(matrix)
    if m.ndim != 2:
        raise InvalidArgument("Schmidt decomposition needs a 2D matrix")
    if not np.all(np.isfinite(m)):
        raise InvalidArgument("matrix has non-finite entries")
    if not np.any(m):
        raise InvalidArgument("matrix is identically zero")
    s = np.linalg.svd(m * cell, compute_uv=False)
    lam = s**2 / np.sum(s**2)
    k = 1.0 / np.sum(lam**2)
    return SchmidtReport(s, lam, float(k), float(1.0 / k))


def purity_from_jsi(jsi) -> SchmidtReport:
    """Schmidt analysis of √JSI, i.e. assuming a flat spectral phase.

    Any real phase structure can only lower the true purity, so the result
    is flagged as an upper bound.
    """
    jsi = np.asarray(jsi, dtype=float)
    if np.any(jsi < 0):
        raise InvalidArgument("JSI has negative entries")
    return replace(schmidt_decompose(np.sqrt(jsi)), upper_bound=True)


def side_lobe_suppression(jsi, region_fwhm=3.0) -> float:
    """Peak over the strongest side lobe, in dB.

    A rotated 2D Gaussian is fitted to the pixels above 20% of the peak. The
    central region is the ellipse whose axes are ``region_fwhm`` times the
    fitted FWHMs; a side lobe is any strict local maximum outside it. With no
    side lobe above 1e-12 of the peak the result is inf.
    """
    z = np.asarray(jsi, dtype=float)
    peak = float(z.max())
    if not peak > 0:
        raise InvalidArgument("JSI has no positive peak")
    rows, cols = np.indices(z.shape)
    core = z >= 0.2 * peak
    g = fit_gaussian_2d(rows[core], cols[core], z[core])
    radius = region_fwhm / 2 * SIGMA_TO_FWHM
    outside = g.mahalanobis2(rows, cols) > radius**2

    inner = z[1:-1, 1:-1]
    is_max = np.ones_like(inner, dtype=bool)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr or dc:
                is_max &= inner > z[1 + dr:z.shape[0] - 1 + dr, 1 + dc:z.shape[1] - 1 + dc]
    is_max &= outside[1:-1, 1:-1] & (inner > 1e-12 * peak)
    if not is_max.any():
        return math.inf
    return float(10 * np.log10(peak / inner[is_max].max()))


FILTER_SHAPES = ("rect", "gaussian")


def filter_transmission(wavelength_nm, center_nm, width_nm, shape="rect"):
    """Amplitude transmission; ``width_nm`` is the intensity FWHM."""
    lam = np.asarray(wavelength_nm, dtype=float)
    if shape == "rect":
        return (np.abs(lam - center_nm) <= width_nm / 2).astype(float)
    if shape == "gaussian":
        return np.exp(-2 * math.log(2) * ((lam - center_nm) / width_nm) ** 2)
    raise InvalidArgument(f"unknown filter shape {shape!r}")


def apply_bandpass(jsa: JointSpectralAmplitude, center_nm, width_nm,
                   shape="rect") -> JointSpectralAmplitude:
    """Identical bandpass on both arms, followed by renormalization."""
    if not width_nm > 0:
        raise InvalidArgument("filter width must be positive")
    t = filter_transmission(jsa.grid.wavelengths_nm, center_nm, width_nm, shape)
    meta = dict(jsa.metadata)
    meta["filters"] = list(meta.get("filters", [])) + [
        {"center_nm": center_nm, "width_nm": width_nm, "shape": shape}]
    out = JointSpectralAmplitude(jsa.grid, jsa.values * t[:, None] * t[None, :], meta)
    return out.normalize()


def time_bandwidth_check(fwhm_nm, center_nm=1582.0) -> float:
    """Transform-limited Gaussian duration (ps) for a spectral FWHM in nm."""
    if not (fwhm_nm > 0 and center_nm > 0):
        raise InvalidArgument("bandwidth and carrier must be positive")
    return TIME_BANDWIDTH / bandwidth_nm_to_hz(fwhm_nm, center_nm) * 1e12


def bandwidth_from_duration(duration_ps, center_nm=1582.0) -> float:
    """Inverse of time_bandwidth_check: spectral FWHM (nm) of a duration in ps."""
    if not (duration_ps > 0 and center_nm > 0):
        raise InvalidArgument("duration and carrier must be positive")
    return bandwidth_hz_to_nm(TIME_BANDWIDTH / (duration_ps * 1e-12), center_nm)


@dataclass(frozen=True)
class WitnessResult:
    ratio: float
    threshold: float
    entangled: bool

    @property
    def verdict(self) -> str:
        return "frequency-entangled" if self.entangled else "not conclusive"


def entanglement_witness(marginal_fwhm_nm, phasematch_fwhm_nm, threshold=2.0) -> WitnessResult:
    """Compare the single-photon bandwidth with the phase-matching bandwidth.

    A mixture of pairs each narrower than the phase-matching width cannot
    produce a marginal much wider than it, so a large ratio implies
    frequency entanglement.
    """
    if not (marginal_fwhm_nm > 0 and phasematch_fwhm_nm > 0):
        raise InvalidArgument("bandwidths must be positive")
    ratio = marginal_fwhm_nm / phasematch_fwhm_nm
    return WitnessResult(ratio, threshold, ratio > threshold)


def write_jsi_csv(path, grid: FrequencyGrid, matrix, fmt="%.10e"):
    """Signal wavelengths down the first column, idler wavelengths along the first row."""
    lam = grid.wavelengths_nm
    m = np.asarray(matrix, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["signal_nm\\idler_nm"] + [f"{x:.9f}" for x in lam])
        for x, row in zip(lam, m):
            w.writerow([f"{x:.9f}"] + [fmt % v for v in row])


def write_jsa_csv(path_prefix, jsa: JointSpectralAmplitude):
    """Write ``<prefix>_re.csv`` and ``<prefix>_im.csv``; returns both paths."""
    paths = (f"{path_prefix}_re.csv", f"{path_prefix}_im.csv")
    write_jsi_csv(paths[0], jsa.grid, jsa.values.real)
    write_jsi_csv(paths[1], jsa.grid, jsa.values.imag)
    return paths


def read_jsi_csv(path):
    """Returns (signal_nm, idler_nm, matrix)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise InvalidArgument(f"{path}: no data rows")
    idler = np.array([float(x) for x in rows[0][1:]])
    signal = np.array([float(r[0]) for r in rows[1:]])
    m = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    return signal, idler, m


__all__ = [
    "JointSpectralAmplitude", "Marginals", "SchmidtReport", "SpanWarning", "WitnessResult",
    "build_jsa", "marginals", "schmidt_decompose", "purity_from_jsi",
    "side_lobe_suppression", "apply_bandpass", "filter_transmission",
    "time_bandwidth_check", "bandwidth_from_duration", "entanglement_witness",
    "write_jsi_csv", "write_jsa_csv", "read_jsi_csv",
]
