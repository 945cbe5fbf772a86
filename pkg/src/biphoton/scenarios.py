"""Scenario orchestration shared by the command line and the acceptance tests."""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import interferometry as hom
from .config import ScenarioConfig
from .errors import ConfigError, InvalidArgument
from .jsa import (SpanWarning, apply_bandpass, build_jsa, marginals, purity_from_jsi,
                  schmidt_decompose)
from .poling import apodized_duty_cycle, uniform_poling
from .spectral import DispersionModel, PumpSpectrum, build_grid, calibrate_gvm
from .spectrometer import SpectrometerConfig, reconstruct_jsi, simulate_coincidences


@functools.lru_cache(maxsize=16)
def _poling(kind, period_um, length_mm, duty_min, duty_max):
    if kind == "uniform":
        return uniform_poling(period_um, length_mm)
    return apodized_duty_cycle(period_um, length_mm, (duty_min, duty_max))


def make_poling(cfg: ScenarioConfig):
    p = cfg.poling
    return _poling(p.kind, p.period_um, p.length_mm, p.duty_min, p.duty_max)


@functools.lru_cache(maxsize=16)
def _calibrated(dfg_fwhm_nm, poling_key, center_nm):
    poling = _poling(*poling_key)
    return calibrate_gvm(dfg_fwhm_nm, poling.length_mm, poling, center_wavelength_nm=center_nm)


def make_model(cfg: ScenarioConfig) -> DispersionModel:
    d, p = cfg.dispersion, cfg.poling
    if d.gvm_antidiag:
        return DispersionModel(d.gvm_antidiag, d.gvm_diag, p.length_mm)
    key = (p.kind, p.period_um, p.length_mm, p.duty_min, p.duty_max)
    model = _calibrated(d.dfg_fwhm_nm, key, cfg.grid.center_wavelength_nm)
    return DispersionModel(model.gvm_antidiag, d.gvm_diag, p.length_mm)


def make_grid(cfg: ScenarioConfig, span_nm=None):
    g = cfg.grid
    return build_grid(g.center_wavelength_nm, g.span_nm if span_nm is None else span_nm, g.points)


def make_pump(cfg: ScenarioConfig, fwhm_nm=None) -> PumpSpectrum:
    p = cfg.pump
    cutoff = p.cutoff_nm if p.shape == "aperture_clipped" else None
    return PumpSpectrum(p.fwhm_nm if fwhm_nm is None else fwhm_nm, p.center_wavelength_nm,
                        p.shape, cutoff)


def make_spectrometer(cfg: ScenarioConfig, variant=None) -> SpectrometerConfig:
    s = cfg.spectrometer
    variant = variant or s.variant
    kw = dict(efficiency=s.efficiency, jitter_fwhm_ps=s.jitter_fwhm_ps, dark_rate=s.dark_rate,
              rep_period_ns=s.rep_period_ns, bin_width_ps=s.bin_width_ps,
              reference_wavelength_nm=cfg.grid.center_wavelength_nm)
    if s.dispersion_ns_per_nm > 0:
        kw["dispersion_ns_per_nm"] = s.dispersion_ns_per_nm
    if s.loss_db >= 0:
        kw["loss_db"] = s.loss_db
    preset = SpectrometerConfig.dcm if variant == "dcm" else SpectrometerConfig.fiber
    return preset(**kw)


def validate(cfg: ScenarioConfig) -> ScenarioConfig:
    """Construct the cheap model objects once so bad values fail early."""
    try:
        make_grid(cfg)
        make_pump(cfg)
        make_poling(cfg)
        make_spectrometer(cfg)
    except InvalidArgument as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None
    if cfg.montecarlo.pairs <= 0:
        raise ConfigError("[montecarlo] pairs must be positive")
    if cfg.spectrometer.analysis_bin_ps % cfg.spectrometer.bin_width_ps:
        raise ConfigError("[spectrometer] analysis_bin_ps must be a multiple of bin_width_ps")
    return cfg


def scenario_jsa(cfg: ScenarioConfig, fwhm_nm=None, span_nm=None, quiet=True):
    """Model JSA for the configured crystal and pump."""
    with warnings.catch_warnings():
        if quiet:
            warnings.simplefilter("ignore", SpanWarning)
        return build_jsa(make_pump(cfg, fwhm_nm), make_poling(cfg), make_model(cfg),
                         make_grid(cfg, span_nm), cfg.dispersion.phase_matching)


@dataclass
class Reconstruction:
    histogram: object
    jsi: object
    schmidt: object
    spectrometer: SpectrometerConfig


def reconstruct(cfg: ScenarioConfig, jsa, variant=None, pairs=None, seed=None,
                window_nm=None) -> Reconstruction:
    """Simulate a spectrometer run and infer the purity from the reconstructed JSI."""
    spec = make_spectrometer(cfg, variant)
    pairs = cfg.montecarlo.pairs if pairs is None else pairs
    seed = cfg.montecarlo.seed if seed is None else seed
    hist = simulate_coincidences(jsa, spec, pairs, seed)
    factor = cfg.spectrometer.analysis_bin_ps // spec.bin_width_ps
    rec = reconstruct_jsi(hist, spec, rebin=max(factor, 1))
    if window_nm is None:
        window_nm = cfg.spectrometer.window_nm or spec.window_nm
    rec = rec.window(cfg.grid.center_wavelength_nm, window_nm)
    return Reconstruction(hist, rec, purity_from_jsi(rec.counts), spec)


@dataclass
class Table1Row:
    pump_fwhm_nm: float
    schmidt_number: float
    purity: float
    reconstructed_schmidt_number: float = math.nan
    reconstructed_purity: float = math.nan


def run_table1(cfg: ScenarioConfig, reconstruct_jsi=None) -> list:
    """Purity sweep over pump bandwidths for the model and (optionally) the fiber spectrometer."""
    rows = []
    do_rec = cfg.table1.reconstruct if reconstruct_jsi is None else reconstruct_jsi
    for bw in cfg.table1.pump_fwhm_nm:
        jsa = scenario_jsa(cfg, bw)
        rep = schmidt_decompose(jsa)
        row = Table1Row(bw, rep.schmidt_number, rep.purity)
        if do_rec:
            r = reconstruct(cfg, jsa, variant="fiber")
            row.reconstructed_schmidt_number = r.schmidt.schmidt_number
            row.reconstructed_purity = r.schmidt.purity
        rows.append(row)
    return rows


def best_purity(cfg: ScenarioConfig, lo=0.3, hi=6.0, points=24):
    """Maximum model purity over a log-spaced pump-bandwidth sweep, refined locally."""
    widths = np.geomspace(lo, hi, points)
    purities = [schmidt_decompose(scenario_jsa(cfg, w)).purity for w in widths]
    i = int(np.argmax(purities))
    fine = np.geomspace(widths[max(i - 1, 0)], widths[min(i + 1, points - 1)], 9)
    best = max((schmidt_decompose(scenario_jsa(cfg, w)).purity, w) for w in fine)
    return best[1], best[0]


def hom_scans(cfg: ScenarioConfig, fwhm_nm=None):
    """Model HOM scans without and with the configured bandpass."""
    h = cfg.hom
    jsa = scenario_jsa(cfg, fwhm_nm)
    filtered = apply_bandpass(jsa, cfg.grid.center_wavelength_nm, h.filter_nm, h.filter_shape)
    tau = np.linspace(-h.span_ps, h.span_ps, h.points)
    return jsa, filtered, hom.hom_scan(jsa, tau), hom.hom_scan(filtered, tau)


def marginal_report(jsa):
    m = marginals(jsa)
    ac = hom.field_autocorrelation(m.signal, jsa.grid.nu, jsa.grid.center_wavelength_nm)
    return m, ac
