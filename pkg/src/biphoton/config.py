"""Scenario configuration: INI files, JSON sidecars and command-line overrides."""
from __future__ import annotations

import configparser
import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace

from .errors import ConfigError

log = logging.getLogger(__name__)

TABLE1_PUMPS = (5.6, 3.6, 2.4, 1.6, 0.95, 0.74)


@dataclass(frozen=True)
class GridSection:
    center_wavelength_nm: float = 1582.0
    span_nm: float = 20.0
    points: int = 512


@dataclass(frozen=True)
class PumpSection:
    fwhm_nm: float = 0.95
    center_wavelength_nm: float = 791.0
    shape: str = "gaussian"
    cutoff_nm: float = 0.0


@dataclass(frozen=True)
class PolingSection:
    kind: str = "apodized"
    period_um: float = 46.1
    length_mm: float = 18.0
    duty_min: float = 0.1
    duty_max: float = 0.9


@dataclass(frozen=True)
class DispersionSection:
    dfg_fwhm_nm: float = 2.2
    gvm_antidiag: float = 0.0  # 0 means calibrate to dfg_fwhm_nm
    gvm_diag: float = 0.0
    phase_matching: str = "exact"


@dataclass(frozen=True)
class SpectrometerSection:
    variant: str = "fiber"
    dispersion_ns_per_nm: float = 0.0  # 0 keeps the variant preset
    loss_db: float = -1.0  # negative keeps the variant preset
    efficiency: float = 0.8
    jitter_fwhm_ps: float = 200.0
    dark_rate: float = 400.0
    rep_period_ns: float = 12.5
    bin_width_ps: int = 10
    analysis_bin_ps: int = 500
    window_nm: float = 0.0  # 0 means the full rep-period window


@dataclass(frozen=True)
class MonteCarloSection:
    pairs: int = 1_000_000
    seed: int = 1


@dataclass(frozen=True)
class HomSection:
    pump_fwhm_nm: float = 5.6
    span_ps: float = 8.0
    points: int = 801
    filter_nm: float = 10.0
    filter_shape: str = "rect"
    pbs_leakage: float = 0.01
    split_ratio: float = 0.49
    pairs_per_delay: int = 0  # 0 disables shot noise


@dataclass(frozen=True)
class Table1Section:
    pump_fwhm_nm: tuple = TABLE1_PUMPS
    reconstruct: bool = True


@dataclass(frozen=True)
class OutputSection:
    out_dir: str = "out"


SECTIONS = {
    "grid": GridSection,
    "pump": PumpSection,
    "poling": PolingSection,
    "dispersion": DispersionSection,
    "spectrometer": SpectrometerSection,
    "montecarlo": MonteCarloSection,
    "hom": HomSection,
    "table1": Table1Section,
    "output": OutputSection,
}

_CHOICES = {
    ("pump", "shape"): ("gaussian", "aperture_clipped"),
    ("poling", "kind"): ("apodized", "uniform"),
    ("dispersion", "phase_matching"): ("exact", "gaussian"),
    ("spectrometer", "variant"): ("fiber", "dcm"),
    ("hom", "filter_shape"): ("rect", "gaussian"),
}


@dataclass(frozen=True)
class ScenarioConfig:
    grid: GridSection = field(default_factory=GridSection)
    pump: PumpSection = field(default_factory=PumpSection)
    poling: PolingSection = field(default_factory=PolingSection)
    dispersion: DispersionSection = field(default_factory=DispersionSection)
    spectrometer: SpectrometerSection = field(default_factory=SpectrometerSection)
    montecarlo: MonteCarloSection = field(default_factory=MonteCarloSection)
    hom: HomSection = field(default_factory=HomSection)
    table1: Table1Section = field(default_factory=Table1Section)
    output: OutputSection = field(default_factory=OutputSection)

    def to_dict(self):
        d = asdict(self)
        d["table1"]["pump_fwhm_nm"] = list(d["table1"]["pump_fwhm_nm"])
        return d

    def override(self, section, **values) -> "ScenarioConfig":
        return replace(self, **{section: replace(getattr(self, section), **values)})


def _coerce(section, key, raw, default):
    where = f"[{section}] {key}"
    try:
        if isinstance(default, bool):
            if isinstance(raw, bool):
                return raw
            text = str(raw).strip().lower()
            if text in ("1", "true", "yes", "on"):
                return True
            if text in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            value = float(raw)
            if value != int(value):
                raise ValueError(raw)
            return int(value)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = raw if isinstance(raw, (list, tuple)) else str(raw).split(",")
            return tuple(float(x) for x in items)
        value = str(raw).strip()
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: cannot read {raw!r} as {type(default).__name__}") from None
    choices = _CHOICES.get((section, key))
    if choices and value not in choices:
        raise ConfigError(f"{where}: {value!r} is not one of {', '.join(choices)}")
    return value


def from_mapping(data: dict, strict=True, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Build a config from {section: {key: value}}; unknown names are errors when strict."""
    cfg = base or ScenarioConfig()
    for section, values in data.items():
        cls = SECTIONS.get(section)
        if cls is None:
            _unknown(f"unknown section [{section}]", strict)
            continue
        current = getattr(cfg, section)
        known = {f.name: getattr(current, f.name) for f in fields(cls)}
        updates = {}
        for key, raw in values.items():
            if key not in known:
                _unknown(f"unknown key '{key}' in [{section}]", strict)
                continue
            updates[key] = _coerce(section, key, raw, known[key])
        cfg = cfg.override(section, **updates)
    return cfg


def _unknown(message, strict):
    if strict:
        raise ConfigError(message)
    log.warning("ignoring %s", message)


def load_config(path, strict=True) -> ScenarioConfig:
    """Read an INI scenario file or a JSON sidecar written by a previous run."""
    path = str(path)
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    if path.endswith(".json"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
        return from_mapping(data.get("config", data), strict)
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return from_mapping({s: dict(parser.items(s)) for s in parser.sections()}, strict)
