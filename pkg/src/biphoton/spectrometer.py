"""Dispersive time-of-flight spectrometers: Monte Carlo, reconstruction and tag ingestion.

Times are integer picoseconds relative to the pump trigger. A photon of
wavelength λ arrives at (λ − λ_ref)·D plus its channel delay, folded into
one repetition period.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import ConfigError, EmptyDataError, InvalidArgument, ParseError
from .fitting import SIGMA_TO_FWHM
from .spectral import DEFAULT_SIGNAL_NM, FrequencyGrid

RNG_NAME = "PCG64"
CHUNK_PAIRS = 1 << 18
DEFAULT_PAIR_RATE = 80e6 * 0.003  # pulses/s × mean pairs per pulse

CHANNELS = {"S": "signal", "I": "idler", "T": "trigger"}


@dataclass(frozen=True)
class SpectrometerConfig:
    dispersion_ns_per_nm: float
    loss_db: float = 0.0
    efficiency: float = 0.8
    jitter_fwhm_ps: float = 200.0
    dark_rate: float = 400.0
    rep_period_ns: float = 12.5
    bin_width_ps: int = 10
    reference_wavelength_nm: float = DEFAULT_SIGNAL_NM
    signal_pre_delay_ns: float = 0.0
    splitter_loss_db: float = 0.0
    offset_ps: float = 0.0
    pair_rate: float = DEFAULT_PAIR_RATE
    name: str = "custom"

    def __post_init__(self):
        if not self.dispersion_ns_per_nm > 0:
            raise InvalidArgument("dispersion must be positive")
        if not 0 <= self.efficiency <= 1:
            raise InvalidArgument("efficiency must lie in [0, 1]")
        if not self.rep_period_ns > 0:
            raise InvalidArgument("rep period must be positive")
        if self.loss_db < 0 or self.splitter_loss_db < 0:
            raise InvalidArgument("losses must be non-negative")
        if self.jitter_fwhm_ps < 0 or self.dark_rate < 0:
            raise InvalidArgument("jitter and dark rate must be non-negative")
        if not self.pair_rate > 0:
            raise InvalidArgument("pair rate must be positive")
        rep = self.rep_period_ns * 1000
        if not math.isclose(rep, round(rep), abs_tol=1e-6):
            raise InvalidArgument("rep period must be a whole number of ps")
        if int(self.bin_width_ps) != self.bin_width_ps or not 0 < self.bin_width_ps < rep:
            raise InvalidArgument("bin width must be a whole number of ps inside the rep period")
        if round(rep) % int(self.bin_width_ps):
            raise InvalidArgument("bin width must divide the rep period")
        object.__setattr__(self, "bin_width_ps", int(self.bin_width_ps))

    @classmethod
    def fiber(cls, **kw):
        """Single-fiber spectrometer; both photons share one dispersion value."""
        base = dict(dispersion_ns_per_nm=0.78, loss_db=10.0, name="fiber")
        return cls(**{**base, **kw})

    @classmethod
    def dcm(cls, **kw):
        """Chirped-grating module with a delayed signal arm behind a splitter."""
        base = dict(dispersion_ns_per_nm=1.88, loss_db=2.8, signal_pre_delay_ns=11.7,
                    splitter_loss_db=3.0, name="dcm")
        return cls(**{**base, **kw})

    @property
    def rep_period_ps(self) -> int:
        return int(round(self.rep_period_ns * 1000))

    @property
    def n_bins(self) -> int:
        return self.rep_period_ps // self.bin_width_ps

    @property
    def survival(self) -> float:
        """Detection probability of one photon."""
        return self.efficiency * 10 ** (-self.loss_db / 10) * 10 ** (-self.splitter_loss_db / 10)

    @property
    def window_nm(self) -> float:
        """Wavelength range that fits in one rep period."""
        return self.rep_period_ns / self.dispersion_ns_per_nm

    def delay_ps(self, channel) -> float:
        pre = self.signal_pre_delay_ns * 1000 if channel == "signal" else 0.0
        return pre + self.offset_ps

    def to_dict(self):
        return asdict(self)


def resolution_estimate(config: SpectrometerConfig) -> float:
    """Spectral resolution in nm: the larger of jitter and bin width over the dispersion."""
    return max(config.jitter_fwhm_ps, config.bin_width_ps) / (config.dispersion_ns_per_nm * 1000)


def arrival_time(wavelength_nm, config: SpectrometerConfig, channel="signal", fold=True):
    """Arrival time in ps, folded into [0, rep_period) unless ``fold`` is False."""
    if channel not in ("signal", "idler"):
        raise InvalidArgument(f"unknown channel {channel!r}")
    lam = np.asarray(wavelength_nm, dtype=float)
    t = (lam - config.reference_wavelength_nm) * config.dispersion_ns_per_nm * 1000
    t = t + config.delay_ps(channel)
    return np.mod(t, config.rep_period_ps) if fold else t


@dataclass
class CoincidenceHistogram:
    """Counts indexed by (signal time bin, idler time bin) over one rep period."""

    counts: np.ndarray = field(repr=False)
    bin_width_ps: int
    rep_period_ps: int
    pairs_generated: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        n = self.rep_period_ps // self.bin_width_ps
        if self.counts.shape != (n, n) or n * self.bin_width_ps != self.rep_period_ps:
            raise InvalidArgument("histogram bins must cover exactly one rep period")
        if np.any(self.counts < 0):
            raise InvalidArgument("counts must be non-negative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def bin_centers_ps(self) -> np.ndarray:
        return (np.arange(self.counts.shape[0]) + 0.5) * self.bin_width_ps

    def __add__(self, other: "CoincidenceHistogram") -> "CoincidenceHistogram":
        if (self.bin_width_ps, self.rep_period_ps) != (other.bin_width_ps, other.rep_period_ps):
            raise InvalidArgument("histograms have different binning")
        return CoincidenceHistogram(self.counts + other.counts, self.bin_width_ps,
                                    self.rep_period_ps,
                                    self.pairs_generated + other.pairs_generated)

    def rebin(self, factor: int) -> "CoincidenceHistogram":
        n = self.counts.shape[0]
        if factor < 1 or n % factor:
            raise InvalidArgument(f"rebin factor {factor} must divide {n} bins")
        c = self.counts.reshape(n // factor, factor, n // factor, factor).sum(axis=(1, 3))
        return CoincidenceHistogram(c, self.bin_width_ps * factor, self.rep_period_ps,
                                    self.pairs_generated, dict(self.metadata))


@dataclass(frozen=True)
class TimeTagRecord:
    channel: str
    timestamp_ps: int


@dataclass
class TagEvents:
    """Absolute time tags from a simulated run, sorted by time."""

    channels: np.ndarray = field(repr=False)  # 'S', 'I' or 'T'
    timestamps: np.ndarray = field(repr=False)

    def records(self):
        for ch, t in zip(self.channels, self.timestamps):
            yield TimeTagRecord(str(ch), int(t))


def _probability_mass(jsa_or_jsi, grid):
    from .jsa import JointSpectralAmplitude

    if isinstance(jsa_or_jsi, JointSpectralAmplitude):
        grid = jsa_or_jsi.grid
        jsi = jsa_or_jsi.jsi
    else:
        if grid is None:
            raise InvalidArgument("a bare JSI matrix needs its FrequencyGrid")
        jsi = np.asarray(jsa_or_jsi, dtype=float)
    if jsi.shape != (grid.points, grid.points) or np.any(jsi < 0):
        raise InvalidArgument("JSI must be a non-negative N×N matrix on the grid")
    mass = jsi * grid.step**2
    if abs(mass.sum() - 1.0) > 1e-6:
        raise InvalidArgument(f"JSI is not normalized (Σ|f|²Δν² = {mass.sum():.6g})")
    return grid, mass


def _chunk_rng(seed, chunk):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(1, chunk))))


def _dark_rng(seed):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(0,))))


def expected_dark_coincidences(config: SpectrometerConfig, pairs) -> float:
    """Mean accidental coincidences involving at least one dark count.

    Any two tags within the same rep period form a coincidence, so the rate
    is T_rep·(R_d² + R_d·(S_s + S_i)) over an integration time pairs/pair_rate.
    """
    singles = config.pair_rate * config.survival
    t_int = pairs / config.pair_rate
    t_rep = config.rep_period_ps * 1e-12
    rd = config.dark_rate
    return t_int * t_rep * (rd * rd + 2 * rd * singles)


def simulate_coincidences(jsa_or_jsi, config: SpectrometerConfig, pairs: int, seed: int,
                          grid: FrequencyGrid | None = None, return_events=False):
    """Monte Carlo coincidence histogram of a spectrometer run.

    Pairs are drawn from the JSI mass (uniform within each grid cell), each
    photon survives independently, receives Gaussian jitter and is rounded to
    an integer ps tag. Pair n occupies pump slot n. Accidentals involving
    dark counts fill extra slots after the pairs with uniform times.
    Generation runs in fixed-size chunks, each with its own sub-seed, so the
    result depends only on ``seed``.
    """
    pairs = int(pairs)
    if pairs <= 0:
        raise InvalidArgument("pairs must be positive")
    grid, mass = _probability_mass(jsa_or_jsi, grid)
    cdf = np.cumsum(mass.ravel())
    cdf /= cdf[-1]
    n = grid.points
    rep = config.rep_period_ps
    nb = config.n_bins
    bw = config.bin_width_ps
    sigma = config.jitter_fwhm_ps / SIGMA_TO_FWHM
    p = config.survival

    counts = np.zeros(nb * nb, dtype=np.int64)
    detected = singles_s = singles_i = 0
    ev_slot, ev_ch, ev_t = [], [], []
    n_chunks = -(-pairs // CHUNK_PAIRS)
    for c in range(n_chunks):
        rng = _chunk_rng(seed, c)
        m = min(CHUNK_PAIRS, pairs - c * CHUNK_PAIRS)
        flat = np.searchsorted(cdf, rng.random(m), side="right")
        flat = np.minimum(flat, cdf.size - 1)
        js, ji = np.divmod(flat, n)
        nu_s = grid.nu[js] + (rng.random(m) - 0.5) * grid.step
        nu_i = grid.nu[ji] + (rng.random(m) - 0.5) * grid.step
        keep_s = rng.random(m) < p
        keep_i = rng.random(m) < p
        ts = arrival_time(grid.to_wavelength(nu_s), config, "signal", fold=False)
        ti = arrival_time(grid.to_wavelength(nu_i), config, "idler", fold=False)
        ts = np.mod(np.rint(ts + rng.normal(0.0, sigma, m)).astype(np.int64), rep)
        ti = np.mod(np.rint(ti + rng.normal(0.0, sigma, m)).astype(np.int64), rep)
        both = keep_s & keep_i
        counts += np.bincount((ts[both] // bw) * nb + ti[both] // bw, minlength=nb * nb)
        detected += int(both.sum())
        singles_s += int(keep_s.sum())
        singles_i += int(keep_i.sum())
        if return_events:
            slot = np.arange(c * CHUNK_PAIRS, c * CHUNK_PAIRS + m, dtype=np.int64)
            ev_slot += [slot[keep_s], slot[keep_i]]
            ev_ch += [np.full(keep_s.sum(), "S"), np.full(keep_i.sum(), "I")]
            ev_t += [ts[keep_s], ti[keep_i]]

    drng = _dark_rng(seed)
    n_dark = int(drng.poisson(expected_dark_coincidences(config, pairs)))
    if n_dark:
        ds = drng.integers(0, rep, n_dark)
        di = drng.integers(0, rep, n_dark)
        counts += np.bincount((ds // bw) * nb + di // bw, minlength=nb * nb)
        if return_events:
            slot = pairs + np.arange(n_dark, dtype=np.int64)
            ev_slot += [slot, slot]
            ev_ch += [np.full(n_dark, "S"), np.full(n_dark, "I")]
            ev_t += [ds, di]

    meta = {
        "seed": int(seed), "rng": RNG_NAME, "chunk_pairs": CHUNK_PAIRS,
        "config": config.to_dict(), "detected_pairs": detected,
        "dark_coincidences": n_dark, "singles_signal": singles_s, "singles_idler": singles_i,
    }
    hist = CoincidenceHistogram(counts.reshape(nb, nb), bw, rep, pairs, meta)
    if not return_events:
        return hist
    return hist, _assemble_events(ev_slot, ev_ch, ev_t, rep)


def _assemble_events(slots, chans, times, rep):
    if slots:
        slot = np.concatenate(slots)
        ch = np.concatenate(chans)
        t = np.concatenate(times)
    else:
        slot = np.zeros(0, np.int64)
        ch = np.zeros(0, "<U1")
        t = np.zeros(0, np.int64)
    used = np.unique(slot)
    slot = np.concatenate([used, slot])
    ch = np.concatenate([np.full(used.size, "T"), ch])
    t = np.concatenate([np.zeros(used.size, np.int64), t])
    absolute = slot * rep + t
    order = np.lexsort((ch != "T", absolute))
    return TagEvents(ch[order], absolute[order])


@dataclass
class ReconstructedJsi:
    """JSI estimate on uniform wavelength axes (rows: signal, columns: idler)."""

    signal_nm: np.ndarray = field(repr=False)
    idler_nm: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)
    bin_nm: float
    metadata: dict = field(default_factory=dict)

    def window(self, center_nm, width_nm) -> "ReconstructedJsi":
        """Crop both axes to bins whose centers lie within width/2 of center."""
        s = np.abs(self.signal_nm - center_nm) <= width_nm / 2 + 1e-9
        i = np.abs(self.idler_nm - center_nm) <= width_nm / 2 + 1e-9
        return replace(self, signal_nm=self.signal_nm[s], idler_nm=self.idler_nm[i],
                       counts=self.counts[np.ix_(s, i)])

    @property
    def marginals(self):
        return self.counts.sum(axis=1), self.counts.sum(axis=0)


def _roll_axis(marginal, bin_ps, nb, config, channel, align):
    """Shift that brings the anchor bin to the middle, plus the anchor's wavelength offset."""
    if align == "peak":
        anchor = int(np.argmax(marginal))
        offset_nm = 0.0
    else:
        t_ref = config.delay_ps(channel) % config.rep_period_ps
        anchor = int(t_ref // bin_ps)
        offset_nm = ((anchor + 0.5) * bin_ps - t_ref) / (config.dispersion_ns_per_nm * 1000)
    return nb // 2 - anchor, offset_nm


def reconstruct_jsi(hist: CoincidenceHistogram, config: SpectrometerConfig, align="peak",
                    rebin=1, center_nm=None) -> ReconstructedJsi:
    """Map arrival-time bins back to wavelength with the linear dispersion law.

    ``align="peak"`` puts the marginal peaks at ``center_nm`` (the degenerate
    wavelength by default); ``align="config"`` uses the configured delays.
    The time axis is rotated so the anchor bin sits in the middle of the
    window, which then spans one rep period of wavelengths.
    """
    if align not in ("peak", "config"):
        raise InvalidArgument(f"align must be 'peak' or 'config', got {align!r}")
    if hist.total == 0:
        raise EmptyDataError("coincidence histogram is empty")
    if hist.rep_period_ps != config.rep_period_ps:
        raise InvalidArgument("histogram and config rep periods differ")
    if rebin != 1:
        hist = hist.rebin(rebin)
    center = config.reference_wavelength_nm if center_nm is None else center_nm
    nb = hist.counts.shape[0]
    bin_nm = hist.bin_width_ps / (config.dispersion_ns_per_nm * 1000)
    ms, mi = hist.counts.sum(axis=1), hist.counts.sum(axis=0)
    shift_s, off_s = _roll_axis(ms, hist.bin_width_ps, nb, config, "signal", align)
    shift_i, off_i = _roll_axis(mi, hist.bin_width_ps, nb, config, "idler", align)
    counts = np.roll(np.roll(hist.counts, shift_s, axis=0), shift_i, axis=1)
    idx = np.arange(nb) - nb // 2
    meta = {"align": align, "bin_width_ps": hist.bin_width_ps,
            "pairs_generated": hist.pairs_generated, "total": hist.total}
    return ReconstructedJsi(center + idx * bin_nm + off_s, center + idx * bin_nm + off_i,
                            counts.astype(float), bin_nm, meta)


@dataclass
class TagStream:
    signal: np.ndarray
    idler: np.ndarray
    trigger: np.ndarray
    lines: int = 0
    skipped: int = 0


def parse_time_tags(lines, strict=True, path=None) -> TagStream:
    """Parse "channel,timestamp_ps" records; '#' starts a comment line.

    Malformed lines raise ParseError in strict mode and are counted otherwise.
    A timestamp earlier than the previous one on its channel always raises.
    """
    out = {"S": [], "I": [], "T": []}
    last = {}
    skipped = total = 0
    for n, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        total += 1
        parts = [p.strip() for p in line.split(",")]
        try:
            if len(parts) != 2 or parts[0] not in CHANNELS:
                raise ValueError(line)
            ch, t = parts[0], int(parts[1])
        except ValueError:
            if strict:
                raise ParseError(f"malformed time tag {line!r}", line=n, path=path) from None
            skipped += 1
            continue
        if ch in last and t < last[ch]:
            raise ParseError(f"timestamp {t} on channel {ch} is earlier than {last[ch]}",
                             line=n, path=path)
        last[ch] = t
        out[ch].append(t)
    arr = {k: np.array(v, dtype=np.int64) for k, v in out.items()}
    return TagStream(arr["S"], arr["I"], arr["T"], total, skipped)


def _slots(times, triggers, rep):
    """Pump slot and time since its trigger; -1 marks tags with no usable trigger."""
    if triggers is None:
        return times // rep, times % rep
    k = np.searchsorted(triggers, times, side="right") - 1
    rel = times - triggers[np.maximum(k, 0)]
    bad = (k < 0) | (rel >= rep)
    return np.where(bad, -1, k), rel


def ingest_time_tags(source, config: SpectrometerConfig | None = None, *, rep_period_ps=None,
                     bin_width_ps=None, strict=True, use_trigger=True) -> CoincidenceHistogram:
    """Build a coincidence histogram from time tags.

    ``source`` is a path or an iterable of lines. Every signal tag is paired
    with every idler tag from the same pump slot. Slots come from the trigger
    channel when present, otherwise from a fixed rep period.
    """
    path = None
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        path = str(source)
        with open(path) as fh:
            stream = parse_time_tags(fh, strict, path)
    else:
        stream = parse_time_tags(source, strict)

    if rep_period_ps is None and config is not None:
        rep_period_ps = config.rep_period_ps
    if bin_width_ps is None:
        bin_width_ps = config.bin_width_ps if config is not None else 10
    triggers = stream.trigger if (use_trigger and stream.trigger.size) else None
    if rep_period_ps is None:
        if triggers is None:
            raise ConfigError("time tags have no trigger channel and no rep period was given")
        gaps = np.diff(triggers)
        if gaps.size == 0:
            raise ConfigError("cannot infer the rep period from a single trigger")
        rep_period_ps = int(np.min(gaps))
    rep = int(rep_period_ps)
    bw = int(bin_width_ps)
    if rep % bw:
        raise ConfigError(f"bin width {bw} ps does not divide the rep period {rep} ps")
    nb = rep // bw

    slot_s, rel_s = _slots(stream.signal, triggers, rep)
    slot_i, rel_i = _slots(stream.idler, triggers, rep)
    ok_s, ok_i = slot_s >= 0, slot_i >= 0
    slot_s, rel_s, slot_i, rel_i = slot_s[ok_s], rel_s[ok_s], slot_i[ok_i], rel_i[ok_i]

    counts = np.zeros(nb * nb, dtype=np.int64)
    order = np.argsort(slot_i, kind="stable")
    slot_i, rel_i = slot_i[order], rel_i[order]
    lo = np.searchsorted(slot_i, slot_s, side="left")
    hi = np.searchsorted(slot_i, slot_s, side="right")
    mult = hi - lo
    if mult.sum():
        s_rep = np.repeat(np.arange(slot_s.size), mult)
        starts = np.repeat(lo - np.concatenate([[0], np.cumsum(mult)[:-1]]), mult)
        i_idx = starts + np.arange(mult.sum())
        counts += np.bincount((rel_s[s_rep] // bw) * nb + rel_i[i_idx] // bw, minlength=nb * nb)
    meta = {"lines": stream.lines, "skipped_lines": stream.skipped,
            "signal_tags": int(stream.signal.size), "idler_tags": int(stream.idler.size),
            "trigger_tags": int(stream.trigger.size),
            "unassigned_tags": int((~ok_s).sum() + (~ok_i).sum()), "source": path}
    return CoincidenceHistogram(counts.reshape(nb, nb), bw, rep, 0, meta)


def write_time_tags(path, events: TagEvents, header=None):
    with open(path, "w") as fh:
        if header:
            for line in str(header).splitlines():
                fh.write(f"# {line}\n")
        for ch, t in zip(events.channels, events.timestamps):
            fh.write(f"{ch},{int(t)}\n")


def write_histogram_csv(path, hist: CoincidenceHistogram):
    centers = hist.bin_centers_ps
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["signal_ps\\idler_ps"] + [f"{x:g}" for x in centers])
        for x, row in zip(centers, hist.counts):
            w.writerow([f"{x:g}"] + [str(int(v)) for v in row])


def read_histogram_csv(path) -> CoincidenceHistogram:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ParseError("histogram file has no data rows", path=str(path))
    centers = np.array([float(x) for x in rows[0][1:]])
    bw = int(round(2 * centers[0]))
    try:
        counts = np.array([[int(x) for x in r[1:]] for r in rows[1:]], dtype=np.int64)
    except ValueError as exc:
        raise ParseError(f"non-integer count: {exc}", path=str(path)) from None
    return CoincidenceHistogram(counts, bw, bw * centers.size)


@dataclass(frozen=True)
class HeraldingReport:
    signal: float
    idler: float
    system: float


def heralding_efficiency(singles_s, singles_i, coincidences) -> HeraldingReport:
    """η_s = C/S_i, η_i = C/S_s and their geometric mean."""
    if singles_s <= 0 or singles_i <= 0:
        raise InvalidArgument("singles rates must be positive")
    if coincidences < 0:
        raise InvalidArgument("coincidence rate must be non-negative")
    if coincidences > min(singles_s, singles_i):
        raise InvalidArgument("coincidences cannot exceed either singles rate")
    eta_s = coincidences / singles_i
    eta_i = coincidences / singles_s
    return HeraldingReport(eta_s, eta_i, math.sqrt(eta_s * eta_i))
