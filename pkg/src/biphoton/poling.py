"""Ferroelectric domain structures and their phase-matching response."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument
from .spectral import (DEFAULT_SIGNAL_NM, DispersionModel, delta_k,
                       wavelength_to_detuning)

UM = 1e-6
MM = 1e-3

DEFAULT_PERIOD_UM = 46.1
DEFAULT_LENGTH_MM = 18.0

# relative slack when counting whole periods in L/Λ
_PERIOD_SLACK = 1e-9


@dataclass(frozen=True)
class PolingDesign:
    """Contiguous domains tiling [0, L].

    ``edges`` holds the M+1 domain boundaries in metres and ``signs`` the
    M orientations (+1/−1). The last edge is exactly L.
    """

    period_um: float
    length_mm: float
    edges: np.ndarray = field(repr=False)
    signs: np.ndarray = field(repr=False)
    kind: str = "custom"

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        signs = np.asarray(self.signs, dtype=np.int8)
        if edges.ndim != 1 or signs.shape != (edges.size - 1,):
            raise InvalidArgument("need one sign per domain and M+1 edges")
        if np.any(np.diff(edges) <= 0):
            raise InvalidArgument("domain edges must be strictly increasing")
        if not set(np.unique(signs)) <= {-1, 1}:
            raise InvalidArgument("domain signs must be +1 or -1")
        edges.flags.writeable = False
        signs.flags.writeable = False
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "signs", signs)

    @property
    def period(self) -> float:
        return self.period_um * UM

    @property
    def length(self) -> float:
        return self.length_mm * MM

    @property
    def grating_wavevector(self) -> float:
        """2π/Λ in 1/m."""
        return 2 * np.pi / self.period

    @property
    def domains(self):
        return [(float(a), float(b), int(s))
                for a, b, s in zip(self.edges[:-1], self.edges[1:], self.signs)]

    def full_periods(self):
        """(start, duty) for every complete +/− pair spanning one period."""
        widths = np.diff(self.edges)
        pair = widths[:-1] + widths[1:]
        ok = ((self.signs[:-1] == 1) & (self.signs[1:] == -1)
              & np.isclose(pair, self.period, rtol=1e-9, atol=0))
        idx = np.flatnonzero(ok)
        return self.edges[idx], widths[idx] / pair[idx]

    @property
    def duty_profile(self) -> np.ndarray:
        return self.full_periods()[1]


def _whole_periods(period, length):
    n = int(math.floor(length / period + _PERIOD_SLACK))
    remainder = length - n * period
    if remainder <= _PERIOD_SLACK * period:
        remainder = 0.0
    return n, remainder


def _period_domains(start, duty, period, lo, hi):
    """Edges/signs of one +/− period clipped to [lo, hi]."""
    pieces = [(start, start + duty * period, 1), (start + duty * period, start + period, -1)]
    out = []
    for a, b, s in pieces:
        a, b = max(a, lo), min(b, hi)
        if b - a > 1e-15:
            out.append((a, b, s))
    return out


def _assemble(pieces, length):
    edges = [pieces[0][0]] + [b for _, b, _ in pieces]
    edges[0] = 0.0
    edges[-1] = length
    return np.array(edges), np.array([s for _, _, s in pieces], dtype=np.int8)


def uniform_poling(period_um=DEFAULT_PERIOD_UM, length_mm=DEFAULT_LENGTH_MM) -> PolingDesign:
    """Standard 50:50 grating starting at z = 0 with a truncated last period."""
    if not (period_um > 0 and length_mm > 0):
        raise InvalidArgument("period and length must be positive")
    period, length = period_um * UM, length_mm * MM
    n, rem = _whole_periods(period, length)
    pieces = []
    for k in range(n):
        pieces += _period_domains(k * period, 0.5, period, 0.0, length)
    if rem:
        pieces += _period_domains(n * period, 0.5, period, 0.0, length)
    edges, signs = _assemble(pieces, length)
    return PolingDesign(period_um, length_mm, edges, signs, kind="uniform")


def gaussian_target(z, length, duty_min):
    """Peak-normalized Gaussian centered at L/2 that equals sin(π·duty_min) at both ends."""
    edge = math.sin(math.pi * duty_min)
    width = (length / 2) / math.sqrt(2 * math.log(1 / edge))
    return np.exp(-((np.asarray(z) - length / 2) ** 2) / (2 * width**2))


def apodized_duty_cycle(period_um=DEFAULT_PERIOD_UM, length_mm=DEFAULT_LENGTH_MM,
                        clip=(0.1, 0.9)) -> PolingDesign:
    """Gaussian duty-cycle apodization.

    Each period gets the duty a = arcsin(g)/π from the Gaussian target g,
    and consecutive periods alternate between a and 1 − a. Both carry the
    same in-phase first-order coefficient (2/π)·sin²(πa); their quadrature
    parts ±(1/π)·sin(2πa) cancel pairwise and land half a grating order away
    from the phase-matching peak. The full periods are centered in the
    crystal and the leftover length is split between both ends, which makes
    the structure antisymmetric about L/2.
    """
    d_min, d_max = clip
    if not (0 < d_min < 0.5 < d_max < 1):
        raise InvalidArgument(f"clip bounds must satisfy 0 < min < 0.5 < max < 1, got {clip}")
    if not (period_um > 0 and length_mm > 0):
        raise InvalidArgument("period and length must be positive")
    period, length = period_um * UM, length_mm * MM
    n, rem = _whole_periods(period, length)
    offset = rem / 2

    idx = np.arange(-1, n + 1)
    centers = offset + (idx + 0.5) * period
    a = np.clip(np.arcsin(np.clip(gaussian_target(centers, length, d_min), 0, 1)) / np.pi,
                d_min, 0.5)
    left = np.where(idx % 2 == 0, a, 1 - a)
    # mirror partner of period k is n-1-k; give it the complementary duty
    duty = left.copy()
    right = 2 * idx > n - 1
    partner = (n - 1 - idx[right]) + 1
    duty[right] = 1 - left[partner]
    duty = np.clip(duty, d_min, d_max)

    pieces = []
    for k, d in zip(idx, duty):
        pieces += _period_domains(offset + k * period, d, period, 0.0, length)
    edges, signs = _assemble(pieces, length)
    return PolingDesign(period_um, length_mm, edges, signs, kind="apodized")


def phase_matching_amplitude(poling: PolingDesign, dk_total, origin=0.0):
    """Exact domain sum φ(Δk) = Σ s_m (e^{iΔk z_{m+1}} − e^{iΔk z_m}) / (iΔk L).

    Each term is evaluated as e^{iΔk z̄}·w·sinc(Δk w/2)/L, which is the same
    quantity without the removable singularity at Δk = 0. ``origin`` (m)
    moves the phase reference; |φ| does not depend on it.
    """
    dk = np.asarray(dk_total, dtype=float)
    shape = dk.shape
    dk = dk.ravel()
    lo, hi = poling.edges[:-1], poling.edges[1:]
    mid = 0.5 * (lo + hi) - origin
    weight = poling.signs * (hi - lo) / poling.length
    width = hi - lo

    out = np.empty(dk.size, dtype=complex)
    chunk = max(1, 2_000_000 // mid.size)
    for start in range(0, dk.size, chunk):
        k = dk[start:start + chunk, None]
        terms = np.exp(1j * k * mid) * np.sinc(k * width / (2 * np.pi))
        out[start:start + chunk] = terms @ weight
    return out.reshape(shape)


def phase_matching_fwhm(poling: PolingDesign, order=1) -> float:
    """Intensity FWHM of |φ|² in Δk (1/m) around the QPM peak."""
    k0 = order * poling.grating_wavevector
    # sinc main lobe of the full length bounds the search window
    half = 40 * np.pi / poling.length
    x = np.linspace(-half, half, 4001)
    p = np.abs(phase_matching_amplitude(poling, k0 + x)) ** 2
    return half_max_width(x, p)


def half_max_width(x, y):
    """FWHM of the lobe containing the maximum, by linear interpolation."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    i = int(np.argmax(y))
    half = y[i] / 2
    left = i
    while left > 0 and y[left] >= half:
        left -= 1
    right = i
    while right < y.size - 1 and y[right] >= half:
        right += 1
    if y[left] >= half or y[right] >= half:
        return math.inf
    xl = x[left] + (half - y[left]) * (x[left + 1] - x[left]) / (y[left + 1] - y[left])
    xr = x[right - 1] + (half - y[right - 1]) * (x[right] - x[right - 1]) / (y[right] - y[right - 1])
    return float(xr - xl)


@dataclass(frozen=True)
class DfgScan:
    wavelength_nm: np.ndarray
    intensity: np.ndarray
    fwhm_nm: float

    @property
    def intensity_db(self):
        with np.errstate(divide="ignore"):
            return 10 * np.log10(self.intensity)


def dfg_scan(poling: PolingDesign, model: DispersionModel, probe_range=16.0, points=1601,
             center_wavelength_nm=DEFAULT_SIGNAL_NM) -> DfgScan:
    """Peak-normalized DFG output versus probe wavelength.

    The pump sits at its center, so the generated signal mirrors the probe:
    ν_s = −ν_i. ``probe_range`` is either a full span in nm centered on the
    degenerate wavelength or an explicit (lo, hi) pair.
    """
    if np.ndim(probe_range) == 0:
        lo = center_wavelength_nm - probe_range / 2
        hi = center_wavelength_nm + probe_range / 2
    else:
        lo, hi = probe_range
    lam = np.linspace(lo, hi, int(points))
    nu_i = wavelength_to_detuning(lam, center_wavelength_nm)
    dk = delta_k(model, -nu_i, nu_i)
    p = np.abs(phase_matching_amplitude(poling, dk + poling.grating_wavevector)) ** 2
    p = p / p.max()
    return DfgScan(lam, p, half_max_width(lam, p))


def write_domain_table(path, poling: PolingDesign):
    with open(path, "w") as fh:
        fh.write(f"# period_um={poling.period_um!r} length_mm={poling.length_mm!r} "
                 f"kind={poling.kind}\n")
        for a, b, s in poling.domains:
            fh.write(f"{a / UM:.12f} {b / UM:.12f} {s:+d}\n")


def read_domain_table(path) -> PolingDesign:
    header = {}
    rows = []
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for item in line[1:].split():
                    key, _, value = item.partition("=")
                    header[key] = value
                continue
            parts = line.split()
            if len(parts) != 3:
                raise InvalidArgument(f"{path}:{n}: expected 'z_start_um z_end_um sign'")
            rows.append((float(parts[0]), float(parts[1]), int(parts[2])))
    if "period_um" not in header or "length_mm" not in header:
        raise InvalidArgument(f"{path}: header must give period_um and length_mm")
    if not rows:
        raise InvalidArgument(f"{path}: no domains")
    length_mm = float(header["length_mm"])
    edges = np.array([rows[0][0]] + [r[1] for r in rows]) * UM
    for (a0, b0, _), (a1, _, _) in zip(rows[:-1], rows[1:]):
        if not math.isclose(b0, a1, rel_tol=1e-12, abs_tol=1e-9):
            raise InvalidArgument(f"{path}: domains are not contiguous at {b0} um")
    edges[-1] = length_mm * MM
    signs = [r[2] for r in rows]
    return PolingDesign(float(header["period_um"]), length_mm, edges, signs,
                        kind=header.get("kind", "custom"))
