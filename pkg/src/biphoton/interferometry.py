"""Hong-Ou-Mandel interference and single-photon field autocorrelation."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .errors import FitError, InvalidArgument, RangeError
from .jsa import JointSpectralAmplitude, bandwidth_from_duration
from .poling import half_max_width

PS = 1e-12
RANGE_FACTOR = 3.0


@dataclass
class HomScan:
    """Coincidence probability (or counts) versus relative delay in ps."""

    delays_ps: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    baseline: float = 0.5
    kind: str = "probability"

    def __post_init__(self):
        self.delays_ps = np.asarray(self.delays_ps, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.delays_ps.shape != self.values.shape or self.delays_ps.ndim != 1:
            raise InvalidArgument("delays and values must be 1D arrays of equal length")
        if not self.baseline > 0:
            raise InvalidArgument("baseline must be positive")


def _diagonal_overlap(jsa: JointSpectralAmplitude):
    """g_d = Σ_{k−j=d} f[j,k]·conj(f[k,j])·Δν² for d = −(N−1)…N−1."""
    f = jsa.values
    n = f.shape[0]
    prod = (f * np.conj(f.T)).ravel() * jsa.cell
    d = (np.arange(n)[None, :] - np.arange(n)[:, None]).ravel() + n - 1
    g = (np.bincount(d, prod.real, 2 * n - 1) + 1j * np.bincount(d, prod.imag, 2 * n - 1))
    return np.arange(-(n - 1), n), g


def hom_scan(jsa: JointSpectralAmplitude, delays_ps) -> HomScan:
    """P(τ) = ½[1 − Re Σ f(ν_s,ν_i)·f*(ν_i,ν_s)·e^{i(ν_i−ν_s)τ}Δν²]."""
    if not jsa.normalized:
        raise InvalidArgument("JSA must be normalized")
    tau = np.atleast_1d(np.asarray(delays_ps, dtype=float))
    offsets, g = _diagonal_overlap(jsa)
    step = jsa.grid.step
    out = np.empty(tau.size)
    chunk = 4096
    for s in range(0, tau.size, chunk):
        phase = np.exp(1j * np.outer(tau[s:s + chunk] * PS, offsets * step))
        out[s:s + chunk] = 0.5 * (1 - (phase @ g).real)
    return HomScan(tau, out, 0.5)


@dataclass(frozen=True)
class DipFit:
    baseline: float
    visibility: float
    center_ps: float
    sigma_ps: float
    covariance: np.ndarray = field(repr=False)
    residual_rms: float
    dof: int

    @property
    def fwhm_ps(self) -> float:
        return 2 * math.sqrt(2 * math.log(2)) * abs(self.sigma_ps)

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        return self.baseline * (1 - self.visibility
                                * np.exp(-((tau - self.center_ps) ** 2) / (2 * self.sigma_ps**2)))


def fit_dip(delays_ps, values) -> DipFit:
    """Least-squares fit of baseline·(1 − V·exp(−(τ−τ0)²/2σ²))."""
    x = np.asarray(delays_ps, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.size < 5:
        raise FitError("need at least five points to fit a dip")
    b0 = float(np.median(np.concatenate([y[:max(1, x.size // 8)], y[-max(1, x.size // 8):]])))
    depth = np.clip(b0 - y, 0, None)
    i = int(np.argmin(y))
    v0 = float(np.clip(depth[i] / b0, 0.05, 1.0)) if b0 > 0 else 0.5
    if depth.sum() > 0:
        c0 = float((depth * x).sum() / depth.sum())
        w = half_max_width(x, depth)
        s0 = w / 2.3548 if math.isfinite(w) and w > 0 else (x[-1] - x[0]) / 10
    else:
        c0, s0 = float(x[i]), (x[-1] - x[0]) / 10
    p0 = [b0, v0, c0, s0]

    def resid(p):
        return p[0] * (1 - p[1] * np.exp(-((x - p[2]) ** 2) / (2 * p[3] ** 2))) - y

    try:
        res = optimize.least_squares(resid, p0, method="trf", xtol=1e-10, ftol=1e-15,
                                     gtol=1e-15, max_nfev=200)
    except (ValueError, FloatingPointError) as exc:
        raise FitError(f"dip fit failed: {exc}") from exc
    if res.status <= 0 or not np.all(np.isfinite(res.x)):
        raise FitError("dip fit did not converge")
    dof = max(x.size - 4, 1)
    s2 = float(res.fun @ res.fun) / dof
    jac = res.jac
    try:
        cov = np.linalg.inv(jac.T @ jac) * s2
    except np.linalg.LinAlgError:
        cov = np.full((4, 4), np.nan)
    b, v, c, s = res.x
    return DipFit(float(b), float(v), float(c), float(abs(s)), cov,
                  float(np.sqrt(np.mean(res.fun**2))), dof)


@dataclass(frozen=True)
class VisibilityReport:
    v_raw: float
    v_fit: float
    v_fit_ci: tuple
    fwhm_ps: float
    center_ps: float = 0.0
    residual_rms: float = 0.0
    fit: DipFit | None = field(default=None, repr=False)

    @property
    def v_fit_halfwidth(self) -> float:
        return 0.5 * (self.v_fit_ci[1] - self.v_fit_ci[0])


def visibility(scan: HomScan, confidence=0.95) -> VisibilityReport:
    """Raw (N_max − N_min)/(N_max + N_min) and fitted dip visibility.

    The fitted value comes with a confidence interval from the linearized
    covariance at the optimum and a Student-t quantile.
    """
    y = scan.values
    hi, lo = float(y.max()), float(y.min())
    if hi <= 0 or hi - lo <= 1e-12 * hi:
        return VisibilityReport(0.0, 0.0, (0.0, 0.0), math.inf, math.nan, 0.0, None)
    v_raw = (hi - lo) / (hi + lo)
    fit = fit_dip(scan.delays_ps, y)
    reach = min(scan.delays_ps.max() - fit.center_ps, fit.center_ps - scan.delays_ps.min())
    if reach < RANGE_FACTOR * fit.fwhm_ps:
        raise RangeError(f"scan reaches {reach:.3g} ps from the dip center; need "
                         f"{RANGE_FACTOR}x the {fit.fwhm_ps:.3g} ps dip FWHM")
    half = stats.t.ppf(0.5 + confidence / 2, fit.dof) * math.sqrt(max(fit.covariance[1, 1], 0.0))
    v = float(np.clip(fit.visibility, 0.0, 1.0))
    ci = (float(np.clip(fit.visibility - half, 0, 1)), float(np.clip(fit.visibility + half, 0, 1)))
    return VisibilityReport(v_raw, v, ci, fit.fwhm_ps, fit.center_ps,
                            fit.residual_rms / fit.baseline, fit)


def model_dip_depth(jsa: JointSpectralAmplitude, span_ps=None, points=2001) -> float:
    """1 − P_min/baseline of the model scan."""
    if span_ps is None:
        span_ps = 40 / (jsa.grid.step * 1e12)  # comfortably inside the alias period
    tau = np.linspace(-span_ps, span_ps, points)
    scan = hom_scan(jsa, tau)
    i = int(np.argmin(scan.values))
    lo = max(i - 2, 0)
    fine = np.linspace(tau[lo], tau[min(i + 2, tau.size - 1)], 201)
    return float(1 - hom_scan(jsa, fine).values.min() / 0.5)


def component_factor(pbs_leakage, split_ratio) -> float:
    """Visibility factor of a leaky PBS and an unbalanced beam splitter.

    Unbalanced splitting leaves a residual (T − R)² against R² + T² for
    distinguishable photons, i.e. a factor 2RT/(R² + T²). Polarization
    leakage makes a fraction 2·leakage of the pairs distinguishable.
    """
    if not 0 <= pbs_leakage < 0.5:
        raise InvalidArgument("PBS leakage must lie in [0, 0.5)")
    if not 0 < split_ratio < 1:
        raise InvalidArgument("split ratio must lie in (0, 1)")
    r, t = split_ratio, 1 - split_ratio
    return 2 * r * t / (r * r + t * t) * (1 - 2 * pbs_leakage)


def imperfect_visibility(jsa: JointSpectralAmplitude | None, pbs_leakage, split_ratio) -> float:
    """Model dip visibility reduced by component imperfections.

    With ``jsa=None`` the source is taken as perfectly indistinguishable.
    """
    v_model = 1.0 if jsa is None else model_dip_depth(jsa)
    return v_model * component_factor(pbs_leakage, split_ratio)


@dataclass(frozen=True)
class Autocorrelation:
    delays_ps: np.ndarray = field(repr=False)
    envelope: np.ndarray = field(repr=False)
    envelope_fwhm_ps: float
    duration_ps: float
    bandwidth_nm: float


def field_autocorrelation(spectrum, nu, center_nm=1582.0, points=4001) -> Autocorrelation:
    """First-order coherence envelope |g1(τ)| of a single-photon spectrum.

    ``spectrum`` is the power spectrum on the angular detuning axis ``nu``
    (rad/s, uniform). The envelope of a transform-limited Gaussian pulse is
    twice as long as its intensity FWHM, so ``duration_ps`` is half the
    envelope FWHM and ``bandwidth_nm`` follows from the time-bandwidth
    product.
    """
    s = np.asarray(spectrum, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if s.shape != nu.shape or s.ndim != 1:
        raise InvalidArgument("spectrum and axis must be 1D arrays of equal length")
    if np.any(s < 0) or not s.sum() > 0:
        raise InvalidArgument("spectrum must be non-negative and nonzero")
    nz = np.flatnonzero(s)
    if nz.size == 1:
        tau = np.linspace(-1.0, 1.0, points)
        return Autocorrelation(tau, np.ones_like(tau), math.inf, math.inf, 0.0)
    mean = (s * nu).sum() / s.sum()
    rms = math.sqrt((s * (nu - mean) ** 2).sum() / s.sum())
    tau_max = 8.0 / rms
    tau = np.linspace(-tau_max, tau_max, points)
    w = s / s.sum()
    env = np.empty(tau.size)
    chunk = 1024
    for a in range(0, tau.size, chunk):
        env[a:a + chunk] = np.abs(np.exp(1j * np.outer(tau[a:a + chunk], nu - mean)) @ w)
    fwhm = half_max_width(tau, env) / PS
    duration = fwhm / 2
    bandwidth = bandwidth_from_duration(duration, center_nm) if math.isfinite(duration) else 0.0
    return Autocorrelation(tau / PS, env, fwhm, duration, bandwidth)


def measurement_scan(scan: HomScan, pairs_per_delay, seed, visibility_factor=1.0) -> HomScan:
    """Poisson-sampled coincidence counts for a model scan.

    ``visibility_factor`` scales the dip depth, e.g. by component_factor().
    The mean count far from the dip is pairs_per_delay/2.
    """
    if not pairs_per_delay > 0:
        raise InvalidArgument("pairs per delay must be positive")
    if not 0 <= visibility_factor <= 1:
        raise InvalidArgument("visibility factor must lie in [0, 1]")
    rng = np.random.Generator(np.random.PCG64(seed))
    prob = 0.5 - visibility_factor * (0.5 - scan.values / scan.baseline * 0.5)
    mean = pairs_per_delay * prob
    counts = rng.poisson(mean).astype(float)
    return HomScan(scan.delays_ps, counts, 0.5 * pairs_per_delay, kind="counts")


def simulate_components(pairs, pbs_leakage, split_ratio, seed, source_visibility=1.0):
    """Monte Carlo estimate of the component-limited dip visibility.

    Each photon independently leaks into the wrong polarization, which makes
    its pair distinguishable. Indistinguishable pairs leave the splitter in
    coincidence with probability (T − R)², distinguishable ones with R² + T².
    A fraction 1 − source_visibility of pairs is distinguishable from the
    start. Returns 1 − C(0)/C(∞).
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    r, t = split_ratio, 1 - split_ratio
    leak = (rng.random(pairs) < pbs_leakage) | (rng.random(pairs) < pbs_leakage)
    dist = leak | (rng.random(pairs) >= source_visibility)
    p_coinc = np.where(dist, r * r + t * t, (t - r) ** 2)
    c0 = int((rng.random(pairs) < p_coinc).sum())
    c_inf = int((rng.random(pairs) < r * r + t * t).sum())
    return 1 - c0 / c_inf


def write_hom_csv(path, scan: HomScan):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delay_ps", scan.kind])
        for x, y in zip(scan.delays_ps, scan.values):
            w.writerow([f"{x:.6f}", f"{y:.12e}"])
