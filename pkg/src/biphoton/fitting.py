"""Unweighted least-squares Gaussian fits seeded from moments."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import FitError

SIGMA_TO_FWHM = 2 * math.sqrt(2 * math.log(2))

_FIT_OPTS = dict(method="trf", xtol=1e-10, ftol=1e-15, gtol=1e-15, max_nfev=200)


@dataclass(frozen=True)
class Gaussian1D:
    amplitude: float
    center: float
    sigma: float
    offset: float = 0.0
    residual_rms: float = 0.0
    converged: bool = True

    @property
    def fwhm(self) -> float:
        return SIGMA_TO_FWHM * abs(self.sigma)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.amplitude * np.exp(-0.5 * ((x - self.center) / self.sigma) ** 2) + self.offset


def moments_1d(x, y):
    """Center and standard deviation of a non-negative profile."""
    x = np.asarray(x, dtype=float)
    w = np.clip(np.asarray(y, dtype=float), 0, None)
    total = w.sum()
    if total <= 0:
        raise FitError("profile has no positive weight")
    mean = float((w * x).sum() / total)
    var = float((w * (x - mean) ** 2).sum() / total)
    return mean, math.sqrt(max(var, 0.0))


def fit_gaussian_1d(x, y, offset=False) -> Gaussian1D:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mean, std = moments_1d(x, y)
    if std == 0:
        std = abs(x[1] - x[0]) if x.size > 1 else 1.0
    fallback = Gaussian1D(float(y.max()), mean, std, 0.0, math.nan, converged=False)

    def model(p):
        g = p[0] * np.exp(-0.5 * ((x - p[1]) / p[2]) ** 2)
        return g + p[3] if offset else g

    p0 = [y.max(), mean, std] + ([0.0] if offset else [])
    try:
        res = optimize.least_squares(lambda p: model(p) - y, p0, **_FIT_OPTS)
    except (ValueError, FloatingPointError) as exc:
        raise FitError(f"gaussian fit failed: {exc}", fallback) from exc
    if res.status <= 0 or not np.all(np.isfinite(res.x)):
        raise FitError("gaussian fit did not converge", fallback)
    p = res.x
    rms = float(np.sqrt(np.mean(res.fun**2)))
    return Gaussian1D(float(p[0]), float(p[1]), float(abs(p[2])),
                      float(p[3]) if offset else 0.0, rms)


@dataclass(frozen=True)
class Gaussian2D:
    """Rotated 2D Gaussian; ``sigma_a`` lies along the direction ``angle``."""

    amplitude: float
    x0: float
    y0: float
    sigma_a: float
    sigma_b: float
    angle: float
    residual_rms: float = 0.0

    def mahalanobis2(self, x, y):
        dx, dy = np.asarray(x) - self.x0, np.asarray(y) - self.y0
        ca, sa = math.cos(self.angle), math.sin(self.angle)
        u = dx * ca + dy * sa
        v = -dx * sa + dy * ca
        return (u / self.sigma_a) ** 2 + (v / self.sigma_b) ** 2

    def __call__(self, x, y):
        return self.amplitude * np.exp(-0.5 * self.mahalanobis2(x, y))

    @property
    def fwhm(self):
        return SIGMA_TO_FWHM * self.sigma_a, SIGMA_TO_FWHM * self.sigma_b


def fit_gaussian_2d(x, y, z) -> Gaussian2D:
    """Fit a rotated 2D Gaussian to samples z at coordinates (x, y)."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    w = np.clip(z, 0, None)
    total = w.sum()
    if total <= 0:
        raise FitError("surface has no positive weight")
    mx, my = (w * x).sum() / total, (w * y).sum() / total
    cov = np.array([[(w * (x - mx) ** 2).sum(), (w * (x - mx) * (y - my)).sum()],
                    [(w * (x - mx) * (y - my)).sum(), (w * (y - my) ** 2).sum()]]) / total
    evals, evecs = np.linalg.eigh(cov)
    evals = np.clip(evals, 1e-12, None)
    angle0 = math.atan2(evecs[1, 1], evecs[0, 1])
    p0 = [z.max(), mx, my, math.sqrt(evals[1]), math.sqrt(evals[0]), angle0]

    def resid(p):
        g = Gaussian2D(p[0], p[1], p[2], p[3], p[4], p[5])
        return g(x, y) - z

    try:
        res = optimize.least_squares(resid, p0, **_FIT_OPTS)
    except (ValueError, FloatingPointError) as exc:
        raise FitError(f"2D gaussian fit failed: {exc}") from exc
    if res.status <= 0 or not np.all(np.isfinite(res.x)):
        raise FitError("2D gaussian fit did not converge")
    p = res.x
    return Gaussian2D(float(p[0]), float(p[1]), float(p[2]), float(abs(p[3])),
                      float(abs(p[4])), float(p[5]), float(np.sqrt(np.mean(res.fun**2))))
