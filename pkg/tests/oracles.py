"""Independent reference computations used to check the package."""
import math

import numpy as np
from scipy.constants import c as C_LIGHT
from scipy.special import ndtr


def double_gaussian_purity(sigma_plus, sigma_minus):
    """Closed-form purity of exp(-ν+²/4σ+²)·exp(-ν-²/4σ-²)."""
    return 2 * sigma_plus * sigma_minus / (sigma_plus**2 + sigma_minus**2)


def direct_domain_sum(edges, signs, length, dk):
    """φ from the textbook difference of exponentials, valid for dk ≠ 0."""
    dk = np.atleast_1d(np.asarray(dk, dtype=float))[:, None]
    e = np.exp(1j * dk * np.asarray(edges)[None, :])
    return ((e[:, 1:] - e[:, :-1]) @ np.asarray(signs, float)) / (1j * dk[:, 0] * length)


def uniform_qpm_amplitude(x, length):
    """First-order coefficient 2/π times the sinc envelope of a 50:50 grating."""
    return (2 / np.pi) * np.abs(np.sinc(x * length / (2 * np.pi)))


def freq_fwhm_hz(fwhm_nm, center_nm):
    return C_LIGHT * fwhm_nm * 1e-9 / (center_nm * 1e-9) ** 2


def hom_bruteforce(f, nu, cell, tau_s):
    """Loop form of the HOM coincidence probability."""
    n = len(nu)
    total = 0.0 + 0.0j
    for j in range(n):
        for k in range(n):
            total += f[j, k] * np.conj(f[k, j]) * np.exp(1j * (nu[k] - nu[j]) * tau_s)
    return 0.5 * (1 - (total * cell).real)


def beamsplitter_coincidence(r, distinguishable):
    """Two-photon coincidence probability from the splitter unitary.

    Indistinguishable photons add amplitudes (permanent); distinguishable
    photons add probabilities.
    """
    t = 1 - r
    u = np.array([[math.sqrt(t), 1j * math.sqrt(r)], [1j * math.sqrt(r), math.sqrt(t)]])
    a = u[0, 0] * u[1, 1]
    b = u[0, 1] * u[1, 0]
    if distinguishable:
        return abs(a) ** 2 + abs(b) ** 2
    return abs(a + b) ** 2


def mc_component_visibility(pairs, leakage, r, seed):
    """Track pairs through a leaky PBS and a splitter; return 1 − C(0)/C(∞)."""
    rng = np.random.default_rng(seed)
    leaked = (rng.random((pairs, 2)) < leakage).any(axis=1)
    p_ind = beamsplitter_coincidence(r, False)
    p_dis = beamsplitter_coincidence(r, True)
    c0 = (rng.random(pairs) < np.where(leaked, p_dis, p_ind)).sum()
    cinf = (rng.random(pairs) < p_dis).sum()
    return 1 - c0 / cinf


def uniform_gauss_cdf(x, a, b, sigma):
    """CDF at x of U(a, b) convolved with N(0, σ²)."""
    def g(y):
        return y * ndtr(y / sigma) + sigma * np.exp(-0.5 * (y / sigma) ** 2) / math.sqrt(2 * math.pi)
    if sigma == 0:
        return np.clip((x - a) / (b - a), 0, 1)
    return (g(x - a) - g(x - b)) / (b - a)


def interval_probs(a, b, sigma, edges, period, folds=2):
    """P(folded time in [edges[l], edges[l+1])) for times ~ U(a,b) ⊕ N(0,σ²)."""
    a = np.asarray(a)[:, None]
    b = np.asarray(b)[:, None]
    out = np.zeros((a.shape[0], len(edges) - 1))
    for m in range(-folds, folds + 1):
        cdf = uniform_gauss_cdf(np.asarray(edges)[None, :] + m * period, a, b, sigma)
        out += np.diff(cdf, axis=1)
    return out
