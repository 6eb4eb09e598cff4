"""Scalar denoisers for the decoupled problem ``u = x + N(0, beta)``.

Every function works entry-wise on arrays. Zero probabilities ``gamma`` are
clamped to ``[EPS_GAMMA, 1 - EPS_GAMMA]``; the ``*_lo`` variants take the
prior L-value ``log(gamma / (1 - gamma))`` directly, which is what the
solvers carry between iterations.
"""
from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate
from scipy.special import expit, logsumexp

from .model import EPS_GAMMA, ContinuousDensity, PointMasses, clamp_gamma

LOG_2PI = math.log(2.0 * math.pi)
# largest |L-value| a clamped gamma can express
L_GAMMA_MAX = math.log((1.0 - EPS_GAMMA) / EPS_GAMMA)


class QuadratureError(ArithmeticError):
    pass


def log_odds(gamma):
    g = clamp_gamma(gamma)
    return np.log(g) - np.log1p(-g)


def log_normal(u, var):
    """log N(u | 0, var)."""
    u = np.asarray(u, dtype=float)
    return -0.5 * (LOG_2PI + np.log(var)) - 0.5 * u * u / var


def soft_threshold(u, tau):
    u = np.asarray(u, dtype=float)
    return np.sign(u) * np.maximum(np.abs(u) - tau, 0.0)


# -- sparse binary ---------------------------------------------------------


def _binary_exponent(u, beta, lo):
    return (1.0 - 2.0 * np.asarray(u, dtype=float)) / (2.0 * beta) + lo


def _expit_neg(z):
    # expit(-z) that keeps subnormal results instead of flushing to zero
    return np.exp(-np.logaddexp(0.0, z))


def f_binary_lo(u, beta, lo):
    return _expit_neg(_binary_exponent(u, beta, lo))


def g_binary_lo(u, beta, lo):
    z = _binary_exponent(u, beta, lo)
    # F - F^2 without cancellation near F = 1
    return _expit_neg(z) * _expit_neg(-z)


def f_binary(u, beta, gamma):
    """Posterior mean of x in {0, 1} with P(x = 0) = gamma."""
    return f_binary_lo(u, beta, log_odds(gamma))


def g_binary(u, beta, gamma):
    return g_binary_lo(u, beta, log_odds(gamma))


def fprime_binary(u, beta, gamma):
    return g_binary(u, beta, gamma) / beta


# -- sparse Gaussian (Bernoulli-Gaussian) ----------------------------------


def _gauss_parts(u, beta, lo, sigma_x_sq):
    """Linear gain q/(1+q), log m and M for q = sigma_x^2 / beta."""
    u = np.asarray(u, dtype=float)
    q = sigma_x_sq / beta
    gain = sigma_x_sq / (sigma_x_sq + beta)
    with np.errstate(over="ignore"):
        log_m = lo + 0.5 * np.log1p(q) - (u * u) * gain / (2.0 * beta)
    big_m = gain * expit(-log_m)
    return u, gain, log_m, big_m


def f_gauss_lo(u, beta, lo, sigma_x_sq):
    u, _, _, big_m = _gauss_parts(u, beta, lo, sigma_x_sq)
    return u * big_m


def g_gauss_lo(u, beta, lo, sigma_x_sq):
    """``beta * M + m``, the closed form as it is usually printed.

    This is not the posterior variance; see :func:`gauss_posterior_variance_lo`.
    """
    _, _, log_m, big_m = _gauss_parts(u, beta, lo, sigma_x_sq)
    with np.errstate(over="ignore"):
        return beta * big_m + np.exp(log_m)


def gauss_posterior_variance_lo(u, beta, lo, sigma_x_sq):
    """Var[x | u] = beta*M + m * (u*M)^2, written without overflow."""
    u, gain, log_m, big_m = _gauss_parts(u, beta, lo, sigma_x_sq)
    with np.errstate(over="ignore", invalid="ignore"):
        spread = np.where(np.isfinite(u * u), (u * gain) ** 2 * expit(log_m) * expit(-log_m), 0.0)
    return beta * big_m + spread


def f_gauss(u, beta, gamma, sigma_x_sq):
    """Posterior mean under gamma*delta(x) + (1-gamma)*N(x | 0, sigma_x_sq)."""
    return f_gauss_lo(u, beta, log_odds(gamma), sigma_x_sq)


def g_gauss(u, beta, gamma, sigma_x_sq):
    return g_gauss_lo(u, beta, log_odds(gamma), sigma_x_sq)


def gauss_posterior_variance(u, beta, gamma, sigma_x_sq):
    return gauss_posterior_variance_lo(u, beta, log_odds(gamma), sigma_x_sq)


def fprime_gauss_lo(u, beta, lo, sigma_x_sq, variance="posterior"):
    if variance == "posterior":
        return gauss_posterior_variance_lo(u, beta, lo, sigma_x_sq) / beta
    if variance == "printed":
        return g_gauss_lo(u, beta, lo, sigma_x_sq) / beta
    raise ValueError(f"unknown variance form {variance!r}")


def fprime_gauss(u, beta, gamma, sigma_x_sq, variance="posterior"):
    """dF/du = G/beta.

    ``variance="posterior"`` (default) uses the true conditional variance,
    which is the exact derivative of :func:`f_gauss`. ``"printed"`` uses
    :func:`g_gauss`.
    """
    return fprime_gauss_lo(u, beta, log_odds(gamma), sigma_x_sq, variance)


# -- arbitrary nonzero distribution ----------------------------------------


def _atoms_moments(u, beta, lo, density: PointMasses):
    u = np.atleast_1d(np.asarray(u, dtype=float))
    lo = np.broadcast_to(lo, u.shape)
    # log-likelihood of each atom, shape (len(u), n_atoms)
    ll = log_normal(u[:, None] - density.atoms[None, :], beta) + np.log(density.weights)[None, :]
    log_conv = logsumexp(ll, axis=1)
    # posterior over {0, atoms}: zero carries log-odds lo relative to the nonzero part
    log_zero = lo + log_normal(u, beta)
    logs = np.column_stack([log_zero, ll])
    post = np.exp(logs - logsumexp(logs, axis=1, keepdims=True))
    values = np.concatenate([[0.0], density.atoms])
    mean = post @ values
    var = np.sum(post * (values[None, :] - mean[:, None]) ** 2, axis=1)
    return mean, var, log_conv


def _quad(fun, lo_v, hi_v, points, what, u, beta):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info = integrate.quad(
            fun, lo_v, hi_v, points=points, epsabs=1e-13, epsrel=1e-11, limit=400, full_output=1
        )[:3]
    if not np.isfinite(val) or err > 1e-9 * max(1.0, abs(val)):
        raise QuadratureError(
            f"{what} did not converge at u={u!r}, beta={beta!r}: value={val!r}, "
            f"error estimate={err!r}, subintervals={info.get('last')}"
        )
    return val


def _continuous_moments_scalar(u, beta, density: ContinuousDensity):
    lo_s, hi_s = density.support
    sd = math.sqrt(beta)
    grid = np.concatenate([np.linspace(lo_s, hi_s, 4001), u + sd * np.linspace(-12.0, 12.0, 241)])
    grid = np.unique(np.clip(grid, lo_s, hi_s))
    h = np.asarray(density.logpdf(grid), dtype=float) + log_normal(u - grid, beta)
    if not np.any(np.isfinite(h)):
        raise QuadratureError(f"integrand vanishes everywhere at u={u!r}, beta={beta!r}")
    peak = int(np.nanargmax(h))
    shift = h[peak]
    inside = np.flatnonzero(h > shift - 60.0)
    a_v = grid[max(inside[0] - 1, 0)]
    b_v = grid[min(inside[-1] + 1, grid.size - 1)]
    v_peak = grid[peak]
    points = [p for p in (v_peak, u) if a_v < p < b_v] or None

    def weight(v):
        return math.exp(float(density.logpdf(v)) + float(log_normal(u - v, beta)) - shift)

    z0 = _quad(weight, a_v, b_v, points, "normalisation", u, beta)
    mu = _quad(lambda v: v * weight(v), a_v, b_v, points, "first moment", u, beta) / z0
    cvar = _quad(lambda v: (v - mu) ** 2 * weight(v), a_v, b_v, points, "second moment", u, beta) / z0
    return mu, cvar, shift + math.log(z0)


def generic_moments(u, beta, lo, density):
    """Posterior mean, posterior variance and log of the convolved density.

    The convolved density is ``(f_a * N(0, beta))(u)``, the marginal of ``u``
    given a nonzero entry.
    """
    if isinstance(density, PointMasses):
        return _atoms_moments(u, beta, lo, density)
    if not isinstance(density, ContinuousDensity):
        raise TypeError(f"unsupported nonzero density {type(density).__name__}")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    lo = np.broadcast_to(lo, u.shape)
    mean = np.empty_like(u)
    var = np.empty_like(u)
    log_conv = np.empty_like(u)
    for i, ui in enumerate(u):
        mu, cvar, lc = _continuous_moments_scalar(float(ui), float(beta), density)
        # posterior probability of the nonzero branch
        p = float(expit(lc - log_normal(ui, beta) - lo[i]))
        mean[i] = p * mu
        var[i] = p * cvar + p * (1.0 - p) * mu * mu
        log_conv[i] = lc
    return mean, var, log_conv


def f_generic(u, beta, gamma, nonzero_density):
    """Posterior mean under gamma*delta(x) + (1-gamma)*f_a(x)."""
    return generic_moments(u, beta, log_odds(gamma), nonzero_density)[0]


def g_generic(u, beta, gamma, nonzero_density):
    return generic_moments(u, beta, log_odds(gamma), nonzero_density)[1]


def fprime_generic(u, beta, gamma, nonzero_density):
    return g_generic(u, beta, gamma, nonzero_density) / beta
