"""Reference computations that do not share code paths with the package.

The binary oracle sums Bayes' rule over the two atoms; the Gaussian oracle
integrates the nonzero branch with 64-node Gauss-Hermite quadrature.
"""
import math

import numpy as np

GH_T, GH_W = np.polynomial.hermite.hermgauss(64)


def _log_gauss(x, mean, var):
    return -0.5 * math.log(2 * math.pi * var) - (x - mean) ** 2 / (2 * var)


def binary_posterior(u, beta, gamma):
    """(E[x|u], Var[x|u]) for P(x=0)=gamma, P(x=1)=1-gamma."""
    l0 = math.log(gamma) + _log_gauss(u, 0.0, beta)
    l1 = math.log1p(-gamma) + _log_gauss(u, 1.0, beta)
    top = max(l0, l1)
    z = math.exp(l0 - top) + math.exp(l1 - top)
    p1, p0 = math.exp(l1 - top) / z, math.exp(l0 - top) / z
    return p1, p1 * p0


def bg_posterior(u, beta, gamma, sigma_x_sq):
    """(E[x|u], Var[x|u]) under gamma*delta + (1-gamma)*N(0, sigma_x_sq).

    The nonzero branch integral over x is done by Gauss-Hermite with the
    narrower of the two Gaussian factors as the weight.
    """
    if beta <= sigma_x_sq:
        xs = u + math.sqrt(2 * beta) * GH_T
        logf = np.array([_log_gauss(x, 0.0, sigma_x_sq) for x in xs])
    else:
        xs = math.sqrt(2 * sigma_x_sq) * GH_T
        logf = np.array([_log_gauss(u, x, beta) for x in xs])
    lw = np.log(GH_W / math.sqrt(math.pi)) + logf
    s = lw.max()
    w = np.exp(lw - s)
    z0 = w.sum()
    mean_nz = (w * xs).sum() / z0
    var_nz = (w * (xs - mean_nz) ** 2).sum() / z0
    # log evidence of each branch
    l_nz = math.log1p(-gamma) + s + math.log(z0)
    l_z = math.log(gamma) + _log_gauss(u, 0.0, beta)
    top = max(l_nz, l_z)
    z = math.exp(l_nz - top) + math.exp(l_z - top)
    p, q = math.exp(l_nz - top) / z, math.exp(l_z - top) / z
    mean = p * mean_nz
    var = p * var_nz + p * q * mean_nz**2
    return mean, var


def central_difference(f, u, h):
    return (f(u + h) - f(u - h)) / (2 * h)


def binary_fd_step(u, beta):
    """Step for differencing f_binary: it varies on a length scale of beta."""
    return min(1e-6 * max(1.0, abs(u)), 1e-3 * beta)


def fd_roundoff(h, scale=1.0):
    """Bound on the rounding error of a central difference of an O(scale) function."""
    return 100 * np.finfo(float).eps * scale / h
