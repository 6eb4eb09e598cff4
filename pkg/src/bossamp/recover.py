"""AMP, BAMP and BOSSAMP solvers plus the extrinsic group/prior updates.

The solvers carry the prior as L-values ``log(gamma / (1 - gamma))``. The
group update always starts from the initial prior L-values and adds the
innovation L-values of the current iteration, summed over each index's
groupmates (and, for jointly sparse signals, over the other blocks).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import expit

from . import denoise as dn
from .model import EPS_GAMMA, GroupStructure, PriorKind, SensingMatrix, SignalPrior, clamp_gamma

L_MAX = 500.0
LO_MIN = float(dn.log_odds(EPS_GAMMA))
LO_MAX = float(dn.log_odds(1.0 - EPS_GAMMA))


class DivergenceError(ArithmeticError):
    def __init__(self, iteration: int, what: str):
        super().__init__(f"non-finite {what} at iteration {iteration}")
        self.iteration = iteration
        self.what = what


@dataclass(frozen=True)
class StoppingRule:
    eps_tol: float = 1e-4
    t_max: int = 100

    def __post_init__(self):
        if not self.eps_tol > 0:
            raise ValueError(f"eps_tol must be positive, got {self.eps_tol}")
        if self.t_max < 1:
            raise ValueError(f"t_max must be at least 1, got {self.t_max}")


@dataclass
class RecoveryState:
    t: int
    x: np.ndarray
    r: np.ndarray
    u: np.ndarray
    beta: float
    gamma: Optional[np.ndarray] = None
    lbar: Optional[np.ndarray] = None
    nmse: Optional[float] = None


@dataclass
class RecoveryResult:
    x_hat: np.ndarray
    iterations: int
    converged: bool
    trajectory: Optional[List[RecoveryState]] = field(default=None, repr=False)


def amp_lambda(k: int) -> float:
    """NMSE-minimising threshold heuristic, tuned for N = 1000."""
    return 2.678 * float(k) ** -0.181


def _matrix(a) -> np.ndarray:
    return a.entries if isinstance(a, SensingMatrix) else np.asarray(a, dtype=float)


def _check_dims(y: np.ndarray, a: np.ndarray):
    if a.ndim != 2 or y.ndim != 1 or y.shape[0] != a.shape[0]:
        raise ValueError(f"measurements of shape {y.shape} do not match matrix of shape {a.shape}")


def _beta_floor(y: np.ndarray) -> float:
    return 1e-12 * (float(y @ y) / y.shape[0] + 1.0)


def _stop_test(x_new, x_old, t, stop: StoppingRule):
    """(finished, converged) for the do-while condition after iteration t."""
    ref = np.linalg.norm(x_old)
    if ref == 0.0 and t >= 2:
        converged = False
    else:
        converged = not (np.linalg.norm(x_new - x_old) > stop.eps_tol * ref)
    return converged or t >= stop.t_max, converged


def _nmse(x_true, x):
    if x_true is None:
        return None
    return float(np.sum((x_true - x) ** 2) / np.sum(x_true**2))


def _require_finite(t, **arrays):
    for name, v in arrays.items():
        if not np.all(np.isfinite(v)):
            raise DivergenceError(t, name)


# --------------------------------------------------------------------------
# AMP
# --------------------------------------------------------------------------


def amp(y, a, lam: float, stop: StoppingRule = StoppingRule(), *, x_true=None, record=False, onsager=True):
    """AMP with soft thresholding, threshold ``lam * ||r|| / sqrt(M)``."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    A = _matrix(a)
    y = np.asarray(y, dtype=float)
    _check_dims(y, A)
    m, n = A.shape
    x = np.zeros(n)
    r = y.copy()
    trajectory = [] if record else None
    t = 0
    while True:
        t += 1
        tau = lam / np.sqrt(m) * np.linalg.norm(r)
        u = x + A.T @ r
        x_new = dn.soft_threshold(u, tau)
        b = np.count_nonzero(x_new) / m if onsager else 0.0
        r = y - A @ x_new + b * r
        _require_finite(t, x=x_new, r=r)
        if record:
            trajectory.append(RecoveryState(t, x_new.copy(), r.copy(), u, tau**2, nmse=_nmse(x_true, x_new)))
        finished, converged = _stop_test(x_new, x, t, stop)
        x = x_new
        if finished:
            return RecoveryResult(x, t, converged, trajectory)


# --------------------------------------------------------------------------
# innovation L-values, responsibilities, group and prior updates
# --------------------------------------------------------------------------


def innovation_l_binary(u, beta):
    return (1.0 - 2.0 * np.asarray(u, dtype=float)) / (2.0 * beta)


def innovation_l_gauss(u, beta, sigma_x_sq):
    u = np.asarray(u, dtype=float)
    return 0.5 * np.log((beta + sigma_x_sq) / beta) - 0.5 * u * u * sigma_x_sq / (beta * (beta + sigma_x_sq))


def innovation_l_generic(u, beta, nonzero_density):
    """log N(u|0,beta) - log (f_a * N(0,beta))(u)."""
    _, _, log_conv = dn.generic_moments(u, beta, 0.0, nonzero_density)
    return dn.log_normal(u, beta) - log_conv


def innovation_l(prior: SignalPrior, u, beta):
    if prior.kind is PriorKind.SPARSE_BINARY:
        return innovation_l_binary(u, beta)
    if prior.kind is PriorKind.SPARSE_GAUSSIAN:
        return innovation_l_gauss(u, beta, prior.sigma_x_sq)
    return innovation_l_generic(u, beta, prior.nonzero_density)


def responsibilities(u, beta, sigma_x_sq, gamma_prev):
    """E-step: posterior probability that the zero component explains u."""
    g = clamp_gamma(gamma_prev)
    zero = np.log(g) + dn.log_normal(u, beta)
    nonzero = np.log1p(-g) + dn.log_normal(u, beta + sigma_x_sq)
    return np.exp(zero - np.logaddexp(zero, nonzero))


def _extrinsic(lbar0, innov, groups: GroupStructure):
    return lbar0 + groups.extrinsic_sum(innov)


def group_update_binary(u, beta, gamma0, groups: GroupStructure):
    return _extrinsic(dn.log_odds(gamma0), innovation_l_binary(u, beta), groups)


def group_update_gauss(u, beta, gamma0, sigma_x_sq, groups: GroupStructure):
    return _extrinsic(dn.log_odds(gamma0), innovation_l_gauss(u, beta, sigma_x_sq), groups)


def group_update_generic(u, beta, gamma0, prior: SignalPrior, groups: GroupStructure):
    return _extrinsic(dn.log_odds(gamma0), innovation_l(prior, u, beta), groups)


def group_update(prior: SignalPrior, u, beta, groups: GroupStructure, gamma0=None):
    gamma0 = prior.gamma0 if gamma0 is None else gamma0
    return _extrinsic(dn.log_odds(gamma0), innovation_l(prior, u, beta), groups)


def _other_blocks(values: np.ndarray) -> np.ndarray:
    """Column b of the result is the sum of all columns except b."""
    out = np.zeros_like(values)
    nb = values.shape[1]
    for b in range(nb):
        for l in range(nb):
            if l != b:
                out[:, b] += values[:, l]
    return out


def _block_innovations(prior: SignalPrior, u, betas):
    u = np.asarray(u, dtype=float)
    return np.column_stack([innovation_l(prior, u[:, b], betas[b]) for b in range(u.shape[1])])


def group_update_joint(u, betas, gamma0, prior: SignalPrior):
    """Collective update: innovation of the same index in every other block."""
    return dn.log_odds(gamma0) + _other_blocks(_block_innovations(prior, u, betas))


def group_update_joint_group(u, betas, gamma0, groups: GroupStructure, prior: SignalPrior):
    """Group and joint structure: groupmates i != n in blocks j != b."""
    innov = _block_innovations(prior, u, betas)
    return dn.log_odds(gamma0) + _other_blocks(groups.extrinsic_sum(innov))


def prior_update(lbar):
    lbar = np.clip(np.asarray(lbar, dtype=float), -L_MAX, L_MAX)
    return clamp_gamma(expit(lbar))


def _to_prior_lo(lbar):
    """Solver-side prior update: L-values of the clamped zero probabilities."""
    return np.clip(lbar, LO_MIN, LO_MAX)


# --------------------------------------------------------------------------
# BAMP / BOSSAMP
# --------------------------------------------------------------------------


def _denoise(prior: SignalPrior, u, beta, lo, variance, want_innovation):
    """(F, F', innovation L-values or None) at the decoupled measurements."""
    if prior.kind is PriorKind.SPARSE_BINARY:
        x = dn.f_binary_lo(u, beta, lo)
        fp = dn.g_binary_lo(u, beta, lo) / beta
        innov = innovation_l_binary(u, beta) if want_innovation else None
    elif prior.kind is PriorKind.SPARSE_GAUSSIAN:
        x = dn.f_gauss_lo(u, beta, lo, prior.sigma_x_sq)
        fp = dn.fprime_gauss_lo(u, beta, lo, prior.sigma_x_sq, variance)
        innov = innovation_l_gauss(u, beta, prior.sigma_x_sq) if want_innovation else None
    else:
        x, var, log_conv = dn.generic_moments(u, beta, lo, prior.nonzero_density)
        fp = var / beta
        innov = dn.log_normal(u, beta) - log_conv if want_innovation else None
    return x, fp, innov


def _run(y, a, prior: SignalPrior, stop: StoppingRule, groups, x_true, record, onsager, variance):
    A = _matrix(a)
    y = np.asarray(y, dtype=float)
    _check_dims(y, A)
    m, n = A.shape
    if prior.n != n:
        raise ValueError(f"prior has {prior.n} entries, matrix has {n} columns")
    if groups is not None and groups.n != n:
        raise ValueError(f"group structure covers {groups.n} indices, matrix has {n} columns")
    lo0 = dn.log_odds(prior.gamma0)
    lo = lo0
    floor = _beta_floor(y)
    x = np.zeros(n)
    r = y.copy()
    trajectory = [] if record else None
    t = 0
    while True:
        t += 1
        u = x + A.T @ r
        beta = max(float(r @ r) / m, floor)
        x_new, fp, innov = _denoise(prior, u, beta, lo, variance, groups is not None)
        coef = fp.sum() / m if onsager else 0.0
        r = y - A @ x_new + coef * r
        lbar = None
        if groups is not None:
            lbar = _extrinsic(lo0, innov, groups)
            lo = _to_prior_lo(lbar)
        _require_finite(t, x=x_new, r=r, u=u, lbar=lo)
        if record:
            trajectory.append(
                RecoveryState(t, x_new.copy(), r.copy(), u, beta, expit(lo), lbar, _nmse(x_true, x_new))
            )
        finished, converged = _stop_test(x_new, x, t, stop)
        x = x_new
        if finished:
            return RecoveryResult(x, t, converged, trajectory)


def bamp(
    y, a, prior: SignalPrior, stop: StoppingRule = StoppingRule(), *, x_true=None, record=False, onsager=True,
    variance="posterior",
):
    """Bayesian AMP with the prior held fixed at ``prior.gamma0``."""
    return _run(y, a, prior, stop, None, x_true, record, onsager, variance)


def bossamp_group(
    y, a, prior: SignalPrior, groups: GroupStructure, stop: StoppingRule = StoppingRule(), *, x_true=None,
    record=False, onsager=True, variance="posterior",
):
    """BAMP plus an extrinsic group update and prior update every iteration."""
    return _run(y, a, prior, stop, groups, x_true, record, onsager, variance)


def bossamp_joint(
    ys, a, prior: SignalPrior, stop: StoppingRule = StoppingRule(), *, groups: Optional[GroupStructure] = None,
    x_true=None, record=False, onsager=True, variance="posterior",
) -> List[RecoveryResult]:
    """Jointly sparse recovery of B blocks ``y_b = A_b x_b + w_b``.

    ``ys`` is an (M, B) array or a list of B vectors; ``a`` is one shared
    matrix or a list of B matrices. ``prior.gamma0`` has length N (shared by
    all blocks) or shape (N, B). With ``groups`` each block is also group
    sparse and the update sums over groupmates in the other blocks.
    """
    ys = np.column_stack([np.asarray(v, dtype=float) for v in ys]) if isinstance(ys, (list, tuple)) else np.asarray(ys, dtype=float)
    if ys.ndim == 1:
        ys = ys[:, None]
    nb = ys.shape[1]
    mats = [_matrix(m) for m in a] if isinstance(a, (list, tuple)) else [_matrix(a)] * nb
    if len(mats) != nb:
        raise ValueError(f"{len(mats)} matrices given for {nb} blocks")
    m, n = mats[0].shape
    for A in mats:
        if A.shape != (m, n):
            raise ValueError(f"block matrices differ in shape: {A.shape} vs {(m, n)}")
    if ys.shape[0] != m:
        raise ValueError(f"measurements have {ys.shape[0]} rows, matrices have {m}")
    gamma0 = np.asarray(prior.gamma0)
    if gamma0.ndim == 1:
        if gamma0.size != n:
            raise ValueError(f"prior has {gamma0.size} entries, matrices have {n} columns")
        gamma0 = np.repeat(gamma0[:, None], nb, axis=1)
    elif gamma0.shape != (n, nb):
        raise ValueError(f"prior zero probabilities have shape {gamma0.shape}, expected {(n, nb)}")
    if groups is not None and groups.n != n:
        raise ValueError(f"group structure covers {groups.n} indices, matrices have {n} columns")
    if x_true is not None:
        x_true = np.asarray(x_true, dtype=float).reshape(n, nb)

    lo0 = dn.log_odds(gamma0)
    lo = lo0
    floors = [_beta_floor(ys[:, b]) for b in range(nb)]
    X = np.zeros((n, nb))
    R = ys.copy()
    U = np.zeros((n, nb))
    betas = np.zeros(nb)
    traj = [[] for _ in range(nb)] if record else None
    t = 0
    while True:
        t += 1
        X_new = np.empty_like(X)
        innov = np.empty_like(X)
        for b in range(nb):
            A = mats[b]
            r = R[:, b]
            U[:, b] = X[:, b] + A.T @ r
            betas[b] = max(float(r @ r) / m, floors[b])
            xb, fp, innov[:, b] = _denoise(prior, U[:, b], betas[b], lo[:, b], variance, True)
            coef = fp.sum() / m if onsager else 0.0
            R[:, b] = ys[:, b] - A @ xb + coef * r
            X_new[:, b] = xb
        extr = groups.extrinsic_sum(innov) if groups is not None else innov
        lbar = lo0 + _other_blocks(extr)
        lo = _to_prior_lo(lbar)
        _require_finite(t, x=X_new, r=R, u=U, lbar=lo)
        if record:
            for b in range(nb):
                traj[b].append(
                    RecoveryState(
                        t, X_new[:, b].copy(), R[:, b].copy(), U[:, b].copy(), float(betas[b]),
                        expit(lo[:, b]), lbar[:, b].copy(),
                        _nmse(None if x_true is None else x_true[:, b], X_new[:, b]),
                    )
                )
        finished, converged = _stop_test(X_new.ravel(order="F"), X.ravel(order="F"), t, stop)
        X = X_new
        if finished:
            return [RecoveryResult(X[:, b].copy(), t, converged, traj[b] if record else None) for b in range(nb)]
