"""Problem instances: sensing matrices, structured sparse signals, noise.

All randomness flows from integer seeds through ``numpy.random.SeedSequence``
so that every (matrix, signal, noise) draw can be regenerated independently
of execution order.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import sparse

# zero-probability clamp; keeps every L-value finite
EPS_GAMMA = 1e-12

ROLE_MATRIX = 0
ROLE_SIGNAL = 1
ROLE_NOISE = 2


class DegenerateSignalError(ValueError):
    """Raised when a quantity normalised by the signal energy is undefined."""


def rng_for(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``seed`` and a spawn key (role, index, ...)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *key: int) -> int:
    """Deterministic 64-bit child seed of ``seed`` for the given key."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def clamp_gamma(gamma):
    return np.clip(np.asarray(gamma, dtype=float), EPS_GAMMA, 1.0 - EPS_GAMMA)


# --------------------------------------------------------------------------
# sensing matrix and groups
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SensingMatrix:
    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError(f"sensing matrix must be a non-empty 2-D array, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("sensing matrix has non-finite entries")
        object.__setattr__(self, "entries", a)

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self):
        return self.entries.shape


def gen_sensing_matrix(m: int, n: int, seed: int) -> SensingMatrix:
    """i.i.d. standard normal entries, columns scaled to unit l2 norm."""
    if m < 1 or n < 1:
        raise ValueError(f"matrix dimensions must be positive, got m={m}, n={n}")
    a = rng_for(seed, ROLE_MATRIX).standard_normal((m, n))
    a /= np.linalg.norm(a, axis=0)
    return SensingMatrix(a)


@dataclass(frozen=True)
class GroupStructure:
    """Index groups over ``range(n)`` (0-based). Groups may overlap."""

    groups: tuple
    n: int

    def __post_init__(self):
        groups = tuple(np.asarray(g, dtype=np.int64) for g in self.groups)
        covered = np.zeros(self.n, dtype=bool)
        for g in groups:
            if g.size == 0:
                raise ValueError("empty group")
            if np.unique(g).size != g.size:
                raise ValueError(f"duplicate indices in group {g.tolist()}")
            if g.min() < 0 or g.max() >= self.n:
                raise ValueError(f"group indices out of range [0, {self.n})")
            covered[g] = True
        if not covered.all():
            missing = np.flatnonzero(~covered)[:5].tolist()
            raise ValueError(f"indices not covered by any group, e.g. {missing}")
        object.__setattr__(self, "groups", groups)

    def __hash__(self):
        return id(self)

    @property
    def count(self) -> int:
        return len(self.groups)

    @cached_property
    def is_partition(self) -> bool:
        return sum(g.size for g in self.groups) == self.n

    @cached_property
    def mates(self) -> sparse.csr_matrix:
        """N x N 0/1 matrix with ``[n, l] = 1`` iff l != n share a group.

        An index in several groups sees the union of its groupmates, each
        counted once.
        """
        rows, cols = [], []
        for g in self.groups:
            if g.size < 2:
                continue
            r, c = np.meshgrid(g, g, indexing="ij")
            keep = r != c
            rows.append(r[keep])
            cols.append(c[keep])
        if not rows:
            return sparse.csr_matrix((self.n, self.n))
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        s = sparse.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(self.n, self.n)).tocsr()
        s.sum_duplicates()
        s.data[:] = 1.0
        return s

    @cached_property
    def has_mates(self) -> bool:
        return self.mates.nnz > 0

    def extrinsic_sum(self, values: np.ndarray) -> np.ndarray:
        """Sum of ``values`` over each index's groupmates (own entry excluded).

        ``values`` may be a vector (N,) or a matrix (N, B); rows are indices.
        """
        if not self.has_mates:
            return np.zeros_like(values, dtype=float)
        return np.asarray(self.mates @ values)


def gen_group_structure(n: int, group_size: int) -> GroupStructure:
    if group_size < 1 or n < 1 or n % group_size:
        raise ValueError(f"group_size={group_size} must divide n={n}")
    return GroupStructure(tuple(np.arange(n).reshape(-1, group_size)), n)


def singleton_groups(n: int) -> GroupStructure:
    return gen_group_structure(n, 1)


# --------------------------------------------------------------------------
# priors
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PointMasses:
    """Discrete distribution of the nonzero entries."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.atleast_1d(np.asarray(self.atoms, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if atoms.shape != w.shape or np.any(w < 0) or w.sum() <= 0:
            raise ValueError("point masses need matching atoms and non-negative weights")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w / w.sum())

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.choice(self.atoms, size=size, p=self.weights)


@dataclass(frozen=True)
class ContinuousDensity:
    """Density of the nonzero entries given by its log-pdf.

    ``support`` bounds the region carrying essentially all the mass; the
    quadrature never looks outside it.
    """

    logpdf: Callable[[np.ndarray], np.ndarray]
    support: tuple
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.sampler is None:
            raise ValueError("this density has no sampler; signals cannot be generated from it")
        return np.asarray(self.sampler(rng, size), dtype=float)


def point_mass(value: float = 1.0) -> PointMasses:
    return PointMasses(np.array([value]), np.array([1.0]))


def normal_density(var: float) -> ContinuousDensity:
    sd = math.sqrt(var)
    norm_const = -0.5 * math.log(2.0 * math.pi * var)
    return ContinuousDensity(
        logpdf=lambda v: norm_const - 0.5 * np.square(v) / var,
        support=(-40.0 * sd, 40.0 * sd),
        sampler=lambda rng, size: rng.normal(0.0, sd, size),
    )


class PriorKind(str, enum.Enum):
    SPARSE_BINARY = "SparseBinary"
    SPARSE_GAUSSIAN = "SparseGaussian"
    GENERIC = "Generic"


@dataclass(frozen=True)
class SignalPrior:
    """gamma * delta(x) + (1 - gamma) * (nonzero distribution), per entry."""

    kind: PriorKind
    gamma0: np.ndarray
    sigma_x_sq: Optional[float] = None
    nonzero_density: object = None

    def __post_init__(self):
        kind = PriorKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "gamma0", clamp_gamma(np.atleast_1d(self.gamma0)))
        if kind is PriorKind.SPARSE_GAUSSIAN:
            if self.sigma_x_sq is None or not self.sigma_x_sq > 0:
                raise ValueError("SparseGaussian prior needs sigma_x_sq > 0")
        if kind is PriorKind.GENERIC and self.nonzero_density is None:
            raise ValueError("Generic prior needs a nonzero_density")

    @property
    def n(self) -> int:
        return self.gamma0.size

    def with_gamma0(self, gamma0) -> "SignalPrior":
        return SignalPrior(self.kind, gamma0, self.sigma_x_sq, self.nonzero_density)

    def sample_nonzero(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind is PriorKind.SPARSE_BINARY:
            return np.ones(size)
        if self.kind is PriorKind.SPARSE_GAUSSIAN:
            return rng.normal(0.0, math.sqrt(self.sigma_x_sq), size)
        return self.nonzero_density.sample(rng, size)


def binary_prior(n: int, k: int) -> SignalPrior:
    return SignalPrior(PriorKind.SPARSE_BINARY, np.full(n, 1.0 - k / n))


def gaussian_prior(n: int, k: int, sigma_x_sq: float = 1.0) -> SignalPrior:
    return SignalPrior(PriorKind.SPARSE_GAUSSIAN, np.full(n, 1.0 - k / n), sigma_x_sq)


def make_prior(kind, n: int, k: int, sigma_x_sq: float = 1.0, nonzero_density=None) -> SignalPrior:
    kind = PriorKind(kind)
    gamma0 = np.full(n, 1.0 - k / n)
    if kind is PriorKind.SPARSE_BINARY:
        return SignalPrior(kind, gamma0)
    if kind is PriorKind.SPARSE_GAUSSIAN:
        return SignalPrior(kind, gamma0, sigma_x_sq)
    return SignalPrior(kind, gamma0, nonzero_density=nonzero_density)


# --------------------------------------------------------------------------
# signals and noise
# --------------------------------------------------------------------------


def _equal_group_size(groups: GroupStructure) -> int:
    sizes = {g.size for g in groups.groups}
    if len(sizes) != 1 or not groups.is_partition:
        raise ValueError("signal generation needs non-overlapping, equally-sized groups")
    return sizes.pop()


def gen_signal(groups: GroupStructure, k: int, prior: SignalPrior, seed: int) -> np.ndarray:
    """K-sparse signal whose support is a union of uniformly chosen groups."""
    gs = _equal_group_size(groups)
    if k < 0 or k > groups.n or k % gs:
        raise ValueError(f"k={k} must lie in [0, {groups.n}] and be a multiple of the group size {gs}")
    rng = rng_for(seed, ROLE_SIGNAL)
    x = np.zeros(groups.n)
    if k == 0:
        return x
    active = rng.choice(groups.count, size=k // gs, replace=False)
    support = np.concatenate([groups.groups[g] for g in np.sort(active)])
    x[support] = prior.sample_nonzero(rng, support.size)
    return x


def snr_from_db(snr_db: float) -> float:
    return 10.0 ** (snr_db / 10.0)


def calibrate_noise(a: SensingMatrix, x: np.ndarray, snr: float) -> float:
    """Noise variance that realises ``snr = ||Ax||^2 / (M sigma_w^2)``."""
    if not snr > 0:
        raise ValueError(f"snr must be positive, got {snr}")
    energy = float(np.sum((a.entries @ x) ** 2))
    if energy <= 0:
        raise DegenerateSignalError("cannot calibrate noise for a signal with ||Ax|| = 0")
    if math.isinf(snr):
        return 0.0
    return energy / (a.m * snr)


def measured_snr(a: SensingMatrix, x: np.ndarray, noise_var: float) -> float:
    return float(np.sum((a.entries @ x) ** 2)) / (a.m * noise_var)


@dataclass(frozen=True)
class ProblemInstance:
    a: SensingMatrix
    x_true: np.ndarray
    y: np.ndarray
    noise_var: float
    groups: GroupStructure
    prior: SignalPrior
    seed: int

    @property
    def k(self) -> int:
        return int(np.count_nonzero(self.x_true))


def _noise(seed: int, size, noise_var: float) -> np.ndarray:
    if noise_var == 0:
        return np.zeros(size)
    return rng_for(seed, ROLE_NOISE).normal(0.0, math.sqrt(noise_var), size)


def make_instance(
    m: int,
    n: int,
    k: int,
    group_size: int,
    prior_kind,
    snr_db: float,
    seed: int,
    sigma_x_sq: float = 1.0,
    nonzero_density=None,
) -> ProblemInstance:
    """Matrix, signal and noise for one realization; ``snr_db=inf`` is noiseless."""
    groups = gen_group_structure(n, group_size)
    prior = make_prior(prior_kind, n, k, sigma_x_sq, nonzero_density)
    a = gen_sensing_matrix(m, n, seed)
    x = gen_signal(groups, k, prior, seed)
    noise_var = 0.0 if math.isinf(snr_db) and snr_db > 0 else calibrate_noise(a, x, snr_from_db(snr_db))
    y = a.entries @ x + _noise(seed, m, noise_var)
    return ProblemInstance(a, x, y, noise_var, groups, prior, int(seed))


@dataclass(frozen=True)
class JointInstance:
    """B jointly sparse signals (columns of ``x_true``) with a common support."""

    matrices: tuple
    x_true: np.ndarray
    ys: np.ndarray
    noise_vars: np.ndarray
    groups: GroupStructure
    prior: SignalPrior
    seed: int

    @property
    def blocks(self) -> int:
        return self.x_true.shape[1]


def make_joint_instance(
    m: int,
    n: int,
    k: int,
    blocks: int,
    prior_kind,
    snr_db: float,
    seed: int,
    group_size: int = 1,
    shared_matrix: bool = True,
    sigma_x_sq: float = 1.0,
) -> JointInstance:
    """Blocks share one support (itself group-structured when group_size > 1).

    The SNR is calibrated per block.
    """
    if blocks < 1:
        raise ValueError("need at least one block")
    groups = gen_group_structure(n, group_size)
    prior = make_prior(prior_kind, n, k, sigma_x_sq)
    support_x = gen_signal(groups, k, binary_prior(n, k), seed)
    support = np.flatnonzero(support_x)
    x = np.zeros((n, blocks))
    mats, ys, nvs = [], [], []
    for b in range(blocks):
        sub = derive_seed(seed, b)
        a = gen_sensing_matrix(m, n, seed if shared_matrix else sub)
        x[support, b] = prior.sample_nonzero(rng_for(sub, ROLE_SIGNAL), support.size)
        nv = 0.0 if math.isinf(snr_db) and snr_db > 0 else calibrate_noise(a, x[:, b], snr_from_db(snr_db))
        mats.append(a)
        ys.append(a.entries @ x[:, b] + _noise(sub, m, nv))
        nvs.append(nv)
    return JointInstance(tuple(mats), x, np.column_stack(ys), np.array(nvs), groups, prior, int(seed))
