"""Seeded Monte-Carlo experiments: variable SNR, variable M, phase transitions.

Every realization draws its instance from a seed derived from
``(master_seed, sweep index, realization index)``, so tables do not depend on
the number of workers or on the algorithm being run; algorithms compared
under the same master seed see identical instances.
"""
from __future__ import annotations

import csv
import dataclasses
import enum
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import yaml

from . import metrics
from .model import PriorKind, derive_seed, make_instance, make_joint_instance
from .recover import DivergenceError, StoppingRule, amp, amp_lambda, bamp, bossamp_group, bossamp_joint

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class Family(str, enum.Enum):
    VARIABLE_SNR = "VariableSnr"
    VARIABLE_M = "VariableM"
    PHASE_TRANSITION = "PhaseTransition"


class Algorithm(str, enum.Enum):
    AMP = "Amp"
    BAMP = "Bamp"
    BOSSAMP_GROUP = "BossampGroup"
    BOSSAMP_JOINT = "BossampJoint"


def default_axis() -> List[float]:
    return [round(0.05 * i, 2) for i in range(1, 20)]


@dataclass
class ExperimentConfig:
    family: Family
    algorithm: Algorithm
    prior_kind: PriorKind = PriorKind.SPARSE_BINARY
    n: int = 1000
    k: int = 160
    m: Union[int, List[int]] = 590
    # None: 25 dB for the sweeps, noiseless for phase transitions
    snr_db: Union[None, float, List[float]] = None
    group_size: int = 1
    blocks: int = 1
    shared_matrix: bool = True
    realizations: int = 100
    master_seed: int = 0
    eps_tol: float = 1e-4
    t_max: int = 100
    sigma_x_sq: float = 1.0
    amp_lambda: Optional[float] = None
    undersampling_axis: List[float] = field(default_factory=default_axis)
    sparsity_axis: List[float] = field(default_factory=default_axis)

    def __post_init__(self):
        try:
            self.family = Family(self.family)
            self.algorithm = Algorithm(self.algorithm)
            self.prior_kind = PriorKind(self.prior_kind)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if self.snr_db is None:
            self.snr_db = math.inf if self.family is Family.PHASE_TRANSITION else 25.0
        self.snr_db = _as_float_or_list(self.snr_db, "snr_db")
        self.validate()

    @property
    def stop(self) -> StoppingRule:
        return StoppingRule(self.eps_tol, self.t_max)

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        for name in ("n", "k", "group_size", "blocks", "realizations", "t_max", "master_seed"):
            need(isinstance(getattr(self, name), int) and not isinstance(getattr(self, name), bool),
                 f"{name} must be an integer")
        need(self.n >= 1 and self.group_size >= 1, "n and group_size must be positive")
        need(self.n % self.group_size == 0, f"group_size={self.group_size} must divide n={self.n}")
        need(self.realizations >= 1, "realizations must be at least 1")
        need(self.blocks >= 1, "blocks must be at least 1")
        need(self.blocks == 1 or self.algorithm is Algorithm.BOSSAMP_JOINT, "blocks > 1 needs BossampJoint")
        need(isinstance(self.shared_matrix, bool), "shared_matrix must be true or false")
        need(self.eps_tol > 0, "eps_tol must be positive")
        need(self.t_max >= 1, "t_max must be at least 1")
        need(self.sigma_x_sq > 0, "sigma_x_sq must be positive")
        need(self.amp_lambda is None or self.amp_lambda > 0, "amp_lambda must be positive")
        need(self.prior_kind is not PriorKind.GENERIC, "Generic priors are library-only; pick a sparse prior")
        m_sweep = isinstance(self.m, list)
        snr_sweep = isinstance(self.snr_db, list)
        if self.family is Family.PHASE_TRANSITION:
            need(not m_sweep and not snr_sweep, "phase transitions sweep the grid axes, not m or snr_db")
            for name in ("undersampling_axis", "sparsity_axis"):
                axis = getattr(self, name)
                need(isinstance(axis, list) and len(axis) >= 2, f"{name} needs at least two values")
                need(all(0 < v < 1 for v in axis), f"{name} values must lie in (0, 1)")
                need(all(b > a for a, b in zip(axis, axis[1:])), f"{name} must be strictly increasing")
            ms = {_round_half_up(d * self.n) for d in self.undersampling_axis}
            need(min(ms) >= 1, "undersampling axis yields M = 0")
            need(max(ms) <= self.n, "undersampling axis yields M > N")
            return
        need(self.k >= 1 and self.k <= self.n, f"k={self.k} must lie in [1, n]")
        need(self.k % self.group_size == 0, f"k={self.k} must be a multiple of group_size={self.group_size}")
        if self.family is Family.VARIABLE_M:
            need(m_sweep and not snr_sweep, "VariableM needs a list for m and a scalar snr_db")
        else:
            need(snr_sweep and not m_sweep, "VariableSnr needs a list for snr_db and a scalar m")
        for m in self.m if m_sweep else [self.m]:
            need(isinstance(m, int) and 1 <= m, f"m={m!r} must be a positive integer")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for key in ("family", "algorithm", "prior_kind"):
            d[key] = d[key].value
        return d


def _as_float_or_list(v, name):
    def one(x):
        if isinstance(x, str) and x.strip().lower() in ("inf", "+inf", ".inf", "infinity"):
            return math.inf
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ConfigError(f"{name} entries must be numbers, got {x!r}")
        return float(x)

    return [one(x) for x in v] if isinstance(v, list) else one(v)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def load_config(path, family=None, seed=None) -> ExperimentConfig:
    """Read a YAML mapping; unknown keys are rejected."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"config {path} is not valid YAML: {e}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a key-value mapping")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys in {path}: {', '.join(unknown)}")
    if family is not None:
        if "family" in raw and Family(raw["family"]) is not Family(family):
            raise ConfigError(f"config family {raw['family']!r} does not match subcommand {Family(family).value!r}")
        raw["family"] = family
    if seed is not None:
        raw["master_seed"] = seed
    for key in ("family", "algorithm"):
        if key not in raw:
            raise ConfigError(f"config {path} is missing {key!r}")
    try:
        return ExperimentConfig(**raw)
    except TypeError as e:
        raise ConfigError(str(e)) from None


# --------------------------------------------------------------------------
# one realization
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Point:
    """One sweep point: problem sizes plus the index used for seeding."""

    key: tuple
    m: int
    k: int
    snr_db: float


def _solve(config: ExperimentConfig, point: Point, seed: int):
    """(nmse, fanmse, iterations) of one realization, or None if it diverged."""
    try:
        if config.algorithm is Algorithm.BOSSAMP_JOINT:
            inst = make_joint_instance(
                point.m, config.n, point.k, config.blocks, config.prior_kind, point.snr_db, seed,
                group_size=config.group_size, shared_matrix=config.shared_matrix, sigma_x_sq=config.sigma_x_sq,
            )
            groups = inst.groups if config.group_size > 1 else None
            res = bossamp_joint(inst.ys, list(inst.matrices), inst.prior, config.stop, groups=groups)
            x_hat = np.column_stack([r.x_hat for r in res])
            return metrics.nmse(inst.x_true, x_hat), metrics.fanmse(inst.x_true, x_hat), res[0].iterations
        inst = make_instance(
            point.m, config.n, point.k, config.group_size, config.prior_kind, point.snr_db, seed,
            sigma_x_sq=config.sigma_x_sq,
        )
        if config.algorithm is Algorithm.AMP:
            lam = config.amp_lambda if config.amp_lambda is not None else amp_lambda(point.k)
            res = amp(inst.y, inst.a, lam, config.stop)
        elif config.algorithm is Algorithm.BAMP:
            res = bamp(inst.y, inst.a, inst.prior, config.stop)
        else:
            res = bossamp_group(inst.y, inst.a, inst.prior, inst.groups, config.stop)
    except DivergenceError as e:
        log.warning("realization with seed %d at %s diverged: %s", seed, point, e)
        return None
    return metrics.nmse(inst.x_true, res.x_hat), metrics.fanmse(inst.x_true, res.x_hat), res.iterations


def _task(args):
    config, point, r = args
    seed = derive_seed(config.master_seed, *point.key, r)
    return seed, _solve(config, point, seed)


def _run_points(config: ExperimentConfig, points: Sequence[Point], threads: int):
    tasks = [(config, p, r) for p in points for r in range(config.realizations)]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (8 * threads))))
    else:
        out = [_task(t) for t in tasks]
    per_point = []
    for i in range(len(points)):
        per_point.append(out[i * config.realizations:(i + 1) * config.realizations])
    return per_point


@dataclass
class CellStats:
    mean_nmse: float
    mean_fanmse: float
    mean_iterations: float
    avg_success: float
    realizations: int
    diverged: int
    seeds: List[int]


def _aggregate(results) -> CellStats:
    seeds = [s for s, _ in results]
    ok = [v for _, v in results if v is not None]
    diverged = len(results) - len(ok)
    if not ok:
        nan = float("nan")
        return CellStats(nan, nan, nan, 0.0, len(results), diverged, seeds)
    nm = np.array([v[0] for v in ok])
    fa = np.array([v[1] for v in ok])
    it = np.array([v[2] for v in ok], dtype=float)
    succ = metrics.average_success(metrics.success_indicator(v) for v in nm)
    return CellStats(float(nm.mean()), float(fa.mean()), float(it.mean()), succ, len(results), diverged, seeds)


def _row(config, stats: CellStats, **sweep):
    row = dict(sweep)
    row.update(
        mean_nmse_db=metrics.to_db(stats.mean_nmse),
        mean_fanmse_db=metrics.to_db(stats.mean_fanmse),
        mean_iterations=stats.mean_iterations,
        avg_success=stats.avg_success,
        realizations=stats.realizations,
        master_seed=config.master_seed,
    )
    return row


@dataclass
class ResultTable:
    columns: List[str]
    rows: List[dict]
    diverged: int = 0


TABLE_COLUMNS = ["mean_nmse_db", "mean_fanmse_db", "mean_iterations", "avg_success", "realizations", "master_seed"]


def run_experiment(config: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Variable-SNR or variable-M sweep; one row per sweep point."""
    if config.family is Family.PHASE_TRANSITION:
        grid = run_phase_transition(config, threads)
        return grid.table()
    if config.family is Family.VARIABLE_M:
        points = [Point((i,), m, config.k, config.snr_db) for i, m in enumerate(config.m)]
        sweep_col = "m"
    else:
        points = [Point((i,), config.m, config.k, s) for i, s in enumerate(config.snr_db)]
        sweep_col = "snr_db"
    rows, diverged = [], 0
    for p, res in zip(points, _run_points(config, points, threads)):
        stats = _aggregate(res)
        diverged += stats.diverged
        rows.append(_row(config, stats, **{sweep_col: p.m if sweep_col == "m" else p.snr_db}))
    return ResultTable([sweep_col] + TABLE_COLUMNS, rows, diverged)


# --------------------------------------------------------------------------
# phase transitions
# --------------------------------------------------------------------------


def cell_sizes(n: int, undersampling: float, sparsity: float, group_size: int):
    """(M, K) of a grid cell; K is rounded down to whole groups, at least one."""
    m = _round_half_up(undersampling * n)
    k = _round_half_up(sparsity * m)
    k = max(group_size, (k // group_size) * group_size)
    return m, min(k, n)


@dataclass
class ExperimentGrid:
    undersampling_axis: List[float]
    sparsity_axis: List[float]
    cells: List[List[CellStats]]  # [sparsity index][undersampling index]
    sizes: List[List[tuple]]
    master_seed: int

    @property
    def success(self) -> np.ndarray:
        return np.array([[c.avg_success for c in row] for row in self.cells])

    @property
    def diverged(self) -> int:
        return sum(c.diverged for row in self.cells for c in row)

    def contour(self):
        return metrics.contour_half(self.success, self.undersampling_axis, self.sparsity_axis)

    def area(self) -> float:
        return metrics.success_area(self.success, self.undersampling_axis, self.sparsity_axis)

    def table(self) -> ResultTable:
        rows = []
        for i, rho in enumerate(self.sparsity_axis):
            for j, delta in enumerate(self.undersampling_axis):
                m, k = self.sizes[i][j]
                rows.append(_row(self, self.cells[i][j], undersampling=delta, sparsity=rho, m=m, k=k))
        return ResultTable(["undersampling", "sparsity", "m", "k"] + TABLE_COLUMNS, rows, self.diverged)


def run_phase_transition(config: ExperimentConfig, threads: int = 1) -> ExperimentGrid:
    if config.family is not Family.PHASE_TRANSITION:
        raise ConfigError("run_phase_transition needs a PhaseTransition config")
    points, sizes = [], []
    for i, rho in enumerate(config.sparsity_axis):
        row = []
        for j, delta in enumerate(config.undersampling_axis):
            m, k = cell_sizes(config.n, delta, rho, config.group_size)
            row.append((m, k))
            points.append(Point((j, i), m, k, config.snr_db))
        sizes.append(row)
    stats = [_aggregate(r) for r in _run_points(config, points, threads)]
    nx = len(config.undersampling_axis)
    cells = [stats[i * nx:(i + 1) * nx] for i in range(len(config.sparsity_axis))]
    return ExperimentGrid(list(config.undersampling_axis), list(config.sparsity_axis), cells, sizes, config.master_seed)


# --------------------------------------------------------------------------
# CSV output
# --------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    s = f"{v:.10f}"
    return "0.0000000000" if s == "-0.0000000000" else s


def write_csv(table: ResultTable, path) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(table.columns)
            for row in table.rows:
                w.writerow([_fmt(row[c]) for c in table.columns])
    except OSError as e:
        raise OSError(f"cannot write results to {path}: {e}") from e
    return path


def write_contour_csv(polylines, path) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["polyline", "point", "undersampling", "sparsity"])
            for p, line in enumerate(polylines):
                for q, (x, y) in enumerate(line):
                    w.writerow([p, q, _fmt(x), _fmt(y)])
    except OSError as e:
        raise OSError(f"cannot write contour to {path}: {e}") from e
    return path


def contour_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.stem + "_contour" + (out.suffix or ".csv"))
