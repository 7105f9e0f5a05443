#!/usr/bin/env python3
"""
ALS and MALS identification of tensor-network Volterra models

ALS keeps the ranks fixed and updates one core at a time; after each solve the
core is orthogonalized by a thin QR and the triangular factor is pushed into
the next core. MALS solves for two neighbouring cores at once (a super-core)
and splits the result with a truncated SVD, which lets the ranks adapt.

Both sweep left-to-right, then right-to-left, and so on. One pass in one
direction is a sweep; the relative residual is checked after every sweep.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from errors import InvalidArguments, ShapeMismatch, UnderdeterminedError
from regressor import (
    PREHISTORY_MODES,
    PartialProducts,
    TimeSeriesDataset,
    reduced_matrix,
    reduced_pair_matrix,
    regression_data,
)
from tn_model import (
    DEFAULT_ORTH_TOL,
    VolterraModel,
    orthogonality_deviation,
    simulate_rows,
)
from utils import MACHINE_EPS, relative_residual

logger = logging.getLogger('vttn.solvers')

LEFT_TO_RIGHT = 'left_to_right'
RIGHT_TO_LEFT = 'right_to_left'
DIRECTIONS = (LEFT_TO_RIGHT, RIGHT_TO_LEFT)

ALGORITHMS = ('als', 'mals')
SVD_TOL_KINDS = ('machine', 'absolute', 'relative', 'residual')


@dataclass(frozen=True)
class SvdTolPolicy:
    """
    Rank rule for splitting a super-core

    machine:  tau = eps * s_1 * max(rows, cols)
    absolute: tau = value
    relative: tau = value * s_1
    residual: smallest r_k whose truncation moves the fitted outputs by at
              most value * ||y||; needs the reduced matrix of the super-core
              (without it, discarded singular-value energy <= value * ||s||)
    """

    kind: str = 'machine'
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in SVD_TOL_KINDS:
            raise InvalidArguments(f"unknown SVD tolerance policy {self.kind!r}")
        if self.value < 0:
            raise InvalidArguments(f"SVD tolerance must be >= 0, got {self.value}")

    @classmethod
    def machine(cls) -> 'SvdTolPolicy':
        return cls('machine', 0.0)

    @classmethod
    def absolute(cls, tau: float) -> 'SvdTolPolicy':
        return cls('absolute', float(tau))

    @classmethod
    def relative(cls, fraction: float) -> 'SvdTolPolicy':
        return cls('relative', float(fraction))

    @classmethod
    def residual(cls, fraction: float) -> 'SvdTolPolicy':
        return cls('residual', float(fraction))

    def threshold(self, s: np.ndarray, shape: Tuple[int, int]) -> float:
        if self.kind == 'residual':
            raise InvalidArguments("the residual policy picks a rank, not a singular-value threshold")
        s1 = float(s[0]) if s.size else 0.0
        if self.kind == 'machine':
            return MACHINE_EPS * s1 * max(shape)
        if self.kind == 'absolute':
            return self.value
        return self.value * s1


@dataclass
class SolverConfig:
    """Identification settings; ranks are r_1..r_{d-1} (ALS only)"""

    algorithm: str = 'mals'
    ranks: Optional[List[int]] = None
    residual_tol: float = 1e-4
    max_sweeps: int = 50
    svd_tol_policy: SvdTolPolicy = field(default_factory=SvdTolPolicy.machine)
    max_rank: int = 50
    ls_cutoff: Optional[float] = None
    seed: int = 0
    orth_tol: float = DEFAULT_ORTH_TOL
    record_solves: bool = True
    prehistory: str = 'zero'
    allow_underdetermined: bool = False

    def __post_init__(self):
        self.algorithm = str(self.algorithm).lower()
        if self.algorithm not in ALGORITHMS:
            raise InvalidArguments(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not self.residual_tol > 0:
            raise InvalidArguments(f"residual_tol must be > 0, got {self.residual_tol}")
        if self.max_sweeps < 1:
            raise InvalidArguments(f"max_sweeps must be >= 1, got {self.max_sweeps}")
        if self.max_rank < 1:
            raise InvalidArguments(f"max_rank must be >= 1, got {self.max_rank}")
        if self.ls_cutoff is not None and self.ls_cutoff < 0:
            raise InvalidArguments(f"ls_cutoff must be >= 0, got {self.ls_cutoff}")
        if self.ranks is not None:
            self.ranks = [int(r) for r in self.ranks]
            if any(r < 1 for r in self.ranks):
                raise InvalidArguments(f"ranks must all be >= 1, got {self.ranks}")
        if self.prehistory not in PREHISTORY_MODES:
            raise InvalidArguments(f"unknown prehistory mode {self.prehistory!r}")


@dataclass
class SolverReport:
    """What happened during identify()"""

    algorithm: str
    residual_trace: List[float] = field(default_factory=list)
    final_ranks: List[int] = field(default_factory=list)
    sweeps_used: int = 0
    converged: bool = False
    orthogonality_audit: List[float] = field(default_factory=list)
    solve_trace: List[float] = field(default_factory=list)
    truncation_trace: List[float] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def final_residual(self) -> float:
        return self.residual_trace[-1] if self.residual_trace else float('nan')

    @property
    def max_rank(self) -> int:
        inner = self.final_ranks[1:-1]
        return max(inner) if inner else 1

    def to_dict(self) -> dict:
        return {
            'algorithm': self.algorithm,
            'converged': self.converged,
            'sweeps_used': self.sweeps_used,
            'final_residual': self.final_residual,
            'final_ranks': list(self.final_ranks),
            'max_rank': self.max_rank,
            'residual_trace': list(self.residual_trace),
            'orthogonality_audit': list(self.orthogonality_audit),
            'seconds': self.seconds,
        }


def rank_chain(l: int, n: int, d: int, ranks: Optional[Sequence[int]]) -> List[int]:
    """
    Full chain r_0 = l, r_1, ..., r_d = 1 from inner ranks (or a full chain)

    Each core must admit the orthogonal forms used by the sweeps:
    r_k <= r_{k-1} n for k < d and r_{k-1} <= n r_k for k > 1.
    """
    if d < 1:
        raise InvalidArguments(f"degree d must be >= 1, got {d}")
    ranks = [] if ranks is None else [int(r) for r in ranks]
    if len(ranks) == d + 1:
        if ranks[0] != l or ranks[-1] != 1:
            raise InvalidArguments(f"a full rank chain must start at l={l} and end at 1, got {ranks}")
        chain = ranks
    elif len(ranks) == d - 1:
        chain = [l] + ranks + [1]
    else:
        raise InvalidArguments(f"degree {d} needs {d - 1} ranks, got {len(ranks)}")
    if any(r < 1 for r in chain):
        raise InvalidArguments(f"ranks must all be >= 1, got {chain}")
    for k in range(1, d):
        if chain[k] > chain[k - 1] * n:
            raise InvalidArguments(
                f"rank r_{k}={chain[k]} exceeds r_{k - 1}*(pM+1)={chain[k - 1] * n}"
            )
    for k in range(2, d + 1):
        if chain[k - 1] > n * chain[k]:
            raise InvalidArguments(
                f"rank r_{k - 1}={chain[k - 1]} exceeds (pM+1)*r_{k}={n * chain[k]}"
            )
    return chain


def _svd(a: np.ndarray):
    try:
        return scipy.linalg.svd(a, full_matrices=False, lapack_driver='gesdd')
    except np.linalg.LinAlgError:
        logger.debug("gesdd did not converge, retrying with gesvd")
        return scipy.linalg.svd(a, full_matrices=False, lapack_driver='gesvd')


def _left_orthogonalize(core: np.ndarray, nxt: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """core = Q R; returns (Q as core, R absorbed into the next core)"""
    r0, n, r1 = core.shape
    Q, R = scipy.linalg.qr(core.reshape(r0 * n, r1, order='F'), mode='economic')
    return Q.reshape(r0, n, r1, order='F'), np.einsum('ac,cnb->anb', R, nxt)


def _right_orthogonalize(core: np.ndarray, prev: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """core = R^T Q^T; returns (Q^T as core, R^T absorbed into the previous core)"""
    r0, n, r1 = core.shape
    Q, R = scipy.linalg.qr(core.reshape(r0, n * r1, order='F').T, mode='economic')
    return Q.T.reshape(r0, n, r1, order='F'), np.einsum('anb,cb->anc', prev, R)


def init_right_orthogonal(p: int, l: int, M: int, d: int, ranks: Optional[Sequence[int]] = None,
                          seed: int = 0) -> VolterraModel:
    """
    Seeded standard normal cores, then right-orthogonalized from core d down to core 2

    Args:
        ranks: inner ranks r_1..r_{d-1} (or the full chain); defaults to all ones
        seed: numpy Generator seed

    Returns:
        VolterraModel with cores 2..d right orthogonal
    """
    n = p * M + 1
    if ranks is None:
        ranks = [1] * (d - 1)
    chain = rank_chain(l, n, d, ranks)
    rng = np.random.default_rng(seed)
    cores = [rng.standard_normal((chain[k], n, chain[k + 1])) for k in range(d)]
    for k in range(d - 1, 0, -1):
        cores[k], cores[k - 1] = _right_orthogonalize(cores[k], cores[k - 1])
    return VolterraModel.from_arrays(p, l, M, cores)


def solve_core(Uk: np.ndarray, y: np.ndarray, cutoff: Optional[float] = None) -> Tuple[np.ndarray, float]:
    """
    Minimal-norm least-squares solution of Uk x = y

    Singular values below cutoff * s_1 are treated as zero; the default
    cutoff is eps * max(rows, cols).

    Returns:
        (x, ||y - Uk x||_2)
    """
    Uk = np.asarray(Uk, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    rows, cols = Uk.shape
    if y.size != rows:
        raise ShapeMismatch(f"right-hand side has {y.size} entries, matrix has {rows} rows")
    if not np.any(Uk):
        return np.zeros(cols), float(np.linalg.norm(y))
    U, s, Vt = _svd(Uk)
    rel = MACHINE_EPS * max(rows, cols) if cutoff is None else cutoff
    keep = s >= rel * s[0]
    x = Vt[keep].T @ ((U[:, keep].T @ y) / s[keep])
    return x, float(np.linalg.norm(y - Uk @ x))


def _merge_pair(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """vec of the super-core V^(k) V^(k+1), in the column order of the pair matrix"""
    r0, n, _ = left.shape
    r2 = right.shape[2]
    return np.einsum('air,rjb->aijb', left, right).reshape(r0, n * n, r2, order='F').ravel(order='F')


def _residual_rank(mat: np.ndarray, U: np.ndarray, s: np.ndarray, Vt: np.ndarray, cap: int,
                   budget: float, reduced: Optional[np.ndarray]) -> int:
    """Smallest r <= cap whose truncated split stays within budget"""
    if reduced is None:
        tail = np.sqrt(np.cumsum((s ** 2)[::-1])[::-1])
        within = np.nonzero(tail[1:cap + 1] <= budget * np.linalg.norm(s))[0]
        return int(within[0]) + 1 if within.size else cap
    rows = reduced.shape[0]
    X = reduced.reshape(rows, mat.shape[0], mat.shape[1], order='F')
    # column j is the output of the j-th singular triple alone
    terms = np.einsum('tab,aj,jb->tj', X, U[:, :cap], Vt[:cap], optimize=True) * s[:cap]
    fitted = reduced @ mat.ravel(order='F')
    kept = np.cumsum(terms, axis=1)
    losses = np.linalg.norm(fitted[:, None] - kept, axis=0)
    within = np.nonzero(losses <= budget)[0]
    return int(within[0]) + 1 if within.size else cap


def split_supercore(W: np.ndarray, direction: str, tol_policy: SvdTolPolicy = None,
                    max_rank: Optional[int] = None, reduced: Optional[np.ndarray] = None,
                    y_norm: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray, int, float]:
    """
    Split a super-core (r_{k-1}, n^2, r_{k+1}) into two cores by truncated SVD

    Args:
        reduced, y_norm: the super-core's reduced matrix and ||y||; only the
            residual policy reads them

    Returns:
        (V^(k), V^(k+1), r_k, discarded singular-value energy)
    """
    if direction not in DIRECTIONS:
        raise InvalidArguments(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 3:
        raise ShapeMismatch(f"a super-core must be 3-way, got shape {W.shape}")
    tol_policy = tol_policy or SvdTolPolicy.machine()
    r0, nn, r2 = W.shape
    n = math.isqrt(nn)
    if n * n != nn:
        raise ShapeMismatch(f"super-core middle dimension {nn} is not a square")

    mat = W.reshape(r0 * n, n * r2, order='F')
    U, s, Vt = _svd(mat)
    cap = s.size if max_rank is None else max(1, min(max_rank, s.size))
    if s[0] == 0:
        r = 1
    elif tol_policy.kind == 'residual':
        if reduced is not None and (y_norm is None or reduced.shape[1] != mat.size):
            raise ShapeMismatch(f"reduced matrix {reduced.shape} with y_norm={y_norm} does not "
                                f"fit a super-core of {mat.size} entries")
        budget = tol_policy.value * (y_norm if reduced is not None else 1.0)
        r = _residual_rank(mat, U, s, Vt, cap, budget, reduced)
    else:
        r = int(np.sum(s >= tol_policy.threshold(s, mat.shape)))
    r = max(1, min(r, cap))
    discarded = float(np.sqrt(np.sum(s[r:] ** 2)))

    if direction == LEFT_TO_RIGHT:
        left = U[:, :r]
        right = s[:r, None] * Vt[:r]
    else:
        left = U[:, :r] * s[:r]
        right = Vt[:r]
    return (left.reshape(r0, n, r, order='F'),
            right.reshape(r, n, r2, order='F'),
            r, discarded)


def _check_determined(k: int, rows: int, unknowns: int, pair: bool, config: SolverConfig):
    if rows >= unknowns:
        return
    if not config.allow_underdetermined:
        raise UnderdeterminedError(k, rows, unknowns, pair)
    logger.debug(f"{'super-core' if pair else 'core'} {k}: {rows} rows < {unknowns} unknowns, "
                 f"taking the minimal-norm solution")


def _record(report: Optional[SolverReport], config: SolverConfig, residual: float,
            discarded: float = None):
    if report is None or not config.record_solves:
        return
    report.solve_trace.append(residual)
    if discarded is not None:
        report.truncation_trace.append(discarded)


def _als_pass(cores: List[np.ndarray], Ut: np.ndarray, y: np.ndarray, l: int, direction: str,
              config: SolverConfig, report: Optional[SolverReport]) -> List[np.ndarray]:
    d = len(cores)
    y_norm = float(np.linalg.norm(y))
    rows = y.size
    cache = PartialProducts(cores, Ut, l)

    if d == 1:
        r0, n, r1 = cores[0].shape
        _check_determined(1, rows, r0 * n * r1, False, config)
        x, res = solve_core(reduced_matrix(cache.left(0), Ut, cache.right(2)), y, config.ls_cutoff)
        cores[0] = x.reshape(r0, n, r1, order='F')
        _record(report, config, res / y_norm if y_norm else 0.0)
        return cores

    order = range(1, d) if direction == LEFT_TO_RIGHT else range(d, 1, -1)
    for k in order:
        r0, n, r1 = cores[k - 1].shape
        _check_determined(k, rows, r0 * n * r1, False, config)
        Uk = reduced_matrix(cache.left(k - 1), Ut, cache.right(k + 1))
        x, res = solve_core(Uk, y, config.ls_cutoff)
        core = x.reshape(r0, n, r1, order='F')
        if direction == LEFT_TO_RIGHT:
            cores[k - 1], cores[k] = _left_orthogonalize(core, cores[k])
            cache.update_left(k, cores[k - 1])
        else:
            cores[k - 1], cores[k - 2] = _right_orthogonalize(core, cores[k - 2])
            cache.update_right(k, cores[k - 1])
        rel = res / y_norm if y_norm else 0.0
        logger.debug(f"ALS core {k}: residual {rel:.3e}")
        _record(report, config, rel)
    return cores


def _mals_pass(cores: List[np.ndarray], Ut: np.ndarray, y: np.ndarray, l: int, direction: str,
               config: SolverConfig, report: Optional[SolverReport]) -> List[np.ndarray]:
    d = len(cores)
    if d < 2:
        return _als_pass(cores, Ut, y, l, direction, config, report)
    y_norm = float(np.linalg.norm(y))
    rows = y.size
    n = Ut.shape[1]
    cache = PartialProducts(cores, Ut, l)

    order = range(1, d) if direction == LEFT_TO_RIGHT else range(d - 1, 0, -1)
    for k in order:
        r0 = cores[k - 1].shape[0]
        r2 = cores[k].shape[2]
        _check_determined(k, rows, r0 * n * n * r2, True, config)
        Ukk = reduced_pair_matrix(cache.left(k - 1), Ut, cache.right(k + 2))
        x, res = solve_core(Ukk, y, config.ls_cutoff)
        W = x.reshape(r0, n * n, r2, order='F')
        left, right, r, discarded = split_supercore(W, direction, config.svd_tol_policy, config.max_rank,
                                                    reduced=Ukk, y_norm=y_norm)
        cores[k - 1], cores[k] = left, right
        if direction == LEFT_TO_RIGHT:
            cache.update_left(k, left)
        else:
            cache.update_right(k + 1, right)
        rel = res / y_norm if y_norm else 0.0
        # the split moves the fitted outputs orthogonally to the solve residual
        moved = float(np.linalg.norm(Ukk @ (x - _merge_pair(left, right))))
        lost = moved / y_norm if y_norm else 0.0
        logger.debug(f"MALS super-core ({k}, {k + 1}): residual {rel:.3e}, r_{k} = {r}, "
                     f"discarded {discarded:.3e}, output change {lost:.3e}")
        _record(report, config, rel, lost)
    return cores


def _problem(data: TimeSeriesDataset, model: VolterraModel, config: SolverConfig):
    if data.p != model.p or data.l != model.l:
        raise ShapeMismatch(
            f"dataset has p={data.p}, l={data.l}; model expects p={model.p}, l={model.l}"
        )
    Ut, Y = regression_data(data, model.M, config.prehistory)
    # C-order flattening of N x l puts the output index fastest, i.e. vec(Y^T)
    return Ut, Y, Y.reshape(-1)


def als_half_sweep(model: VolterraModel, data: TimeSeriesDataset, direction: str,
                   config: SolverConfig = None, report: SolverReport = None) -> VolterraModel:
    """One ALS sweep over cores 1..d-1 (left_to_right) or d..2 (right_to_left)"""
    if direction not in DIRECTIONS:
        raise InvalidArguments(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    config = config or SolverConfig(algorithm='als')
    Ut, _, y = _problem(data, model, config)
    cores = _als_pass(model.arrays(), Ut, y, model.l, direction, config, report)
    return VolterraModel.from_arrays(model.p, model.l, model.M, cores)


def mals_half_sweep(model: VolterraModel, data: TimeSeriesDataset, direction: str,
                    config: SolverConfig = None, report: SolverReport = None) -> VolterraModel:
    """One MALS sweep over the super-cores (1,2)..(d-1,d) or back"""
    if direction not in DIRECTIONS:
        raise InvalidArguments(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    if model.d < 2:
        raise InvalidArguments("MALS sweeps need degree d >= 2")
    config = config or SolverConfig(algorithm='mals')
    Ut, _, y = _problem(data, model, config)
    cores = _mals_pass(model.arrays(), Ut, y, model.l, direction, config, report)
    return VolterraModel.from_arrays(model.p, model.l, model.M, cores)


def orthogonality_audit(model: VolterraModel, direction: str) -> float:
    """Largest deviation of the cores a sweep in this direction leaves orthogonal"""
    if model.d == 1:
        return 0.0
    if direction == LEFT_TO_RIGHT:
        return max(orthogonality_deviation(c, 'left') for c in model.cores[:-1])
    return max(orthogonality_deviation(c, 'right') for c in model.cores[1:])


def identify(data: TimeSeriesDataset, p: int, l: int, M: int, d: int,
             config: SolverConfig = None) -> Tuple[VolterraModel, SolverReport]:
    """
    Identify a TN Volterra model from measured inputs and outputs

    Args:
        data: p-input l-output time series
        p, l, M, d: inputs, outputs, memory and degree
        config: solver settings; MALS with defaults when omitted

    Returns:
        (model, report)
    """
    config = config or SolverConfig()
    if min(p, l, M, d) < 1:
        raise InvalidArguments(f"p, l, M, d must be positive, got p={p} l={l} M={M} d={d}")
    if config.algorithm == 'als':
        if config.ranks is None and d > 1:
            raise InvalidArguments("ALS needs the ranks r_1..r_{d-1}")
        ranks = config.ranks if d > 1 else []
    else:
        ranks = [1] * (d - 1)

    model = init_right_orthogonal(p, l, M, d, ranks, config.seed)
    Ut, Y, y = _problem(data, model, config)
    report = SolverReport(algorithm=config.algorithm)
    passer = _als_pass if config.algorithm == 'als' else _mals_pass

    logger.info(f"identify {config.algorithm.upper()}: p={p} l={l} M={M} d={d}, "
                f"{Ut.shape[0]} samples, pM+1={model.n}")
    start = time.perf_counter()
    cores = model.arrays()
    direction = LEFT_TO_RIGHT
    for sweep in range(1, config.max_sweeps + 1):
        cores = passer(cores, Ut, y, l, direction, config, report)
        model = VolterraModel.from_arrays(p, l, M, cores)
        residual = relative_residual(Y, simulate_rows(model, Ut))
        audit = orthogonality_audit(model, direction)
        report.residual_trace.append(residual)
        report.orthogonality_audit.append(audit)
        report.sweeps_used = sweep
        logger.info(f"sweep {sweep} ({direction}): residual {residual:.3e}, ranks {model.ranks}")
        if audit > config.orth_tol:
            logger.warning(f"sweep {sweep}: orthogonality deviation {audit:.2e} above {config.orth_tol:.0e}")
        report.converged = residual < config.residual_tol
        # a single core reaches its least-squares optimum in one sweep
        if report.converged or d == 1:
            break
        direction = RIGHT_TO_LEFT if direction == LEFT_TO_RIGHT else LEFT_TO_RIGHT

    report.final_ranks = model.ranks
    report.seconds = time.perf_counter() - start
    if not report.converged:
        logger.warning(f"no convergence after {report.sweeps_used} sweeps, "
                       f"residual {report.final_residual:.3e}")
    return model, report
