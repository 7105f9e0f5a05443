#!/usr/bin/env python3
"""
Regression matrices for Volterra identification

- u_t           extended input vector (1, u_1(t), ..., u_p(t), u_1(t-1), ..., u_p(t-M+1))
- U             N x (pM+1)^d full regression matrix, rows u_t^{(x)d}        (oracle scale)
- U_k           lN x r_{k-1}(pM+1)r_k    reduced matrix for core k           (ALS)
- U_{k,k+1}     lN x r_{k-1}(pM+1)^2 r_{k+1}  reduced matrix for a super-core (MALS)

Stacked rows follow vec(Y^T): the output index is fastest within each sample.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg
from scipy.special import comb

from errors import InvalidArguments, ShapeMismatch
from utils import MACHINE_EPS, check_budget

logger = logging.getLogger('vttn.regressor')

PREHISTORY_MODES = ('zero', 'trim')


@dataclass
class TimeSeriesDataset:
    """Aligned input (p x N) and output (l x N) samples"""

    inputs: np.ndarray
    outputs: np.ndarray = None
    sample_rate: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        n_samples = inputs.shape[1]
        if self.outputs is None:
            outputs = np.zeros((0, n_samples))
        else:
            outputs = np.atleast_2d(np.asarray(self.outputs, dtype=np.float64))
        if n_samples < 1:
            raise InvalidArguments("a dataset needs at least one sample")
        if outputs.shape[1] != n_samples:
            raise ShapeMismatch(
                f"inputs have {n_samples} samples but outputs have {outputs.shape[1]}"
            )
        self.inputs = inputs
        self.outputs = outputs

    @property
    def p(self) -> int:
        return self.inputs.shape[0]

    @property
    def l(self) -> int:
        return self.outputs.shape[0]

    @property
    def N(self) -> int:
        return self.inputs.shape[1]

    @property
    def Y(self) -> np.ndarray:
        """N x l output matrix"""
        return self.outputs.T

    def slice(self, start: int, stop: int = None) -> 'TimeSeriesDataset':
        return TimeSeriesDataset(
            self.inputs[:, start:stop],
            self.outputs[:, start:stop],
            self.sample_rate,
            dict(self.meta),
        )

    def split(self, n_train: int) -> Tuple['TimeSeriesDataset', Optional['TimeSeriesDataset']]:
        """First n_train samples for identification, the rest for validation"""
        if not 1 <= n_train <= self.N:
            raise InvalidArguments(f"train size {n_train} out of range 1..{self.N}")
        train = self.slice(0, n_train)
        valid = self.slice(n_train) if n_train < self.N else None
        return train, valid

    def with_outputs(self, outputs) -> 'TimeSeriesDataset':
        return TimeSeriesDataset(self.inputs, outputs, self.sample_rate, dict(self.meta))


@dataclass(frozen=True, eq=False)
class RegressorRow:
    """Extended input vector u_t at sample t"""

    t: int
    u_t: np.ndarray


def build_ut(data: TimeSeriesDataset, t: int, M: int, prehistory: str = 'zero') -> np.ndarray:
    """
    u_t of length pM+1

    Samples before t = 0 are zero. With prehistory='trim' only t >= M-1 is valid.
    """
    if M < 1:
        raise InvalidArguments(f"memory M must be >= 1, got {M}")
    if prehistory not in PREHISTORY_MODES:
        raise InvalidArguments(f"unknown prehistory mode {prehistory!r}")
    lowest = M - 1 if prehistory == 'trim' else 0
    if not lowest <= t < data.N:
        raise InvalidArguments(f"sample index {t} out of range {lowest}..{data.N - 1}")
    u = np.zeros(data.p * M + 1)
    u[0] = 1.0
    for k in range(M):
        if t - k >= 0:
            u[1 + k * data.p:1 + (k + 1) * data.p] = data.inputs[:, t - k]
    return u


def regressor_row(data: TimeSeriesDataset, t: int, M: int) -> RegressorRow:
    return RegressorRow(t, build_ut(data, t, M))


def build_ut_matrix(data: TimeSeriesDataset, M: int, prehistory: str = 'zero') -> np.ndarray:
    """All u_t stacked as rows, N x (pM+1) (N - M + 1 rows when trimmed)"""
    if M < 1:
        raise InvalidArguments(f"memory M must be >= 1, got {M}")
    if prehistory not in PREHISTORY_MODES:
        raise InvalidArguments(f"unknown prehistory mode {prehistory!r}")
    p, N = data.p, data.N
    padded = np.concatenate([np.zeros((p, M - 1)), data.inputs], axis=1)
    Ut = np.ones((N, p * M + 1))
    for k in range(M):
        Ut[:, 1 + k * p:1 + (k + 1) * p] = padded[:, M - 1 - k:M - 1 - k + N].T
    if prehistory == 'trim':
        if N < M:
            raise InvalidArguments(f"trim mode needs at least M={M} samples, got {N}")
        Ut = Ut[M - 1:]
    return Ut


def regression_data(data: TimeSeriesDataset, M: int,
                    prehistory: str = 'zero') -> Tuple[np.ndarray, np.ndarray]:
    """(Ut, Y) with rows aligned for the chosen prehistory mode"""
    Ut = build_ut_matrix(data, M, prehistory)
    Y = data.Y[data.N - Ut.shape[0]:]
    return Ut, Y


def build_full_U(data: TimeSeriesDataset, M: int, d: int, budget: int = None,
                 prehistory: str = 'zero') -> np.ndarray:
    """N x (pM+1)^d matrix with rows kron_power(u_t, d)"""
    Ut = build_ut_matrix(data, M, prehistory)
    check_budget(Ut.shape[0] * Ut.shape[1] ** d, budget, what="full regression matrix U")
    return full_U_from_rows(Ut, d)


def excitation_bound(p: int, M: int, d: int) -> int:
    """Upper bound C(pM+d, pM) on rank(U)"""
    return int(comb(p * M + d, p * M, exact=True))


def numerical_rank(A: np.ndarray) -> int:
    """Count of singular values >= eps * s_1 * max(A.shape)"""
    A = np.asarray(A, dtype=np.float64)
    if A.size == 0:
        return 0
    s = scipy.linalg.svd(A, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s >= MACHINE_EPS * s[0] * max(A.shape)))


def condition_number(A: np.ndarray) -> float:
    """s_1 / s_min over the numerical rank"""
    A = np.asarray(A, dtype=np.float64)
    s = scipy.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return float('inf')
    kept = s[s >= MACHINE_EPS * s[0] * max(A.shape)]
    return float(kept[0] / kept[-1])


def is_persistently_exciting(data: TimeSeriesDataset, M: int, d: int,
                             budget: int = None) -> bool:
    """rank(U) == C(pM+d, pM); only feasible at oracle scale"""
    bound = excitation_bound(data.p, M, d)
    if data.N < bound:
        logger.warning(f"only {data.N} samples for an excitation bound of {bound}")
        return False
    rank = numerical_rank(build_full_U(data, M, d, budget))
    if rank != bound:
        logger.warning(f"inputs are not persistently exciting: rank(U) = {rank}, bound = {bound}")
    return rank == bound


class PartialProducts:
    """
    Per-sample partial contractions of the TN cores

    left(k)  = (V^(1) x_2 u_t^T) ... (V^(k) x_2 u_t^T)      shape (N, l, r_k), left(0) = I_l
    right(k) = (V^(k) x_2 u_t^T) ... (V^(d) x_2 u_t^T)      shape (N, r_{k-1}), right(d+1) = 1

    Solvers refresh one side after each core update instead of recontracting.
    """

    def __init__(self, cores: List[np.ndarray], Ut: np.ndarray, l: int):
        self.Ut = np.asarray(Ut, dtype=np.float64)
        self.N = self.Ut.shape[0]
        self.l = l
        self.d = len(cores)
        self._left = [None] * (self.d + 1)
        self._right = [None] * (self.d + 2)
        self._left[0] = np.broadcast_to(np.eye(l), (self.N, l, l))
        self._right[self.d + 1] = np.ones((self.N, 1))
        for k in range(1, self.d + 1):
            self.update_left(k, cores[k - 1])
        for k in range(self.d, 0, -1):
            self.update_right(k, cores[k - 1])

    def slices(self, core: np.ndarray) -> np.ndarray:
        """V^(k) x_2 u_t^T for every t, shape (N, r_{k-1}, r_k)"""
        return np.einsum('anb,tn->tab', core, self.Ut)

    def update_left(self, k: int, core: np.ndarray) -> None:
        self._left[k] = np.einsum('tla,tab->tlb', self._left[k - 1], self.slices(core))

    def update_right(self, k: int, core: np.ndarray) -> None:
        self._right[k] = np.einsum('tab,tb->ta', self.slices(core), self._right[k + 1])

    def left(self, k: int) -> np.ndarray:
        return self._left[k]

    def right(self, k: int) -> np.ndarray:
        return self._right[k]


def reduced_matrix(v_left: np.ndarray, Ut: np.ndarray, v_right: np.ndarray) -> np.ndarray:
    """
    Rows (v_{k+1}^T (x) u_t^T (x) v_{k-1}) stacked over t

    v_left (N, l, r_{k-1}), Ut (N, n), v_right (N, r_k) -> (N*l, r_{k-1} n r_k)
    """
    N, l, _ = v_left.shape
    block = np.einsum('toa,ti,tb->tobia', v_left, Ut, v_right)
    return block.reshape(N * l, -1)


def reduced_pair_matrix(v_left: np.ndarray, Ut: np.ndarray, v_right: np.ndarray) -> np.ndarray:
    """
    Rows (v_{k+2}^T (x) (u_t^T)^{(x)2} (x) v_{k-1}) stacked over t

    Column ordering matches vec of the super-core (r_{k-1}, n, n, r_{k+1}).
    """
    N, l, _ = v_left.shape
    block = np.einsum('toa,ti,tj,tb->tobjia', v_left, Ut, Ut, v_right)
    return block.reshape(N * l, -1)


def build_Uk(data: TimeSeriesDataset, model, k: int, prehistory: str = 'zero') -> np.ndarray:
    """lN x r_{k-1}(pM+1)r_k reduced matrix for core k (one-based)"""
    if not 1 <= k <= model.d:
        raise InvalidArguments(f"core index {k} out of range 1..{model.d}")
    if data.p != model.p:
        raise ShapeMismatch(f"dataset has {data.p} inputs, model expects {model.p}")
    Ut = build_ut_matrix(data, model.M, prehistory)
    cache = PartialProducts(model.arrays(), Ut, model.l)
    return reduced_matrix(cache.left(k - 1), Ut, cache.right(k + 1))


def build_Uk_pair(data: TimeSeriesDataset, model, k: int, prehistory: str = 'zero') -> np.ndarray:
    """lN x r_{k-1}(pM+1)^2 r_{k+1} reduced matrix for the super-core (k, k+1)"""
    if model.d < 2:
        raise InvalidArguments("super-cores need degree d >= 2")
    if not 1 <= k <= model.d - 1:
        raise InvalidArguments(f"super-core index {k} out of range 1..{model.d - 1}")
    if data.p != model.p:
        raise ShapeMismatch(f"dataset has {data.p} inputs, model expects {model.p}")
    Ut = build_ut_matrix(data, model.M, prehistory)
    cache = PartialProducts(model.arrays(), Ut, model.l)
    return reduced_pair_matrix(cache.left(k - 1), Ut, cache.right(k + 2))


def full_U_from_rows(Ut: np.ndarray, d: int) -> np.ndarray:
    """Row-wise kron_power of an explicit u_t matrix"""
    Ut = np.asarray(Ut, dtype=np.float64)
    n_rows, _ = Ut.shape
    if d < 0:
        raise InvalidArguments(f"degree d must be >= 0, got {d}")
    if d == 0:
        return np.ones((n_rows, 1))
    rows = Ut
    for _ in range(d - 1):
        # same ordering as kron_power: the earlier factor varies slowest
        rows = (rows[:, :, None] * Ut[:, None, :]).reshape(n_rows, -1)
    return rows
