#!/usr/bin/env python3
"""
Tensor-network representation of a MIMO Volterra tensor

The Volterra tensor V (l x n x ... x n, n = pM+1) is stored as d cores

    V^(1): l       x n x r_1
    V^(k): r_{k-1} x n x r_k
    V^(d): r_{d-1} x n x 1

so the first core carries the output index (r_0 = l) and a sample is simulated as

    y(t) = (V^(1) x_2 u_t^T) (V^(2) x_2 u_t^T) ... (V^(d) x_2 u_t^T)

which never touches the l * n^d entries of the full tensor.
"""
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from errors import InvalidArguments, ShapeMismatch
from tensor_core import DenseTensor
from utils import check_budget

DEFAULT_ORTH_TOL = 1e-12

# flagged value written when a full count does not fit in int64
FULL_COUNT_SATURATION = 2 ** 63 - 1


@dataclass(frozen=True, eq=False)
class TnCore:
    """3-way core (left_rank, dim, right_rank)"""

    data: DenseTensor

    def __post_init__(self):
        if self.data.order != 3:
            raise ShapeMismatch(f"a core must be 3-way, got dims {self.data.dims}")

    @classmethod
    def from_array(cls, array) -> 'TnCore':
        arr = np.asarray(array, dtype=np.float64)
        if arr.ndim != 3:
            raise ShapeMismatch(f"a core must be 3-way, got shape {arr.shape}")
        return cls(DenseTensor.from_array(arr))

    @property
    def left_rank(self) -> int:
        return self.data.dims[0]

    @property
    def dim(self) -> int:
        return self.data.dims[1]

    @property
    def right_rank(self) -> int:
        return self.data.dims[2]

    @property
    def array(self) -> np.ndarray:
        return self.data.as_array()

    def vec(self) -> np.ndarray:
        """vec(V^(k)), first-index-fastest"""
        return self.data.data

    def left_unfolding(self) -> np.ndarray:
        """r_{k-1} * dim x r_k matrix"""
        return self.data.data.reshape(self.left_rank * self.dim, self.right_rank, order='F')

    def right_unfolding(self) -> np.ndarray:
        """r_{k-1} x dim * r_k matrix"""
        return self.data.data.reshape(self.left_rank, self.dim * self.right_rank, order='F')

    def slice_at(self, u) -> np.ndarray:
        """V^(k) x_2 u^T as an r_{k-1} x r_k matrix"""
        return np.einsum('anb,n->ab', self.array, np.asarray(u, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class VolterraModel:
    """p-input l-output Volterra system of memory M and degree d in TN format"""

    p: int
    l: int
    M: int
    d: int
    cores: Tuple[TnCore, ...]

    def __post_init__(self):
        cores = tuple(self.cores)
        object.__setattr__(self, 'cores', cores)
        if min(self.p, self.l, self.M, self.d) < 1:
            raise InvalidArguments(
                f"p, l, M, d must be positive, got p={self.p} l={self.l} M={self.M} d={self.d}"
            )
        if len(cores) != self.d:
            raise ShapeMismatch(f"degree {self.d} needs {self.d} cores, got {len(cores)}")
        n = self.n
        if cores[0].left_rank != self.l:
            raise ShapeMismatch(f"first core must have left rank l={self.l}, got {cores[0].left_rank}")
        if cores[-1].right_rank != 1:
            raise ShapeMismatch(f"last core must have right rank 1, got {cores[-1].right_rank}")
        for k, core in enumerate(cores, 1):
            if core.dim != n:
                raise ShapeMismatch(f"core {k} has dimension {core.dim}, expected pM+1={n}")
            if k < len(cores) and core.right_rank != cores[k].left_rank:
                raise ShapeMismatch(
                    f"rank chain broken between cores {k} and {k + 1}: "
                    f"{core.right_rank} != {cores[k].left_rank}"
                )

    @classmethod
    def from_arrays(cls, p: int, l: int, M: int, arrays: Sequence[np.ndarray]) -> 'VolterraModel':
        cores = tuple(TnCore.from_array(a) for a in arrays)
        return cls(p=p, l=l, M=M, d=len(cores), cores=cores)

    @property
    def n(self) -> int:
        return self.p * self.M + 1

    @property
    def ranks(self) -> List[int]:
        """Rank chain r_0 = l, r_1, ..., r_d = 1"""
        return [self.cores[0].left_rank] + [c.right_rank for c in self.cores]

    @property
    def max_rank(self) -> int:
        inner = self.ranks[1:-1]
        return max(inner) if inner else 1

    def arrays(self) -> List[np.ndarray]:
        """Writable copies of the core arrays"""
        return [np.array(c.array) for c in self.cores]

    def with_core(self, k: int, core) -> 'VolterraModel':
        """Copy with core k (one-based) replaced"""
        if not 1 <= k <= self.d:
            raise InvalidArguments(f"core index {k} out of range 1..{self.d}")
        if not isinstance(core, TnCore):
            core = TnCore.from_array(core)
        cores = list(self.cores)
        cores[k - 1] = core
        return VolterraModel(self.p, self.l, self.M, self.d, tuple(cores))

    def describe(self) -> dict:
        """JSON-safe summary; full_count is clamped to int64 and flagged when clamped"""
        params = parameter_count(self)
        full, saturated = full_count_saturated(self.p, self.M, self.d)
        entries = full_count_float(self.p, self.M, self.d) * self.l
        return {
            'p': self.p,
            'l': self.l,
            'M': self.M,
            'd': self.d,
            'ranks': self.ranks,
            'max_rank': self.max_rank,
            'parameter_count': params,
            'full_count': full,
            'full_count_saturated': saturated,
            'compression_ratio': entries / params if params else float('inf'),
        }


def orthogonality_deviation(c: TnCore, side: str) -> float:
    """max |A^T A - I| (left) or max |A A^T - I| (right)"""
    if side == 'left':
        a = c.left_unfolding()
        gram = a.T @ a
    elif side == 'right':
        a = c.right_unfolding()
        gram = a @ a.T
    else:
        raise InvalidArguments(f"side must be 'left' or 'right', got {side!r}")
    return float(np.max(np.abs(gram - np.eye(gram.shape[0]))))


def is_left_orthogonal(c: TnCore, tol: float = DEFAULT_ORTH_TOL) -> bool:
    return orthogonality_deviation(c, 'left') <= tol


def is_right_orthogonal(c: TnCore, tol: float = DEFAULT_ORTH_TOL) -> bool:
    return orthogonality_deviation(c, 'right') <= tol


def simulate_sample(m: VolterraModel, u_t) -> np.ndarray:
    """y(t) for one extended input vector u_t of length pM+1"""
    u = np.asarray(u_t, dtype=np.float64).ravel()
    if u.size != m.n:
        raise ShapeMismatch(f"u_t has length {u.size}, model expects pM+1={m.n}")
    acc = m.cores[0].slice_at(u)
    for core in m.cores[1:]:
        acc = acc @ core.slice_at(u)
    return acc.reshape(m.l)


def simulate_rows(m: VolterraModel, Ut: np.ndarray) -> np.ndarray:
    """Simulate a batch of u_t rows (N x pM+1); returns N x l"""
    Ut = np.asarray(Ut, dtype=np.float64)
    if Ut.ndim != 2 or Ut.shape[1] != m.n:
        raise ShapeMismatch(f"regressor rows have shape {Ut.shape}, expected (N, {m.n})")
    acc = np.einsum('anb,tn->tab', m.cores[0].array, Ut)
    for core in m.cores[1:]:
        acc = np.einsum('tla,tab->tlb', acc, np.einsum('anb,tn->tab', core.array, Ut))
    return acc[:, :, 0]


def simulate_series(m: VolterraModel, inputs) -> np.ndarray:
    """Output matrix N x l for every sample of a TimeSeriesDataset"""
    from regressor import build_ut_matrix

    if inputs.p != m.p:
        raise ShapeMismatch(f"dataset has {inputs.p} input channels, model expects {m.p}")
    return simulate_rows(m, build_ut_matrix(inputs, m.M))


def reconstruct_full(m: VolterraModel, budget: int = None) -> DenseTensor:
    """Volterra tensor reshaped into the l x (pM+1)^d matrix V_(1)"""
    n_cols = m.n ** m.d
    check_budget(m.l * n_cols, budget, what="reconstructed Volterra tensor")
    acc = m.cores[0].array
    for core in m.cores[1:]:
        l, J, r = acc.shape
        nxt = np.einsum('ljr,rns->ljns', acc, core.array)
        # merging (J, n) first-index-fastest keeps the multi-index ordering of vec
        acc = nxt.reshape(l, J * m.n, core.right_rank, order='F')
    return DenseTensor.from_array(acc[:, :, 0])


def supercore(left: TnCore, right: TnCore) -> np.ndarray:
    """
    Contraction over the shared rank

    W[a, [i j], b] = sum_c left[a, i, c] right[c, j, b], with i fastest in [i j].
    """
    if left.right_rank != right.left_rank:
        raise ShapeMismatch(f"ranks do not chain: {left.right_rank} != {right.left_rank}")
    w = np.einsum('aic,cjb->aijb', left.array, right.array)
    r0, n, _, r2 = w.shape
    return w.reshape(r0, n * n, r2, order='F')


def parameter_count(m: VolterraModel) -> int:
    """sum_k r_{k-1} (pM+1) r_k with r_0 = l"""
    ranks = m.ranks
    return sum(ranks[k] * m.n * ranks[k + 1] for k in range(m.d))


def full_count(p: int, M: int, d: int) -> int:
    """(pM+1)^d entries per output of the full Volterra tensor"""
    return (p * M + 1) ** d


def full_count_saturated(p: int, M: int, d: int) -> Tuple[int, bool]:
    """full_count clamped to int64, with a flag when it was clamped"""
    count = full_count(p, M, d)
    if count > FULL_COUNT_SATURATION:
        return FULL_COUNT_SATURATION, True
    return count, False


def frobenius_norm(m: VolterraModel) -> float:
    """||V||_F computed by contracting the cores with themselves"""
    gram = np.eye(m.l)
    for core in m.cores:
        a = core.array
        gram = np.einsum('ab,anc,bnd->cd', gram, a, a)
    return float(math.sqrt(max(gram[0, 0], 0.0)))


def full_count_float(p: int, M: int, d: int) -> float:
    return float(p * M + 1) ** d


def core_norm(c: TnCore) -> float:
    """Frobenius norm of a single core"""
    return float(np.linalg.norm(c.vec()))
