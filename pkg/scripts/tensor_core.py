#!/usr/bin/env python3
"""
Dense multiway arrays

A DenseTensor stores its entries as one flat float64 vector linearized
first-index-fastest (column-major generalization), so that

    reshape(A, [4, 6])   of a 4 x 3 x 2 tensor with data 1..24
                         has first row (1, 5, 9, 13, 17, 21)
    vec(A)               is the flat data as a column

Everything here is a pure function of its inputs.
"""
import math
from dataclasses import dataclass
from functools import reduce
from itertools import permutations
from typing import Sequence, Tuple, Union

import numpy as np

from errors import InvalidArguments, ShapeMismatch
from utils import check_budget


@dataclass(frozen=True, eq=False)
class DenseTensor:
    """d-way array with explicit dims and first-index-fastest flat data"""

    dims: Tuple[int, ...]
    data: np.ndarray

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        if any(n < 1 for n in dims):
            raise InvalidArguments(f"dims must be positive, got {dims}")
        data = np.asarray(self.data, dtype=np.float64).ravel()
        expected = math.prod(dims)
        if data.size != expected:
            raise ShapeMismatch(f"data length {data.size} != product of dims {dims} = {expected}")
        check_budget(expected)
        data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, 'dims', dims)
        object.__setattr__(self, 'data', data)

    @classmethod
    def from_array(cls, array) -> 'DenseTensor':
        """Wrap a numpy array, linearizing it first-index-fastest"""
        arr = np.asarray(array, dtype=np.float64)
        if arr.ndim == 0:
            return cls((), arr.reshape(1))
        return cls(arr.shape, arr.ravel(order='F'))

    @property
    def order(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        return self.data.size

    def as_array(self) -> np.ndarray:
        """Numpy view with the tensor's dims (read-only)"""
        if not self.dims:
            return self.data.reshape(())
        return self.data.reshape(self.dims, order='F')

    def entry(self, *index: int) -> float:
        """Entry at a zero-based multi-index"""
        return float(self.as_array()[tuple(index)])

    def is_cubical(self) -> bool:
        return len(set(self.dims)) <= 1


TensorLike = Union[DenseTensor, np.ndarray, Sequence]


def _as_ndarray(t: TensorLike) -> np.ndarray:
    if isinstance(t, DenseTensor):
        return t.as_array()
    return np.asarray(t, dtype=np.float64)


def reshape(t: DenseTensor, new_dims: Sequence[int]) -> DenseTensor:
    """Reinterpret dims; the flat data is never reordered"""
    new_dims = tuple(int(n) for n in new_dims)
    if math.prod(new_dims) != t.size:
        raise ShapeMismatch(
            f"cannot reshape {t.dims} ({t.size} elements) into {new_dims} "
            f"({math.prod(new_dims)} elements)"
        )
    return DenseTensor(new_dims, t.data)


def vectorize(t: DenseTensor) -> DenseTensor:
    """vec(t) = reshape(t, [prod(dims), 1])"""
    return reshape(t, [t.size, 1])


def mode_product(t: TensorLike, m: TensorLike, k: int) -> DenseTensor:
    """
    k-mode product t x_k m, k one-based

    (t x_k m)_{i1..j..id} = sum_{ik} m_{j ik} t_{i1..ik..id}
    """
    a = _as_ndarray(t)
    mat = _as_ndarray(m)
    if mat.ndim != 2:
        raise ShapeMismatch(f"mode product needs a matrix, got {mat.ndim}-way operand")
    if not 1 <= k <= a.ndim:
        raise InvalidArguments(f"mode {k} out of range for a {a.ndim}-way tensor")
    if mat.shape[1] != a.shape[k - 1]:
        raise ShapeMismatch(
            f"matrix has {mat.shape[1]} columns but mode {k} has dimension {a.shape[k - 1]}"
        )
    out = np.tensordot(mat, a, axes=(1, k - 1))
    return DenseTensor.from_array(np.moveaxis(out, 0, k - 1))


def kronecker(b: TensorLike, c: TensorLike) -> DenseTensor:
    """Block matrix whose (i, j) block is b_ij * c"""
    bm = _as_ndarray(b)
    cm = _as_ndarray(c)
    if bm.ndim == 0:
        bm = bm.reshape(1, 1)
    if cm.ndim == 0:
        cm = cm.reshape(1, 1)
    if bm.ndim != 2 or cm.ndim != 2:
        raise ShapeMismatch(f"kronecker needs matrices, got {bm.ndim}-way and {cm.ndim}-way")
    check_budget(bm.size * cm.size)
    return DenseTensor.from_array(np.kron(bm, cm))


def kron_power(x, d: int) -> np.ndarray:
    """
    d-times repeated Kronecker product x (x) x (x) ... (x) x

    d = 0 gives the scalar 1 as a length-1 vector.
    """
    if d < 0:
        raise InvalidArguments(f"kron_power degree must be >= 0, got {d}")
    vec = np.asarray(x, dtype=np.float64).ravel()
    if d == 0:
        return np.ones(1)
    check_budget(vec.size ** d)
    return reduce(np.kron, [vec] * d)


def contract(t: TensorLike, x) -> float:
    """A x^d = A x_1 x^T x_2 x^T ... x_d x^T = vec(A)^T x^{(x)d}"""
    a = _as_ndarray(t)
    vec = np.asarray(x, dtype=np.float64).ravel()
    if any(n != vec.size for n in a.shape):
        raise ShapeMismatch(f"tensor dims {a.shape} do not all equal len(x) = {vec.size}")
    # all modes have the same vector, so contracting the trailing axis repeatedly is exact
    for _ in range(a.ndim):
        a = a @ vec
    return float(a)


def contract_mimo(t: TensorLike, x) -> np.ndarray:
    """Contract modes 2..d+1 of an l x n x ... x n tensor with x; returns length-l vector"""
    a = _as_ndarray(t)
    vec = np.asarray(x, dtype=np.float64).ravel()
    if a.ndim < 1:
        raise ShapeMismatch("contract_mimo needs at least the output mode")
    if any(n != vec.size for n in a.shape[1:]):
        raise ShapeMismatch(f"tensor dims {a.shape[1:]} do not all equal len(x) = {vec.size}")
    for _ in range(a.ndim - 1):
        a = a @ vec
    return np.asarray(a, dtype=np.float64).reshape(-1)


def symmetrize(t: TensorLike) -> DenseTensor:
    """Average of t over all d! index permutations"""
    a = _as_ndarray(t)
    if len(set(a.shape)) > 1:
        raise ShapeMismatch(f"symmetrize needs a cubical tensor, got dims {a.shape}")
    if a.ndim <= 1:
        return DenseTensor.from_array(a)
    perms = list(permutations(range(a.ndim)))
    total = np.zeros_like(a)
    for perm in perms:
        total += np.transpose(a, perm)
    return DenseTensor.from_array(total / len(perms))


def symmetry_defect(t: TensorLike) -> float:
    """max |t - symmetrize(t)|"""
    a = _as_ndarray(t)
    return float(np.max(np.abs(a - symmetrize(a).as_array()))) if a.size else 0.0
