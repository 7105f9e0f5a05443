#!/usr/bin/env python3
"""
Brute-force reference solutions at small scale

The direct method materializes U (N x (pM+1)^d) and applies its pseudo-inverse,
which is only possible while (pM+1)^d stays small.
"""
import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.linalg

from errors import ElementBudgetExceeded, InvalidArguments, ShapeMismatch
from regressor import TimeSeriesDataset, build_full_U, regression_data
from tensor_core import symmetrize
from tn_model import VolterraModel, reconstruct_full
from utils import MACHINE_EPS, relative_residual

logger = logging.getLogger('vttn.oracle')

ORACLE_MAX_COLUMNS = 10 ** 6


@dataclass(frozen=True, eq=False)
class DirectSolution:
    """Volterra tensor reshaped to an l x (pM+1)^d matrix"""

    V1: np.ndarray
    residual: float
    norm: float
    p: int
    M: int
    d: int

    def simulate(self, data: TimeSeriesDataset, prehistory: str = 'zero') -> np.ndarray:
        """N x l outputs, U V1^T"""
        if data.p != self.p:
            raise ShapeMismatch(f"dataset has {data.p} inputs, solution expects {self.p}")
        return build_full_U(data, self.M, self.d, prehistory=prehistory) @ self.V1.T


def _gate(n: int, d: int):
    columns = n ** d
    if columns > ORACLE_MAX_COLUMNS:
        raise ElementBudgetExceeded(columns, ORACLE_MAX_COLUMNS, "direct solve columns (pM+1)^d")


def _pinv_cutoff(U: np.ndarray) -> float:
    return MACHINE_EPS * max(U.shape)


def solve_direct(data: TimeSeriesDataset, p: int, l: int, M: int, d: int,
                 budget: int = None, prehistory: str = 'zero') -> DirectSolution:
    """Minimal-norm least-squares V1 from the full regression matrix"""
    if data.p != p or data.l != l:
        raise ShapeMismatch(f"dataset has p={data.p}, l={data.l}; expected p={p}, l={l}")
    _gate(p * M + 1, d)
    U = build_full_U(data, M, d, budget, prehistory)
    _, Y = regression_data(data, M, prehistory)
    pinv = scipy.linalg.pinv(U, atol=0.0, rtol=_pinv_cutoff(U))
    V1 = (pinv @ Y).T
    residual = relative_residual(Y, U @ V1.T)
    logger.debug(f"direct solve: U is {U.shape[0]} x {U.shape[1]}, residual {residual:.3e}")
    return DirectSolution(V1, residual, float(np.linalg.norm(V1)), p, M, d)


def _degree_of(n: int, columns: int) -> int:
    if n == 1:
        if columns != 1:
            raise ShapeMismatch(f"{columns} columns is not a power of 1")
        return 1
    d = round(math.log(columns, n))
    if n ** d != columns:
        raise ShapeMismatch(f"{columns} columns is not a power of pM+1={n}")
    return d


def minimal_norm_symmetrize(V1: np.ndarray, n: int) -> np.ndarray:
    """Symmetrize the d-way tensor behind every row of V1"""
    V1 = np.atleast_2d(np.asarray(V1, dtype=np.float64))
    d = _degree_of(n, V1.shape[1])
    out = np.empty_like(V1)
    for i, row in enumerate(V1):
        tensor = row.reshape((n,) * d, order='F')
        out[i] = symmetrize(tensor).data
    return out


@dataclass(frozen=True, eq=False)
class NullSpaceWitness:
    """Two different exact solutions with the same training outputs"""

    first: np.ndarray
    second: np.ndarray
    outputs_first: np.ndarray
    outputs_second: np.ndarray


def null_space_witness(data: TimeSeriesDataset, M: int, d: int,
                       budget: int = None) -> NullSpaceWitness:
    """Minimal-norm solution and the same solution plus a null-space vector of U"""
    direct = solve_direct(data, data.p, data.l, M, d, budget)
    U = build_full_U(data, M, d, budget)
    null = scipy.linalg.null_space(U, rcond=_pinv_cutoff(U))
    if null.shape[1] == 0:
        raise InvalidArguments("U has full column rank, the solution is unique")
    z = null[:, 0] * max(direct.norm, 1.0)
    second = direct.V1 + z[None, :]
    return NullSpaceWitness(direct.V1, second, U @ direct.V1.T, U @ second.T)


def solution_norm_report(model: VolterraModel, direct: DirectSolution) -> Tuple[float, float]:
    """(||V|| of the TN model, ||V1|| of the minimal-norm direct solution)"""
    full = reconstruct_full(model)
    return float(np.linalg.norm(full.data)), direct.norm
