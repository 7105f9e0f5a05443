#!/usr/bin/env python3
"""
Synthetic systems and signals

- decaying exponential kernels h_i(k_1..k_i) = exp(-sum (0.1 k_j)^2), memory 7
- a double-balanced mixer surrogate (100 Hz sine LO times 300 Hz square IF)
- planted random TN models and planted symmetric sums of rank-one terms
- additive Gaussian output noise calibrated to an exact SNR
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from errors import InvalidArguments, ZeroSignalError
from regressor import TimeSeriesDataset, build_ut_matrix
from tensor_core import DenseTensor
from tn_model import VolterraModel, simulate_series
from utils import check_budget, snr_db

logger = logging.getLogger('vttn.datagen')

EXP_KERNEL_MEMORY = 7
EXP_GRID_STEP = 0.1
BENCH_N = 5000
DEFAULT_TRAIN_N = 700

MIXER_FS = 5000.0
MIXER_DURATION = 1.0
MIXER_LO_HZ = 100.0
MIXER_IF_HZ = 300.0
MIXER_PHASE = math.pi / 8
MIXER_SNR_LEVELS = (11.0, 13.0, 16.0, 19.0, 25.0)

# samples per block when contracting kernels, keeps the intermediate small
_CHUNK_ELEMENTS = 4_000_000


@dataclass(frozen=True)
class NoiseSpec:
    snr_db: float
    seed: int = 0


def decaying_exp_kernel(i: int, M: int = EXP_KERNEL_MEMORY, budget: int = None) -> DenseTensor:
    """
    i-way kernel exp(-(g_1^2 + ... + g_i^2)) with grid values g = 0.1 k, k = 0..M-1

    Every entry is computed from its sorted multi-index, so permuted indices
    give bit-identical values.
    """
    if i < 1:
        raise InvalidArguments(f"kernel degree must be >= 1, got {i}")
    if M < 1:
        raise InvalidArguments(f"memory M must be >= 1, got {M}")
    check_budget(M ** i, budget, what=f"degree-{i} kernel")
    squares = (EXP_GRID_STEP * np.arange(M)) ** 2
    index = np.sort(np.indices((M,) * i).reshape(i, -1).T, axis=1)
    values = np.exp(-squares[index].sum(axis=1))
    return DenseTensor.from_array(values.reshape((M,) * i))


def _contract_lags(kernel: np.ndarray, lags: np.ndarray) -> np.ndarray:
    """sum over k_1..k_i of kernel[k] * prod_j lags[t, k_j], for every t"""
    i = kernel.ndim
    M = kernel.shape[0]
    N = lags.shape[0]
    out = np.empty(N)
    block = max(1, _CHUNK_ELEMENTS // max(1, M ** (i - 1)))
    for start in range(0, N, block):
        L = lags[start:start + block]
        acc = kernel.reshape(-1, M) @ L.T
        for j in range(i - 1, 0, -1):
            acc = np.einsum('xmb,bm->xb', acc.reshape(M ** (j - 1), M, -1), L)
        out[start:start + block] = acc.reshape(-1)
    return out


def simulate_truth_exp(inputs, d: int, M: int = EXP_KERNEL_MEMORY, h0: float = 0.0,
                       budget: int = None) -> np.ndarray:
    """y(t) = h0 + sum_{i=1}^d h_i contracted with (u(t), ..., u(t-M+1))"""
    if not isinstance(inputs, TimeSeriesDataset):
        inputs = TimeSeriesDataset(np.asarray(inputs, dtype=np.float64).reshape(1, -1))
    if inputs.p != 1:
        raise InvalidArguments(f"the exponential truth system is single-input, got p={inputs.p}")
    if d < 1:
        raise InvalidArguments(f"degree d must be >= 1, got {d}")
    lags = build_ut_matrix(inputs, M)[:, 1:]
    y = np.full(inputs.N, float(h0))
    for i in range(1, d + 1):
        y += _contract_lags(decaying_exp_kernel(i, M, budget).as_array(), lags)
    return y


def decaying_exp_dataset(d: int, N: int = BENCH_N, M: int = EXP_KERNEL_MEMORY,
                         seed: int = 0, budget: int = None) -> TimeSeriesDataset:
    """Uniform [0, 1] input and the exponential-kernel output of degree d"""
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.0, 1.0, size=(1, N))
    data = TimeSeriesDataset(u)
    y = simulate_truth_exp(data, d, M, budget=budget)
    return data.with_outputs(y.reshape(1, -1))


def mixer_signals(fs: float = MIXER_FS, duration: float = MIXER_DURATION) -> TimeSeriesDataset:
    """LO sine, IF square wave leading by pi/8, and the ideal mixer output LO * IF"""
    N = int(round(fs * duration))
    t = np.arange(N) / fs
    lo = np.sin(2 * np.pi * MIXER_LO_HZ * t)
    carrier = np.sin(2 * np.pi * MIXER_IF_HZ * t + MIXER_PHASE)
    square = np.where(carrier >= 0.0, 1.0, -1.0)
    return TimeSeriesDataset(
        np.vstack([lo, square]),
        (lo * square).reshape(1, -1),
        sample_rate=fs,
        meta={'t': t},
    )


def add_noise(y, spec: NoiseSpec) -> np.ndarray:
    """y plus seeded Gaussian noise scaled to exactly spec.snr_db"""
    y = np.asarray(y, dtype=np.float64)
    if math.isnan(spec.snr_db) or spec.snr_db == -math.inf:
        raise InvalidArguments(f"SNR must be finite or +inf, got {spec.snr_db}")
    if spec.snr_db == math.inf:
        return y.copy()
    signal = np.linalg.norm(y)
    if signal == 0.0:
        raise ZeroSignalError("cannot reach a finite SNR on an all-zero signal")
    rng = np.random.default_rng(spec.seed)
    noise = rng.standard_normal(y.shape)
    noise *= signal / (np.linalg.norm(noise) * 10.0 ** (spec.snr_db / 20.0))
    return y + noise


def measure_snr(clean, noisy) -> float:
    return snr_db(clean, noisy)


def _unit_rms(model: VolterraModel, rng: np.random.Generator, samples: int) -> float:
    sample = TimeSeriesDataset(rng.uniform(0.0, 1.0, size=(model.p, samples)))
    return float(np.sqrt(np.mean(simulate_series(model, sample) ** 2)))


def planted_tn_model(p: int, l: int, M: int, d: int, ranks, seed: int = 0,
                     rms_samples: int = 200) -> VolterraModel:
    """
    Random TN model with outputs of unit RMS on uniform [0, 1] inputs

    The same seed gives the same cores.
    """
    from solvers import rank_chain

    n = p * M + 1
    chain = rank_chain(l, n, d, ranks)
    rng = np.random.default_rng(seed)
    cores = [rng.standard_normal((chain[k], n, chain[k + 1])) for k in range(d)]
    model = VolterraModel.from_arrays(p, l, M, cores)

    rms = _unit_rms(model, rng, rms_samples)
    if rms > 0.0:
        scale = rms ** (-1.0 / d)
        model = VolterraModel.from_arrays(p, l, M, [c * scale for c in cores])
    logger.debug(f"planted model p={p} l={l} M={M} d={d} ranks {model.ranks}, RMS {rms:.3e}")
    return model


def planted_symmetric_model(p: int, M: int, d: int, rank: int, seed: int = 0,
                            rms_samples: int = 200) -> VolterraModel:
    """
    Single-output model V = sum_j c_j a_j (x) ... (x) a_j with `rank` terms

    Input samples only determine the symmetric part of a Volterra tensor, so
    this is the kind of model identification can recover exactly. The cores
    are diagonal in the term index, which gives every inner rank = `rank`.
    """
    n = p * M + 1
    if d < 1:
        raise InvalidArguments(f"degree d must be >= 1, got {d}")
    if not 1 <= rank <= n:
        raise InvalidArguments(f"rank must lie in 1..pM+1={n}, got {rank}")
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, rank))
    c = rng.standard_normal(rank)

    if d == 1:
        cores = [(a @ c).reshape(1, n, 1)]
    else:
        middle = np.zeros((rank, n, rank))
        for j in range(rank):
            middle[j, :, j] = a[:, j]
        cores = ([(a * c).reshape(1, n, rank)]
                 + [middle.copy() for _ in range(d - 2)]
                 + [a.T.reshape(rank, n, 1)])
    model = VolterraModel.from_arrays(p, 1, M, cores)
    rms = _unit_rms(model, rng, rms_samples)
    if rms > 0.0:
        cores[0] = cores[0] / rms
        model = VolterraModel.from_arrays(p, 1, M, cores)
    logger.debug(f"planted symmetric model p={p} M={M} d={d} with {rank} terms, RMS {rms:.3e}")
    return model


def planted_dataset(model: VolterraModel, N: int, seed: int = 0) -> TimeSeriesDataset:
    """Uniform [0, 1] inputs and the exact outputs of model"""
    rng = np.random.default_rng(seed)
    data = TimeSeriesDataset(rng.uniform(0.0, 1.0, size=(model.p, N)))
    return data.with_outputs(simulate_series(model, data).T)
