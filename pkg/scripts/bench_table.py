#!/usr/bin/env python3
"""
Benchmark tables

Degree sweep on the decaying-exponential system (direct, MALS, ALS per degree)
and the noisy mixer sweep, rendered as Markdown and exported as JSON.
"""
import logging
import time
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from datagen import (
    BENCH_N,
    DEFAULT_TRAIN_N,
    MIXER_SNR_LEVELS,
    NoiseSpec,
    add_noise,
    decaying_exp_dataset,
    measure_snr,
    mixer_signals,
)
from errors import ElementBudgetExceeded, InvalidArguments, VttnError
from oracle import solution_norm_report, solve_direct
from regressor import TimeSeriesDataset
from solvers import SolverConfig, SvdTolPolicy, identify
from tn_model import full_count, full_count_saturated, parameter_count, simulate_series
from utils import check_budget, format_sci, relative_residual, save_json, snr_db

logger = logging.getLogger('vttn.bench')

METHODS = ('direct', 'mals', 'als')

MIXER_MALS_TOL = 0.5

RESIDUAL_SPLIT_DEGREE = 4
RESIDUAL_SPLIT_FRACTION = 0.1


def _validation_residual(Y_hat: np.ndarray, data: TimeSeriesDataset, n_train: int) -> Optional[float]:
    if n_train >= data.N:
        return None
    return relative_residual(data.Y[n_train:], Y_hat[n_train:])


def _row(degree: int, method: str, p: int, M: int, **values) -> Dict:
    full, saturated = full_count_saturated(p, M, degree)
    row = {
        'degree': degree,
        'method': method,
        'train_residual': None,
        'validation_residual': None,
        'max_rank': None,
        'full_count': full,
        'full_count_saturated': saturated,
        'parameter_count': None,
        'solution_norm': None,
        'minimal_norm': None,
        'seconds': None,
        'converged': None,
        'model': None,
        'error': None,
    }
    row.update(values)
    return row


def degree_split(d: int, p: int, M: int, residual_tol: float, max_rank: int,
                 allow_underdetermined: bool) -> Tuple[SvdTolPolicy, int, bool]:
    """
    (split policy, rank cap, allow_underdetermined) for the MALS cell of degree d

    Up to degree 3 the super-core systems are determined by the training rows
    and the machine-precision split applies. From degree 4 on they are not:
    minimal-norm super-cores are close to full rank, so the split keeps the
    smallest rank whose truncation moves the fitted outputs by at most
    RESIDUAL_SPLIT_FRACTION * residual_tol * ||y||, capped at pM+1.
    """
    if d < RESIDUAL_SPLIT_DEGREE:
        return SvdTolPolicy.machine(), max_rank, allow_underdetermined
    return (SvdTolPolicy.residual(RESIDUAL_SPLIT_FRACTION * residual_tol),
            min(max_rank, p * M + 1), True)


def run_degree_bench(degrees: Sequence[int], methods: Sequence[str] = METHODS, seed: int = 0,
                     N: int = BENCH_N, n_train: int = DEFAULT_TRAIN_N, M: int = 7,
                     residual_tol: float = 1e-4, max_sweeps: int = 50, max_rank: int = 50,
                     allow_underdetermined: bool = False) -> List[Dict]:
    """
    Identify the exponential-kernel system for each degree

    MALS runs before ALS so ALS can reuse the ranks MALS found. When the direct
    solve ran, the TN rows also carry ||V|| next to the minimal norm ||V1||.
    A failing cell is recorded with its error and the run continues.
    """
    degrees = list(degrees)
    if not degrees:
        raise InvalidArguments("the degree list is empty")
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise InvalidArguments(f"unknown methods {sorted(unknown)}, choose from {METHODS}")
    ordered = [m for m in METHODS if m in methods]

    rows = []
    for d in degrees:
        print(f"\n[degree {d}]")
        data = decaying_exp_dataset(d, N=N, M=M, seed=seed)
        train, _ = data.split(min(n_train, data.N))
        policy, rank_cap, underdetermined = degree_split(d, 1, M, residual_tol, max_rank,
                                                         allow_underdetermined)
        mals_ranks = None
        direct = None

        for method in ordered:
            start = time.perf_counter()
            try:
                if method == 'direct':
                    # simulating every sample needs the full U as well
                    check_budget(data.N * full_count(1, M, d), what="full regression matrix U")
                    direct = solve_direct(train, 1, 1, M, d)
                    Y_hat = direct.simulate(data)
                    row = _row(d, method, 1, M,
                               train_residual=direct.residual,
                               validation_residual=_validation_residual(Y_hat, data, n_train),
                               parameter_count=full_count(1, M, d),
                               solution_norm=direct.norm,
                               minimal_norm=direct.norm,
                               converged=True)
                else:
                    if method == 'als' and mals_ranks is None:
                        raise InvalidArguments("ALS reuses the MALS ranks; run mals first")
                    config = SolverConfig(
                        algorithm=method,
                        ranks=mals_ranks if method == 'als' else None,
                        residual_tol=residual_tol,
                        max_sweeps=max_sweeps,
                        max_rank=rank_cap,
                        svd_tol_policy=policy,
                        seed=seed,
                        allow_underdetermined=underdetermined,
                    )
                    model, report = identify(train, 1, 1, M, d, config)
                    if method == 'mals':
                        mals_ranks = model.ranks[1:-1]
                    Y_hat = simulate_series(model, data)
                    row = _row(d, method, 1, M,
                               train_residual=report.final_residual,
                               validation_residual=_validation_residual(Y_hat, data, n_train),
                               max_rank=model.max_rank,
                               parameter_count=parameter_count(model),
                               converged=report.converged,
                               model=model.describe())
                    if direct is not None:
                        row['solution_norm'], row['minimal_norm'] = solution_norm_report(model, direct)
                row['seconds'] = time.perf_counter() - start
                print(f"  ✓ {method}: validation residual {format_sci(row['validation_residual'])}")
            except ElementBudgetExceeded as e:
                row = _row(d, method, 1, M, error=f"NA ({e})")
                print(f"  - {method}: NA, too large for a direct solve")
            except (VttnError, np.linalg.LinAlgError) as e:
                row = _row(d, method, 1, M, error=str(e) or type(e).__name__)
                print(f"  ✗ {method}: {row['error']}")
            rows.append(row)
    return rows


def run_mixer_bench(algorithm: str = 'als', d: int = 11, M: int = 2,
                    snr_levels: Sequence[float] = MIXER_SNR_LEVELS, seed: int = 0,
                    n_train: int = DEFAULT_TRAIN_N, residual_tol: Optional[float] = None,
                    max_sweeps: int = 10, ranks: Optional[List[int]] = None) -> List[Dict]:
    """
    Identify the mixer from noisy outputs at each SNR level

    ALS uses fixed ranks 2M+1 unless ranks are given and runs max_sweeps sweeps
    unless the residual drops below 1e-4; MALS stops at a residual of 0.5 by default.
    SIM SNR compares the simulated validation output with the noiseless output.
    """
    clean = mixer_signals()
    y = clean.outputs[0]
    if algorithm == 'als' and ranks is None:
        ranks = [2 * M + 1] * (d - 1)
    if residual_tol is None:
        residual_tol = MIXER_MALS_TOL if algorithm == 'mals' else 1e-4

    rows = []
    for level in snr_levels:
        noisy = clean.with_outputs(add_noise(y, NoiseSpec(level, seed)).reshape(1, -1))
        train, _ = noisy.split(n_train)
        config = SolverConfig(algorithm=algorithm, ranks=ranks, residual_tol=residual_tol,
                              max_sweeps=max_sweeps, seed=seed)
        row = {'id_snr_db': None, 'validation_residual': None, 'seconds': None,
               'sim_snr_db': None, 'max_rank': None, 'error': None, 'target_snr_db': level}
        try:
            model, report = identify(train, 2, 1, M, d, config)
            Y_hat = simulate_series(model, noisy)[:, 0]
            row.update(
                id_snr_db=measure_snr(y[:n_train], noisy.outputs[0, :n_train]),
                validation_residual=relative_residual(noisy.outputs[0, n_train:], Y_hat[n_train:]),
                seconds=report.seconds,
                sim_snr_db=snr_db(y[n_train:], Y_hat[n_train:]),
                max_rank=model.max_rank,
            )
            print(f"  ✓ {level:g} dB: SIM SNR {row['sim_snr_db']:.1f} dB")
        except (VttnError, np.linalg.LinAlgError) as e:
            row['error'] = str(e) or type(e).__name__
            print(f"  ✗ {level:g} dB: {row['error']}")
        rows.append(row)
    return rows


class BenchTableGenerator:
    """Markdown and JSON rendering of benchmark rows"""

    DEGREE_COLUMNS = [
        ('degree', 'd'),
        ('method', 'method'),
        ('train_residual', 'train residual'),
        ('validation_residual', 'validation residual'),
        ('max_rank', 'max rank'),
        ('parameter_count', 'parameters'),
        ('full_count', '(pM+1)^d'),
        ('solution_norm', '‖V‖'),
        ('seconds', 'seconds'),
    ]

    MIXER_COLUMNS = [
        ('id_snr_db', 'ID SNR [dB]'),
        ('validation_residual', 'relative residual'),
        ('seconds', 'run time [s]'),
        ('sim_snr_db', 'SIM SNR [dB]'),
        ('max_rank', 'max rank'),
    ]

    def __init__(self, degree_rows: List[Dict] = None, mixer_rows: List[Dict] = None,
                 settings: Dict = None):
        self.degree_rows = pd.DataFrame(degree_rows or [])
        self.mixer_rows = pd.DataFrame(mixer_rows or [])
        self.settings = settings or {}

    @staticmethod
    def _format_value(key: str, value) -> str:
        """NA for missing cells"""
        if value is None or (isinstance(value, float) and np.isnan(value)):
            return 'NA'
        if key in ('train_residual', 'validation_residual', 'solution_norm'):
            return format_sci(value)
        if key in ('id_snr_db', 'sim_snr_db'):
            return f"{float(value):.1f}"
        if key == 'seconds':
            return f"{float(value):.2f}"
        if key == 'full_count':
            value = int(value)
            return f"{value:.4e}" if value >= 10 ** 6 else str(value)
        if isinstance(value, (float, np.floating)) and float(value).is_integer():
            return str(int(value))
        return str(value)

    def _table(self, frame: pd.DataFrame, columns) -> List[str]:
        lines = [
            "| " + " | ".join(title for _, title in columns) + " |",
            "|" + "|".join("---" for _ in columns) + "|",
        ]
        for record in frame.to_dict('records'):
            cells = [self._format_value(key, record.get(key)) for key, _ in columns]
            lines.append("| " + " | ".join(cells) + " |")
        return lines

    def generate_degree_table(self) -> str:
        lines = ["### Degree sweep", ""]
        if self.degree_rows.empty:
            return "\n".join(lines + ["(no rows)"])
        lines.extend(self._table(self.degree_rows, self.DEGREE_COLUMNS))
        failed = self.degree_rows[self.degree_rows['error'].notna()]
        if not failed.empty:
            lines.append("")
            for record in failed.to_dict('records'):
                lines.append(f"- d={record['degree']} {record['method']}: {record['error']}")
        return "\n".join(lines)

    def generate_mixer_table(self) -> str:
        lines = ["### Mixer noise sweep", ""]
        if self.mixer_rows.empty:
            return "\n".join(lines + ["(no rows)"])
        lines.extend(self._table(self.mixer_rows, self.MIXER_COLUMNS))
        return "\n".join(lines)

    def generate_all_tables(self) -> str:
        sections = ["## Benchmark", ""]
        for key, value in self.settings.items():
            sections.append(f"- {key}: {value}")
        sections.append("")
        sections.append("Run times are informational.")
        sections.append("")
        if not self.degree_rows.empty:
            sections.append(self.generate_degree_table())
            sections.append("")
        if not self.mixer_rows.empty:
            sections.append(self.generate_mixer_table())
            sections.append("")
        return "\n".join(sections)

    def export_to_json(self, output_path: Path):
        def plain(v):
            if isinstance(v, np.generic):
                v = v.item()
            # NaN is not valid JSON
            return None if isinstance(v, float) and np.isnan(v) else v

        def records(frame: pd.DataFrame) -> List[Dict]:
            return [{k: plain(v) for k, v in r.items()} for r in frame.to_dict('records')]

        export_data = {
            'generated_at': datetime.now().isoformat(),
            'settings': self.settings,
            'degree_rows': records(self.degree_rows),
            'mixer_rows': records(self.mixer_rows),
        }
        save_json(export_data, output_path)
        print(f"  ✓ JSON table written: {output_path}")

    def export_to_markdown(self, output_path: Path):
        with open(output_path, 'w', encoding='utf-8') as f:
            f.write(self.generate_all_tables())
        print(f"  ✓ Markdown table written: {output_path}")
