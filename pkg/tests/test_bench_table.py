"""
Benchmark runs and their Markdown / JSON tables
"""
import math

import numpy as np

import pytest

import bench_table
from bench_table import BenchTableGenerator, degree_split, run_degree_bench, run_mixer_bench
from errors import InvalidArguments
from solvers import SvdTolPolicy
from utils import load_json


def _degree_rows():
    return [
        {'degree': 2, 'method': 'mals', 'train_residual': 1.5e-13, 'validation_residual': 2.0e-13,
         'max_rank': 6, 'full_count': 64, 'parameter_count': 96, 'solution_norm': 3.5, 'seconds': 0.01,
         'converged': True, 'error': None},
        {'degree': 7, 'method': 'direct', 'train_residual': None, 'validation_residual': None,
         'max_rank': None, 'full_count': 8 ** 7, 'parameter_count': None, 'seconds': None,
         'converged': None, 'error': 'NA (too large)'},
    ]


def test_degree_table_marks_missing_cells():
    table = BenchTableGenerator(degree_rows=_degree_rows()).generate_degree_table()
    lines = table.splitlines()
    assert lines[2].startswith("| d | method |")
    assert "| 2 | mals | 1.50e-13 | 2.00e-13 | 6 | 96 | 64 | 3.50e+00 | 0.01 |" in table
    assert "| 7 | direct | NA | NA | NA | NA | 2.0972e+06 | NA | NA |" in table
    assert "- d=7 direct: NA (too large)" in table


def test_mixer_table():
    rows = [{'id_snr_db': 25.0, 'validation_residual': 0.05, 'seconds': 1.5,
             'sim_snr_db': 37.2, 'max_rank': 5, 'error': None, 'target_snr_db': 25.0}]
    table = BenchTableGenerator(mixer_rows=rows).generate_mixer_table()
    assert "| 25.0 | 5.00e-02 | 1.50 | 37.2 | 5 |" in table


def test_empty_generator():
    generator = BenchTableGenerator()
    assert "(no rows)" in generator.generate_degree_table()
    assert "## Benchmark" in generator.generate_all_tables()


def test_exports(tmp_path):
    generator = BenchTableGenerator(degree_rows=_degree_rows(), settings={'M': 7, 'seed': 0})
    generator.export_to_json(tmp_path / 'bench.json')
    generator.export_to_markdown(tmp_path / 'bench.md')
    data = load_json(tmp_path / 'bench.json')
    assert data['settings'] == {'M': 7, 'seed': 0}
    assert data['degree_rows'][1]['train_residual'] is None
    assert data['degree_rows'][0]['full_count'] == 64
    assert data['mixer_rows'] == []
    assert "Run times are informational." in (tmp_path / 'bench.md').read_text(encoding='utf-8')


def test_degree_bench_argument_checks():
    with pytest.raises(InvalidArguments):
        run_degree_bench([])
    with pytest.raises(InvalidArguments):
        run_degree_bench([2], methods=['direct', 'newton'])


def test_small_degree_bench():
    rows = run_degree_bench([1, 2], N=300, n_train=150, M=3)
    assert [(r['degree'], r['method']) for r in rows] == [
        (1, 'direct'), (1, 'mals'), (1, 'als'), (2, 'direct'), (2, 'mals'), (2, 'als')]
    for row in rows:
        assert row['error'] is None, row['error']
        assert row['validation_residual'] < 1e-3, row
    for row in rows:
        if row['method'] in ('direct', 'mals'):
            assert row['validation_residual'] < 1e-8, row
    assert rows[3]['parameter_count'] == 16


def test_als_without_mals_is_recorded_as_error():
    rows = run_degree_bench([2], methods=['als'], N=200, n_train=100, M=2)
    assert len(rows) == 1 and 'MALS' in rows[0]['error']


def test_direct_method_is_gated():
    rows = run_degree_bench([7], methods=['direct'], N=50, n_train=40)
    assert rows[0]['error'].startswith('NA')


def test_short_mixer_run_beats_noise():
    rows = run_mixer_bench(algorithm='als', d=3, M=2, snr_levels=[25.0], max_sweeps=2)
    row = rows[0]
    assert row['error'] is None, row['error']
    assert row['id_snr_db'] == pytest.approx(25.0, abs=0.1)
    assert row['max_rank'] == 5
    assert math.isfinite(row['sim_snr_db']) and row['sim_snr_db'] > row['id_snr_db']


def test_bench_rows_carry_norms_and_model_summary(tmp_path):
    rows = run_degree_bench([2], N=200, n_train=120, M=2)
    direct, mals, als = rows
    assert direct['solution_norm'] == direct['minimal_norm'] > 0
    for row in (mals, als):
        assert row['minimal_norm'] == pytest.approx(direct['minimal_norm'], rel=1e-12)
        assert row['solution_norm'] >= row['minimal_norm'] * (1 - 1e-6)
        assert row['model']['max_rank'] == row['max_rank']
        assert row['model']['full_count'] == row['full_count'] == 9
        assert row['full_count_saturated'] is False
    BenchTableGenerator(degree_rows=rows).export_to_json(tmp_path / 'bench.json')
    exported = load_json(tmp_path / 'bench.json')['degree_rows']
    assert exported[1]['model']['parameter_count'] == mals['parameter_count']
    assert exported[0]['model'] is None


def test_linear_algebra_failures_are_recorded_per_cell(monkeypatch):
    def broken(*args, **kwargs):
        raise np.linalg.LinAlgError("SVD did not converge")

    monkeypatch.setattr(bench_table, 'solve_direct', broken)
    rows = run_degree_bench([1], methods=['direct', 'mals'], N=100, n_train=60, M=2)
    assert rows[0]['error'] == "SVD did not converge"
    assert rows[1]['error'] is None

    monkeypatch.setattr(bench_table, 'identify', broken)
    mixer = run_mixer_bench(algorithm='als', d=2, M=2, snr_levels=[25.0, 16.0], max_sweeps=1)
    assert [row['error'] for row in mixer] == ["SVD did not converge"] * 2


def test_degree_split_switches_to_residual_policy_when_underdetermined():
    assert degree_split(3, 1, 7, 1e-4, 50, False) == (SvdTolPolicy.machine(), 50, False)
    policy, cap, underdetermined = degree_split(5, 1, 7, 1e-4, 50, False)
    assert policy.kind == 'residual' and policy.value == pytest.approx(1e-5)
    assert cap == 8 and underdetermined
    assert degree_split(4, 1, 7, 1e-4, 6, False)[1] == 6
