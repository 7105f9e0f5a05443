#!/usr/bin/env python3
"""
Tensor-network Volterra identification from the command line

Usage:
    python identify_volterra.py identify --data io.csv --p 1 --l 1 --M 7 --d 3 --algo mals --out model.vttn
    python identify_volterra.py simulate --model model.vttn --data inputs.csv --out yhat.csv [--at 42]
    python identify_volterra.py validate --model model.vttn --data io.csv [--start 700] [--reference clean.csv]
    python identify_volterra.py bench --degrees 2-4 --methods direct,mals,als --out-dir bench/
    python identify_volterra.py mixer --algo als --d 11 --out-dir mixer/

Exit codes: 0 success, 1 invalid flags or data, 2 max sweeps reached without convergence.
"""
import argparse
import logging
import sys
from pathlib import Path

from bench_table import METHODS, BenchTableGenerator, run_degree_bench, run_mixer_bench
from datagen import BENCH_N, DEFAULT_TRAIN_N, MIXER_SNR_LEVELS
from errors import InvalidArguments, ShapeMismatch, VttnError
from model_io import load_csv, load_model, read_report, save_model, save_outputs, write_report
from regressor import regressor_row
from oracle import solution_norm_report, solve_direct
from solvers import SolverConfig, SvdTolPolicy, identify
from tn_model import full_count_float, full_count_saturated, simulate_sample, simulate_series
from utils import parse_int_list, relative_residual, save_json, setup_logging, snr_db

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NOT_CONVERGED = 2


def banner(title: str):
    print("\n" + "=" * 60)
    print(title)
    print("=" * 60 + "\n")


def parse_svd_tol(text: str) -> SvdTolPolicy:
    """'machine', 'abs:<tau>', 'rel:<fraction>' or 'res:<fraction>'"""
    if text == 'machine':
        return SvdTolPolicy.machine()
    kind, _, value = text.partition(':')
    try:
        if kind == 'abs':
            return SvdTolPolicy.absolute(float(value))
        if kind == 'rel':
            return SvdTolPolicy.relative(float(value))
        if kind == 'res':
            return SvdTolPolicy.residual(float(value))
    except ValueError:
        pass
    raise InvalidArguments(
        f"--svd-tol must be machine, abs:<tau>, rel:<fraction> or res:<fraction>, got {text!r}")


def default_train_n(n_samples: int) -> int:
    """First 700 of 5000 samples, otherwise everything"""
    return DEFAULT_TRAIN_N if n_samples == BENCH_N else n_samples


def cmd_identify(args) -> int:
    banner(f"Identify: {args.algo.upper()}, p={args.p} l={args.l} M={args.M} d={args.d}")

    data = load_csv(args.data)
    if data.p != args.p or data.l != args.l:
        raise ShapeMismatch(f"{args.data} has p={data.p}, l={data.l}; flags say p={args.p}, l={args.l}")
    train_n = args.train_n if args.train_n is not None else default_train_n(data.N)
    train, _ = data.split(train_n)
    print(f"Loaded {data.N} samples, identifying on the first {train_n}")

    config = SolverConfig(
        algorithm=args.algo,
        ranks=parse_int_list(args.ranks) if args.ranks else None,
        residual_tol=args.tol,
        max_sweeps=args.max_sweeps,
        svd_tol_policy=parse_svd_tol(args.svd_tol),
        max_rank=args.max_rank,
        seed=args.seed,
        prehistory=args.prehistory,
        allow_underdetermined=args.allow_underdetermined,
    )
    model, report = identify(train, args.p, args.l, args.M, args.d, config)

    out = Path(args.out)
    save_model(out, model)
    print(f"  ✓ model written: {out}")

    summary = model.describe()
    extra = {
        'p': args.p, 'l': args.l, 'M': args.M, 'd': args.d,
        'seed': args.seed, 'train_n': train_n,
        'parameter_count': summary['parameter_count'],
        'full_count': summary['full_count'],
        'full_count_saturated': summary['full_count_saturated'],
    }
    if train_n < data.N:
        Y_hat = simulate_series(model, data)
        extra['validation_residual'] = relative_residual(data.Y[train_n:], Y_hat[train_n:])
    report_path = Path(args.report) if args.report else out.with_name(out.name + '.report.txt')
    write_report(report_path, report, extra)
    print(f"  ✓ report written: {report_path}")

    print(f"\nranks: {model.ranks}")
    print(f"parameters: {summary['parameter_count']} of {full_count_float(args.p, args.M, args.d) * args.l:.6g} "
          f"(compression {summary['compression_ratio']:.3g}x)")
    print(f"final training residual: {report.final_residual:.3e} after {report.sweeps_used} sweeps")
    if 'validation_residual' in extra:
        print(f"validation residual: {extra['validation_residual']:.3e}")

    if report.converged:
        print("\n✓ converged")
        return EXIT_OK
    print(f"\n✗ not converged within {args.max_sweeps} sweeps (model written anyway)")
    return EXIT_NOT_CONVERGED


def cmd_simulate(args) -> int:
    banner("Simulate")
    model = load_model(args.model)
    data = load_csv(args.data)
    if args.at is not None:
        row = regressor_row(data, args.at, model.M)
        y_t = simulate_sample(model, row.u_t)
        print(f"u_t at t={row.t}: {row.u_t.tolist()}")
        print(f"y(t): {y_t.tolist()}")
        if args.json:
            save_json({'t': row.t, 'u_t': row.u_t.tolist(), 'y': y_t.tolist()}, Path(args.json))
        return EXIT_OK
    if not args.out:
        raise InvalidArguments("simulate needs --out unless --at picks a single sample")
    Y_hat = simulate_series(model, data)
    save_outputs(args.out, Y_hat)
    print(f"  ✓ {data.N} samples simulated: {args.out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    banner("Validate")
    model = load_model(args.model)
    data = load_csv(args.data)
    if data.l != model.l:
        raise ShapeMismatch(f"{args.data} has {data.l} outputs, model has l={model.l}")
    if not 0 <= args.start < data.N:
        raise InvalidArguments(f"--start {args.start} out of range 0..{data.N - 1}")

    Y_hat = simulate_series(model, data)
    metrics = {'samples': data.N - args.start,
               'relative_residual': relative_residual(data.Y[args.start:], Y_hat[args.start:])}
    print(f"relative residual: {metrics['relative_residual']:.6e}")

    if args.reference:
        reference = load_csv(args.reference)
        if reference.N != data.N or reference.l != model.l:
            raise ShapeMismatch("reference outputs do not line up with the data")
        metrics['sim_snr_db'] = snr_db(reference.Y[args.start:], Y_hat[args.start:])
        print(f"simulated-output SNR: {metrics['sim_snr_db']:.2f} dB")

    if args.report:
        stored = read_report(args.report)
        metrics['report_final_residual'] = stored.get('final_residual')
        print(f"final residual in report: {stored.get('final_residual')}")

    if args.oracle:
        direct = solve_direct(data.slice(0, args.start or None), model.p, model.l, model.M, model.d)
        model_norm, direct_norm = solution_norm_report(model, direct)
        metrics.update(model_norm=model_norm, minimal_norm=direct_norm)
        print(f"||V|| model: {model_norm:.6e}, minimal-norm solution: {direct_norm:.6e}")

    if args.json:
        save_json(metrics, Path(args.json))
    return EXIT_OK


def cmd_bench(args) -> int:
    banner("Benchmark: decaying exponential kernels")
    degrees = parse_int_list(args.degrees)
    methods = [m.strip() for m in args.methods.split(',') if m.strip()]
    rows = run_degree_bench(
        degrees, methods, seed=args.seed, N=args.samples, n_train=args.train_n,
        residual_tol=args.tol, max_sweeps=args.max_sweeps, max_rank=args.max_rank,
        allow_underdetermined=args.allow_underdetermined,
    )
    settings = {'M': 7, 'N': args.samples, 'train_n': args.train_n, 'seed': args.seed,
                'residual_tol': args.tol, 'max_sweeps': args.max_sweeps}
    return _export(BenchTableGenerator(degree_rows=rows, settings=settings), args.out_dir, 'bench')


def cmd_mixer(args) -> int:
    banner(f"Mixer noise sweep: {args.algo.upper()}, M={args.M} d={args.d}")
    levels = [float(v) for v in args.snr.split(',')] if args.snr else list(MIXER_SNR_LEVELS)
    full, saturated = full_count_saturated(2, args.M, args.d)
    print(f"Volterra tensor would hold {full_count_float(2, args.M, args.d):.4g} entries per output")
    rows = run_mixer_bench(
        algorithm=args.algo, d=args.d, M=args.M, snr_levels=levels, seed=args.seed,
        n_train=args.train_n, residual_tol=args.tol, max_sweeps=args.max_sweeps,
        ranks=parse_int_list(args.ranks) if args.ranks else None,
    )
    settings = {'algorithm': args.algo, 'M': args.M, 'd': args.d, 'train_n': args.train_n,
                'seed': args.seed, 'residual_tol': args.tol, 'full_count': full,
                'full_count_saturated': saturated}
    return _export(BenchTableGenerator(mixer_rows=rows, settings=settings), args.out_dir, 'mixer')


def _export(generator: BenchTableGenerator, out_dir: str, stem: str) -> int:
    print("\n" + generator.generate_all_tables())
    if out_dir:
        target = Path(out_dir)
        target.mkdir(parents=True, exist_ok=True)
        generator.export_to_json(target / f'{stem}.json')
        generator.export_to_markdown(target / f'{stem}.md')
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """Flag errors exit with 1; 2 is reserved for non-convergence"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(description="Tensor-network identification of MIMO Volterra systems")
    parser.add_argument('--verbose', action='store_true', help="debug logging")
    parser.add_argument('--quiet', action='store_true', help="warnings only")
    sub = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)

    p = sub.add_parser('identify', help="identify a model from a CSV time series")
    p.add_argument('--data', required=True)
    p.add_argument('--p', type=int, required=True)
    p.add_argument('--l', type=int, required=True)
    p.add_argument('--M', type=int, required=True)
    p.add_argument('--d', type=int, required=True)
    p.add_argument('--algo', choices=['als', 'mals'], default='mals')
    p.add_argument('--ranks', help="r1,...,r_{d-1} (ALS)")
    p.add_argument('--tol', type=float, default=1e-4, help="relative residual tolerance")
    p.add_argument('--max-sweeps', type=int, default=50)
    p.add_argument('--max-rank', type=int, default=50)
    p.add_argument('--svd-tol', default='machine',
                   help="machine, abs:<tau>, rel:<fraction> or res:<fraction of ||y||>")
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--train-n', type=int, default=None)
    p.add_argument('--prehistory', choices=['zero', 'trim'], default='zero')
    p.add_argument('--allow-underdetermined', action='store_true',
                   help="take minimal-norm solutions when a reduced system has fewer rows than unknowns")
    p.add_argument('--out', required=True)
    p.add_argument('--report', help="report path (default: <out>.report.txt)")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser('simulate', help="simulate a model on input samples")
    p.add_argument('--model', required=True)
    p.add_argument('--data', required=True)
    p.add_argument('--out')
    p.add_argument('--at', type=int, help="print u_t and y(t) for one sample instead")
    p.add_argument('--json', help="with --at, write u_t and y(t) as JSON")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser('validate', help="relative residual of a model on measured data")
    p.add_argument('--model', required=True)
    p.add_argument('--data', required=True)
    p.add_argument('--start', type=int, default=0, help="first sample that is scored")
    p.add_argument('--reference', help="CSV with noiseless outputs for the simulated-output SNR")
    p.add_argument('--report', help="identify report to compare against")
    p.add_argument('--oracle', action='store_true', help="compare norms with the direct solution")
    p.add_argument('--json', help="write the metrics as JSON")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser('bench', help="degree sweep on the decaying-exponential system")
    p.add_argument('--degrees', required=True, help="e.g. 2-6 or 2,3,4")
    p.add_argument('--methods', default=','.join(METHODS))
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--samples', type=int, default=BENCH_N)
    p.add_argument('--train-n', type=int, default=DEFAULT_TRAIN_N)
    p.add_argument('--tol', type=float, default=1e-4)
    p.add_argument('--max-sweeps', type=int, default=50)
    p.add_argument('--max-rank', type=int, default=50)
    p.add_argument('--allow-underdetermined', action='store_true')
    p.add_argument('--out-dir')
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser('mixer', help="noisy double-balanced mixer sweep")
    p.add_argument('--algo', choices=['als', 'mals'], default='als')
    p.add_argument('--M', type=int, default=2)
    p.add_argument('--d', type=int, default=11)
    p.add_argument('--ranks', help="fixed ALS ranks (default 2M+1)")
    p.add_argument('--snr', help="comma-separated ID SNR levels in dB")
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--train-n', type=int, default=DEFAULT_TRAIN_N)
    p.add_argument('--tol', type=float, default=None, help="default 1e-4 (als) or 0.5 (mals)")
    p.add_argument('--max-sweeps', type=int, default=10)
    p.add_argument('--out-dir')
    p.set_defaults(func=cmd_mixer)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    setup_logging(level)
    try:
        return args.func(args)
    except VttnError as e:
        print(f"✗ {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == '__main__':
    sys.exit(main())
