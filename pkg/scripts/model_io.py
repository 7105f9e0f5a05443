#!/usr/bin/env python3
"""
Files on disk

- time series as CSV with header u1..up, y1..yl and an optional t column
- identified models in a small binary format (see docs/model_file_format.md)
- solver reports as key=value lines plus trace blocks
"""
import logging
import re
import zlib
from pathlib import Path
from typing import Dict, Optional

import numpy as np
import pandas as pd

from errors import (
    BadMagic,
    ChecksumMismatch,
    DatasetError,
    ModelFileError,
    TruncatedModelFile,
    UnsupportedVersion,
)
from regressor import TimeSeriesDataset
from tn_model import VolterraModel

logger = logging.getLogger('vttn.model_io')

MODEL_MAGIC = b'VTTN1'
MODEL_VERSION = 1
SCALAR_WIDTH = 8

CSV_FLOAT_FORMAT = '%.17g'

_COLUMN = re.compile(r'^([uy])(\d+)$')


def _channel_columns(columns) -> Dict[str, list]:
    found = {'u': [], 'y': []}
    for name in columns:
        if name == 't':
            continue
        match = _COLUMN.match(name)
        if not match:
            raise DatasetError(f"missing or malformed header: unexpected column {name!r}")
        found[match.group(1)].append((int(match.group(2)), name))
    for kind, items in found.items():
        items.sort()
        if [i for i, _ in items] != list(range(1, len(items) + 1)):
            raise DatasetError(f"{kind} columns must be numbered {kind}1..{kind}{len(items)}")
        found[kind] = [name for _, name in items]
    if not found['u']:
        raise DatasetError("missing header: no input columns u1..up")
    return found


def load_csv(path) -> TimeSeriesDataset:
    """Read a time series; rows are samples"""
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise DatasetError(f"{path}: empty file")
    except pd.errors.ParserError as e:
        raise DatasetError(f"{path}: ragged rows ({e})")

    df.columns = [str(c).strip() for c in df.columns]
    channels = _channel_columns(df.columns)
    if len(df) == 0:
        raise DatasetError(f"{path}: header only, the dataset is empty")

    values = {}
    for name in df.columns:
        raw = df[name]
        numeric = pd.to_numeric(raw, errors='coerce')
        bad = ~np.isfinite(numeric.to_numpy(dtype=np.float64))
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            cell = raw.iloc[row]
            if not isinstance(cell, str) or cell == '':
                raise DatasetError(f"{path}: row {row + 2} has no value in column {name} (ragged row)")
            raise DatasetError(f"{path}: row {row + 2}, column {name}: non-numeric value {cell!r}")
        # float() rounds correctly, %.17g text reads back bit-exact
        values[name] = raw.to_numpy(dtype=object).astype(np.float64)

    inputs = np.vstack([values[c] for c in channels['u']])
    outputs = np.vstack([values[c] for c in channels['y']]) if channels['y'] else None
    meta = {}
    sample_rate = None
    if 't' in values:
        meta['t'] = values['t']
        if len(values['t']) > 1:
            step = float(np.median(np.diff(values['t'])))
            sample_rate = 1.0 / step if step > 0 else None
    logger.debug(f"loaded {path}: p={inputs.shape[0]}, {len(channels['y'])} outputs, N={inputs.shape[1]}")
    return TimeSeriesDataset(inputs, outputs, sample_rate, meta)


def save_csv(path, data: TimeSeriesDataset, include_t: bool = True):
    """Write a time series with 17 significant digits"""
    columns = {}
    if include_t:
        t = data.meta.get('t')
        if t is None and data.sample_rate:
            t = np.arange(data.N) / data.sample_rate
        if t is not None:
            columns['t'] = np.asarray(t)
    for i, row in enumerate(data.inputs, 1):
        columns[f'u{i}'] = row
    for i, row in enumerate(data.outputs, 1):
        columns[f'y{i}'] = row
    pd.DataFrame(columns).to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)


def save_outputs(path, Y: np.ndarray):
    """Simulated outputs (N x l) as y1..yl columns"""
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    df = pd.DataFrame({f'y{i}': Y[:, i - 1] for i in range(1, Y.shape[1] + 1)})
    df.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)


def model_to_bytes(m: VolterraModel) -> bytes:
    header = np.asarray([MODEL_VERSION, m.p, m.l, m.M, m.d] + m.ranks, dtype='<u4').tobytes()
    payload = b''.join(np.asarray(c.vec(), dtype='<f8').tobytes() for c in m.cores)
    checksum = np.asarray([zlib.crc32(payload)], dtype='<u4').tobytes()
    return MODEL_MAGIC + header + bytes([SCALAR_WIDTH]) + payload + checksum


def model_from_bytes(raw: bytes) -> VolterraModel:
    if raw[:len(MODEL_MAGIC)] != MODEL_MAGIC:
        raise BadMagic(f"not a model file: magic {raw[:len(MODEL_MAGIC)]!r}")
    pos = len(MODEL_MAGIC)

    def take_u4(count: int) -> np.ndarray:
        nonlocal pos
        end = pos + 4 * count
        if end > len(raw):
            raise TruncatedModelFile("model header is truncated")
        out = np.frombuffer(raw[pos:end], dtype='<u4').astype(np.int64)
        pos = end
        return out

    version = int(take_u4(1)[0])
    if version != MODEL_VERSION:
        raise UnsupportedVersion(f"model file version {version}, this build reads {MODEL_VERSION}")
    p, l, M, d = (int(v) for v in take_u4(4))
    ranks = [int(r) for r in take_u4(d + 1)]
    if pos >= len(raw):
        raise TruncatedModelFile("model header is truncated")
    width = raw[pos]
    pos += 1
    if width != SCALAR_WIDTH:
        raise UnsupportedVersion(f"scalar width {width} bytes, only {SCALAR_WIDTH} is supported")

    n = p * M + 1
    sizes = [ranks[k] * n * ranks[k + 1] for k in range(d)]
    payload_len = SCALAR_WIDTH * sum(sizes)
    if pos + payload_len + 4 > len(raw):
        raise TruncatedModelFile(
            f"payload needs {payload_len + 4} bytes, file has {len(raw) - pos} after the header"
        )
    if pos + payload_len + 4 < len(raw):
        raise ModelFileError(f"{len(raw) - pos - payload_len - 4} unexpected trailing bytes")
    payload = raw[pos:pos + payload_len]
    stored = int(np.frombuffer(raw[pos + payload_len:pos + payload_len + 4], dtype='<u4')[0])
    if zlib.crc32(payload) != stored:
        raise ChecksumMismatch("payload checksum does not match")

    flat = np.frombuffer(payload, dtype='<f8').astype(np.float64)
    cores, offset = [], 0
    for k, size in enumerate(sizes):
        shape = (ranks[k], n, ranks[k + 1])
        cores.append(flat[offset:offset + size].reshape(shape, order='F'))
        offset += size
    return VolterraModel.from_arrays(p, l, M, cores)


def save_model(path, m: VolterraModel):
    Path(path).write_bytes(model_to_bytes(m))


def load_model(path) -> VolterraModel:
    return model_from_bytes(Path(path).read_bytes())


def _fmt(value) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return CSV_FLOAT_FORMAT % value
    if isinstance(value, (list, tuple)):
        return ','.join(_fmt(v) for v in value)
    return str(value)


def write_report(path, report, extra: Optional[dict] = None):
    """
    Solver report as text

    key=value lines, then one value per line under [residual_trace]
    and [orthogonality_audit].
    """
    lines = [
        f"algorithm={report.algorithm}",
        f"converged={_fmt(report.converged)}",
        f"sweeps_used={report.sweeps_used}",
        f"final_residual={_fmt(float(report.final_residual))}",
        f"final_ranks={_fmt(list(report.final_ranks))}",
        f"max_rank={report.max_rank}",
        f"seconds={report.seconds:.3f}",
    ]
    for key, value in (extra or {}).items():
        lines.append(f"{key}={_fmt(value)}")
    lines.append('[residual_trace]')
    lines.extend(_fmt(float(v)) for v in report.residual_trace)
    lines.append('[orthogonality_audit]')
    lines.extend(_fmt(float(v)) for v in report.orthogonality_audit)
    Path(path).write_text('\n'.join(lines) + '\n', encoding='utf-8')


def _parse(text: str):
    if text in ('true', 'false'):
        return text == 'true'
    if ',' in text:
        return [_parse(part) for part in text.split(',')]
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def read_report(path) -> dict:
    out, block = {}, None
    for line in Path(path).read_text(encoding='utf-8').splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith('[') and line.endswith(']'):
            block = line[1:-1]
            out[block] = []
        elif block is not None:
            out[block].append(float(line))
        else:
            key, _, value = line.partition('=')
            out[key] = _parse(value)
    if isinstance(out.get('final_ranks'), int):
        out['final_ranks'] = [out['final_ranks']]
    return out
