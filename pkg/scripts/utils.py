#!/usr/bin/env python3
"""
Utility functions for tensor-network Volterra identification
"""
import os
import json
import logging
from sys import stdout
from pathlib import Path

import numpy as np

from errors import ElementBudgetExceeded, InvalidArguments

# Machine precision of IEEE double
MACHINE_EPS = 2.0 ** -52

DEFAULT_ELEMENT_BUDGET = 10 ** 8


def setup_logging(level=logging.INFO) -> logging.Logger:
    """Configure the package logger"""
    logger = logging.getLogger('vttn')
    logger.setLevel(level)
    if not logger.handlers:
        sh = logging.StreamHandler(stdout)
        sh.setFormatter(logging.Formatter(fmt='%(asctime)s %(levelname)s - %(message)s'))
        logger.addHandler(sh)
    return logger


def save_json(data: dict, filepath: Path):
    """Save data as JSON file"""
    with open(filepath, 'w', encoding='utf-8') as f:
        json.dump(data, f, ensure_ascii=False, indent=2)


def load_json(filepath: Path) -> dict:
    """Load JSON file"""
    with open(filepath, 'r', encoding='utf-8') as f:
        return json.load(f)


def element_budget() -> int:
    """
    Dense element budget

    Read from VTTN_ELEMENT_BUDGET, defaults to 10**8.
    """
    raw = os.environ.get('VTTN_ELEMENT_BUDGET')
    if raw is None or raw.strip() == '':
        return DEFAULT_ELEMENT_BUDGET
    try:
        value = int(float(raw))
    except ValueError:
        raise InvalidArguments(f"VTTN_ELEMENT_BUDGET is not a number: {raw!r}")
    if value < 1:
        raise InvalidArguments(f"VTTN_ELEMENT_BUDGET must be positive, got {value}")
    return value


def check_budget(requested: int, budget: int = None, what: str = "dense tensor") -> None:
    """Raise ElementBudgetExceeded if requested elements exceed the budget"""
    limit = element_budget() if budget is None else budget
    if requested > limit:
        raise ElementBudgetExceeded(requested, limit, what)


def relative_residual(y, y_hat) -> float:
    """||y - y_hat||_F / ||y||_F, 0 when both are zero"""
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    denom = np.linalg.norm(y)
    num = np.linalg.norm(y - y_hat)
    if denom == 0.0:
        return 0.0 if num == 0.0 else float('inf')
    return float(num / denom)


def snr_db(reference, estimate) -> float:
    """20*log10(||reference|| / ||reference - estimate||)"""
    reference = np.asarray(reference, dtype=float)
    err = np.linalg.norm(reference - np.asarray(estimate, dtype=float))
    if err == 0.0:
        return float('inf')
    return float(20.0 * np.log10(np.linalg.norm(reference) / err))


def format_sci(num, digits=2):
    """Format a residual or count in scientific notation"""
    if num is None:
        return "NA"
    try:
        return f"{float(num):.{digits}e}"
    except (ValueError, TypeError):
        return str(num)


def parse_int_list(text: str) -> list:
    """
    Parse '8,8,8' or '2-5' into a list of ints
    Examples:
        '8,8,8' -> [8, 8, 8]
        '2-5' -> [2, 3, 4, 5]
        '2,4-6' -> [2, 4, 5, 6]
    """
    values = []
    for part in text.split(','):
        part = part.strip()
        if not part:
            continue
        try:
            if '-' in part[1:]:
                lo, hi = part.split('-', 1)
                values.extend(range(int(lo), int(hi) + 1))
            else:
                values.append(int(part))
        except ValueError:
            raise InvalidArguments(f"not an integer list: {text!r}")
    return values
