"""
Shared helpers: logging, element budget, residuals, parsing
"""
import logging
import math

import numpy as np
import pytest

from errors import ElementBudgetExceeded, InvalidArguments
from utils import (
    DEFAULT_ELEMENT_BUDGET,
    check_budget,
    element_budget,
    format_sci,
    load_json,
    parse_int_list,
    relative_residual,
    save_json,
    setup_logging,
    snr_db,
)


def test_setup_logging_installs_one_handler():
    logger = setup_logging(logging.DEBUG)
    count = len(logger.handlers)
    assert setup_logging(logging.WARNING) is logger
    assert len(logger.handlers) == count == 1
    assert logger.level == logging.WARNING


def test_element_budget_from_environment(monkeypatch):
    monkeypatch.delenv('VTTN_ELEMENT_BUDGET', raising=False)
    assert element_budget() == DEFAULT_ELEMENT_BUDGET
    monkeypatch.setenv('VTTN_ELEMENT_BUDGET', '1e3')
    assert element_budget() == 1000
    for bad in ('lots', '0'):
        monkeypatch.setenv('VTTN_ELEMENT_BUDGET', bad)
        with pytest.raises(InvalidArguments):
            element_budget()


def test_check_budget_carries_sizes():
    check_budget(10, budget=10)
    with pytest.raises(ElementBudgetExceeded) as info:
        check_budget(11, budget=10, what="regression matrix")
    assert (info.value.requested, info.value.budget) == (11, 10)
    assert "regression matrix" in str(info.value)


def test_relative_residual_edge_cases():
    assert relative_residual([3.0, 4.0], [3.0, 4.0]) == 0.0
    assert relative_residual([3.0, 4.0], [0.0, 0.0]) == pytest.approx(1.0)
    assert relative_residual([0.0], [0.0]) == 0.0
    assert math.isinf(relative_residual([0.0], [1.0]))


def test_snr_db():
    y = np.array([1.0, -1.0, 1.0, -1.0])
    assert snr_db(y, 0.9 * y) == pytest.approx(20.0)
    assert math.isinf(snr_db(y, y))


def test_parse_int_list():
    assert parse_int_list('8,8,8') == [8, 8, 8]
    assert parse_int_list('2-5') == [2, 3, 4, 5]
    assert parse_int_list('2, 4-6') == [2, 4, 5, 6]
    assert parse_int_list(',') == []
    with pytest.raises(InvalidArguments):
        parse_int_list('8,x')


def test_format_sci_and_json(tmp_path):
    assert format_sci(1.5e-13) == "1.50e-13"
    assert format_sci(None) == "NA"
    save_json({'ranks': [1, 8, 1], 'note': 'μ'}, tmp_path / 'x.json')
    assert load_json(tmp_path / 'x.json') == {'ranks': [1, 8, 1], 'note': 'μ'}
