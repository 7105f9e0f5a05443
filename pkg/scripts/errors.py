#!/usr/bin/env python3
"""
Exception hierarchy for the tensor-network Volterra toolkit
"""


class VttnError(Exception):
    """Base class for all errors raised by this package"""


class ShapeMismatch(VttnError, ValueError):
    """Dimensions, modes or channel counts do not agree"""


class InvalidArguments(VttnError, ValueError):
    """Invalid configuration, rank chain or index"""


class ElementBudgetExceeded(VttnError, MemoryError):
    """A dense object would exceed the configured element budget"""

    def __init__(self, requested: int, budget: int, what: str = "dense tensor"):
        self.requested = requested
        self.budget = budget
        super().__init__(
            f"{what} needs {requested} elements, budget is {budget} "
            f"(raise VTTN_ELEMENT_BUDGET to override)"
        )


class UnderdeterminedError(VttnError):
    """Reduced system has fewer rows than unknowns"""

    def __init__(self, core_index: int, rows: int, unknowns: int, pair: bool = False):
        self.core_index = core_index
        self.rows = rows
        self.unknowns = unknowns
        self.pair = pair
        what = f"super-core ({core_index}, {core_index + 1})" if pair else f"core {core_index}"
        super().__init__(
            f"underdetermined {what}: lN = {rows} rows < {unknowns} unknowns; "
            f"increase N or reduce ranks"
        )


class DatasetError(VttnError, ValueError):
    """Time-series file could not be parsed"""


class ZeroSignalError(VttnError, ValueError):
    """Finite SNR requested for an all-zero signal"""


class ModelFileError(VttnError):
    """Model file could not be read"""


class BadMagic(ModelFileError):
    pass


class UnsupportedVersion(ModelFileError):
    pass


class ChecksumMismatch(ModelFileError):
    pass


class TruncatedModelFile(ModelFileError):
    pass
