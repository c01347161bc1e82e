"""Exception types mapped to distinct CLI exit codes."""


class DataError(ValueError):
    """Bad input data: parse failures, non-finite values, shape mismatches."""


class NumericsError(RuntimeError):
    """Numerical failure inside a solver step (e.g. Cholesky on a non-PD matrix)."""
