"""Rank-checked least squares shared by the regression baselines and the
customer-value pre-estimation.

The solver uses an orthogonal decomposition (SVD via ``numpy.linalg.lstsq``)
rather than normal equations.  Rank handling is explicit: dependent columns
are detected with an incremental Gram-Schmidt sweep that prefers earlier
columns, so an intercept or base regressor is never discarded in favor of a
later interaction term.
"""

import logging

import numpy as np

from .errors import DataError, RankDeficiencyError

logger = logging.getLogger(__name__)

RANK_TOL = 1e-8


def find_dependent_columns(matrix, tol=RANK_TOL):
    """Split column indices of ``matrix`` into (independent, dependent).

    A column is dependent when its residual after projection on the
    previously kept columns has norm below ``tol`` relative to the column
    norm (or absolutely, for an all-zero column).
    """
    matrix = np.asarray(matrix, dtype=float)
    n_rows, n_cols = matrix.shape
    basis = np.zeros((n_rows, 0))
    independent = []
    dependent = []
    for j in range(n_cols):
        col = matrix[:, j]
        norm = np.linalg.norm(col)
        if norm <= tol:
            dependent.append(j)
            continue
        residual = col - basis @ (basis.T @ col)
        # One re-orthogonalization pass keeps the test stable for nearly
        # dependent columns.
        residual = residual - basis @ (basis.T @ residual)
        res_norm = np.linalg.norm(residual)
        if res_norm <= tol * norm:
            dependent.append(j)
        else:
            independent.append(j)
            basis = np.hstack([basis, (residual / res_norm)[:, None]])
    return independent, dependent


def least_squares(matrix, response, column_names=None, drop_collinear=False, tol=RANK_TOL):
    """Solve ``matrix @ coef ~ response`` with explicit rank handling.

    Returns ``(coefficients, fitted, dropped_names)``.  When the design is
    rank deficient, the default is to raise :class:`RankDeficiencyError`
    naming the dependent columns; with ``drop_collinear=True`` the dependent
    columns are dropped with a warning and their coefficients are reported
    as zero.
    """
    matrix = np.asarray(matrix, dtype=float)
    response = np.asarray(response, dtype=float)
    if matrix.ndim != 2:
        raise DataError(f"design matrix must be 2-d, got shape {matrix.shape}")
    if matrix.shape[0] == 0:
        raise DataError("design matrix has zero rows")
    if response.shape != (matrix.shape[0],):
        raise DataError(
            f"response length {response.shape} does not match design rows {matrix.shape[0]}"
        )
    if column_names is None:
        column_names = [f"col_{j}" for j in range(matrix.shape[1])]
    if len(column_names) != matrix.shape[1]:
        raise DataError("column_names length does not match design columns")

    independent, dependent = find_dependent_columns(matrix, tol=tol)
    dropped_names = tuple(column_names[j] for j in dependent)
    if dependent:
        if not drop_collinear:
            raise RankDeficiencyError(
                "design matrix is rank deficient; dependent columns: "
                + ", ".join(dropped_names),
                columns=dropped_names,
            )
        logger.warning(
            "dropping %d dependent design column(s): %s",
            len(dropped_names),
            ", ".join(dropped_names),
        )

    kept = matrix[:, independent]
    solution, _, _, _ = np.linalg.lstsq(kept, response, rcond=None)
    coefficients = np.zeros(matrix.shape[1])
    coefficients[independent] = solution
    fitted = kept @ solution
    return coefficients, fitted, dropped_names
