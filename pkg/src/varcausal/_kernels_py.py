"""Pure-numpy implementations of the hot kernels.

Same call contracts as the compiled module ``varcausal._kernels``; the
active implementation is chosen in ``varcausal._backend``.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def forward_recursion(theta, values, drive, lag, start_row,
                      override_step, override_node, override_rows):
    """Run the linear lagged recursion forward in time, in place.

    values[t] = theta @ xbar(t) + drive[t] for t = start_row .. T-1, where
    xbar(t) stacks rows t-1, t-2, ..., t-lag of ``values``. ``override_*``
    (sorted by step, at most one entry per step) replace the coefficient row
    of one coordinate at one step; the drive term still applies there.

    Parameters
    ----------
    theta : (D, D*lag) ndarray
        Coefficient rows, lag-1 block first.
    values : (T, D) ndarray
        Output buffer; rows before ``start_row`` hold the initial conditions.
    drive : (T, D) ndarray
        Additive forcing per step (noise, injected signals, ...).
    lag, start_row : int
    override_step, override_node : (n,) int64 ndarrays
        0-based row index and 0-based coordinate of each override.
    override_rows : (n, D*lag) ndarray
        Replacement coefficient row per override.
    """
    n_steps = values.shape[0]
    k = 0
    n_ov = override_step.shape[0]
    for t in range(start_row, n_steps):
        xbar = values[t - lag:t][::-1].reshape(-1)
        row = theta @ xbar + drive[t]
        while k < n_ov and override_step[k] == t:
            j = override_node[k]
            row[j] = override_rows[k] @ xbar + drive[t, j]
            k += 1
        values[t] = row


def lasso_cd(X, y, penalty, tol, max_iter, w):
    """Cyclic coordinate descent for ``||y - X w||^2 + penalty * ||w||_1``.

    Updates ``w`` in place with exact soft-threshold steps, cycling over
    columns in index order, until the largest coefficient change in a full
    cycle is <= ``tol`` or ``max_iter`` cycles have run.

    Returns
    -------
    (iterations, converged) : tuple[int, bool]
    """
    n_features = X.shape[1]
    col_norms = np.einsum("ij,ij->j", X, X)
    resid = y - X @ w
    half = 0.5 * penalty
    for it in range(max_iter):
        max_change = 0.0
        for j in range(n_features):
            norm_j = col_norms[j]
            if norm_j == 0.0:
                continue
            old = w[j]
            if old != 0.0:
                resid += old * X[:, j]
            rho = X[:, j] @ resid
            new = np.sign(rho) * max(abs(rho) - half, 0.0) / norm_j
            w[j] = new
            if new != 0.0:
                resid -= new * X[:, j]
            change = abs(new - old)
            if change > max_change:
                max_change = change
        if max_change <= tol:
            return it + 1, True
    return max_iter, False
