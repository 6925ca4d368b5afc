"""Joint estimation of the lag matrices from stratified regression rows.

Fitting decomposes into one least-squares subproblem per node over the rows
at which that node was not intervened upon; the L1-penalized variant runs
cyclic coordinate descent through the kernel backend.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from . import _backend
from .dataset import IndexPartition, RegressionRow, row_arrays
from .errors import DataError
from .model import Recording, VarModel, lagged_regressors

OLS = "ols"
LASSO = "lasso"


@dataclass(frozen=True, eq=False)
class StackedCoefficients:
    """All lag matrices side by side: a (dim, dim*lag) matrix whose row i is
    the coefficient row of node i, lag-1 block first."""

    dim: int
    lag: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (self.dim, self.dim * self.lag):
            raise DataError(
                f"stacked matrix has shape {m.shape}, expected {(self.dim, self.dim * self.lag)}"
            )
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_blocks(cls, blocks: Sequence[np.ndarray]) -> "StackedCoefficients":
        blocks = [np.asarray(b, dtype=float) for b in blocks]
        dim = blocks[0].shape[0]
        return cls(dim=dim, lag=len(blocks), matrix=np.hstack(blocks))

    @classmethod
    def from_model(cls, model: VarModel) -> "StackedCoefficients":
        return cls(dim=model.dim, lag=model.lag, matrix=model.stacked)

    def block(self, q: int) -> np.ndarray:
        """The lag-``q`` (1-based) coefficient matrix."""
        if not 1 <= q <= self.lag:
            raise DataError(f"lag index {q} out of range 1..{self.lag}")
        return self.matrix[:, (q - 1) * self.dim: q * self.dim]

    @property
    def blocks(self) -> list[np.ndarray]:
        return [self.block(q) for q in range(1, self.lag + 1)]


@dataclass(frozen=True)
class FitConfig:
    """Settings for a fit.

    ``penalty`` is the L1 weight (ignored by OLS), ``tolerance`` the
    convergence threshold on the largest coefficient change per cycle.
    ``standardize`` rescales regressor columns to unit norm internally;
    reported coefficients are always on the raw scale.
    """

    method: str = OLS
    penalty: float = 0.0
    max_iterations: int = 10_000
    tolerance: float = 1e-8
    standardize: bool = False

    def __post_init__(self):
        if self.method not in (OLS, LASSO):
            raise DataError(f"unknown fit method {self.method!r}")
        if self.penalty < 0:
            raise DataError(f"penalty must be >= 0, got {self.penalty}")
        if self.tolerance <= 0 or self.max_iterations < 1:
            raise DataError("tolerance must be > 0 and max_iterations >= 1")


@dataclass(frozen=True, eq=False)
class FitReport:
    """Result of a fit: the estimate plus per-node diagnostics.

    Nodes that failed (rank deficiency under OLS) carry a message in
    ``errors`` and a NaN coefficient row; the remaining nodes are still fit.
    """

    estimate: StackedCoefficients
    method: str
    objectives: dict = field(default_factory=dict)
    iterations: dict = field(default_factory=dict)
    converged: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.errors and all(self.converged.values())


def objective_stratified(coeffs: StackedCoefficients,
                         rows_by_node: Mapping[int, Sequence[RegressionRow]]) -> float:
    """Sum over nodes of the squared residuals on that node's eligible rows."""
    total = 0.0
    for node, rows in rows_by_node.items():
        if not rows:
            continue
        X, y = row_arrays(rows)
        r = y - X @ coeffs.matrix[node - 1]
        total += float(r @ r)
    return total


def objective_naive(coeffs: StackedCoefficients,
                    data: Sequence[tuple[Recording, IndexPartition]]) -> float:
    """Squared error summed per time step: full-vector residuals on
    observational steps, residuals with the intervened coordinate deleted on
    interventional steps. Equals ``objective_stratified`` on the same data."""
    total = 0.0
    for recording, part in data:
        if recording.dim != coeffs.dim:
            raise DataError(
                f"recording dim {recording.dim} does not match coefficients dim {coeffs.dim}"
            )
        xbar = lagged_regressors(recording.values, coeffs.lag)
        preds = xbar @ coeffs.matrix.T
        resid = recording.values[coeffs.lag:] - preds
        for t in range(coeffs.lag + 1, recording.length + 1):
            row = resid[t - coeffs.lag - 1]
            if t in part.observational:
                total += float(row @ row)
            else:
                for i in range(1, part.dim + 1):
                    if t in part.intervened[i]:
                        kept = np.delete(row, i - 1)
                        total += float(kept @ kept)
                        break
    return total


def _node_problem(rows: Sequence[RegressionRow], dim: int, lag: int):
    X, y = row_arrays(rows)
    if X.size == 0:
        X = np.empty((0, dim * lag))
    elif X.shape[1] != dim * lag:
        raise DataError(f"rows have {X.shape[1]} regressors, expected {dim * lag}")
    return X, y


def fit_ols(rows_by_node: Mapping[int, Sequence[RegressionRow]], dim: int,
            lag: int) -> FitReport:
    """Per-node ordinary least squares via SVD (rank revealing).

    A node whose design has fewer rows than coefficients, or whose singular
    spectrum is numerically rank deficient, is reported in ``errors`` with a
    condition estimate instead of being silently pseudo-inverted.
    """
    p = dim * lag
    theta = np.full((dim, p), np.nan)
    objectives, iters, converged, errors = {}, {}, {}, {}
    for node in range(1, dim + 1):
        X, y = _node_problem(rows_by_node.get(node, ()), dim, lag)
        if X.shape[0] < p:
            errors[node] = (
                f"node {node}: {X.shape[0]} rows < {p} coefficients; cannot fit by OLS"
            )
            converged[node] = False
            continue
        sol, _, rank, svals = np.linalg.lstsq(X, y, rcond=None)
        cond = float(svals[0] / svals[-1]) if svals[-1] > 0 else float("inf")
        if rank < p:
            errors[node] = (
                f"node {node}: design numerically rank deficient "
                f"(rank {rank} < {p}, condition estimate {cond:.3e})"
            )
            converged[node] = False
            continue
        theta[node - 1] = sol
        r = y - X @ sol
        objectives[node] = float(r @ r)
        iters[node] = 1
        converged[node] = True
    return FitReport(
        estimate=StackedCoefficients(dim=dim, lag=lag, matrix=theta),
        method=OLS, objectives=objectives, iterations=iters,
        converged=converged, errors=errors,
    )


def subgradient_violation(X: np.ndarray, y: np.ndarray, w: np.ndarray,
                          penalty: float) -> float:
    """Worst violation of the L1 stationarity conditions at ``w``.

    With ``g = 2 X'(y - Xw)``: zero coordinates need ``|g| <= penalty``,
    nonzero ones need ``g = penalty * sign(w)``; returns the largest excess.
    """
    g = 2.0 * X.T @ (y - X @ w)
    worst = 0.0
    for j in range(w.size):
        if w[j] == 0.0:
            worst = max(worst, abs(g[j]) - penalty)
        else:
            worst = max(worst, abs(g[j] - penalty * np.sign(w[j])))
    return max(worst, 0.0)


def fit_lasso(rows_by_node: Mapping[int, Sequence[RegressionRow]], dim: int,
              lag: int, config: Optional[FitConfig] = None) -> FitReport:
    """Per-node L1-penalized least squares by cyclic coordinate descent.

    Minimizes ``sum (x_it - theta_i . xbar_t)^2 + penalty * |theta_i|_1``
    for each node with exact soft-threshold updates, warm-started from zero.
    Cycling stops once the largest coefficient change drops to the tolerance
    AND the stationarity conditions are certified to within ten times the
    tolerance (the coefficient threshold is tightened as needed to get
    there). Non-convergence within ``max_iterations`` is flagged, not raised.
    """
    config = config or FitConfig(method=LASSO)
    p = dim * lag
    theta = np.zeros((dim, p))
    objectives, iters, converged, errors = {}, {}, {}, {}
    slack = 10.0 * config.tolerance
    for node in range(1, dim + 1):
        X, y = _node_problem(rows_by_node.get(node, ()), dim, lag)
        if X.shape[0] == 0:
            errors[node] = f"node {node}: no rows to fit"
            converged[node] = False
            theta[node - 1] = np.nan
            continue
        Xw = np.asfortranarray(X)
        scale = np.ones(p)
        if config.standardize:
            norms = np.sqrt(np.einsum("ij,ij->j", Xw, Xw))
            scale = np.where(norms > 0, norms, 1.0)
            Xw = np.asfortranarray(Xw / scale)
        w = np.zeros(p)
        total, ok, inner_tol = 0, False, float(config.tolerance)
        while total < config.max_iterations:
            n_iter, reached = _backend.lasso_cd(
                Xw, y.copy(), float(config.penalty), inner_tol,
                int(config.max_iterations) - total, w)
            total += n_iter
            if not reached:
                break
            if subgradient_violation(Xw, y, w, config.penalty) <= slack:
                ok = True
                break
            inner_tol *= 1e-2
            if inner_tol < 1e-300:
                break
        w = w / scale
        theta[node - 1] = w
        r = y - X @ w
        objectives[node] = float(r @ r) + config.penalty * float(np.abs(w * scale).sum())
        iters[node] = total
        converged[node] = ok
        if not ok:
            errors[node] = (
                f"node {node}: coordinate descent did not certify optimality "
                f"within {config.max_iterations} cycles"
            )
    return FitReport(
        estimate=StackedCoefficients(dim=dim, lag=lag, matrix=theta),
        method=LASSO, objectives=objectives, iterations=iters,
        converged=converged, errors=errors,
    )


def critical_penalty(rows_by_node: Mapping[int, Sequence[RegressionRow]]) -> float:
    """Smallest penalty at which the all-zero estimate is optimal for every
    node: twice the largest absolute regressor-response correlation."""
    worst = 0.0
    for rows in rows_by_node.values():
        if not rows:
            continue
        X, y = row_arrays(rows)
        worst = max(worst, float(np.max(np.abs(X.T @ y), initial=0.0)))
    return 2.0 * worst


def coefficient_mse(estimate: StackedCoefficients,
                    truth: StackedCoefficients) -> tuple[np.ndarray, float]:
    """Per-lag mean squared entry error, plus the mean over lags.

    ``mse[q-1] = (1 / dim^2) * sum_ij (truth_q[i,j] - estimate_q[i,j])^2``.
    """
    if (estimate.dim, estimate.lag) != (truth.dim, truth.lag):
        raise DataError(
            f"shape mismatch: estimate ({estimate.dim}, {estimate.lag}) vs "
            f"truth ({truth.dim}, {truth.lag})"
        )
    per_lag = np.array([
        float(np.mean((truth.block(q) - estimate.block(q)) ** 2))
        for q in range(1, truth.lag + 1)
    ])
    return per_lag, float(per_lag.mean())


def select_penalty(rows_by_node: Mapping[int, Sequence[RegressionRow]], dim: int,
                   lag: int, grid: Optional[Sequence[float]] = None, folds: int = 5,
                   config: Optional[FitConfig] = None) -> tuple[float, list[tuple[float, float]]]:
    """Pick the penalty from a log grid by K-fold validation error.

    Folds are contiguous blocks of each node's rows (time order preserved).
    Returns the winning penalty and the (penalty, validation SSE) table.
    """
    base = config or FitConfig(method=LASSO)
    if grid is None:
        top = critical_penalty(rows_by_node)
        if top == 0.0:
            return 0.0, [(0.0, 0.0)]
        grid = top * np.logspace(0.0, -4.0, 21)
    arrays = {n: row_arrays(rows) for n, rows in rows_by_node.items() if rows}
    table = []
    for lam in grid:
        total = 0.0
        for f in range(folds):
            fold_rows: dict[int, list[RegressionRow]] = {}
            holdout = {}
            for n, rows in rows_by_node.items():
                count = len(rows)
                lo, hi = f * count // folds, (f + 1) * count // folds
                fold_rows[n] = list(rows[:lo]) + list(rows[hi:])
                holdout[n] = (lo, hi)
            report = fit_lasso(fold_rows, dim, lag, replace(base, penalty=float(lam)))
            for n, (lo, hi) in holdout.items():
                if hi <= lo or n not in arrays:
                    continue
                X, y = arrays[n]
                r = y[lo:hi] - X[lo:hi] @ report.estimate.matrix[n - 1]
                total += float(r @ r)
        table.append((float(lam), total))
    best = min(table, key=lambda item: item[1])[0]
    return best, table


def empirical_noise_cov(residuals: np.ndarray) -> np.ndarray:
    """Second-moment estimate of the noise covariance from recovered
    residuals; rows containing NaN (initial block, destroyed positions) are
    dropped."""
    keep = residuals[np.isfinite(residuals).all(axis=1)]
    if keep.shape[0] == 0:
        raise DataError("no fully recoverable residual rows")
    return keep.T @ keep / keep.shape[0]
