"""Linear lagged structural causal model: definition, interventions, simulation.

Conventions used throughout the package:

* time is 1-based; row ``t - 1`` of a values array holds the state at time
  ``t``, and the first ``lag`` rows of a recording are initial conditions;
* node identifiers are 1-based (matching the ``x1..xD`` file columns);
* stacked regressors put the lag-1 block first:
  ``xbar(t) = [x(t-1); x(t-2); ...; x(t-lag)]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from . import _backend
from .errors import DataError, ModelError, ScheduleError

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10

CLAMP = "clamp"
MODIFY = "modify"


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class VarModel:
    """A lag-``lag`` linear SCM on ``dim`` nodes with Gaussian noise.

    Parameters
    ----------
    dim : int
        Number of nodes.
    lag : int
        Model order; ``coeffs`` must hold this many matrices.
    coeffs : sequence of (dim, dim) arrays
        Linear gain matrices, lag 1 first.
    noise_cov : (dim, dim) array
        Covariance of the per-step Gaussian noise. Must be symmetric and
        positive semidefinite; the all-zero matrix (noise-free model) is
        allowed.
    """

    dim: int
    lag: int
    coeffs: tuple = field(repr=False)
    noise_cov: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.dim < 1 or self.lag < 1:
            raise ModelError(f"dim and lag must be >= 1, got dim={self.dim}, lag={self.lag}")
        blocks = tuple(_readonly(b) for b in self.coeffs)
        if len(blocks) != self.lag:
            raise ModelError(f"expected {self.lag} coefficient matrices, got {len(blocks)}")
        for q, b in enumerate(blocks, start=1):
            if b.shape != (self.dim, self.dim):
                raise ModelError(
                    f"coefficient matrix for lag {q} has shape {b.shape}, "
                    f"expected {(self.dim, self.dim)}"
                )
        cov = _readonly(self.noise_cov)
        if cov.shape != (self.dim, self.dim):
            raise ModelError(f"noise_cov has shape {cov.shape}, expected {(self.dim, self.dim)}")
        if np.max(np.abs(cov - cov.T), initial=0.0) > SYMMETRY_TOL:
            raise ModelError("noise_cov is not symmetric")
        if np.min(np.linalg.eigvalsh(cov)) < -PSD_TOL:
            raise ModelError("noise_cov is not positive semidefinite")
        object.__setattr__(self, "coeffs", blocks)
        object.__setattr__(self, "noise_cov", cov)

    @cached_property
    def stacked(self) -> np.ndarray:
        """Coefficient rows as a (dim, dim*lag) matrix, lag-1 block first."""
        return _readonly(np.hstack(self.coeffs))

    @cached_property
    def noise_factor(self) -> np.ndarray:
        """A matrix L with L @ L.T equal to ``noise_cov``.

        Cholesky when the covariance is positive definite; otherwise an
        eigendecomposition square root with negative eigenvalues clipped
        at zero, which also covers the singular and all-zero cases.
        """
        try:
            return np.linalg.cholesky(self.noise_cov)
        except np.linalg.LinAlgError:
            evals, evecs = np.linalg.eigh(self.noise_cov)
            return evecs * np.sqrt(np.clip(evals, 0.0, None))

    def node_rows(self, node: int) -> np.ndarray:
        """Stacked coefficient row of one node (1-based), length dim*lag."""
        _check_node(node, self.dim)
        return self.stacked[node - 1]


def toeplitz_covariance(dim: int, diag: float = 1.0, offdiag: float = 0.5) -> np.ndarray:
    """Tridiagonal Toeplitz covariance: ``diag`` on the diagonal, ``offdiag``
    on the first off-diagonals, zero elsewhere."""
    cov = np.zeros((dim, dim))
    np.fill_diagonal(cov, diag)
    idx = np.arange(dim - 1)
    cov[idx, idx + 1] = offdiag
    cov[idx + 1, idx] = offdiag
    return cov


def random_model(dim: int, lag: int, *, coeff_low: float = -0.5, coeff_high: float = 0.5,
                 sparsity: float = 0.3, noise_cov: Optional[np.ndarray] = None,
                 seed=None) -> VarModel:
    """Draw a model with uniform coefficient entries and Bernoulli zero-masking.

    Each entry is U(coeff_low, coeff_high) and independently set to zero with
    probability ``sparsity``. ``noise_cov`` defaults to the identity. ``seed``
    may be anything accepted by ``numpy.random.default_rng``.
    """
    rng = np.random.default_rng(seed)
    blocks = rng.uniform(coeff_low, coeff_high, size=(lag, dim, dim))
    keep = rng.random(size=(lag, dim, dim)) >= sparsity
    blocks = blocks * keep
    if noise_cov is None:
        noise_cov = np.eye(dim)
    return VarModel(dim=dim, lag=lag, coeffs=tuple(blocks), noise_cov=noise_cov)


@dataclass(frozen=True, eq=False)
class InterventionMechanism:
    """Replacement assignment for one node over one time window.

    ``mode`` is ``"clamp"`` (the node is forced to the injected signal;
    coefficients and noise are cut) or ``"modify"`` (replacement coefficient
    rows, a noise scale in [0, 1], and an injected signal). A clamp is the
    modify mechanism with zero rows, zero noise scale, and the clamped value
    as the signal. The mechanism owns its window: ``signal[k]`` is the value
    injected at absolute time ``t_start + k``.
    """

    mode: str
    t_start: int
    signal: np.ndarray = field(repr=False)
    rows: Optional[np.ndarray] = field(default=None, repr=False)
    noise_scale: float = 0.0

    def __post_init__(self):
        if self.mode not in (CLAMP, MODIFY):
            raise ScheduleError(f"unknown mechanism mode {self.mode!r}")
        sig = _readonly(np.atleast_1d(self.signal))
        if sig.ndim != 1 or sig.size == 0:
            raise ScheduleError("signal must be a non-empty 1-d sequence")
        if self.t_start < 1:
            raise ScheduleError(f"window must start at t >= 1, got t_start={self.t_start}")
        if not 0.0 <= self.noise_scale <= 1.0:
            raise ScheduleError(f"noise_scale must lie in [0, 1], got {self.noise_scale}")
        rows = self.rows
        if self.mode == CLAMP:
            if rows is not None or self.noise_scale != 0.0:
                raise ScheduleError("a clamp carries no coefficient rows and no noise")
        else:
            if rows is None:
                raise ScheduleError("modify mechanism requires replacement rows")
            rows = _readonly(rows)
            if rows.ndim != 2:
                raise ScheduleError("replacement rows must be a (lag, dim) array")
        object.__setattr__(self, "signal", sig)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "noise_scale", float(self.noise_scale))

    @property
    def t_end(self) -> int:
        return self.t_start + self.signal.size - 1

    def covers(self, t: int) -> bool:
        return self.t_start <= t <= self.t_end

    def signal_at(self, t: int) -> float:
        if not self.covers(t):
            raise ScheduleError(
                f"t={t} is outside the mechanism window [{self.t_start}, {self.t_end}]"
            )
        return float(self.signal[t - self.t_start])

    def flat_rows(self, dim: int, lag: int) -> np.ndarray:
        """Effective coefficient row of length dim*lag (zeros for a clamp)."""
        if self.mode == CLAMP:
            return np.zeros(dim * lag)
        if self.rows.shape != (lag, dim):
            raise ScheduleError(
                f"replacement rows have shape {self.rows.shape}, expected {(lag, dim)}"
            )
        return self.rows.reshape(-1)


@dataclass(frozen=True, eq=False)
class ScheduleEntry:
    """One intervention: a node (1-based) plus the mechanism governing it."""

    node: int
    mechanism: InterventionMechanism

    def __post_init__(self):
        if self.node < 1:
            raise ScheduleError(f"node must be >= 1, got {self.node}")

    @property
    def t_start(self) -> int:
        return self.mechanism.t_start

    @property
    def t_end(self) -> int:
        return self.mechanism.t_end


def clamp(node: int, t_start: int, signal) -> ScheduleEntry:
    """Entry forcing ``node`` to ``signal`` over ``[t_start, t_start+len-1]``."""
    return ScheduleEntry(node, InterventionMechanism(CLAMP, t_start, np.asarray(signal, dtype=float)))


def modify(node: int, t_start: int, rows, noise_scale: float, signal=None,
           length: Optional[int] = None) -> ScheduleEntry:
    """Entry replacing ``node``'s coefficient rows and noise scale.

    ``signal`` defaults to zeros; pass ``length`` to size the zero signal.
    """
    if signal is None:
        if length is None:
            raise ScheduleError("modify() needs a signal or an explicit window length")
        signal = np.zeros(length)
    mech = InterventionMechanism(MODIFY, t_start, np.asarray(signal, dtype=float),
                                 rows=np.asarray(rows, dtype=float), noise_scale=noise_scale)
    return ScheduleEntry(node, mech)


@dataclass(frozen=True, eq=False)
class InterventionSchedule:
    """A set of intervention entries with pairwise disjoint time windows.

    At most one node is intervened upon per time step, so any two entries
    whose windows share a step clash, whatever their nodes.
    """

    entries: tuple = ()

    def __post_init__(self):
        entries = tuple(self.entries)
        ordered = sorted(entries, key=lambda e: e.t_start)
        for a, b in zip(ordered, ordered[1:]):
            if b.t_start <= a.t_end:
                raise ScheduleError(
                    f"intervention windows clash: node {a.node} on [{a.t_start}, {a.t_end}] "
                    f"overlaps node {b.node} on [{b.t_start}, {b.t_end}]"
                )
        object.__setattr__(self, "entries", entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def entry_at(self, t: int) -> Optional[ScheduleEntry]:
        """The entry whose window covers time ``t``, or None."""
        for e in self.entries:
            if e.t_start <= t <= e.t_end:
                return e
        return None

    def max_node(self) -> int:
        return max((e.node for e in self.entries), default=0)

    def latest(self) -> int:
        return max((e.t_end for e in self.entries), default=0)


EMPTY_SCHEDULE = InterventionSchedule()


@dataclass(frozen=True, eq=False)
class Recording:
    """A realized trajectory; rows ``0..lag-1`` of ``values`` are initial
    conditions, and ``noise``, when present, is the realization that produced
    the rest (zero rows over the initial block)."""

    values: np.ndarray = field(repr=False)
    noise: Optional[np.ndarray] = field(default=None, repr=False)
    lag: int = 1

    def __post_init__(self):
        vals = _readonly(self.values)
        if vals.ndim != 2:
            raise DataError(f"values must be 2-d, got shape {vals.shape}")
        if self.lag < 1:
            raise DataError(f"lag must be >= 1, got {self.lag}")
        if vals.shape[0] < self.lag:
            raise DataError(
                f"recording of length {vals.shape[0]} cannot hold {self.lag} initial rows"
            )
        noise = self.noise
        if noise is not None:
            noise = _readonly(noise)
            if noise.shape != vals.shape:
                raise DataError(
                    f"noise shape {noise.shape} does not match values shape {vals.shape}"
                )
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "noise", noise)

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def initial(self) -> np.ndarray:
        return self.values[: self.lag]


def _check_node(node: int, dim: int):
    if not 1 <= node <= dim:
        raise DataError(f"node {node} out of range 1..{dim}")


def _validate_schedule_against(model: VarModel, schedule: InterventionSchedule,
                               horizon: int, earliest: int):
    for e in schedule:
        _check_node(e.node, model.dim)
        if e.t_start < earliest or e.t_end > horizon:
            raise ScheduleError(
                f"window [{e.t_start}, {e.t_end}] for node {e.node} lies outside "
                f"[{earliest}, {horizon}]"
            )
        if e.mechanism.mode == MODIFY and e.mechanism.rows.shape != (model.lag, model.dim):
            raise ScheduleError(
                f"replacement rows for node {e.node} have shape {e.mechanism.rows.shape}, "
                f"expected {(model.lag, model.dim)}"
            )


def _schedule_overrides(model: VarModel, schedule: InterventionSchedule):
    """Per-step kernel overrides (sorted by step) for every intervened (t, node)."""
    steps, nodes, rows = [], [], []
    for e in schedule:
        flat = e.mechanism.flat_rows(model.dim, model.lag)
        for t in range(e.t_start, e.t_end + 1):
            steps.append(t - 1)
            nodes.append(e.node - 1)
            rows.append(flat)
    if not steps:
        return (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64),
                np.empty((0, model.dim * model.lag)))
    order = np.argsort(np.asarray(steps, dtype=np.int64), kind="stable")
    return (np.asarray(steps, dtype=np.int64)[order],
            np.asarray(nodes, dtype=np.int64)[order],
            np.asarray(rows, dtype=float)[order])


def simulate(model: VarModel, schedule: Optional[InterventionSchedule] = None,
             horizon: int = 0, initial: Optional[np.ndarray] = None,
             seed=None, noise: Optional[np.ndarray] = None) -> Recording:
    """Generate a trajectory of length ``horizon`` under a schedule.

    Every non-intervened coordinate follows the model assignment; intervened
    coordinates follow their entry's mechanism. Noise is either drawn from
    N(0, noise_cov) via a seeded generator or supplied as a (horizon, dim)
    array (rows over the initial block are ignored). The realized noise is
    stored on the returned Recording, so the run can be reproduced or
    inverted exactly.

    Parameters
    ----------
    model : VarModel
    schedule : InterventionSchedule, optional
        Windows must lie within ``[lag+1, horizon]``.
    horizon : int
        Total length, at least ``lag``.
    initial : (lag, dim) array, optional
        Initial conditions; zeros when omitted.
    seed : int, optional
        Generator seed; required when ``noise`` is not given.
    noise : (horizon, dim) array, optional
        Noise realization to use instead of drawing one.
    """
    schedule = schedule if schedule is not None else EMPTY_SCHEDULE
    if horizon < model.lag:
        raise DataError(f"horizon {horizon} is shorter than the lag {model.lag}")
    _validate_schedule_against(model, schedule, horizon, earliest=model.lag + 1)

    if initial is None:
        initial = np.zeros((model.lag, model.dim))
    initial = np.asarray(initial, dtype=float)
    if initial.shape != (model.lag, model.dim):
        raise DataError(
            f"initial block has shape {initial.shape}, expected {(model.lag, model.dim)}"
        )

    if noise is None:
        if seed is None:
            raise DataError("simulate() needs a seed when no noise array is given")
        rng = np.random.default_rng(seed)
        draws = rng.standard_normal((horizon - model.lag, model.dim))
        w = np.zeros((horizon, model.dim))
        w[model.lag:] = draws @ model.noise_factor.T
    else:
        w = np.array(noise, dtype=float)
        if w.shape != (horizon, model.dim):
            raise DataError(f"noise shape {w.shape} does not match ({horizon}, {model.dim})")
        w[: model.lag] = 0.0
        if not np.isfinite(w[model.lag:]).all():
            raise DataError("noise array contains non-finite entries")

    drive = w.copy()
    for e in schedule:
        mech = e.mechanism
        col = e.node - 1
        rows_idx = np.arange(e.t_start - 1, e.t_end)
        if mech.noise_scale == 0.0:
            drive[rows_idx, col] = mech.signal
        else:
            drive[rows_idx, col] = mech.noise_scale * w[rows_idx, col] + mech.signal

    ov_step, ov_node, ov_rows = _schedule_overrides(model, schedule)
    values = np.zeros((horizon, model.dim))
    values[: model.lag] = initial
    _backend.forward_recursion(model.stacked, values, drive, model.lag, model.lag,
                               ov_step, ov_node, ov_rows)
    return Recording(values=values, noise=w, lag=model.lag)


def mechanism_output(model: VarModel, mechanism: InterventionMechanism, node: int,
                     history: np.ndarray, noise_value: float, t: int) -> float:
    """Value assigned to ``node`` at time ``t`` by an intervention mechanism.

    ``history`` holds the lag most recent state rows, most recent first.
    A clamp returns the injected signal exactly; a modify mechanism returns
    ``rows . history + noise_scale * noise_value + signal``.
    """
    _check_node(node, model.dim)
    u = mechanism.signal_at(t)
    if mechanism.mode == CLAMP:
        return u
    history = np.asarray(history, dtype=float)
    if history.shape != (model.lag, model.dim):
        raise DataError(
            f"history has shape {history.shape}, expected {(model.lag, model.dim)}"
        )
    out = float(mechanism.flat_rows(model.dim, model.lag) @ history.reshape(-1))
    if mechanism.noise_scale != 0.0:
        out += mechanism.noise_scale * float(noise_value)
    return out + u


def lagged_regressors(values: np.ndarray, lag: int) -> np.ndarray:
    """Stacked regressors for every t in (lag, T]: row k is
    ``[x(t-1); ...; x(t-lag)]`` for ``t = lag + 1 + k``."""
    length = values.shape[0]
    if length < lag + 1:
        raise DataError(f"need at least lag+1={lag + 1} rows, got {length}")
    return np.hstack([values[lag - q:length - q] for q in range(1, lag + 1)])


def recover_residuals(model: VarModel, recording: Recording,
                      schedule: Optional[InterventionSchedule] = None) -> np.ndarray:
    """Invert the additive-noise assignments to recover the noise realization.

    Returns a (T, dim) array: NaN over the initial block and at positions
    whose governing mechanism had zero noise scale (a clamp destroys the
    noise there); elsewhere the exact algebraic inversion of the assignment
    that produced the value.
    """
    schedule = schedule if schedule is not None else EMPTY_SCHEDULE
    values = recording.values
    length, dim = values.shape
    if dim != model.dim or recording.lag != model.lag:
        raise DataError(
            f"recording (dim={dim}, lag={recording.lag}) does not match the model "
            f"(dim={model.dim}, lag={model.lag})"
        )
    _validate_schedule_against(model, schedule, length, earliest=model.lag + 1)

    xbar = lagged_regressors(values, model.lag)
    resid = np.full((length, dim), np.nan)
    resid[model.lag:] = values[model.lag:] - xbar @ model.stacked.T
    for e in schedule:
        mech = e.mechanism
        col = e.node - 1
        for t in range(e.t_start, e.t_end + 1):
            r = t - 1
            if mech.noise_scale == 0.0:
                resid[r, col] = np.nan
            else:
                pred = mech.flat_rows(model.dim, model.lag) @ xbar[r - model.lag]
                resid[r, col] = (values[r, col] - pred - mech.signal_at(t)) / mech.noise_scale
    return resid
