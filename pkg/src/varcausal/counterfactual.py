"""Prediction of past hypothetical interventions on an observed trajectory.

Two routes answer the same query: ``predict_delta`` propagates the induced
change forward through the linear dynamics without ever touching the noise
(the noise terms cancel or are cut at the intervened coordinate), and
``predict_abduction`` recovers the noise realization and re-simulates the
modified system with it. Wherever both apply they agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _backend
from .effects import EffectMatrices
from .errors import DataError, DeltaMethodError, UnrecoverableNoiseError
from .model import (CLAMP, InterventionSchedule, Recording, ScheduleEntry,
                    VarModel, _validate_schedule_against, lagged_regressors,
                    modify, recover_residuals, simulate)

DELTA_PROPAGATION = "delta-propagation"
ABDUCTION = "abduction-resimulation"


@dataclass(frozen=True, eq=False)
class CounterfactualQuery:
    """A what-if question about an observed trajectory.

    ``factual_schedule`` describes the interventions that really governed the
    recording; ``hypothetical`` the ones to evaluate instead. Hypothetical
    windows replace factual mechanisms over any time overlap; every factual
    mechanism outside those windows is kept. ``model_source`` tags whether
    the model is taken as the true generator or is an estimate, so results
    can be reported as exact or predicted.
    """

    factual: Recording
    model: VarModel
    hypothetical: InterventionSchedule
    factual_schedule: InterventionSchedule = InterventionSchedule()
    model_source: str = "true"

    def __post_init__(self):
        if self.factual.dim != self.model.dim or self.factual.lag != self.model.lag:
            raise DataError(
                f"recording (dim={self.factual.dim}, lag={self.factual.lag}) does not "
                f"match the model (dim={self.model.dim}, lag={self.model.lag})"
            )
        horizon = self.factual.length
        _validate_schedule_against(self.model, self.hypothetical, horizon,
                                   earliest=self.model.lag + 1)
        _validate_schedule_against(self.model, self.factual_schedule, horizon,
                                   earliest=self.model.lag + 1)


@dataclass(frozen=True, eq=False)
class CounterfactualResult:
    """Counterfactual trajectory and its offset from the factual one.

    ``counterfactual`` is constructed as factual values plus ``delta``, so
    the two fields satisfy that identity bit for bit.
    """

    counterfactual: np.ndarray = field(repr=False)
    delta: np.ndarray = field(repr=False)
    method: str = DELTA_PROPAGATION
    model_source: str = "true"


def _entry_by_time(schedule: InterventionSchedule) -> dict[int, ScheduleEntry]:
    out: dict[int, ScheduleEntry] = {}
    for e in schedule:
        for t in range(e.t_start, e.t_end + 1):
            out[t] = e
    return out


def predict_delta(query: CounterfactualQuery) -> CounterfactualResult:
    """Noise-free forward propagation of the intervention-induced change.

    The change is zero before the earliest hypothetical window. At a
    hypothetically intervened coordinate the noise term must be either cut
    (zero noise scale, e.g. a clamp) or identical to the factual one (noise
    scale equal to the factual scale there), so that it cancels; any other
    mechanism raises DeltaMethodError and needs ``predict_abduction``.
    Elsewhere the change follows the coefficient rows that govern the
    coordinate in the counterfactual world.
    """
    model, values = query.model, query.factual.values
    dim, lag, horizon = model.dim, model.lag, query.factual.length
    fact_at = _entry_by_time(query.factual_schedule)
    hyp_at = _entry_by_time(query.hypothetical)

    xbar = lagged_regressors(values, lag) if horizon > lag else np.empty((0, dim * lag))
    drive = np.zeros((horizon, dim))
    steps: list[int] = []
    nodes: list[int] = []
    rows: list[np.ndarray] = []

    for t in range(lag + 1, horizon + 1):
        he = hyp_at.get(t)
        fe = fact_at.get(t)
        if he is not None:
            node = he.node
            mech = he.mechanism
            brow = mech.flat_rows(dim, lag)
            look = xbar[t - lag - 1]
            if mech.noise_scale == 0.0:
                forcing = mech.signal_at(t) - values[t - 1, node - 1]
                if mech.mode != CLAMP:
                    forcing += float(brow @ look)
            else:
                if fe is not None and fe.node == node:
                    factual_scale = fe.mechanism.noise_scale
                    factual_det = (float(fe.mechanism.flat_rows(dim, lag) @ look)
                                   + fe.mechanism.signal_at(t))
                else:
                    factual_scale = 1.0
                    factual_det = float(model.node_rows(node) @ look)
                if mech.noise_scale != factual_scale:
                    raise DeltaMethodError(
                        f"hypothetical noise scale {mech.noise_scale} at node {node}, "
                        f"t={t} differs from the factual scale {factual_scale}; the noise "
                        f"does not cancel, use predict_abduction"
                    )
                forcing = float(brow @ look) + mech.signal_at(t) - factual_det
            drive[t - 1, node - 1] = forcing
            steps.append(t - 1)
            nodes.append(node - 1)
            rows.append(brow)
        elif fe is not None:
            steps.append(t - 1)
            nodes.append(fe.node - 1)
            rows.append(fe.mechanism.flat_rows(dim, lag))

    if steps:
        ov = (np.asarray(steps, dtype=np.int64), np.asarray(nodes, dtype=np.int64),
              np.asarray(rows, dtype=float))
    else:
        ov = (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64),
              np.empty((0, dim * lag)))
    delta = np.zeros((horizon, dim))
    _backend.forward_recursion(model.stacked, delta, drive, lag, lag, *ov)
    return CounterfactualResult(counterfactual=values + delta, delta=delta,
                                method=DELTA_PROPAGATION, model_source=query.model_source)


def merge_schedules(factual: InterventionSchedule,
                    hypothetical: InterventionSchedule) -> InterventionSchedule:
    """Schedule governing the counterfactual world: hypothetical entries,
    plus every factual entry cut down to the steps no hypothetical window
    covers (only one node may be controlled per step)."""
    blocked = set()
    for e in hypothetical:
        blocked.update(range(e.t_start, e.t_end + 1))
    entries: list[ScheduleEntry] = list(hypothetical)
    for e in factual:
        t = e.t_start
        while t <= e.t_end:
            if t in blocked:
                t += 1
                continue
            start = t
            while t <= e.t_end and t not in blocked:
                t += 1
            entries.append(_slice_entry(e, start, t - 1))
    return InterventionSchedule(tuple(entries))


def _slice_entry(entry: ScheduleEntry, t0: int, t1: int) -> ScheduleEntry:
    if t0 == entry.t_start and t1 == entry.t_end:
        return entry
    mech = entry.mechanism
    lo = t0 - mech.t_start
    sliced = type(mech)(mode=mech.mode, t_start=t0,
                        signal=mech.signal[lo: lo + (t1 - t0 + 1)].copy(),
                        rows=None if mech.rows is None else mech.rows,
                        noise_scale=mech.noise_scale)
    return ScheduleEntry(entry.node, sliced)


def predict_abduction(query: CounterfactualQuery) -> CounterfactualResult:
    """Recover the noise realization, then re-simulate the modified system
    with it. Handles arbitrary hypothetical mechanisms, but every noise value
    the counterfactual world consumes must be recoverable from the factual
    recording; a value destroyed by a factual zero-noise intervention raises
    UnrecoverableNoiseError naming the position."""
    model, factual = query.model, query.factual
    lag, horizon = model.lag, factual.length
    resid = recover_residuals(model, factual, query.factual_schedule)
    merged = merge_schedules(query.factual_schedule, query.hypothetical)

    merged_at = _entry_by_time(merged)
    for t in range(lag + 1, horizon + 1):
        entry = merged_at.get(t)
        for node in range(1, model.dim + 1):
            if entry is not None and entry.node == node:
                scale = entry.mechanism.noise_scale
            else:
                scale = 1.0
            if scale != 0.0 and not np.isfinite(resid[t - 1, node - 1]):
                raise UnrecoverableNoiseError(node, t)

    noise = np.nan_to_num(resid, nan=0.0)
    resim = simulate(model, merged, horizon, initial=factual.initial, noise=noise)
    delta = resim.values - factual.values
    return CounterfactualResult(counterfactual=factual.values + delta, delta=delta,
                                method=ABDUCTION, model_source=query.model_source)


def oracle_resimulation(query: CounterfactualQuery) -> Recording:
    """Ground-truth counterfactual: re-simulate the modified system with the
    factual recording's stored noise realization (requires a recording that
    carries its noise, i.e. one produced by ``simulate``)."""
    factual = query.factual
    if factual.noise is None:
        raise DataError("factual recording carries no noise realization")
    merged = merge_schedules(query.factual_schedule, query.hypothetical)
    return simulate(query.model, merged, factual.length, initial=factual.initial,
                    noise=np.array(factual.noise))


def additive_override(model: VarModel, node: int, t: int, delta: float) -> ScheduleEntry:
    """Single-step intervention nudging one node by ``delta`` on top of its
    unchanged assignment (rows and noise kept). Induced changes superpose
    across such overrides, and an isolated one shifts the state at horizon k
    by the k-step effect column."""
    rows = np.array([model.coeffs[q][node - 1] for q in range(model.lag)])
    return modify(node, t, rows=rows, noise_scale=1.0, signal=[delta])


@dataclass(frozen=True, eq=False)
class DeltaSummary:
    """Per-step Euclidean norms of a counterfactual delta.

    ``onset`` is the first time (1-based) with a nonzero delta; when effect
    matrices are supplied, ``predicted[k]`` is the norm obtained by pushing
    the onset delta row through the k-step effect matrix, which equals the
    realized norm at ``onset + k`` for a single-point override.
    """

    norms: np.ndarray = field(repr=False)
    onset: Optional[int] = None
    predicted: Optional[np.ndarray] = field(default=None, repr=False)


def effect_summary(result: CounterfactualResult,
                   effects: Optional[EffectMatrices] = None) -> DeltaSummary:
    """Tabulate ``|delta_t|`` over time, optionally with the effect-matrix
    prediction seeded from the onset row."""
    norms = np.linalg.norm(result.delta, axis=1)
    nonzero = np.nonzero(norms)[0]
    onset = int(nonzero[0]) + 1 if nonzero.size else None
    predicted = None
    if effects is not None and onset is not None:
        seed_row = result.delta[onset - 1]
        predicted = np.array([
            float(np.linalg.norm(effects.at(k) @ seed_row))
            for k in range(effects.max_horizon + 1)
        ])
    return DeltaSummary(norms=norms, onset=onset, predicted=predicted)
