"""Index-set partitioning, regression row assembly, and recording files."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import DataError, FormatError, ScheduleError
from .model import InterventionSchedule, Recording, lagged_regressors


@dataclass(frozen=True)
class IndexPartition:
    """Disjoint, exhaustive split of ``{1..horizon}`` by intervention target.

    ``intervened[i]`` holds the time steps at which node ``i`` (1-based) was
    controlled; ``observational`` holds the steps with no intervention.
    """

    horizon: int
    dim: int
    intervened: Mapping[int, frozenset] = field(repr=False)
    observational: frozenset = field(repr=False)

    def eligible(self, node: int) -> frozenset:
        """Times at which ``node`` was NOT intervened upon (its fitting rows)."""
        if not 1 <= node <= self.dim:
            raise DataError(f"node {node} out of range 1..{self.dim}")
        full = self.observational.union(*self.intervened.values())
        return full - self.intervened[node]

    def interventional_times(self) -> frozenset:
        """All intervened steps, any node."""
        return frozenset().union(*self.intervened.values())


def partition(schedule: InterventionSchedule, horizon: int, dim: int) -> IndexPartition:
    """Allocate every time step to its intervention target (or to none).

    Schedule windows must lie within ``[1, horizon]`` and target nodes within
    ``1..dim``; window disjointness is enforced by the schedule itself.
    """
    if horizon < 1:
        raise DataError(f"horizon must be >= 1, got {horizon}")
    if schedule.max_node() > dim:
        raise DataError(f"schedule targets node {schedule.max_node()} but dim={dim}")
    sets: dict[int, set] = {i: set() for i in range(1, dim + 1)}
    for e in schedule:
        if e.t_start < 1 or e.t_end > horizon:
            raise ScheduleError(
                f"window [{e.t_start}, {e.t_end}] for node {e.node} lies outside [1, {horizon}]"
            )
        sets[e.node].update(range(e.t_start, e.t_end + 1))
    covered = set().union(*sets.values()) if sets else set()
    observational = frozenset(range(1, horizon + 1)) - covered
    return IndexPartition(
        horizon=horizon,
        dim=dim,
        intervened={i: frozenset(s) for i, s in sets.items()},
        observational=frozenset(observational),
    )


@dataclass(frozen=True)
class RegressionRow:
    """One stratified regression sample: response of ``node`` at time ``t``
    against the stacked lagged state."""

    node: int
    t: int
    response: float
    regressor: np.ndarray = field(repr=False)


def build_rows(data: Sequence[tuple[Recording, IndexPartition]], node: int,
               lag: int) -> list[RegressionRow]:
    """Regression rows for one node, concatenated over recording trials.

    A time step is eligible when it has regressors (``t > lag``) and the node
    was not intervened upon there. Rows never straddle trial boundaries.
    """
    rows: list[RegressionRow] = []
    dim = None
    for recording, part in data:
        if dim is None:
            dim = recording.dim
        elif recording.dim != dim:
            raise DataError(
                f"recordings disagree on dimension: {dim} vs {recording.dim}"
            )
        if recording.length < lag + 1:
            raise DataError(
                f"recording of length {recording.length} is too short for lag {lag}"
            )
        if part.horizon != recording.length:
            raise DataError(
                f"partition horizon {part.horizon} does not match recording length "
                f"{recording.length}"
            )
        xbar = lagged_regressors(recording.values, lag)
        eligible = part.eligible(node)
        for t in range(lag + 1, recording.length + 1):
            if t in eligible:
                rows.append(RegressionRow(
                    node=node, t=t,
                    response=float(recording.values[t - 1, node - 1]),
                    regressor=xbar[t - lag - 1],
                ))
    return rows


def build_all_rows(data: Sequence[tuple[Recording, IndexPartition]],
                   lag: int) -> dict[int, list[RegressionRow]]:
    """``build_rows`` for every node, keyed by node id."""
    if not data:
        raise DataError("no recordings given")
    dim = data[0][0].dim
    return {i: build_rows(data, i, lag) for i in range(1, dim + 1)}


def row_arrays(rows: Sequence[RegressionRow]) -> tuple[np.ndarray, np.ndarray]:
    """Stack rows into a design matrix and response vector."""
    if not rows:
        return np.empty((0, 0)), np.empty(0)
    X = np.vstack([r.regressor for r in rows])
    y = np.array([r.response for r in rows])
    return X, y


def _ranges(times) -> str:
    """Compact ``1-3,7,9-12`` rendering of a set of integers."""
    ts = sorted(times)
    if not ts:
        return "(empty)"
    parts = []
    start = prev = ts[0]
    for t in ts[1:]:
        if t == prev + 1:
            prev = t
            continue
        parts.append(f"{start}-{prev}" if prev > start else f"{start}")
        start = prev = t
    parts.append(f"{start}-{prev}" if prev > start else f"{start}")
    return ",".join(parts)


def format_partition(part: IndexPartition) -> str:
    """Structured-text export listing each index set."""
    lines = [f"horizon: {part.horizon}", f"observational: {_ranges(part.observational)}"]
    for i in range(1, part.dim + 1):
        lines.append(f"node{i}: {_ranges(part.intervened[i])}")
    return "\n".join(lines) + "\n"


def save_recording(recording: Recording, path, noise_path=None) -> None:
    """Write a recording as CSV (header ``t,x1,...,xD``), one row per step.

    Floats are written in shortest round-trip form, so a load reproduces the
    values exactly. When ``noise_path`` is given and the recording carries
    noise, a companion CSV with header ``t,w1,...,wD`` is written too.
    """
    _write_matrix_csv(path, recording.values, "x")
    if noise_path is not None and recording.noise is not None:
        _write_matrix_csv(noise_path, recording.noise, "w")


def _write_matrix_csv(path, matrix: np.ndarray, prefix: str) -> None:
    dim = matrix.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"{prefix}{i}" for i in range(1, dim + 1)])
        for r in range(matrix.shape[0]):
            writer.writerow([r + 1] + [repr(float(v)) for v in matrix[r]])


def load_recording(path, lag: int = 1, noise_path=None) -> Recording:
    """Read a recording CSV (and optionally its noise companion).

    The header must be ``t,x1,...,xD`` and the time column must start at 1
    and increase by 1; violations raise FormatError naming the offence.
    """
    values = _read_matrix_csv(path, "x")
    noise = None
    if noise_path is not None:
        noise = _read_matrix_csv(noise_path, "w")
        if noise.shape != values.shape:
            raise FormatError(
                f"noise file shape {noise.shape} does not match recording shape {values.shape}"
            )
    return Recording(values=values, noise=noise, lag=lag)


def _read_matrix_csv(path, prefix: str) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if not header or header[0] != "t":
            raise FormatError(f"{path}: first column must be 't', got {header[:1]!r}")
        dim = len(header) - 1
        expected = [f"{prefix}{i}" for i in range(1, dim + 1)]
        for want, got in zip(expected, header[1:]):
            if want != got:
                raise FormatError(f"{path}: expected column '{want}', got '{got}'")
        if dim == 0:
            raise FormatError(f"{path}: no value columns found")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != dim + 1:
                raise FormatError(
                    f"{path}: line {lineno} has {len(rec)} fields, expected {dim + 1}"
                )
            try:
                t = int(rec[0])
                vals = [float(v) for v in rec[1:]]
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from None
            want_t = len(rows) + 1
            if t != want_t:
                raise FormatError(
                    f"{path}: line {lineno}: time column jumps to t={t}, expected t={want_t}"
                )
            rows.append(vals)
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float)
