"""File formats: model and schedule documents, experiment configs, exports.

Everything is JSON-backed structured text with values written in shortest
round-trip form; see README for the schemas. Paths inside a config resolve
relative to the config file's directory.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np

from .counterfactual import CounterfactualResult
from .dataset import save_recording  # noqa: F401  (re-exported for callers)
from .effects import EffectMatrices
from .errors import ConfigError, FormatError
from .estimation import FitReport, StackedCoefficients
from .model import (CLAMP, MODIFY, InterventionMechanism, InterventionSchedule,
                    ScheduleEntry, VarModel, random_model, toeplitz_covariance)


def save_model(model: VarModel, path) -> None:
    doc = {
        "dim": model.dim,
        "lag": model.lag,
        "coeffs": [b.tolist() for b in model.coeffs],
        "noise_cov": model.noise_cov.tolist(),
    }
    write_json(doc, path)


def load_model(path) -> VarModel:
    doc = _load_json(path)
    for key in ("dim", "lag", "coeffs", "noise_cov"):
        if key not in doc:
            raise FormatError(f"{path}: model file missing field '{key}'")
    try:
        return VarModel(dim=int(doc["dim"]), lag=int(doc["lag"]),
                        coeffs=tuple(np.asarray(b, dtype=float) for b in doc["coeffs"]),
                        noise_cov=np.asarray(doc["noise_cov"], dtype=float))
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc


def materialize_signal(spec, t_start: int, t_end: int) -> np.ndarray:
    """Turn a signal description into one value per step of [t_start, t_end].

    Accepts a plain list of numbers (length must match the window), a single
    number (held constant), or a spec object: ``{"kind": "sine", "amplitude",
    "angular_frequency"}`` evaluated at absolute time, ``{"kind": "gaussian",
    "mean", "std", "seed"}`` (seed mandatory), or ``{"kind": "constant",
    "value"}``.
    """
    width = t_end - t_start + 1
    if width < 1:
        raise FormatError(f"empty window [{t_start}, {t_end}]")
    if isinstance(spec, (int, float)):
        return np.full(width, float(spec))
    if isinstance(spec, (list, tuple)):
        arr = np.asarray(spec, dtype=float)
        if arr.size != width:
            raise FormatError(
                f"signal has {arr.size} values but the window [{t_start}, {t_end}] "
                f"has {width} steps"
            )
        return arr
    if not isinstance(spec, dict) or "kind" not in spec:
        raise FormatError(f"cannot interpret signal spec {spec!r}")
    kind = spec["kind"]
    if kind == "sine":
        t = np.arange(t_start, t_end + 1, dtype=float)
        return float(spec["amplitude"]) * np.sin(float(spec["angular_frequency"]) * t)
    if kind == "gaussian":
        if "seed" not in spec:
            raise FormatError("gaussian signal spec requires an explicit seed")
        rng = np.random.default_rng(int(spec["seed"]))
        return rng.normal(float(spec.get("mean", 0.0)), float(spec.get("std", 1.0)), width)
    if kind == "constant":
        return np.full(width, float(spec["value"]))
    raise FormatError(f"unknown signal kind {kind!r}")


def parse_schedule(entries) -> InterventionSchedule:
    """Build a schedule from a list of entry documents.

    Each document carries ``node``, ``t_start``, ``mode`` and a ``signal``;
    ``t_end`` is required unless the signal is an explicit list. Modify
    entries additionally carry ``rows`` and ``sigma``.
    """
    if entries is None:
        return InterventionSchedule()
    out = []
    for i, doc in enumerate(entries):
        try:
            node = int(doc["node"])
            t_start = int(doc["t_start"])
            mode = doc.get("mode", CLAMP)
            raw = doc["signal"]
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"schedule entry {i}: {exc}") from exc
        if "t_end" in doc:
            t_end = int(doc["t_end"])
        elif isinstance(raw, (list, tuple)):
            t_end = t_start + len(raw) - 1
        else:
            raise FormatError(f"schedule entry {i}: t_end required for signal spec {raw!r}")
        signal = materialize_signal(raw, t_start, t_end)
        if mode == CLAMP:
            mech = InterventionMechanism(CLAMP, t_start, signal)
        elif mode == MODIFY:
            if "rows" not in doc or "sigma" not in doc:
                raise FormatError(f"schedule entry {i}: modify needs 'rows' and 'sigma'")
            mech = InterventionMechanism(MODIFY, t_start, signal,
                                         rows=np.asarray(doc["rows"], dtype=float),
                                         noise_scale=float(doc["sigma"]))
        else:
            raise FormatError(f"schedule entry {i}: unknown mode {mode!r}")
        out.append(ScheduleEntry(node, mech))
    return InterventionSchedule(tuple(out))


def save_schedule(schedule: InterventionSchedule, path) -> None:
    """Write a schedule with signals materialized to explicit values."""
    docs = []
    for e in schedule:
        doc = {"node": e.node, "t_start": e.t_start, "t_end": e.t_end,
               "mode": e.mechanism.mode, "signal": e.mechanism.signal.tolist()}
        if e.mechanism.mode == MODIFY:
            doc["rows"] = e.mechanism.rows.tolist()
            doc["sigma"] = e.mechanism.noise_scale
        docs.append(doc)
    write_json(docs, path)


def load_schedule(path) -> InterventionSchedule:
    return parse_schedule(_load_json(path))


def build_model_from_spec(spec, base: Path) -> VarModel:
    """Resolve a config ``model`` section: ``{"file": ...}`` or ``{"random": ...}``."""
    if not isinstance(spec, dict):
        raise ConfigError(f"model section must be an object, got {spec!r}")
    if "file" in spec:
        return load_model(base / spec["file"])
    if "random" not in spec:
        raise ConfigError("model section needs either 'file' or 'random'")
    r = dict(spec["random"])
    if "seed" not in r:
        raise ConfigError("random model spec requires an explicit seed")
    return random_model_from_spec(r, seed=r["seed"])


def random_model_from_spec(r: dict, seed) -> VarModel:
    try:
        dim = int(r["dim"])
        lag = int(r["lag"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"random model spec: {exc}") from exc
    cov = noise_cov_from_spec(r.get("noise_cov", {"kind": "identity"}), dim)
    return random_model(dim, lag,
                        coeff_low=float(r.get("coeff_low", -0.5)),
                        coeff_high=float(r.get("coeff_high", 0.5)),
                        sparsity=float(r.get("sparsity", 0.3)),
                        noise_cov=cov, seed=seed)


def noise_cov_from_spec(spec, dim: int) -> np.ndarray:
    if isinstance(spec, list):
        return np.asarray(spec, dtype=float)
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"cannot interpret noise_cov spec {spec!r}")
    kind = spec["kind"]
    if kind == "identity":
        return np.eye(dim)
    if kind == "zero":
        return np.zeros((dim, dim))
    if kind == "toeplitz":
        return toeplitz_covariance(dim, diag=float(spec.get("diag", 1.0)),
                                   offdiag=float(spec.get("offdiag", 0.5)))
    if kind == "matrix":
        return np.asarray(spec["values"], dtype=float)
    raise ConfigError(f"unknown noise_cov kind {kind!r}")


def load_config(path) -> tuple[dict, Path]:
    """Read a config document; returns it with the directory paths resolve
    against."""
    p = Path(path)
    doc = _load_json(p)
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return doc, p.parent


def write_coefficients_csv(coeffs: StackedCoefficients, path) -> None:
    """Long-format heat-map data: one line per entry, ``lag,i,j,value``."""
    with open(path, "w", newline="") as fh:
        fh.write("lag,i,j,value\n")
        for q in range(1, coeffs.lag + 1):
            block = coeffs.block(q)
            for i in range(coeffs.dim):
                for j in range(coeffs.dim):
                    fh.write(f"{q},{i + 1},{j + 1},{block[i, j]!r}\n")


def write_fit_report(report: FitReport, path) -> None:
    doc = {
        "method": report.method,
        "dim": report.estimate.dim,
        "lag": report.estimate.lag,
        "coeffs": [b.tolist() for b in report.estimate.blocks],
        "objectives": {str(k): v for k, v in sorted(report.objectives.items())},
        "iterations": {str(k): v for k, v in sorted(report.iterations.items())},
        "converged": {str(k): v for k, v in sorted(report.converged.items())},
        "errors": {str(k): v for k, v in sorted(report.errors.items())},
    }
    write_json(doc, path)


def write_effects_csv(effects: EffectMatrices, path) -> None:
    """Long-format table ``k,i,j,value`` for k = 0..max_horizon."""
    with open(path, "w", newline="") as fh:
        fh.write("k,i,j,value\n")
        for k in range(effects.max_horizon + 1):
            mat = effects.at(k)
            for i in range(effects.dim):
                for j in range(effects.dim):
                    fh.write(f"{k},{i + 1},{j + 1},{mat[i, j]!r}\n")


def write_counterfactual_csv(factual: np.ndarray, result: CounterfactualResult,
                             path) -> None:
    """Three-curve export: factual, counterfactual, and delta per node."""
    dim = factual.shape[1]
    cols = ([f"x_{i}" for i in range(1, dim + 1)]
            + [f"xcf_{i}" for i in range(1, dim + 1)]
            + [f"delta_{i}" for i in range(1, dim + 1)])
    with open(path, "w", newline="") as fh:
        fh.write("t," + ",".join(cols) + "\n")
        for r in range(factual.shape[0]):
            vals = ([repr(float(v)) for v in factual[r]]
                    + [repr(float(v)) for v in result.counterfactual[r]]
                    + [repr(float(v)) for v in result.delta[r]])
            fh.write(f"{r + 1}," + ",".join(vals) + "\n")


def write_json(doc, path) -> None:
    """Deterministic JSON dump: sorted keys, trailing newline."""
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from exc
