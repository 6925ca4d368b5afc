"""Total causal effect matrices, the companion-form oracle, and stability."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import DataError
from .model import VarModel

STABILITY_MARGIN = 1e-12


@dataclass(frozen=True, eq=False)
class EffectMatrices:
    """Sensitivities of the state k steps ahead to an additive change now,
    for k = 0..max_horizon; index 0 is the identity."""

    dim: int
    max_horizon: int
    matrices: tuple = field(repr=False)

    def __post_init__(self):
        mats = tuple(np.asarray(m, dtype=float) for m in self.matrices)
        if len(mats) != self.max_horizon + 1:
            raise DataError(
                f"expected {self.max_horizon + 1} matrices, got {len(mats)}"
            )
        object.__setattr__(self, "matrices", mats)

    def at(self, k: int) -> np.ndarray:
        if not 0 <= k <= self.max_horizon:
            raise DataError(f"horizon {k} out of range 0..{self.max_horizon}")
        return self.matrices[k]


@dataclass(frozen=True)
class StabilityReport:
    """Spectral radius of the companion matrix; stable iff strictly below 1."""

    spectral_radius: float

    @property
    def stable(self) -> bool:
        return self.spectral_radius < 1.0 - STABILITY_MARGIN


def iter_effects(model: VarModel) -> Iterator[np.ndarray]:
    """Yield effect matrices k = 0, 1, 2, ... keeping only the last ``lag``
    of them in memory; horizons before zero contribute nothing."""
    dim, lag = model.dim, model.lag
    window = [np.eye(dim)]
    yield window[0]
    while True:
        acc = np.zeros((dim, dim))
        for q in range(1, min(len(window), lag) + 1):
            acc += model.coeffs[q - 1] @ window[-q]
        window.append(acc)
        if len(window) > lag:
            window.pop(0)
        yield acc


def total_effects(model: VarModel, max_horizon: int) -> EffectMatrices:
    """Effect matrices by the forward recursion
    ``T_k = sum_q B_q T_{k-q}`` with ``T_0 = I`` and ``T_k = 0`` for k < 0."""
    if max_horizon < 0:
        raise DataError(f"max_horizon must be >= 0, got {max_horizon}")
    gen = iter_effects(model)
    mats = [next(gen) for _ in range(max_horizon + 1)]
    return EffectMatrices(dim=model.dim, max_horizon=max_horizon, matrices=tuple(mats))


def companion_matrix(model: VarModel) -> np.ndarray:
    """Lift to the equivalent one-lag form: lag matrices across the top block
    row, shifted identities below. The top-left dim x dim block of its k-th
    power equals the k-step effect matrix."""
    dim, lag = model.dim, model.lag
    size = dim * lag
    comp = np.zeros((size, size))
    comp[:dim] = model.stacked
    if lag > 1:
        comp[dim:, :size - dim] = np.eye(dim * (lag - 1))
    return comp


def spectral_radius(model: VarModel) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(model)))))


def stability_report(model: VarModel) -> StabilityReport:
    return StabilityReport(spectral_radius=spectral_radius(model))


def point_effect(effects: EffectMatrices, node: int, delta: float, k: int) -> np.ndarray:
    """Additive change of the full state k steps after bumping one node by
    ``delta``: column ``node`` of the k-step effect matrix, scaled."""
    if not 1 <= node <= effects.dim:
        raise DataError(f"node {node} out of range 1..{effects.dim}")
    return effects.at(k)[:, node - 1] * delta
