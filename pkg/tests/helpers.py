"""Shared test utilities: stable model draws and random schedule generators."""

from __future__ import annotations

import numpy as np

import varcausal as vc


def stable_random_model(dim, lag, seed, max_radius=0.95, noise_cov=None,
                        sparsity=0.3):
    """Random model rescaled (if needed) so its companion spectral radius is
    at most ``max_radius``; scaling the lag-q block by s**q scales every
    companion eigenvalue by s."""
    model = vc.random_model(dim, lag, sparsity=sparsity, noise_cov=noise_cov, seed=seed)
    radius = vc.spectral_radius(model)
    if radius <= max_radius:
        return model
    s = max_radius / radius
    blocks = [model.coeffs[q] * s ** (q + 1) for q in range(lag)]
    return vc.VarModel(dim=dim, lag=lag, coeffs=blocks, noise_cov=model.noise_cov)


def random_windows(rng, lo, hi, max_windows=3, max_width=12):
    """Disjoint integer windows within [lo, hi], possibly none."""
    windows = []
    t = lo
    for _ in range(rng.integers(0, max_windows + 1)):
        t = t + int(rng.integers(0, 10))
        width = int(rng.integers(1, max_width + 1))
        if t + width - 1 > hi:
            break
        windows.append((t, t + width - 1))
        t = t + width
    return windows


def random_clamp_schedule(rng, dim, lag, horizon, scale=2.0, max_windows=3):
    """Random clamp-only schedule with windows inside (lag, horizon]."""
    entries = []
    for (a, b) in random_windows(rng, lag + 1, horizon, max_windows=max_windows):
        node = int(rng.integers(1, dim + 1))
        sig = rng.normal(0.0, scale, b - a + 1)
        entries.append(vc.clamp(node, a, sig))
    return vc.InterventionSchedule(entries)
