"""Shared helpers for building random test models and data."""

import numpy as np

from firkit.model import ModelSequence, stacked_observation, window_observable


def random_model(rng, n=None, m=None, *, zero_q=False, radius=(0.4, 0.95)):
    """Random stable model with invertible F, PD Q (unless zero_q) and PD R."""
    n = int(rng.integers(1, 5)) if n is None else n
    m = int(rng.integers(1, 3)) if m is None else m
    while True:
        F = rng.standard_normal((n, n))
        ev = np.abs(np.linalg.eigvals(F))
        if ev.max() < 1e-9:
            continue
        F *= rng.uniform(*radius) / ev.max()
        if np.linalg.cond(F) < 1e4:
            break
    H = rng.standard_normal((m, n))
    if zero_q:
        Q = np.zeros((n, n))
    else:
        a = rng.standard_normal((n, n))
        Q = a @ a.T / n + 0.1 * np.eye(n)
    b = rng.standard_normal((m, m))
    R = b @ b.T / m + 0.5 * np.eye(m)
    return ModelSequence(F, H, Q, R)


def well_conditioned_f(rng, n, sv_range=(0.95, 1.05)):
    """Random transition matrix with all singular values near one.

    Keeps multi-step products well conditioned so long-window geometry
    does not collapse below floating-point resolution.
    """
    u, _ = np.linalg.qr(rng.standard_normal((n, n)))
    v, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return u * rng.uniform(*sv_range, size=n) @ v.T


def random_observable_model(rng, n=None, m=None, *, zero_q=False):
    """Random model with near-unit-gain F, observable over an n-length window.

    Sliding-window filters do not need a stable F; what the tests need is
    window geometry that stays numerically non-degenerate over up to 50
    steps, hence the tight singular-value band.
    """
    n = int(rng.integers(1, 5)) if n is None else n
    m = int(rng.integers(1, 3)) if m is None else m
    while True:
        F = well_conditioned_f(rng, n)
        H = rng.standard_normal((m, n))
        if zero_q:
            Q = np.zeros((n, n))
        else:
            a = rng.standard_normal((n, n))
            Q = a @ a.T / n + 0.1 * np.eye(n)
        b = rng.standard_normal((m, m))
        R = b @ b.T / m + 0.5 * np.eye(m)
        model = ModelSequence(F, H, Q, R)
        if window_observable(stacked_observation(model, 1, model.n), model.n):
            return model


def rel_err(a, b):
    """Norm-relative difference, robust to zero components."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = max(np.linalg.norm(b.reshape(-1)), 1e-300)
    return np.linalg.norm((a - b).reshape(-1)) / scale
