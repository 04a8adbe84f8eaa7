"""Unbiased FIR filtering: batch window start plus a noise-blind recursion.

The recursion has the Kalman predictor/corrector shape but never reads
process or measurement noise covariances, nor any prior statistics. It
is the recursive realization of the unweighted least-squares fit over
the window, so the batch solve over the full window doubles as an
independent oracle for it.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ModelConsistencyError, NotObservableError
from .linalg import inv_spd, solve_spd, sym
from .model import (
    MeasurementWindow,
    ModelSequence,
    StepDiagnostics,
    UfirEstimate,
    observable_init_length,
    stacked_observation,
    transition_product,
    window_observable,
)


@dataclass(frozen=True)
class UfirConfig:
    """Window length plus an optional explicit batch-init length.

    When init_length is None the smallest observable length is used,
    starting the search at the state dimension.
    """

    horizon: int
    init_length: int | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.init_length is not None and not 1 <= self.init_length <= self.horizon:
            raise ValueError("init_length must lie in [1, horizon]")


def _as_measurements(values, m: int) -> np.ndarray:
    ys = np.asarray(values, dtype=float)
    if ys.ndim == 1:
        ys = ys[:, None]
    if ys.ndim != 2 or ys.shape[1] != m:
        raise ModelConsistencyError(
            f"measurements must be rows of length {m}, got shape {ys.shape}"
        )
    return ys


def ufir_batch_init(model: ModelSequence, start: int, measurements) -> UfirEstimate:
    """Unweighted least squares over the first window segment.

    Solves for the state at the segment start from the stacked noise-free
    propagation, then pushes the estimate and the inverse normal matrix
    forward to the segment end. Forward stacking means no transition
    matrix is ever inverted.
    """
    ys = _as_measurements(measurements, model.m)
    length = ys.shape[0]
    C = stacked_observation(model, start, length)
    if not window_observable(C, model.n):
        raise NotObservableError(
            f"stacked window of length {length} starting at step {start} has rank "
            f"below {model.n}"
        )
    A = sym(C.T @ C)
    x_start = solve_spd(A, C.T @ ys.reshape(-1), what="normal matrix")
    g_start = inv_spd(A, what="normal matrix")
    phi = transition_product(model, start, start + length - 1)
    return UfirEstimate(start + length - 1, phi @ x_start, sym(phi @ g_start @ phi.T))


def ufir_iterate_step(
    model: ModelSequence, l: int, prior: UfirEstimate, y
) -> tuple[UfirEstimate, StepDiagnostics]:
    """One noise-blind predictor/corrector step.

    Reads only F(l) and H(l). The correction (G_pred^-1 + H'H)^-1 is
    evaluated in inversion-lemma form, so a singular predicted G is
    harmless: the small matrix I + H G_pred H' is always positive
    definite.
    """
    if prior.index != l - 1:
        raise ValueError(f"prior is at index {prior.index}, expected {l - 1}")
    F = model.F(l)
    H = model.H(l)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    g_pred = sym(F @ prior.G @ F.T)
    hg = H @ g_pred
    S = sym(np.eye(model.m) + hg @ H.T)
    G = sym(g_pred - hg.T @ solve_spd(S, hg, what=f"window geometry at step {l}"))
    K = G @ H.T
    x_pred = F @ prior.x_hat
    innovation = y - H @ x_pred
    return UfirEstimate(l, x_pred + K @ innovation, G), StepDiagnostics(l, K, innovation)


def ufir_window_estimate(
    model: ModelSequence, window: MeasurementWindow, cfg: UfirConfig
) -> UfirEstimate:
    """Estimate at the window end: batch init, then the recursion.

    The first init_length measurements seed the estimate; the remaining
    ones are folded in one step at a time. With init_length == horizon
    the batch result is returned directly.
    """
    if len(window) != cfg.horizon:
        raise ValueError(
            f"window has {len(window)} measurements, expected horizon {cfg.horizon}"
        )
    j = cfg.init_length
    if j is None:
        j = observable_init_length(model, window.start, len(window))
    est = ufir_batch_init(model, window.start, window.measurements[:j])
    for offset in range(j, len(window)):
        est, _ = ufir_iterate_step(
            model, window.start + offset, est, window.measurements[offset]
        )
    return est


def ufir_batch_oracle(model: ModelSequence, window: MeasurementWindow) -> np.ndarray:
    """Full-window stacked least squares pushed to the window end.

    Deliberately a single batch solve with no recursion, so it stays an
    independent route against ufir_window_estimate.
    """
    C = stacked_observation(model, window.start, len(window))
    if not window_observable(C, model.n):
        raise NotObservableError(
            f"stacked window of length {len(window)} starting at step "
            f"{window.start} has rank below {model.n}"
        )
    A = sym(C.T @ C)
    x_start = solve_spd(A, C.T @ window.measurements.reshape(-1), what="normal matrix")
    return transition_product(model, window.start, window.end) @ x_start
