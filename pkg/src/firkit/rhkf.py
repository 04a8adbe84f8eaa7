"""Receding-horizon Kalman filtering over a sliding measurement window.

Each output index reruns the information filter across its own window
from a horizon-local start, so the estimator forgets everything older
than the window. Per output index this costs about N information-filter
steps (N the window length), i.e. roughly N times a plain Kalman step.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    NotObservableError,
    SingularityError,
    UnsupportedConfigurationError,
)
from .kalman import if_predict, if_update, info_to_state, state_to_info
from .linalg import inv_spd, solve_spd, sym
from .model import (
    InfoEstimate,
    MeasurementWindow,
    ModelSequence,
    StateEstimate,
    observable_init_length,
)

ZERO_INFORMATION = "zero-information"
BATCH_LEAST_SQUARES = "batch-least-squares"

_STRATEGIES = (ZERO_INFORMATION, BATCH_LEAST_SQUARES)


@dataclass(frozen=True)
class RhkfConfig:
    """Window length, start strategy, and optional batch-init length.

    zero-information starts every window at (z, Z) = (0, 0) and needs an
    invertible F over the window with Q either positive definite or
    exactly zero per step. batch-least-squares seeds the window from a
    measurement-weighted least squares over its first init_length
    entries, which tolerates singular nonzero Q afterwards.
    """

    horizon: int
    init_strategy: str = ZERO_INFORMATION
    init_length: int | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.init_strategy not in _STRATEGIES:
            raise ValueError(
                f"unknown init strategy {self.init_strategy!r}; expected one of "
                f"{_STRATEGIES}"
            )
        if self.init_length is not None and not 1 <= self.init_length <= self.horizon:
            raise ValueError("init_length must lie in [1, horizon]")


def rhkf_batch_init(model: ModelSequence, start: int, measurements) -> InfoEstimate:
    """Measurement-noise-weighted least squares over the init segment.

    Process noise inside the segment is ignored (the stacking assumes
    noise-free propagation), so the result is an approximation when Q is
    nonzero there. The information pair is formed at the segment end,
    which requires the segment's transition product to be invertible.
    """
    ys = np.asarray(measurements, dtype=float)
    if ys.ndim == 1:
        ys = ys[:, None]
    length = ys.shape[0]
    n = model.n
    phi = np.eye(n)
    z_start = np.zeros((n, n))
    rhs = np.zeros(n)
    for i in range(length):
        if i:
            phi = model.F(start + i) @ phi
        row = model.H(start + i) @ phi
        weighted = solve_spd(
            model.R(start + i), row, what=f"measurement noise covariance at step {start + i}"
        ).T
        z_start += weighted @ row
        rhs += weighted @ ys[i]
    z_start = sym(z_start)
    try:
        x_start = solve_spd(z_start, rhs, what="weighted normal matrix")
        p_start = inv_spd(z_start, what="weighted normal matrix")
    except SingularityError as exc:
        raise NotObservableError(
            f"init segment of length {length} starting at step {start} is not observable"
        ) from exc
    end = start + length - 1
    p_end = sym(phi @ p_start @ phi.T)
    try:
        return state_to_info(StateEstimate(end, phi @ x_start, p_end))
    except SingularityError as exc:
        raise UnsupportedConfigurationError(
            "batch init needs an invertible transition product across the init segment"
        ) from exc


def rhkf_window_estimate(
    model: ModelSequence, window: MeasurementWindow, cfg: RhkfConfig
) -> StateEstimate:
    """Estimate at the window end by rerunning the information filter.

    zero-information consumes every window measurement through the
    predict/correct recursion; batch-least-squares consumes the first
    init_length through the weighted batch solve and recurses over the
    rest. Either way the window is processed from scratch, independent of
    any other window.
    """
    if len(window) != cfg.horizon:
        raise ValueError(
            f"window has {len(window)} measurements, expected horizon {cfg.horizon}"
        )
    if cfg.init_strategy == ZERO_INFORMATION:
        info = InfoEstimate(
            window.start - 1, np.zeros(model.n), np.zeros((model.n, model.n))
        )
        consumed = 0
    else:
        j = cfg.init_length
        if j is None:
            j = observable_init_length(model, window.start, len(window))
        info = rhkf_batch_init(model, window.start, window.measurements[:j])
        consumed = j
    for offset in range(consumed, len(window)):
        l = window.start + offset
        try:
            info = if_predict(model, l, info)
        except SingularityError as exc:
            if cfg.init_strategy == ZERO_INFORMATION:
                # the strategy's own precondition (invertible F, Q positive
                # definite or zero) was violated
                raise UnsupportedConfigurationError(
                    f"zero-information start cannot cross step {l}: {exc}"
                ) from exc
            raise
        info = if_update(model, l, info, window.measurements[offset])
    return info_to_state(info)


def rhkf_run(
    model: ModelSequence, stream: MeasurementWindow, cfg: RhkfConfig
) -> list[StateEstimate]:
    """Window estimate at every index with a full horizon behind it.

    Windows are recomputed from scratch, with no state carried between
    them, so a stream of length T costs about (T - N + 1) * N
    information-filter steps.
    """
    n_windows = len(stream) - cfg.horizon + 1
    if n_windows < 1:
        raise ValueError(
            f"stream of length {len(stream)} is shorter than the horizon {cfg.horizon}"
        )
    return [
        rhkf_window_estimate(model, stream.segment(i, cfg.horizon), cfg)
        for i in range(n_windows)
    ]
