"""Kalman filtering in covariance form and in information form.

The information form propagates (z, Z) = (P^-1 x, P^-1) and, unlike the
covariance form, can represent a start with no information at all
(Z = 0). Its prediction step is evaluated in matrix-inversion-lemma form
so it stays defined in exactly that case.
"""

import numpy as np

from .errors import (
    NotObservableError,
    SingularityError,
    UnsupportedConfigurationError,
)
from .linalg import inv_spd, solve_spd, sym
from .model import (
    InfoEstimate,
    MeasurementWindow,
    ModelSequence,
    StateEstimate,
    StepDiagnostics,
)


def kf_predict(model: ModelSequence, k: int, prior: StateEstimate) -> StateEstimate:
    """One prediction step: x -> F(k) x, P -> F(k) P F(k)' + Q(k-1)."""
    if prior.index != k - 1:
        raise ValueError(f"prior is at index {prior.index}, expected {k - 1}")
    F = model.F(k)
    x = F @ prior.x_hat
    P = sym(F @ prior.P @ F.T + model.Q(k - 1))
    return StateEstimate(k, x, P)


def kf_update(
    model: ModelSequence, k: int, predicted: StateEstimate, y
) -> tuple[StateEstimate, StepDiagnostics]:
    """One correction step; returns the posterior plus (gain, innovation).

    The gain is computed in the pre-fit form P H' (H P H' + R)^-1 through
    a symmetric factorization of the innovation covariance.
    """
    if predicted.index != k:
        raise ValueError(f"predicted estimate is at index {predicted.index}, expected {k}")
    H = model.H(k)
    R = model.R(k)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    S = sym(H @ predicted.P @ H.T + R)
    K = solve_spd(S, H @ predicted.P, what=f"innovation covariance at step {k}").T
    innovation = y - H @ predicted.x_hat
    x = predicted.x_hat + K @ innovation
    P = sym(predicted.P - K @ H @ predicted.P)
    return StateEstimate(k, x, P), StepDiagnostics(k, K, innovation)


def kf_gain_posterior_form(P: np.ndarray, H: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Gain in the posterior form P H' R^-1.

    Algebraically equal to the pre-fit gain used by kf_update; kept as a
    separate route so the identity between the two forms can be checked.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    return solve_spd(R, H @ P.T, what="measurement noise covariance").T


def if_predict(model: ModelSequence, k: int, prior: InfoEstimate) -> InfoEstimate:
    """Singular-safe prediction of the information pair.

    Three cases, all agreeing with (F Z^-1 F' + Q)^-1 whenever Z is
    positive definite:

    - Q(k-1) exactly zero: pure rotation, Z -> F^-T Z F^-1, z -> F^-T z.
      Needs an invertible F.
    - Q(k-1) positive definite: inversion-lemma form, well defined even at
      Z = 0 as long as F has full rank there.
    - Q(k-1) singular but nonzero: direct evaluation through P = Z^-1,
      accepted only when Z is positive definite.
    """
    if prior.index != k - 1:
        raise ValueError(f"prior is at index {prior.index}, expected {k - 1}")
    F = model.F(k)
    Q = model.Q(k - 1)
    Z = prior.Z
    z = prior.z_hat

    if not Q.any():
        try:
            zp = np.linalg.solve(F.T, z)
            half = np.linalg.solve(F.T, Z)
            Zp = sym(np.linalg.solve(F.T, half.T).T)
        except np.linalg.LinAlgError as exc:
            raise SingularityError(
                f"zero-noise information prediction at step {k} needs an invertible F"
            ) from exc
        return InfoEstimate(k, zp, Zp)

    try:
        q_inv_f = solve_spd(Q, F, what=f"process noise covariance at step {k - 1}")
    except SingularityError:
        # Q singular but not zero: only the direct form is available, and it
        # needs a positive definite Z.
        try:
            P = inv_spd(Z, what="information matrix")
        except SingularityError as exc:
            raise UnsupportedConfigurationError(
                f"singular nonzero process noise at step {k - 1} with a singular "
                "information matrix has no defined prediction"
            ) from exc
        Pp = sym(F @ P @ F.T + Q)
        Zp = inv_spd(Pp, what=f"predicted covariance at step {k}")
        zp = Zp @ (F @ (P @ z))
        return InfoEstimate(k, zp, Zp)

    M = sym(Z + F.T @ q_inv_f)
    t = solve_spd(M, q_inv_f.T, what=f"propagated information at step {k}")
    Zp = sym(inv_spd(Q, what=f"process noise covariance at step {k - 1}") - q_inv_f @ t)
    zp = q_inv_f @ solve_spd(M, z, what=f"propagated information at step {k}")
    return InfoEstimate(k, zp, Zp)


def if_update(model: ModelSequence, k: int, predicted: InfoEstimate, y) -> InfoEstimate:
    """Additive correction: z += H' R^-1 y, Z += H' R^-1 H."""
    if predicted.index != k:
        raise ValueError(f"predicted estimate is at index {predicted.index}, expected {k}")
    H = model.H(k)
    R = model.R(k)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    B = solve_spd(R, H, what=f"measurement noise covariance at step {k}").T
    z = predicted.z_hat + B @ y
    Z = sym(predicted.Z + B @ H)
    return InfoEstimate(k, z, Z)


def info_to_state(e: InfoEstimate) -> StateEstimate:
    """Convert to covariance form: P = Z^-1, x_hat = Z^-1 z.

    Requires a positive definite Z; a window that has not yet accumulated
    full-rank information cannot be converted.
    """
    w = np.linalg.eigvalsh(sym(e.Z))
    if w.min() <= np.trace(e.Z) * 1e-12:
        raise NotObservableError(
            f"information matrix at step {e.index} is singular; the window has "
            "not accumulated full-rank information yet"
        )
    P = inv_spd(e.Z, what="information matrix")
    return StateEstimate(e.index, P @ e.z_hat, P)


def state_to_info(e: StateEstimate) -> InfoEstimate:
    """Convert to information form: Z = P^-1, z_hat = P^-1 x_hat."""
    Z = inv_spd(e.P, what=f"covariance at step {e.index}")
    return InfoEstimate(e.index, Z @ e.x_hat, Z)


def kf_run(
    model: ModelSequence, init: StateEstimate, window: MeasurementWindow
) -> list[tuple[StateEstimate, StepDiagnostics]]:
    """Run predict + correct over a contiguous measurement block.

    Returns one (estimate, diagnostics) pair per measurement, in order.
    """
    if init.index != window.start - 1:
        raise ValueError(
            f"init is at index {init.index}, expected {window.start - 1} for this window"
        )
    out = []
    est = init
    for offset in range(len(window)):
        k = window.start + offset
        predicted = kf_predict(model, k, est)
        est, diag = kf_update(model, k, predicted, window.measurements[offset])
        out.append((est, diag))
    return out
