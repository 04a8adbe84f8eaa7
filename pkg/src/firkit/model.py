"""Discrete time-variant linear state-space models and window plumbing.

The model is x_k = F_k x_{k-1} + w_{k-1}, y_k = H_k x_k + v_k with
w ~ N(0, Q_k) and v ~ N(0, R_k). A model is represented by constant base
matrices plus an optional table of per-index overrides, which is enough
to script temporary parameter changes while keeping the representation
explicit and verifiable.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ModelConsistencyError, NotObservableError
from .linalg import rank_with_tol, sym


def _vector(value, what: str) -> np.ndarray:
    v = np.atleast_1d(np.asarray(value, dtype=float))
    if v.ndim != 1:
        raise ValueError(f"{what} must be a vector, got shape {v.shape}")
    return v


def _matrix(value, rows: int, cols: int, what: str) -> np.ndarray:
    a = np.atleast_2d(np.asarray(value, dtype=float))
    if a.shape != (rows, cols):
        raise ModelConsistencyError(f"{what} must be {rows}x{cols}, got {a.shape}")
    return a


def _check_sym_psd(a: np.ndarray, what: str, eig_floor: float) -> None:
    if not np.allclose(a, a.T, rtol=1e-12, atol=1e-12):
        raise ModelConsistencyError(f"{what} is not symmetric")
    w = np.linalg.eigvalsh(sym(a))
    if w.min() < eig_floor * max(1.0, abs(w.max())):
        raise ModelConsistencyError(
            f"{what} has a negative eigenvalue ({w.min():.3e})"
        )


@dataclass(frozen=True, eq=False)
class ModelOverride:
    """Replacement of F, Q and/or R on the inclusive index interval [lo, hi]."""

    lo: int
    hi: int
    F: np.ndarray | None = None
    Q: np.ndarray | None = None
    R: np.ndarray | None = None


class ModelSequence:
    """Time-indexed supplier of F(k), H(k), Q(k), R(k) with fixed (n, m).

    Constant base matrices plus an optional override table. Queries
    outside every scripted interval return the base matrices; later
    override records shadow earlier ones where intervals overlap, field
    by field. Instances are immutable after construction (all returned
    arrays are read-only), so they can be shared freely across tasks.
    """

    def __init__(self, F, H, Q, R, overrides=()):
        F = np.atleast_2d(np.asarray(F, dtype=float))
        n = F.shape[0]
        if F.shape != (n, n):
            raise ModelConsistencyError(f"F must be square, got {F.shape}")
        H = np.atleast_2d(np.asarray(H, dtype=float))
        m = H.shape[0]
        if H.shape != (m, n):
            raise ModelConsistencyError(
                f"H must have {n} columns to match F, got {H.shape}"
            )
        Q = _matrix(Q, n, n, "Q")
        R = _matrix(R, m, m, "R")
        _check_sym_psd(Q, "Q", eig_floor=-1e-10)
        # R may be exactly zero (noise-free data); positive definiteness is
        # required only by the operations that invert it.
        _check_sym_psd(R, "R", eig_floor=-1e-12)

        records = []
        for i, ov in enumerate(overrides):
            lo, hi = int(ov.lo), int(ov.hi)
            if hi < lo:
                raise ModelConsistencyError(
                    f"override {i} has an empty interval [{lo}, {hi}]"
                )
            f = None if ov.F is None else _matrix(ov.F, n, n, f"override {i} F")
            q = None if ov.Q is None else _matrix(ov.Q, n, n, f"override {i} Q")
            r = None if ov.R is None else _matrix(ov.R, m, m, f"override {i} R")
            if q is not None:
                _check_sym_psd(q, f"override {i} Q", eig_floor=-1e-10)
            if r is not None:
                _check_sym_psd(r, f"override {i} R", eig_floor=-1e-12)
            records.append(ModelOverride(lo, hi, f, q, r))

        for a in (F, H, Q, R):
            a.setflags(write=False)
        for rec in records:
            for a in (rec.F, rec.Q, rec.R):
                if a is not None:
                    a.setflags(write=False)

        self.n = n
        self.m = m
        self._F, self._H, self._Q, self._R = F, H, Q, R
        self._overrides = tuple(records)

    @property
    def overrides(self) -> tuple[ModelOverride, ...]:
        return self._overrides

    @property
    def time_invariant(self) -> bool:
        return not self._overrides

    @property
    def F_base(self) -> np.ndarray:
        return self._F

    @property
    def H_base(self) -> np.ndarray:
        return self._H

    @property
    def Q_base(self) -> np.ndarray:
        return self._Q

    @property
    def R_base(self) -> np.ndarray:
        return self._R

    def _scripted(self, k: int, field: str) -> np.ndarray | None:
        for ov in reversed(self._overrides):
            if ov.lo <= k <= ov.hi:
                value = getattr(ov, field)
                if value is not None:
                    return value
        return None

    def F(self, k: int) -> np.ndarray:
        """Transition matrix applying between steps k-1 and k."""
        value = self._scripted(k, "F")
        return self._F if value is None else value

    def H(self, k: int) -> np.ndarray:
        return self._H

    def Q(self, k: int) -> np.ndarray:
        value = self._scripted(k, "Q")
        return self._Q if value is None else value

    def R(self, k: int) -> np.ndarray:
        value = self._scripted(k, "R")
        return self._R if value is None else value


def model_from_dict(data: dict) -> ModelSequence:
    """Build a model from its JSON document form (schema in the README)."""
    try:
        n = int(data["n"])
        m = int(data["m"])
        raw = (data["F"], data["H"], data["Q"], data["R"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"model document missing or malformed field: {exc}") from exc
    overrides = []
    for i, ov in enumerate(data.get("overrides") or []):
        try:
            overrides.append(
                ModelOverride(
                    int(ov["from"]),
                    int(ov["to"]),
                    ov.get("F"),
                    ov.get("Q"),
                    ov.get("R"),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"model override {i} is malformed: {exc}") from exc
    model = ModelSequence(*raw, overrides)
    if (model.n, model.m) != (n, m):
        raise ConfigError(
            f"declared dimensions ({n}, {m}) do not match the matrices "
            f"({model.n}, {model.m})"
        )
    return model


def load_model(path) -> ModelSequence:
    """Read a model definition JSON file."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"model file {path} is not valid JSON: {exc}") from exc
    return model_from_dict(data)


@dataclass(frozen=True, eq=False)
class StateEstimate:
    """Covariance-form estimate (x_hat, P) at one time index."""

    index: int
    x_hat: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        x = _vector(self.x_hat, "x_hat")
        p = np.atleast_2d(np.asarray(self.P, dtype=float))
        if p.shape != (x.size, x.size):
            raise ValueError(f"P shape {p.shape} does not match state size {x.size}")
        object.__setattr__(self, "x_hat", x)
        object.__setattr__(self, "P", p)


@dataclass(frozen=True, eq=False)
class InfoEstimate:
    """Information-form estimate (z_hat, Z) = (P^-1 x_hat, P^-1).

    Z may be singular or exactly zero; the all-zero pair encodes total
    ignorance (infinite covariance) at a window start.
    """

    index: int
    z_hat: np.ndarray
    Z: np.ndarray

    def __post_init__(self):
        z = _vector(self.z_hat, "z_hat")
        big_z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        if big_z.shape != (z.size, z.size):
            raise ValueError(f"Z shape {big_z.shape} does not match state size {z.size}")
        if not big_z.any() and z.any():
            raise ValueError("a zero information matrix requires a zero information vector")
        object.__setattr__(self, "z_hat", z)
        object.__setattr__(self, "Z", big_z)


@dataclass(frozen=True, eq=False)
class UfirEstimate:
    """Noise-blind window estimate: state x_hat plus its geometry matrix G.

    G tracks the inverse normal matrix of the accumulated least-squares
    problem and takes over the role the error covariance plays in a
    Kalman filter, without reading any noise statistics.
    """

    index: int
    x_hat: np.ndarray
    G: np.ndarray

    def __post_init__(self):
        x = _vector(self.x_hat, "x_hat")
        g = np.atleast_2d(np.asarray(self.G, dtype=float))
        if g.shape != (x.size, x.size):
            raise ValueError(f"G shape {g.shape} does not match state size {x.size}")
        object.__setattr__(self, "x_hat", x)
        object.__setattr__(self, "G", g)


@dataclass(frozen=True, eq=False)
class StepDiagnostics:
    """Per-step gain and innovation, mainly for tests and debugging."""

    index: int
    gain: np.ndarray
    innovation: np.ndarray

    def __post_init__(self):
        gain = np.atleast_2d(np.asarray(self.gain, dtype=float))
        innovation = _vector(self.innovation, "innovation")
        if gain.shape[1] != innovation.size:
            raise ValueError(
                f"gain shape {gain.shape} does not match innovation size "
                f"{innovation.size}"
            )
        object.__setattr__(self, "gain", gain)
        object.__setattr__(self, "innovation", innovation)


@dataclass(frozen=True, eq=False)
class MeasurementWindow:
    """Contiguous block of measurements y_start .. y_(start + L - 1).

    Measurements are stored row-wise (L, m); a 1-D input is treated as L
    scalar measurements.
    """

    start: int
    measurements: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.measurements, dtype=float)
        if a.ndim == 1:
            a = a[:, None]
        if a.ndim != 2 or a.shape[0] == 0:
            raise ValueError("a window needs at least one measurement")
        object.__setattr__(self, "measurements", a)

    def __len__(self) -> int:
        return self.measurements.shape[0]

    @property
    def end(self) -> int:
        return self.start + len(self) - 1

    def y(self, k: int) -> np.ndarray:
        """Measurement at absolute index k."""
        if not self.start <= k <= self.end:
            raise IndexError(f"index {k} outside window [{self.start}, {self.end}]")
        return self.measurements[k - self.start]

    def segment(self, offset: int, length: int) -> "MeasurementWindow":
        """Sub-window of `length` measurements starting `offset` rows in."""
        if offset < 0 or offset + length > len(self):
            raise IndexError("segment outside the window")
        return MeasurementWindow(self.start + offset, self.measurements[offset : offset + length])


def transition_product(model: ModelSequence, s: int, l: int) -> np.ndarray:
    """Product F(l) @ F(l-1) @ ... @ F(s+1); the identity when l == s."""
    if l < s:
        raise ValueError(f"transition product needs l >= s, got s={s}, l={l}")
    phi = np.eye(model.n)
    for j in range(s + 1, l + 1):
        phi = model.F(j) @ phi
    return phi


def stacked_observation(model: ModelSequence, s: int, length: int) -> np.ndarray:
    """Stack of H(s+i) @ transition_product(s+i, s) for i = 0 .. length-1.

    Block-row i maps the state at index s to the noise-free prediction of
    the measurement at index s + i.
    """
    if length < 1:
        raise ValueError("stacked observation needs length >= 1")
    phi = np.eye(model.n)
    blocks = []
    for i in range(length):
        if i:
            phi = model.F(s + i) @ phi
        blocks.append(model.H(s + i) @ phi)
    return np.vstack(blocks)


def window_observable(stacked: np.ndarray, n: int, rel_tol: float = 1e-12) -> bool:
    """True when the stacked matrix pins down all n state components."""
    stacked = np.atleast_2d(np.asarray(stacked, dtype=float))
    if stacked.shape[1] != n:
        raise ValueError(f"stacked matrix has {stacked.shape[1]} columns, expected {n}")
    return rank_with_tol(stacked, rel_tol) == n


def observable_init_length(model: ModelSequence, s: int, max_length: int) -> int:
    """Smallest batch length whose stacked window starting at s is observable.

    The search starts at the state dimension (never below it) and walks up
    to max_length; dimension alone does not guarantee an invertible normal
    matrix, observability does.
    """
    length = min(model.n, max_length)
    while length <= max_length:
        if window_observable(stacked_observation(model, s, length), model.n):
            return length
        length += 1
    raise NotObservableError(
        f"no observable init window of length <= {max_length} starting at step {s}"
    )
