"""Monte-Carlo horizon sweeps and window-length selection.

Sliding-window filters cost O(N) steps per output index, so sweeping
many horizons over hundreds of runs cannot afford a Python-level loop
per run. The engine in this module exploits two structural facts:

- gain and information schedules do not depend on the measurements, and
- every window estimate is a linear read-out of its window's data.

Schedules are extracted once per window shape by probing the public
per-step operations (zero measurements for the gain recursions, unit
vectors for the linear read-outs), then all runs are pushed through the
schedule with batched matrix products. Tests pin the equivalence of this
path against looping the per-window operations run by run.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .kalman import if_predict, if_update, info_to_state, kf_predict, kf_update
from .model import (
    InfoEstimate,
    ModelSequence,
    StateEstimate,
    observable_init_length,
)
from .rhkf import BATCH_LEAST_SQUARES, ZERO_INFORMATION, rhkf_batch_init
from .sim import SimConfig, simulate_trajectory
from .ufir import ufir_batch_init, ufir_iterate_step

_KINDS = ("kf", "rhkf", "ufir")

_DEFAULT_P0_SCALE = 1e6


@dataclass(frozen=True, eq=False)
class FilterSpec:
    """One estimator entry in a sweep or comparison.

    horizon is the fixed window for single-horizon commands; sweeps
    supply their own grid and ignore it. x0/p0 apply to the Kalman filter
    only (defaults: zero state, 1e6 * I covariance, i.e. a diffuse start).
    """

    kind: str
    label: str | None = None
    init_strategy: str = ZERO_INFORMATION
    init_length: int | None = None
    horizon: int | None = None
    x0: np.ndarray | None = None
    p0: np.ndarray | float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown filter kind {self.kind!r}; expected one of {_KINDS}")

    @property
    def name(self) -> str:
        return self.label or self.kind


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Per-horizon, per-filter Monte-Carlo mean squared errors.

    mse maps filter name to an array of shape (len(horizon_values), n)
    holding per-component MSE averaged over runs and scored steps; the
    aggregate is the component sum (trace).
    """

    horizon_values: tuple[int, ...]
    mse: dict[str, np.ndarray]
    runs: int
    seed: int

    def aggregate(self, name: str) -> np.ndarray:
        """Component-sum MSE for one filter, per horizon."""
        return self.mse[name].sum(axis=1)

    def write_csv(self, fh) -> None:
        """Rows N,filter,component,mse,runs,seed; components x1..xn plus trace."""
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["N", "filter", "component", "mse", "runs", "seed"])
        for name, table in self.mse.items():
            for hi, horizon in enumerate(self.horizon_values):
                for ci in range(table.shape[1]):
                    writer.writerow(
                        [horizon, name, f"x{ci + 1}", repr(float(table[hi, ci])),
                         self.runs, self.seed]
                    )
                writer.writerow(
                    [horizon, name, "trace", repr(float(table[hi].sum())),
                     self.runs, self.seed]
                )


def select_optimal_horizon(result: SweepResult, name: str) -> int:
    """Horizon with the minimal aggregate MSE; ties go to the smaller N."""
    agg = result.aggregate(name)
    return int(result.horizon_values[int(np.argmin(agg))])


def minimal_horizon_for_rhkf(result: SweepResult, slack: float, name: str = "rhkf") -> int:
    """Smallest horizon whose MSE is within (1 + slack) of the filter's best.

    The receding-horizon filter's MSE does not deteriorate as the window
    grows, so the smallest near-optimal window is the cost-efficient
    choice given the O(N) per-output price.
    """
    if slack < 0:
        raise ValueError("slack must be >= 0")
    agg = result.aggregate(name)
    cutoff = (1.0 + slack) * agg.min()
    index = int(np.nonzero(agg <= cutoff)[0][0])
    return int(result.horizon_values[index])


def _kf_init(spec: FilterSpec, n: int) -> tuple[np.ndarray, np.ndarray]:
    x0 = np.zeros(n) if spec.x0 is None else np.atleast_1d(np.asarray(spec.x0, float))
    if spec.p0 is None:
        p0 = _DEFAULT_P0_SCALE * np.eye(n)
    elif np.ndim(spec.p0) == 0:
        p0 = float(spec.p0) * np.eye(n)
    else:
        p0 = np.atleast_2d(np.asarray(spec.p0, float))
    return x0, p0


def _kf_gain_schedule(model: ModelSequence, steps: int, x0, p0):
    """(F, H, K) per step k = 1..steps, extracted from the public ops.

    The covariance recursion does not depend on the data, so the probe
    runs on zero measurements and only P and the gain are kept.
    """
    est = StateEstimate(0, x0, p0)
    zero_y = np.zeros(model.m)
    schedule = []
    for k in range(1, steps + 1):
        predicted = kf_predict(model, k, est)
        est, diag = kf_update(model, k, predicted, zero_y)
        schedule.append((model.F(k), model.H(k), diag.gain))
    return schedule


def _kf_batch(model: ModelSequence, spec: FilterSpec, ys: np.ndarray) -> np.ndarray:
    runs, steps, _ = ys.shape
    x0, p0 = _kf_init(spec, model.n)
    schedule = _kf_gain_schedule(model, steps, x0, p0)
    x = np.broadcast_to(x0, (runs, model.n)).copy()
    out = np.empty((runs, steps, model.n))
    for k, (F, H, K) in enumerate(schedule, start=1):
        x_pred = x @ F.T
        x = x_pred + (ys[:, k - 1, :] - x_pred @ H.T) @ K.T
        out[:, k - 1, :] = x
    return out


class _UfirWindowSchedule:
    """Data-independent pieces of one unbiased-FIR window.

    init_map is the linear read-out of the first init_len measurements
    (probed column by column through the public batch init, which is
    linear in the data); steps carries (F, H, K) for the remaining
    indices, with gains taken from the public recursion run on zeros.
    """

    def __init__(self, model: ModelSequence, start: int, horizon: int,
                 init_length: int | None):
        m = model.m
        j = init_length
        if j is None:
            j = observable_init_length(model, start, horizon)
        self.init_len = j
        cols = []
        for col in range(j * m):
            probe = np.zeros(j * m)
            probe[col] = 1.0
            cols.append(ufir_batch_init(model, start, probe.reshape(j, m)).x_hat)
        self.init_map = np.column_stack(cols)
        est = ufir_batch_init(model, start, np.zeros((j, m)))
        self.steps = []
        for l in range(start + j, start + horizon):
            est, diag = ufir_iterate_step(model, l, est, np.zeros(m))
            self.steps.append((model.F(l), model.H(l), diag.gain))

    def apply(self, ys_win: np.ndarray) -> np.ndarray:
        runs = ys_win.shape[0]
        x = ys_win[:, : self.init_len, :].reshape(runs, -1) @ self.init_map.T
        for offset, (F, H, K) in enumerate(self.steps, start=self.init_len):
            x_pred = x @ F.T
            x = x_pred + (ys_win[:, offset, :] - x_pred @ H.T) @ K.T
        return x


class _RhkfWindowSchedule:
    """Data-independent pieces of one receding-horizon window.

    The information matrix recursion is data-free; the information vector
    is linear, z -> A z + B y per step, with A probed through if_predict
    on unit vectors and B through if_update. The final conversion is one
    shared covariance matrix.
    """

    def __init__(self, model: ModelSequence, start: int, horizon: int,
                 strategy: str, init_length: int | None):
        n, m = model.n, model.m
        end = start + horizon - 1
        if strategy == ZERO_INFORMATION:
            j = 0
            self.init_map = None
            info = InfoEstimate(start - 1, np.zeros(n), np.zeros((n, n)))
        else:
            j = init_length
            if j is None:
                j = observable_init_length(model, start, horizon)
            cols = []
            for col in range(j * m):
                probe = np.zeros(j * m)
                probe[col] = 1.0
                cols.append(rhkf_batch_init(model, start, probe.reshape(j, m)).z_hat)
            self.init_map = np.column_stack(cols)
            info = rhkf_batch_init(model, start, np.zeros((j, m)))
        self.init_len = j
        self.steps = []
        for l in range(start + j, end + 1):
            z_prev = info.Z
            predicted = if_predict(model, l, info)
            if z_prev.any():
                a = np.column_stack(
                    [
                        if_predict(model, l, InfoEstimate(l - 1, e, z_prev)).z_hat
                        for e in np.eye(n)
                    ]
                )
            else:
                # the information vector is exactly zero alongside a zero
                # information matrix, so its propagation never matters here
                a = np.zeros((n, n))
            b = np.column_stack(
                [
                    if_update(model, l, predicted, e).z_hat - predicted.z_hat
                    for e in np.eye(m)
                ]
            )
            info = if_update(model, l, predicted, np.zeros(m))
            self.steps.append((a, b))
        self.cov = info_to_state(InfoEstimate(end, np.zeros(n), info.Z)).P

    def apply(self, ys_win: np.ndarray) -> np.ndarray:
        runs = ys_win.shape[0]
        if self.init_map is None:
            z = np.zeros((runs, self.cov.shape[0]))
        else:
            z = ys_win[:, : self.init_len, :].reshape(runs, -1) @ self.init_map.T
        for offset, (a, b) in enumerate(self.steps, start=self.init_len):
            z = z @ a.T + ys_win[:, offset, :] @ b.T
        return z @ self.cov.T


def _window_schedule(model, spec, start, horizon):
    if spec.kind == "ufir":
        return _UfirWindowSchedule(model, start, horizon, spec.init_length)
    return _RhkfWindowSchedule(model, start, horizon, spec.init_strategy, spec.init_length)


def _fir_batch(model: ModelSequence, spec: FilterSpec, horizon: int,
               ys: np.ndarray, first_index: int) -> np.ndarray:
    runs, steps, _ = ys.shape
    count = steps - first_index + 1
    out = np.empty((runs, count, model.n))
    cache: dict = {}
    for w in range(count):
        k = first_index + w
        s = k - horizon + 1
        key = horizon if model.time_invariant else (horizon, s)
        schedule = cache.get(key)
        if schedule is None:
            schedule = _window_schedule(model, spec, s, horizon)
            cache[key] = schedule
        out[:, w, :] = schedule.apply(ys[:, s - 1 : s - 1 + horizon, :])
    return out


def filter_estimates(
    model: ModelSequence,
    spec: FilterSpec,
    horizon: int | None,
    measurements: np.ndarray,
    first_index: int | None = None,
) -> tuple[np.ndarray, int]:
    """Batched per-run estimates, equivalent to the per-window operations.

    measurements has shape (runs, steps, m); a 2-D input is read as
    (runs, steps) for scalar measurements. Returns (estimates, first_k)
    where estimates[:, w] is the output at index first_k + w. Sliding
    filters produce nothing before k = horizon; the Kalman filter outputs
    from k = 1.
    """
    ys = np.asarray(measurements, dtype=float)
    if ys.ndim == 2:
        ys = ys[:, :, None]
    if ys.ndim != 3 or ys.shape[2] != model.m:
        raise ValueError(
            f"measurements must have shape (runs, steps, {model.m}), got {ys.shape}"
        )
    steps = ys.shape[1]
    if spec.kind == "kf":
        first = 1 if first_index is None else int(first_index)
        est = _kf_batch(model, spec, ys)
        return est[:, first - 1 :, :], first
    if horizon is None:
        raise ValueError(f"filter {spec.name!r} needs a horizon")
    horizon = int(horizon)
    first = horizon if first_index is None else max(horizon, int(first_index))
    if first > steps:
        raise ValueError(
            f"horizon {horizon} leaves no output on a stream of {steps} steps"
        )
    return _fir_batch(model, spec, horizon, ys, first), first


def simulate_runs(
    model: ModelSequence, runs: int, steps: int, seed: int, x0
) -> tuple[np.ndarray, np.ndarray]:
    """Stack simulate_trajectory over run indices 0 .. runs-1."""
    cfg = SimConfig(seed=seed, steps=steps, x0=x0, runs=runs)
    xs = np.empty((runs, steps, model.n))
    ys = np.empty((runs, steps, model.m))
    for i in range(runs):
        xs[i], ys[i] = simulate_trajectory(model, cfg, run_index=i)
    return xs, ys


def mse_sweep(
    model_true: ModelSequence,
    model_assumed: ModelSequence | None,
    filters,
    horizon_values,
    runs: int,
    steps: int,
    seed: int,
    x0=None,
) -> SweepResult:
    """Monte-Carlo MSE per filter and horizon on a shared scoring range.

    Truth is simulated from model_true; every filter sees model_assumed
    (pass None when there is no mismatch). Scoring starts where the
    largest horizon produces its first output, so every (filter, horizon)
    cell averages over the same index set; the Kalman filter's row is
    therefore constant across horizons.
    """
    horizons = [int(v) for v in horizon_values]
    if not horizons or any(b <= a for a, b in zip(horizons, horizons[1:])):
        raise ValueError("horizon_values must be non-empty and strictly increasing")
    if min(horizons) < 1:
        raise ValueError("horizons must be >= 1")
    filters = list(filters)
    if not filters:
        raise ValueError("need at least one filter")
    names = [f.name for f in filters]
    if len(set(names)) != len(names):
        raise ValueError(f"filter names must be unique, got {names}")
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if model_assumed is None:
        model_assumed = model_true

    any_fir = any(f.kind != "kf" for f in filters)
    first_k = max(horizons) if any_fir else 1
    if steps - first_k + 1 < 20:
        raise ValueError(
            f"steps={steps} leaves fewer than 20 scored outputs after the "
            f"largest horizon {max(horizons)}"
        )
    x0 = np.zeros(model_true.n) if x0 is None else x0
    xs, ys = simulate_runs(model_true, runs, steps, seed, x0)
    truth = xs[:, first_k - 1 :, :]

    mse: dict[str, np.ndarray] = {}
    for spec in filters:
        table = np.empty((len(horizons), model_true.n))
        if spec.kind == "kf":
            est, _ = filter_estimates(model_assumed, spec, None, ys, first_index=first_k)
            table[:] = ((est - truth) ** 2).mean(axis=(0, 1))
        else:
            for hi, horizon in enumerate(horizons):
                est, _ = filter_estimates(
                    model_assumed, spec, horizon, ys, first_index=first_k
                )
                table[hi] = ((est - truth) ** 2).mean(axis=(0, 1))
        mse[spec.name] = table
    return SweepResult(tuple(horizons), mse, runs, seed)
