"""Seeded trajectory simulation and assumed-model mismatch construction."""

from dataclasses import dataclass

import numpy as np

from .errors import ModelConsistencyError
from .linalg import psd_sqrt
from .model import ModelOverride, ModelSequence, _matrix, _vector


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Simulation settings; x0 is the true initial state."""

    seed: int
    steps: int
    x0: np.ndarray
    runs: int = 1

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        object.__setattr__(self, "x0", _vector(self.x0, "x0"))


def run_rng(seed: int, run_index: int) -> np.random.Generator:
    """Generator for one Monte-Carlo run.

    Defined as default_rng(SeedSequence([seed, run_index])), a pure
    function of the pair: distinct runs get independent streams and any
    rerun of the same pair is bit-identical.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(run_index)]))


def simulate_trajectory(
    model: ModelSequence, cfg: SimConfig, run_index: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate x_k = F(k) x_{k-1} + w_{k-1}, y_k = H(k) x_k + v_k.

    Returns (states, measurements) with rows k = 1 .. steps. The run's
    generator first yields steps x n standard normals for the process
    noise rows w_0 .. w_{steps-1}, then steps x m for v_1 .. v_steps;
    each row is mapped through a PSD square root of the matching
    covariance, so a zero covariance yields exactly zero noise.
    """
    if cfg.x0.size != model.n:
        raise ModelConsistencyError(
            f"x0 has size {cfg.x0.size}, model state dimension is {model.n}"
        )
    rng = run_rng(cfg.seed, run_index)
    zw = rng.standard_normal((cfg.steps, model.n))
    zv = rng.standard_normal((cfg.steps, model.m))

    factors: dict[bytes, np.ndarray] = {}

    def factor(mat: np.ndarray, what: str) -> np.ndarray:
        key = mat.tobytes()
        if key not in factors:
            factors[key] = psd_sqrt(mat, what=what)
        return factors[key]

    xs = np.empty((cfg.steps, model.n))
    ys = np.empty((cfg.steps, model.m))
    x = cfg.x0
    for k in range(1, cfg.steps + 1):
        x = model.F(k) @ x + factor(model.Q(k - 1), "Q") @ zw[k - 1]
        xs[k - 1] = x
        ys[k - 1] = model.H(k) @ x + factor(model.R(k), "R") @ zv[k - 1]
    return xs, ys


@dataclass(frozen=True, eq=False)
class TransitionPerturbation:
    """Additive change to F on the inclusive index interval [first, last]."""

    first: int
    last: int
    delta: np.ndarray

    def __post_init__(self):
        if self.last < self.first:
            raise ValueError("perturbation interval is empty")
        object.__setattr__(
            self, "delta", np.atleast_2d(np.asarray(self.delta, dtype=float))
        )


@dataclass(frozen=True, eq=False)
class MismatchSpec:
    """What the filters assume, relative to the truth.

    Scales apply to Q and R everywhere (base and overrides alike); the
    optional perturbation is added to F on its interval.
    """

    q_scale: float = 1.0
    r_scale: float = 1.0
    f_perturb: TransitionPerturbation | None = None

    def __post_init__(self):
        if self.q_scale <= 0 or self.r_scale <= 0:
            raise ValueError("mismatch scales must be positive")


def apply_mismatch(model: ModelSequence, spec: MismatchSpec) -> ModelSequence:
    """Build the assumed model handed to the filters; the truth is untouched.

    The transition perturbation is split at existing override boundaries
    so each appended record adds the delta on top of whatever F was in
    force on that piece.
    """
    overrides = [
        ModelOverride(
            ov.lo,
            ov.hi,
            ov.F,
            None if ov.Q is None else spec.q_scale * ov.Q,
            None if ov.R is None else spec.r_scale * ov.R,
        )
        for ov in model.overrides
    ]
    if spec.f_perturb is not None:
        p = spec.f_perturb
        delta = _matrix(p.delta, model.n, model.n, "f_perturb delta")
        cuts = {p.first, p.last + 1}
        for ov in model.overrides:
            if ov.F is not None:
                if p.first < ov.lo <= p.last:
                    cuts.add(ov.lo)
                if p.first <= ov.hi < p.last:
                    cuts.add(ov.hi + 1)
        edges = sorted(cuts)
        for lo, hi_plus_one in zip(edges[:-1], edges[1:]):
            overrides.append(
                ModelOverride(lo, hi_plus_one - 1, model.F(lo) + delta, None, None)
            )
    return ModelSequence(
        model.F_base,
        model.H_base,
        spec.q_scale * model.Q_base,
        spec.r_scale * model.R_base,
        overrides,
    )
