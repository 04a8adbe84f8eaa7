"""Configuration-driven command line: run, sweep, compare.

A whole experiment lives in one JSON document (schema in the README);
flags only pick the subcommand, the config path, and optional output and
seed overrides. Exit codes: 0 ok, 2 config error, 3 runtime filter error.
"""

import argparse
import csv
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FirkitError
from .horizon import (
    FilterSpec,
    filter_estimates,
    minimal_horizon_for_rhkf,
    mse_sweep,
    select_optimal_horizon,
    simulate_runs,
)
from .kalman import kf_run
from .model import MeasurementWindow, ModelSequence, StateEstimate, load_model
from .rhkf import RhkfConfig, rhkf_run
from .sim import MismatchSpec, SimConfig, TransitionPerturbation, apply_mismatch, simulate_trajectory
from .ufir import UfirConfig, ufir_window_estimate

_DEFAULT_SLACK = 0.05


@dataclass(eq=False)
class ExperimentConfig:
    model_true: ModelSequence
    mismatch: MismatchSpec | None
    filters: list[FilterSpec]
    sim: SimConfig
    horizons: list[int] | None
    output: str | None
    rhkf_slack: float

    @property
    def model_assumed(self) -> ModelSequence:
        if self.mismatch is None:
            return self.model_true
        return apply_mismatch(self.model_true, self.mismatch)


def _parse_filters(raw) -> list[FilterSpec]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError("config needs a non-empty 'filters' list")
    specs = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict) or "name" not in entry:
            raise ConfigError(f"filter entry {i} needs a 'name'")
        specs.append(
            FilterSpec(
                kind=entry["name"],
                label=entry.get("label"),
                init_strategy=entry.get("init_strategy", "zero-information"),
                init_length=entry.get("init_length"),
                horizon=entry.get("N"),
                x0=entry.get("x0"),
                p0=entry.get("p0"),
            )
        )
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ConfigError(f"filter names must be unique, got {names}")
    return specs


def _parse_mismatch(raw) -> MismatchSpec | None:
    if raw is None:
        return None
    perturb = None
    if raw.get("f_perturb") is not None:
        p = raw["f_perturb"]
        try:
            perturb = TransitionPerturbation(int(p["from"]), int(p["to"]), p["delta"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"f_perturb is malformed: {exc}") from exc
    return MismatchSpec(
        q_scale=float(raw.get("q_scale", 1.0)),
        r_scale=float(raw.get("r_scale", 1.0)),
        f_perturb=perturb,
    )


def load_experiment(path: str) -> ExperimentConfig:
    """Parse the experiment document and load the model file it names."""
    config_path = Path(path)
    try:
        with open(config_path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc

    try:
        model_field = data["model"]
        sim_field = data["sim"]
    except KeyError as exc:
        raise ConfigError(f"config is missing the {exc} section") from exc

    model_path = Path(model_field)
    if not model_path.is_absolute():
        model_path = config_path.parent / model_path
    model = load_model(model_path)

    try:
        sim = SimConfig(
            seed=int(sim_field["seed"]),
            steps=int(sim_field["steps"]),
            x0=sim_field["x0"],
            runs=int(sim_field.get("runs", 1)),
        )
        mismatch = _parse_mismatch(data.get("mismatch"))
        filters = _parse_filters(data.get("filters"))
        horizons = data.get("horizons")
        if horizons is not None:
            horizons = [int(v) for v in horizons]
        slack = float(data.get("rhkf_slack", _DEFAULT_SLACK))
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"config is malformed: {exc}") from exc
    return ExperimentConfig(
        model_true=model,
        mismatch=mismatch,
        filters=filters,
        sim=sim,
        horizons=horizons,
        output=data.get("output"),
        rhkf_slack=slack,
    )


def _fmt(value: float) -> str:
    # shortest round-trip decimal form
    return repr(float(value))


def _require_horizon(spec: FilterSpec) -> int:
    if spec.horizon is None:
        raise ConfigError(f"filter {spec.name!r} needs an 'N' entry for this command")
    return int(spec.horizon)


def _single_run_estimates(model, spec, steps, ys):
    """Per-step estimates of one filter on one realization.

    Returns (first_k, list of state vectors), driven through the
    per-window operations.
    """
    stream = MeasurementWindow(1, ys)
    if spec.kind == "kf":
        from .horizon import _kf_init

        x0, p0 = _kf_init(spec, model.n)
        results = kf_run(model, StateEstimate(0, x0, p0), stream)
        return 1, [est.x_hat for est, _ in results]
    horizon = _require_horizon(spec)
    if horizon > steps:
        raise ConfigError(f"filter {spec.name!r} horizon {horizon} exceeds steps {steps}")
    if spec.kind == "rhkf":
        cfg = RhkfConfig(horizon, spec.init_strategy, spec.init_length)
        return horizon, [est.x_hat for est in rhkf_run(model, stream, cfg)]
    cfg = UfirConfig(horizon, spec.init_length)
    estimates = [
        ufir_window_estimate(model, stream.segment(i, horizon), cfg).x_hat
        for i in range(steps - horizon + 1)
    ]
    return horizon, estimates


def _cmd_run(cfg: ExperimentConfig, out_path: Path) -> None:
    truth, ys = simulate_trajectory(cfg.model_true, cfg.sim, run_index=0)
    model = cfg.model_assumed
    n = cfg.model_true.n
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = (
            ["k", "filter"]
            + [f"xhat_{i + 1}" for i in range(n)]
            + [f"err_{i + 1}" for i in range(n)]
        )
        writer.writerow(header)
        for spec in cfg.filters:
            first_k, estimates = _single_run_estimates(model, spec, cfg.sim.steps, ys)
            for offset, x_hat in enumerate(estimates):
                k = first_k + offset
                err = x_hat - truth[k - 1]
                writer.writerow(
                    [k, spec.name] + [_fmt(v) for v in x_hat] + [_fmt(v) for v in err]
                )
    print(f"wrote {out_path}")


def _cmd_sweep(cfg: ExperimentConfig, out_path: Path) -> None:
    if not cfg.horizons:
        raise ConfigError("the sweep command needs a 'horizons' grid in the config")
    result = mse_sweep(
        cfg.model_true,
        cfg.model_assumed,
        cfg.filters,
        cfg.horizons,
        runs=cfg.sim.runs,
        steps=cfg.sim.steps,
        seed=cfg.sim.seed,
        x0=cfg.sim.x0,
    )
    with open(out_path, "w", newline="") as fh:
        result.write_csv(fh)
    for spec in cfg.filters:
        print(f"N_opt[{spec.name}] = {select_optimal_horizon(result, spec.name)}")
    for spec in cfg.filters:
        if spec.kind == "rhkf":
            n_min = minimal_horizon_for_rhkf(result, cfg.rhkf_slack, spec.name)
            print(f"N_min[{spec.name}] (slack={cfg.rhkf_slack}) = {n_min}")
    print(f"wrote {out_path}")


def _cmd_compare(cfg: ExperimentConfig, out_path: Path) -> None:
    model = cfg.model_assumed
    fir_horizons = [_require_horizon(s) for s in cfg.filters if s.kind != "kf"]
    first_k = max(fir_horizons) if fir_horizons else 1
    if first_k > cfg.sim.steps:
        raise ConfigError("a filter horizon exceeds the simulated steps")
    xs, ys = simulate_runs(
        cfg.model_true, cfg.sim.runs, cfg.sim.steps, cfg.sim.seed, cfg.sim.x0
    )
    truth = xs[:, first_k - 1 :, :]
    estimates = {}
    for spec in cfg.filters:
        est, _ = filter_estimates(model, spec, spec.horizon, ys, first_index=first_k)
        estimates[spec.name] = est
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["metric", "filter", "other", "value"])
        for spec in cfg.filters:
            mse = float(((estimates[spec.name] - truth) ** 2).mean(axis=(0, 1)).sum())
            writer.writerow(["mse", spec.name, "", _fmt(mse)])
        for i, a in enumerate(cfg.filters):
            for b in cfg.filters[i + 1 :]:
                diff = estimates[a.name] - estimates[b.name]
                value = float(np.linalg.norm(diff, axis=2).mean())
                writer.writerow(["diff", a.name, b.name, _fmt(value)])
    print(f"wrote {out_path}")


_COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "compare": _cmd_compare}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="firkit",
        description="State estimation experiments over a JSON-configured model",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "single realization, per-step estimates CSV"),
        ("sweep", "Monte-Carlo MSE over a horizon grid"),
        ("compare", "per-filter MSE and pairwise estimate differences"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment JSON document")
        p.add_argument("--out", help="output CSV path (overrides the config)")
        p.add_argument("--seed", type=int, help="seed override")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_experiment(args.config)
        if args.seed is not None:
            cfg.sim = dataclasses.replace(cfg.sim, seed=args.seed)
        out = args.out or cfg.output or f"{args.command}.csv"
        out_path = Path(out)
        handler = _COMMANDS[args.command]
    except (ConfigError, ValueError) as exc:
        reason = getattr(exc, "reason", "config")
        print(f"error: {reason}: {exc}", file=sys.stderr)
        return 2
    try:
        handler(cfg, out_path)
    except ConfigError as exc:
        print(f"error: {exc.reason}: {exc}", file=sys.stderr)
        return 2
    except FirkitError as exc:
        print(f"error: {exc.reason}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
