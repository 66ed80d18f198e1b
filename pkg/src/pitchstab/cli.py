"""Batch command-line interface.

Subcommands: identify, validate, design lqr, design kalman, fuzzy eval,
simulate, sweep. Exit codes: 0 success, 1 config/validation error,
2 numerical failure, 3 simulated fall (only with --fail-on-fall).
All outputs are deterministic given the config and --seed; numbers are
serialized with full round-trip precision.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import fuzzy, harness, kalman, lqr, sysid
from .errors import NumericalError, ValidationError
from .statespace import load_model, save_model, simulate

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_FELL = 3


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so bad flags map to exit 1."""

    def error(self, message):
        raise _ArgumentError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="pitchstab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_id = sub.add_parser("identify", help="least-squares model fit from a CSV log")
    p_id.add_argument("--data", required=True, help="CSV with header t,u,theta,theta_dot")
    p_id.add_argument("--order", type=int, default=2, help="state dimension (full-state logs)")
    p_id.add_argument("--out", required=True, help="output model JSON path")

    p_val = sub.add_parser("validate", help="VAF of a model against a CSV log")
    p_val.add_argument("--model", required=True)
    p_val.add_argument("--data", required=True)

    p_design = sub.add_parser("design", help="Riccati designs from a model")
    design_sub = p_design.add_subparsers(dest="design_kind", required=True)
    p_lqr = design_sub.add_parser("lqr")
    p_lqr.add_argument("--model", required=True)
    p_lqr.add_argument("--q11", type=float, default=40.0)
    p_lqr.add_argument("--out", help="optional JSON output path")
    p_kal = design_sub.add_parser("kalman")
    p_kal.add_argument("--model", required=True)
    p_kal.add_argument("--vn22", type=float, default=35.0)
    p_kal.add_argument("--out", help="optional JSON output path")

    p_fz = sub.add_parser("fuzzy", help="fuzzy gain schedule operations")
    fz_sub = p_fz.add_subparsers(dest="fuzzy_kind", required=True)
    p_eval = fz_sub.add_parser("eval")
    p_eval.add_argument("--config", required=True, help="fuzzy config JSON")
    p_eval.add_argument("--theta", type=float, required=True, help="degrees")
    p_eval.add_argument("--theta-dot", type=float, required=True, help="rad/s")

    p_sim = sub.add_parser("simulate", help="run one closed-loop scenario")
    p_sim.add_argument("--scenario", required=True)
    p_sim.add_argument("--seed", type=int, help="override the scenario seed")
    p_sim.add_argument("--trace", help="trace CSV output path")
    p_sim.add_argument("--metrics", help="metrics JSON output path")
    p_sim.add_argument("--fail-on-fall", action="store_true",
                       help="exit 3 when the robot falls")

    p_sweep = sub.add_parser("sweep", help="rerun a scenario over parameter values")
    p_sweep.add_argument("--scenario", required=True)
    p_sweep.add_argument("--param", required=True,
                         help="dotted path into the scenario JSON, e.g. plant.gyro_noise_std")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--out", help="optional JSON output path for the table")

    return parser


def _cmd_identify(args) -> int:
    data = sysid.load_timeseries_csv(args.data)
    if args.order != data.outputs.shape[1]:
        raise ValidationError(
            f"--order {args.order} does not match the {data.outputs.shape[1]} logged state channels"
        )
    result = sysid.identify(data, args.order)
    save_model(result.model, args.out)
    rms = ", ".join(f"{v:.6g}" for v in result.residual_rms)
    print(f"identified order-{args.order} model -> {args.out} "
          f"(residual rms per channel: {rms}; condition {result.condition_estimate:.3g})")
    return EXIT_OK


def _cmd_validate(args) -> int:
    model = load_model(args.model)
    data = sysid.load_timeseries_csv(args.data)
    sim = simulate(model, data.outputs[0], data.inputs)
    labels = ("theta", "theta_dot")
    for ch in range(data.outputs.shape[1]):
        score = sysid.vaf(data.outputs[:, ch], sim.outputs[:, ch])
        name = labels[ch] if ch < len(labels) else f"y{ch}"
        print(f"VAF[{name}] = {score:.3f}%")
    return EXIT_OK


def _cmd_design_lqr(args) -> int:
    model = load_model(args.model)
    design = lqr.design_controller(model, lqr.default_cost(args.q11))
    residual = lqr.riccati_residual(model, lqr.default_cost(args.q11), design.p_riccati)
    k = design.k.ravel()
    print(f"K = [{', '.join(repr(float(v)) for v in k)}]")
    print(f"riccati residual = {residual:.3e}; closed-loop radius = {design.closed_loop_radius:.6f}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"k": design.k.tolist(), "p": design.p_riccati.tolist(),
                       "riccati_residual": residual,
                       "closed_loop_radius": design.closed_loop_radius}, fh, indent=2)
            fh.write("\n")
    return EXIT_OK


def _cmd_design_kalman(args) -> int:
    model = load_model(args.model)
    cov = kalman.default_covariances(args.vn22)
    design = kalman.design_filter(model, cov)
    residual = kalman.riccati_residual(model, cov, design.p_riccati)
    print(f"Kf = {design.kf.tolist()}")
    print(f"riccati residual = {residual:.3e}; closed-loop radius = {design.closed_loop_radius:.6f}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"kf": design.kf.tolist(), "p": design.p_riccati.tolist(),
                       "riccati_residual": residual,
                       "closed_loop_radius": design.closed_loop_radius}, fh, indent=2)
            fh.write("\n")
    return EXIT_OK


def _cmd_fuzzy_eval(args) -> int:
    sched = fuzzy.load_scheduler(args.config)
    k_theta, k_theta_dot = sched.schedule_gains(args.theta, args.theta_dot)
    print(f"K_theta = {k_theta!r}")
    print(f"K_theta_dot = {k_theta_dot!r}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    config = harness.load_scenario(args.scenario)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    trace = harness.run_scenario(config)
    if args.trace:
        harness.write_trace_csv(trace, args.trace)
    metrics = harness.transient_metrics(trace) if len(trace) >= 2 else None
    if args.metrics:
        if metrics is None:
            raise ValidationError("trace too short for metrics output")
        harness.write_metrics_json(metrics, trace.outcome, args.metrics)
    final_theta = trace.theta_true[-1]
    print(f"outcome: {trace.outcome} after {trace.t[-1]:.3f} s "
          f"(final theta {final_theta:.3f} deg)")
    if args.fail_on_fall and trace.outcome == "fell":
        return EXIT_FELL
    return EXIT_OK


def _set_dotted(doc: dict, path: str, value):
    keys = path.split(".")
    node = doc
    for key in keys[:-1]:
        if isinstance(node, list):
            node = node[_list_index(node, key, path)]
        else:
            if key not in node:
                node[key] = {}
            node = node[key]
    last = keys[-1]
    if isinstance(node, list):
        node[_list_index(node, last, path)] = value
    else:
        node[last] = value


def _list_index(node: list, key: str, path: str) -> int:
    try:
        idx = int(key)
    except ValueError:
        raise ValidationError(f"--param {path}: '{key}' indexes a list, expected an integer") from None
    if not 0 <= idx < len(node):
        raise ValidationError(f"--param {path}: index {idx} out of range (list has {len(node)})")
    return idx


def _cmd_sweep(args) -> int:
    with open(args.scenario) as fh:
        base_doc = json.load(fh)
    base_dir = os.path.dirname(os.path.abspath(args.scenario))
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ValidationError(f"--values must be comma-separated numbers: {exc}") from None
    if not values:
        raise ValidationError("--values is empty")

    def one(value: float):
        doc = json.loads(json.dumps(base_doc))
        _set_dotted(doc, args.param, value)
        config = harness.scenario_from_dict(doc, base_dir=base_dir)
        trace = harness.run_scenario(config)
        metrics = harness.transient_metrics(trace) if len(trace) >= 2 else None
        return {
            "value": value,
            "outcome": trace.outcome,
            "max_abs_theta_deg": float(np.max(np.abs(trace.theta_true))),
            "settling_time_s": metrics.settling_time if metrics else None,
            "robustness_delta_deg": metrics.robustness_delta if metrics else None,
        }

    max_workers = int(os.environ.get("PITCHSTAB_THREADS", "1") or "1")
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(one, values))
    else:
        rows = [one(v) for v in values]

    header = f"{args.param:>24}  outcome  max|theta|   t_settle"
    print(header)
    for row in rows:
        settle = "-" if row["settling_time_s"] is None else f"{row['settling_time_s']:.3f}"
        print(f"{row['value']:>24}  {row['outcome']:>7}  {row['max_abs_theta_deg']:>10.3f}  {settle:>9}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(rows, fh, indent=2)
            fh.write("\n")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "identify":
            return _cmd_identify(args)
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "design":
            if args.design_kind == "lqr":
                return _cmd_design_lqr(args)
            return _cmd_design_kalman(args)
        if args.command == "fuzzy":
            return _cmd_fuzzy_eval(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        raise _ArgumentError(f"unknown command {args.command}")  # pragma: no cover
    except (_ArgumentError, ValidationError, ValueError, TypeError, KeyError,
            FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
