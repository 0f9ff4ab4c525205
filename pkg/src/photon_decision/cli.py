"""Command line front end: ``photon-decision {run,compare,oracle,sweep,init}``.

Exit status: 0 success, 2 usage or configuration error, 3 runtime/model error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis, config as cfgio
from .analysis import AnalysisError
from .experiment import ConfigError, ExperimentConfig, run
from .models import ModelError, ModelKind, analytic_joint
from .spacetime import FiberPath

log = logging.getLogger("photon_decision")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3
SWEEP_PARAMETERS = {
    "mu": "", "efficiency": "", "distance": "m", "delay": "m", "window": "s",
}


class UsageError(Exception):
    pass


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def resolve_config(spec: str) -> ExperimentConfig:
    """A config file path, or the name of a shipped preset."""
    path = Path(spec)
    if path.is_file():
        return cfgio.load(path)
    if spec in cfgio.PRESETS:
        return cfgio.preset(spec)
    raise UsageError(f"config file not found: {spec}")


def _configure(args) -> ExperimentConfig:
    config = resolve_config(args.config)
    config = cfgio.apply_overrides(config, args.set or [])
    changes = {}
    if getattr(args, "model", None):
        changes["model"] = ModelKind(args.model)
    if getattr(args, "pulses", None) is not None:
        changes["n_pulses"] = args.pulses
    if getattr(args, "seed", None) is not None:
        changes["master_seed"] = args.seed
    if changes:
        try:
            config = config.replace(**changes)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return config


def cmd_run(args) -> int:
    config = _configure(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sep = config.separation

    t0 = time.perf_counter()
    result = run(config, log_trials=args.log_trials, workers=args.workers)
    elapsed = time.perf_counter() - t0
    counts = result.counts

    cfgio.save(config, out / "config.toml")
    _write_json(out / "counts.json", counts.to_dict())
    if result.trials is not None:
        result.trials.write_csv(out / "trials.csv")

    try:
        est = analysis.estimate(counts, sep.kind.value)
    except AnalysisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    record = est.to_dict()
    record["model"] = config.model.value
    _write_json(out / "estimates.json", record)

    try:
        audit = analysis.energy_audit_from_counts(counts, config)
        audit_doc = audit.to_dict()
    except AnalysisError as exc:
        audit, audit_doc = None, {"skipped": str(exc)}
    _write_json(out / "audit.json", audit_doc)

    lines = [
        f"model: {config.model.value}    separation: {sep.kind.value} "
        f"(d = {sep.detector_distance:g} m, threshold = {sep.signaling_threshold_distance:.4g} m)",
        f"pulses: {config.n_pulses}    seed: {config.master_seed}    "
        f"mu: {config.source.mean_pairs_per_pulse:g}{' (single pair)' if config.source.single_pair else ''}",
        "",
        analysis.format_table({sep.kind.value: est}),
        "",
        f"R_H={counts.R_H} R_HA={counts.R_HA} R_HB={counts.R_HB} "
        f"R_HAB={counts.R_HAB} R_H00={counts.R_H00}",
    ]
    if audit is not None:
        lines.append(
            f"energy audit: {audit.n_heralded} single-pair heralds, "
            f"no-click {audit.zero_click_fraction:.4f}, double-click "
            f"{audit.double_click_fraction:.4f}, anomaly {audit.anomaly_fraction:.4f}")
    report = "\n".join(lines) + "\n"
    (out / "report.txt").write_text(report)
    print(report, end="")
    log.info("simulated %d pulses in %.2f s", config.n_pulses, elapsed)

    if not args.no_plots:
        from . import plotting
        analytic = analytic_joint(config.model, sep, config.transmittance)
        plotting.joint_distribution(est, out / "joint.png",
                                    title=f"{config.model.value}, {sep.kind.value}",
                                    analytic=analytic)
    return EXIT_OK


def _load_estimates(run_dir: str) -> analysis.ProbabilityEstimates:
    path = Path(run_dir) / "estimates.json"
    if not path.is_file():
        raise UsageError(f"no estimates.json in {run_dir}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise AnalysisError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise AnalysisError(f"{path}: not a JSON object")
    return analysis.ProbabilityEstimates.from_dict(data)


def cmd_compare(args) -> int:
    a = _load_estimates(args.run_a)
    b = _load_estimates(args.run_b)
    rep = analysis.compare_runs(a, b, label_a=args.run_a, label_b=args.run_b)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "comparison.json", rep.to_dict())
    lines = [f"a: {args.run_a}", f"b: {args.run_b}", "",
             analysis.format_table({"a": a, "b": b}), "", "z-scores:"]
    lines += [f"  {k:<4} {v:8.3f}" for k, v in rep.z.items()]
    ratio = "undefined" if rep.p11_ratio is None else f"{rep.p11_ratio:.4g}"
    lines += [f"max z: {rep.max_z:.3f}", f"P11 ratio a/b: {ratio}"]
    text = "\n".join(lines) + "\n"
    (out / "comparison.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_oracle(args) -> int:
    res = analysis.accidental_triples_oracle(args.mu, args.eta_h, args.eta_ab, args.n_max,
                                             args.transmittance)
    print(f"P(1,1|herald) = {res.value:.12e}")
    print(f"truncation bound = {res.tail_bound:.3e} (n_max = {res.n_max})")
    print(f"P(herald) = {res.p_herald:.12e}")
    return EXIT_OK


def parse_range(text: str) -> np.ndarray:
    """``start:stop:num`` (inclusive linspace) or a comma list of values."""
    try:
        if ":" in text:
            start, stop, num = text.split(":")
            num = int(num)
            if num < 1:
                raise UsageError(f"empty range {text!r}")
            start, stop = float(start), float(stop)
            if num > 1 and stop < start:
                raise UsageError(f"empty range {text!r} (stop < start)")
            return np.linspace(start, stop, num)
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad range {text!r}: {exc}") from exc
    if not values:
        raise UsageError("empty range")
    return np.array(values)


def apply_sweep_value(config: ExperimentConfig, parameter: str, value: float) -> ExperimentConfig:
    if parameter == "mu":
        return config.replace(source=replace(config.source, mean_pairs_per_pulse=value))
    if parameter == "efficiency":
        return config.replace(detector_A=replace(config.detector_A, efficiency=value),
                              detector_B=replace(config.detector_B, efficiency=value))
    if parameter == "distance":
        return config.replace(detector_distance_AB=value)
    if parameter == "delay":
        a = config.fiber_BS_to_A
        return config.replace(fiber_BS_to_B=FiberPath(a.length + value, a.signal_speed))
    if parameter == "window":
        return config.replace(coincidence_window=value)
    raise UsageError(f"unknown sweep parameter {parameter!r}")


SWEEP_COLUMNS = ("parameter", "value", "separation", "signaling_window",
                 "threshold_distance", "R_H", "P_A", "P_B", "P11", "P11_se", "P00",
                 "locality_ratio")


def sweep_rows(config: ExperimentConfig, parameter: str, values, simulate: bool = True,
               workers: int = 1) -> list[dict]:
    rows = []
    for v in values:
        c = apply_sweep_value(config, parameter, float(v))
        sep = c.separation
        row = {"parameter": parameter, "value": float(v), "separation": sep.kind.value,
               "signaling_window": sep.signaling_window,
               "threshold_distance": sep.signaling_threshold_distance}
        if simulate:
            counts = run(c, workers=workers).counts
            row["R_H"] = counts.R_H
            if counts.R_H:
                e = analysis.estimate(counts)
                row.update(P_A=e.P_A, P_B=e.P_B, P11=e.P11, P11_se=e.std_err["P11"],
                           P00=e.P00, locality_ratio=e.locality_ratio)
        rows.append(row)
    return rows


def cmd_sweep(args) -> int:
    if args.parameter not in SWEEP_PARAMETERS:
        raise UsageError(f"unknown sweep parameter {args.parameter!r}; "
                         f"choose from {sorted(SWEEP_PARAMETERS)}")
    values = parse_range(args.range)
    config = _configure(args)
    rows = sweep_rows(config, args.parameter, values, simulate=not args.no_simulate,
                      workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: ("" if r.get(k) is None else r.get(k, "")) for k in SWEEP_COLUMNS})
    flips = [(a["value"], b["value"]) for a, b in zip(rows, rows[1:])
             if a["separation"] != b["separation"]]
    print(f"{len(rows)} points written to {out / 'sweep.csv'}")
    for lo, hi in flips:
        print(f"separation flips between {lo:g} and {hi:g}")
    if not args.no_plots:
        from . import plotting
        plotting.sweep(rows, args.parameter, out / "sweep.png", SWEEP_PARAMETERS[args.parameter])
    return EXIT_OK


def cmd_init(args) -> int:
    path = Path(args.path)
    if path.exists() and not args.force:
        raise UsageError(f"{path} exists (use --force to overwrite)")
    cfgio.save(cfgio.preset(args.preset), path)
    print(f"wrote {args.preset} config to {path}")
    return EXIT_OK


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default="spacelike",
                   help="TOML config file or preset name (spacelike, timelike)")
    p.add_argument("--model", choices=[m.value for m in ModelKind])
    p.add_argument("--pulses", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override a config entry, e.g. source.single_pair=true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-plots", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="photon-decision", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one configuration")
    _add_config_args(p)
    p.add_argument("--out", default="run_out")
    p.add_argument("--log-trials", action="store_true", help="also write trials.csv")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="z-scores between two run directories")
    p.add_argument("run_a")
    p.add_argument("run_b")
    p.add_argument("--out", default="compare_out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("oracle", help="accidental triple coincidences from multi-pair pulses")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--eta-h", type=float, default=1.0)
    p.add_argument("--eta-ab", type=float, default=1.0)
    p.add_argument("--n-max", type=int, default=40)
    p.add_argument("--transmittance", type=float, default=0.5)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("sweep", help="estimates or separation class over a parameter range")
    p.add_argument("parameter", help="one of: " + ", ".join(SWEEP_PARAMETERS))
    p.add_argument("--range", required=True, help="start:stop:num or v1,v2,...")
    _add_config_args(p)
    p.add_argument("--out", default="sweep_out")
    p.add_argument("--no-simulate", action="store_true",
                   help="only classify the separation, skip the Monte Carlo")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("init", help="write a preset config file")
    p.add_argument("preset", choices=cfgio.PRESETS)
    p.add_argument("path")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_init)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
