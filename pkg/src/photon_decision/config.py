"""TOML configuration files for ``ExperimentConfig``.

Layout (every key optional, defaults are the reference apparatus)::

    [run]       model, n_pulses, master_seed, coincidence_window,
                transmittance, branch_cap, two_jitter, c_light
    [source]    mean_pairs_per_pulse, pulse_rate, single_pair
    [detectors.H] / [detectors.A] / [detectors.B]
                efficiency, dark_count_prob, jitter
    [fibers]    signal_speed, source_to_H, source_to_BS, BS_to_A, BS_to_B,
                delay_line_length, delay_line_arm
    [geometry]  detector_distance_AB
"""

from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .experiment import ConfigError, ExperimentConfig, swap_delay_line
from .models import ModelKind
from .source import DetectorId, DetectorSpec, SourceSpec
from .spacetime import FiberPath

PRESETS = ("spacelike", "timelike")

_RUN_KEYS = {
    "model": str, "n_pulses": int, "master_seed": int, "coincidence_window": float,
    "transmittance": float, "branch_cap": int, "two_jitter": bool, "c_light": float,
}
_SOURCE_KEYS = {"mean_pairs_per_pulse": float, "pulse_rate": float, "single_pair": bool}
_DETECTOR_KEYS = {"efficiency": float, "dark_count_prob": float, "jitter": float}
_FIBER_KEYS = {
    "signal_speed": float, "source_to_H": float, "source_to_BS": float,
    "BS_to_A": float, "BS_to_B": float, "delay_line_length": float, "delay_line_arm": str,
}
_GEOMETRY_KEYS = {"detector_distance_AB": float}
_SCHEMA = {
    "run": _RUN_KEYS, "source": _SOURCE_KEYS, "fibers": _FIBER_KEYS,
    "geometry": _GEOMETRY_KEYS, "detectors.H": _DETECTOR_KEYS,
    "detectors.A": _DETECTOR_KEYS, "detectors.B": _DETECTOR_KEYS,
}


def _coerce(section: str, key: str, value, kind):
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if kind is bool and not isinstance(value, bool):
        raise ConfigError(f"[{section}] {key} must be true/false, got {value!r}")
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ConfigError(f"[{section}] {key} must be an integer, got {value!r}")
    if not isinstance(value, kind):
        raise ConfigError(f"[{section}] {key} must be {kind.__name__}, got {value!r}")
    return value


def _flatten(data: dict) -> dict[str, dict]:
    sections: dict[str, dict] = {}
    for name, body in data.items():
        if name == "detectors" and isinstance(body, dict):
            for det, sub in body.items():
                sections[f"detectors.{det}"] = sub
        else:
            sections[name] = body
    for name, body in sections.items():
        if name not in _SCHEMA:
            raise ConfigError(f"unknown config section [{name}]")
        if not isinstance(body, dict):
            raise ConfigError(f"[{name}] must be a table")
        for key in body:
            if key not in _SCHEMA[name]:
                raise ConfigError(f"unknown key {key!r} in [{name}]")
        sections[name] = {k: _coerce(name, k, v, _SCHEMA[name][k]) for k, v in body.items()}
    return sections


def config_from_dict(data: dict) -> ExperimentConfig:
    s = _flatten(data)
    run = s.get("run", {})
    fib = dict(s.get("fibers", {}))
    speed = fib.pop("signal_speed", None)
    defaults = ExperimentConfig()

    def fiber(key, attr):
        default = getattr(defaults, attr)
        return FiberPath(fib.get(key, default.length),
                         default.signal_speed if speed is None else speed)

    try:
        dets = {}
        for d in DetectorId:
            dets[d] = DetectorSpec(d, **s.get(f"detectors.{d.value}", {}))
        kwargs = dict(
            source=SourceSpec(**s.get("source", {})),
            detector_H=dets[DetectorId.H],
            detector_A=dets[DetectorId.A],
            detector_B=dets[DetectorId.B],
            fiber_source_to_H=fiber("source_to_H", "fiber_source_to_H"),
            fiber_source_to_BS=fiber("source_to_BS", "fiber_source_to_BS"),
            fiber_BS_to_A=fiber("BS_to_A", "fiber_BS_to_A"),
            fiber_BS_to_B=fiber("BS_to_B", "fiber_BS_to_B"),
            **{k: fib[k] for k in ("delay_line_length", "delay_line_arm") if k in fib},
            **s.get("geometry", {}),
            **run,
        )
        if "model" in run:
            kwargs["model"] = ModelKind(run["model"])
        return ExperimentConfig(**kwargs)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def config_to_dict(config: ExperimentConfig) -> dict:
    fibers = (config.fiber_source_to_H, config.fiber_source_to_BS,
              config.fiber_BS_to_A, config.fiber_BS_to_B)
    speeds = {f.signal_speed for f in fibers}
    if len(speeds) != 1:
        raise ConfigError("config files hold one signal_speed shared by all fibers")

    def det(d: DetectorSpec):
        return {"efficiency": d.efficiency, "dark_count_prob": d.dark_count_prob,
                "jitter": d.jitter}

    return {
        "run": {
            "model": config.model.value,
            "n_pulses": config.n_pulses,
            "master_seed": config.master_seed,
            "coincidence_window": config.coincidence_window,
            "transmittance": config.transmittance,
            "branch_cap": config.branch_cap,
            "two_jitter": config.two_jitter,
            "c_light": config.c_light,
        },
        "source": {
            "mean_pairs_per_pulse": config.source.mean_pairs_per_pulse,
            "pulse_rate": config.source.pulse_rate,
            "single_pair": config.source.single_pair,
        },
        "detectors": {d.id.value: det(d) for d in config.detectors},
        "fibers": {
            "signal_speed": speeds.pop(),
            "source_to_H": config.fiber_source_to_H.length,
            "source_to_BS": config.fiber_source_to_BS.length,
            "BS_to_A": config.fiber_BS_to_A.length,
            "BS_to_B": config.fiber_BS_to_B.length,
            "delay_line_length": config.delay_line_length,
            "delay_line_arm": config.delay_line_arm,
        },
        "geometry": {"detector_distance_AB": config.detector_distance_AB},
    }


def dumps(config: ExperimentConfig) -> str:
    return tomli_w.dumps(config_to_dict(config))


def loads(text: str) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    return config_from_dict(data)


def load(path) -> ExperimentConfig:
    return loads(Path(path).read_text())


def save(config: ExperimentConfig, path) -> None:
    Path(path).write_text(dumps(config))


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")
    text = resources.files("photon_decision").joinpath(f"presets/{name}.toml").read_text()
    return loads(text)


def reference_config(name: str = "spacelike") -> ExperimentConfig:
    """The reference apparatus built in code (the presets are its serialization)."""
    cfg = ExperimentConfig()
    if name == "timelike":
        return swap_delay_line(cfg)
    if name != "spacelike":
        raise ConfigError(f"unknown reference form {name!r}")
    return cfg


def apply_overrides(config: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    """Apply ``section.key=value`` overrides (value parsed as a TOML literal)."""
    data = config_to_dict(config)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        path, raw = item.split("=", 1)
        parts = path.strip().split(".")
        if len(parts) < 2:
            raise ConfigError(f"override key {path!r} needs a section, e.g. run.n_pulses")
        try:
            value = tomllib.loads(f"v = {raw.strip()}")["v"]
        except tomllib.TOMLDecodeError:
            value = raw.strip()
        node = data
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override key {path!r} does not name a table")
        node[parts[-1]] = value
    return config_from_dict(data)
