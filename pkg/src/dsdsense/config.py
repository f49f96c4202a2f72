"""Flat ``key = value`` run configuration shared by all CLI subcommands."""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

ECHO_PREFIX = "# config: "
#: Keys that never change the numbers in an output file and are not echoed.
RUNTIME_KEYS = ("out", "parallel", "gnuplot")


class ConfigError(ValueError):
    pass


def _float_list(text: str) -> tuple[float, ...]:
    items = [s.strip() for s in text.split(",") if s.strip()]
    if not items:
        raise ValueError("empty list")
    return tuple(float(s) for s in items)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt(conv):
    def parse(text: str):
        return None if text.strip().lower() in ("", "none", "auto") else conv(text)

    return parse


@dataclass
class RunConfig:
    scheme: str = "dsd"
    tau_over_taum: tuple[float, ...] = (1.0,)
    amplitude: float = 1.0
    omega0_mhz: float = 1.0
    omega0_convention: str = "angular"
    delta1: float = 0.0
    delta2: float = 0.0
    delta_min: float = -5.0
    delta_max: float = 5.0
    n: int | None = None
    axis: str = "degenerate"
    step: float | None = None
    norm_tolerance: float = 1e-8
    window_multiplier: float = 10.0
    steps_per_scale: int = 100
    trajectory_samples: int = 512
    kind: str = "mass"
    omega_m_ghz: float = 6.0
    m_resonator_g: float = 1e-15
    gamma_e_mhz_per_gauss: float = 2.8025
    sensor_tau_over_taum: float | None = None
    x_min: float | None = None
    x_max: float | None = None
    n_x: int = 201
    resolution_threshold: float = 0.25
    measured_p3: float | None = None
    population_step: float = 0.1
    out: str | None = None
    parallel: int = 1
    gnuplot: bool = False

    def validate(self) -> "RunConfig":
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.scheme in ("plain", "dsd"), f"scheme must be plain or dsd, got {self.scheme!r}")
        need(all(t > 0 for t in self.tau_over_taum), "tau_over_taum must be positive")
        need(self.amplitude >= 0, "amplitude must be non-negative")
        need(self.omega0_mhz > 0, "omega0_mhz must be positive")
        need(self.omega0_convention in ("angular", "cyclic"), "omega0_convention must be angular or cyclic")
        need(self.delta_min < self.delta_max, "delta_min must be below delta_max")
        need(self.n is None or self.n >= 2, "n must be at least 2")
        need(self.axis in ("degenerate", "nondegenerate"), "axis must be degenerate or nondegenerate")
        need(self.step is None or self.step > 0, "step must be positive or auto")
        need(self.norm_tolerance > 0, "norm_tolerance must be positive")
        need(self.window_multiplier > 0, "window_multiplier must be positive")
        need(self.steps_per_scale >= 1, "steps_per_scale must be >= 1")
        need(self.trajectory_samples >= 0, "trajectory_samples must be >= 0")
        need(self.kind in ("mass", "field"), "kind must be mass or field")
        need(self.omega_m_ghz > 0, "omega_m_ghz must be positive")
        need(self.m_resonator_g > 0, "m_resonator_g must be positive")
        need(self.gamma_e_mhz_per_gauss > 0, "gamma_e_mhz_per_gauss must be positive")
        need(self.sensor_tau_over_taum is None or self.sensor_tau_over_taum > 0,
             "sensor_tau_over_taum must be positive")
        need(self.n_x >= 3, "n_x must be at least 3")
        if self.x_min is not None and self.x_max is not None:
            need(self.x_min < self.x_max, "x_min must be below x_max")
        if self.kind == "mass":
            need(self.x_min is None or self.x_min >= 0, "deposited mass range must be non-negative")
            need(self.x_max is None or self.x_max >= 0, "deposited mass range must be non-negative")
        need(self.resolution_threshold > 0, "resolution_threshold must be positive")
        need(self.measured_p3 is None or 0 <= self.measured_p3 <= 1, "measured_p3 must lie in [0, 1]")
        need(0 < self.population_step < 1, "population_step must lie in (0, 1)")
        need(self.parallel >= 1, "parallel must be >= 1")
        return self

    def echo_lines(self) -> list[str]:
        """Effective configuration, one ``key = value`` per line."""
        lines = []
        for f in fields(self):
            if f.name in RUNTIME_KEYS:
                continue
            lines.append(f"config: {f.name} = {_format(getattr(self, f.name))}")
        return lines


def _format(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(repr(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


_PARSERS = {
    "scheme": str,
    "tau_over_taum": _float_list,
    "amplitude": float,
    "omega0_mhz": float,
    "omega0_convention": str,
    "delta1": float,
    "delta2": float,
    "delta_min": float,
    "delta_max": float,
    "n": _opt(int),
    "axis": str,
    "step": _opt(float),
    "norm_tolerance": float,
    "window_multiplier": float,
    "steps_per_scale": int,
    "trajectory_samples": int,
    "kind": str,
    "omega_m_ghz": float,
    "m_resonator_g": float,
    "gamma_e_mhz_per_gauss": float,
    "sensor_tau_over_taum": _opt(float),
    "x_min": _opt(float),
    "x_max": _opt(float),
    "n_x": int,
    "resolution_threshold": float,
    "measured_p3": _opt(float),
    "population_step": float,
    "out": _opt(str),
    "parallel": int,
    "gnuplot": _bool,
}
KEYS = tuple(_PARSERS)
assert set(KEYS) == {f.name for f in fields(RunConfig)}


def parse_items(items: dict[str, str]) -> dict[str, Any]:
    parsed = {}
    for key, raw in items.items():
        if key not in _PARSERS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            parsed[key] = _PARSERS[key](raw.strip())
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
    return parsed


def parse_text(text: str) -> dict[str, Any]:
    """Parse a config file, or the ``# config:`` echo block of an output file."""
    lines = text.splitlines()
    echoed = [ln[len(ECHO_PREFIX):] for ln in lines if ln.startswith(ECHO_PREFIX)]
    body = "\n".join(echoed) if echoed else text
    cp = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#", ";"), inline_comment_prefixes=None,
        interpolation=None,
    )
    cp.optionxform = str
    try:
        cp.read_string("[run]\n" + body)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    return parse_items(dict(cp["run"]))


def load_config(path: str | Path | None, overrides: dict[str, Any] | None = None) -> RunConfig:
    values: dict[str, Any] = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        values.update(parse_text(text))
    values.update(overrides or {})
    return dataclasses.replace(RunConfig(), **values).validate()
