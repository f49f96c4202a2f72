"""dsdsense: DSD-assisted STIRAP transfer, detuning sweeps and sensor calibration.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from . import __version__
from .config import KEYS, RUNTIME_KEYS, ConfigError, RunConfig, load_config, parse_items
from .propagator import IntegrationError, IntegratorConfig, propagate
from .pulses import PulseSchedule
from .qcore import TWO_PI, DetuningPair, UnitSystem, mhz_to_rad_per_s
from .sensors import (
    CalibrationError,
    FieldSensorModel,
    MassSensorModel,
    calibrate_operating_point,
    default_x_range,
    resolution,
    schedule_for,
    sensor_response_curve,
    steep_window,
)
from .sweeps import LineCut, line_cut, max_slope, sweep_2d

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def recipe_path(name: str) -> Path:
    fname = name if name.endswith(".cfg") else f"{name}.cfg"
    path = Path(str(resources.files("dsdsense") / "recipes" / fname))
    if not path.is_file():
        raise ConfigError(f"unknown recipe {name!r}")
    return path


def list_recipes() -> list[str]:
    root = resources.files("dsdsense") / "recipes"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def integrator_config(cfg: RunConfig) -> IntegratorConfig:
    return IntegratorConfig(
        step=cfg.step,
        norm_tolerance=cfg.norm_tolerance,
        window_multiplier=cfg.window_multiplier,
        steps_per_scale=cfg.steps_per_scale,
    )


def single_tau(cfg: RunConfig) -> float:
    if len(cfg.tau_over_taum) != 1:
        raise ConfigError("this command takes a single tau_over_taum")
    return cfg.tau_over_taum[0]


def header(cfg: RunConfig, command: str) -> list[str]:
    return [f"tool = dsdsense {__version__}", f"command = {command}", *cfg.echo_lines()]


def out_path(cfg: RunConfig, default: str) -> Path:
    return Path(cfg.out if cfg.out is not None else default)


def _gnuplot(path: Path, body: str) -> None:
    path.with_suffix(path.suffix + ".gp").write_text(body)


def cmd_transfer(cfg: RunConfig) -> int:
    schedule = PulseSchedule.from_taum(cfg.scheme, single_tau(cfg), cfg.amplitude)
    units = UnitSystem.from_mhz(cfg.omega0_mhz, cfg.omega0_convention)
    res = propagate(
        schedule,
        DetuningPair(cfg.delta1, cfg.delta2),
        cfg=integrator_config(cfg),
        trajectory_samples=cfg.trajectory_samples,
    )
    p1, p2, p3 = (float(x) for x in res.populations)
    final = f"final p1={p1!r} p2={p2!r} p3={p3!r} norm_drift={res.norm_drift!r}"
    path = out_path(cfg, "transfer.csv")
    lines = header(cfg, "transfer") + [
        f"time_unit_seconds = {units.to_physical_time(1.0)!r}",
        final,
    ]
    if res.trajectory is not None:
        res.trajectory.write_csv(path, tuple(lines))
    else:
        path.write_text("".join(f"# {ln}\n" for ln in lines) + "t,p1,p2,p3,norm\n")
    if cfg.gnuplot:
        _gnuplot(path, _GP_TRAJECTORY.format(csv=path.name))
    print(final)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    n = cfg.n if cfg.n is not None else 41
    pmap = sweep_2d(
        cfg.scheme,
        single_tau(cfg),
        (cfg.delta_min, cfg.delta_max, n),
        integrator_config(cfg),
        parallel=cfg.parallel,
        omega0=cfg.amplitude,
    )
    path = out_path(cfg, "sweep.csv")
    pmap.write_csv(path, header(cfg, "sweep"))
    if cfg.gnuplot:
        _gnuplot(path, _GP_MAP.format(csv=path.name, n=n))
    print(f"wrote {path} ({n}x{n} cells, max norm drift {pmap.max_norm_drift:.2e})")
    return EXIT_OK


def slope_report(cuts: list[LineCut]) -> str:
    lines = []
    best = None
    for cut in cuts:
        delta_star, slope = max_slope(cut)
        lines.append(
            f"axis={cut.axis} tau_over_taum={cut.tau_over_taum!r} "
            f"delta_star={delta_star!r} slope={slope!r}"
        )
        if best is None or abs(slope) > abs(best[1]):
            best = (cut.tau_over_taum, slope)
    if best is not None:
        lines.append(f"steepest tau_over_taum={best[0]!r} abs_slope={abs(best[1])!r}")
    return "\n".join(lines)


def cmd_cut(cfg: RunConfig) -> int:
    n = cfg.n if cfg.n is not None else 201
    icfg = integrator_config(cfg)
    base = out_path(cfg, "cut.csv")
    taus = cfg.tau_over_taum
    cuts = []
    for tau in taus:
        cut = line_cut(
            cfg.scheme, tau, cfg.axis, (cfg.delta_min, cfg.delta_max), n, icfg,
            parallel=cfg.parallel, omega0=cfg.amplitude,
        )
        cuts.append(cut)
        path = base if len(taus) == 1 else base.with_name(f"{base.stem}_tau{tau:g}{base.suffix}")
        cut.write_csv(path, header(cfg, "cut"))
        if cfg.gnuplot:
            _gnuplot(path, _GP_CUT.format(csv=path.name))
    if len(taus) > 1:
        scan = base.with_name(f"{base.stem}_scan{base.suffix}")
        with open(scan, "w") as fh:
            for ln in header(cfg, "cut"):
                fh.write(f"# {ln}\n")
            fh.write(f"# axis={cfg.axis}\ntau_over_taum,delta,p3\n")
            for cut in cuts:
                for d, p in zip(cut.delta, cut.p3):
                    fh.write(f"{cut.tau_over_taum!r},{float(d)!r},{float(p)!r}\n")
    report = slope_report(cuts)
    base.with_name(f"{base.stem}_slopes.txt").write_text(report + "\n")
    print(report)
    return EXIT_OK


def build_model(cfg: RunConfig, kind: str):
    omega0 = mhz_to_rad_per_s(cfg.omega0_mhz, cfg.omega0_convention)
    if kind == "mass":
        tau = cfg.sensor_tau_over_taum if cfg.sensor_tau_over_taum is not None else 1.0
        return MassSensorModel(
            omega_m=TWO_PI * cfg.omega_m_ghz * 1e9,
            m_resonator=cfg.m_resonator_g,
            omega0=omega0,
            tau_over_taum=tau,
            scheme=cfg.scheme,
        )
    tau = cfg.sensor_tau_over_taum if cfg.sensor_tau_over_taum is not None else 10.0
    return FieldSensorModel(cfg.gamma_e_mhz_per_gauss, omega0, tau, cfg.scheme)


def _calibrate(cfg: RunConfig, model, icfg):
    measured = cfg.measured_p3
    if measured is None:
        p = propagate(schedule_for(model), (0.0, 0.0), cfg=icfg).p3
        measured = min(max(p, 0.0), 1.0)
    return calibrate_operating_point(
        model, measured, cfg.resolution_threshold, icfg, parallel=cfg.parallel
    )


def _sensor_report(cfg, model, op, icfg) -> str:
    unit = "g" if isinstance(model, MassSensorModel) else "Gauss"
    res = resolution(model, op, cfg.population_step, icfg, parallel=cfg.parallel)
    win = steep_window(model, op, cfg=icfg, parallel=cfg.parallel)
    return "\n".join(
        [
            op.report(),
            f"kind = {cfg.kind}",
            f"tau_over_taum = {model.tau_over_taum!r}",
            f"resolution_{unit} = {res!r}  (population step {cfg.population_step!r})",
            f"steep_window_{unit} = {win[0]!r},{win[1]!r}",
            f"steep_window_width_{unit} = {win[1] - win[0]!r}",
        ]
    )


def cmd_sensor(cfg: RunConfig, kind: str) -> int:
    if kind == "mass" and ((cfg.x_min or 0.0) < 0 or (cfg.x_max or 0.0) < 0):
        raise ConfigError("deposited mass range must be non-negative")
    model = build_model(cfg, kind)
    icfg = integrator_config(cfg)
    op = _calibrate(cfg, model, icfg)
    lo, hi = default_x_range(model)
    x_range = (cfg.x_min if cfg.x_min is not None else lo, cfg.x_max if cfg.x_max is not None else hi)
    if not x_range[0] < x_range[1]:
        raise ConfigError(f"empty sensing range {x_range}")
    curve = sensor_response_curve(model, x_range, cfg.n_x, icfg, op.detuning_offset, cfg.parallel)
    report = _sensor_report(cfg, model, op, icfg)
    path = out_path(cfg, f"sensor_{kind}.csv")
    curve.write_csv(path, header(cfg, f"sensor {kind}"))
    path.with_name(f"{path.stem}_calibration.txt").write_text(report + "\n")
    if cfg.gnuplot:
        _gnuplot(path, _GP_SENSOR.format(csv=path.name, xlabel=curve.quantity))
    print(report)
    return EXIT_OK


def cmd_calibrate(cfg: RunConfig) -> int:
    model = build_model(cfg, cfg.kind)
    icfg = integrator_config(cfg)
    op = _calibrate(cfg, model, icfg)
    report = op.report()
    if cfg.out is not None:
        Path(cfg.out).write_text(report + "\n")
    print(report)
    return EXIT_OK


_GP_TRAJECTORY = """set datafile separator ','
set key autotitle columnhead
set xlabel 't (1/Omega0)'
set ylabel 'population'
plot '{csv}' using 1:2 with lines, '' using 1:3 with lines, '' using 1:4 with lines
"""
_GP_MAP = """set datafile separator ','
set xlabel 'delta1 (Omega0)'
set ylabel 'delta2 (Omega0)'
set view map
set dgrid3d {n},{n}
splot '{csv}' using 1:2:5 with pm3d notitle
"""
_GP_CUT = """set datafile separator ','
set key autotitle columnhead
set xlabel 'delta (Omega0)'
set ylabel 'P3'
plot '{csv}' using 1:2 with lines
"""
_GP_SENSOR = """set datafile separator ','
set key autotitle columnhead
set xlabel '{xlabel}'
set ylabel 'P3'
plot '{csv}' using 1:2 with lines
"""


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file (or an output file to re-run from its echo)")
    common.add_argument("--recipe", help="bundled recipe name, see `dsdsense recipes`")
    common.add_argument("--out", help="output path")
    common.add_argument("--parallel", help="worker processes for sweeps")
    common.add_argument("--gnuplot", action="store_const", const="true", help="also write a gnuplot script")
    for key in KEYS:
        if key in RUNTIME_KEYS:
            continue
        flags = [f"--{key}"]
        if "_" in key:
            flags.append(f"--{key.replace('_', '-')}")
        common.add_argument(*flags, dest=f"set_{key}", metavar="VALUE")

    parser = argparse.ArgumentParser(prog="dsdsense", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dsdsense {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("transfer", parents=[common], help="single propagation with trajectory")
    sub.add_parser("sweep", parents=[common], help="2-D population map over (delta1, delta2)")
    sub.add_parser("cut", parents=[common], help="line cuts along a detuning diagonal")
    sensor = sub.add_parser("sensor", parents=[common], help="sensor response curve and calibration")
    sensor.add_argument("sensor_kind", choices=("mass", "field"))
    sub.add_parser("calibrate", parents=[common], help="two-round operating-point calibration")
    sub.add_parser("recipes", help="list bundled recipes")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    raw = {}
    for key in KEYS:
        value = getattr(args, f"set_{key}", None) if key not in RUNTIME_KEYS else getattr(args, key, None)
        if value is not None:
            raw[key] = str(value)
    return parse_items(raw)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.command == "recipes":
        print("\n".join(list_recipes()))
        return EXIT_OK

    try:
        if args.config and args.recipe:
            raise ConfigError("use either --config or --recipe")
        source = recipe_path(args.recipe) if args.recipe else args.config
        overrides = _overrides(args)
        if args.command == "sensor":
            overrides["kind"] = args.sensor_kind
        cfg = load_config(source, overrides)
        if args.command == "transfer":
            return cmd_transfer(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        if args.command == "cut":
            return cmd_cut(cfg)
        if args.command == "sensor":
            return cmd_sensor(cfg, args.sensor_kind)
        return cmd_calibrate(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, CalibrationError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
