"""Sensor models built on the detuning response of the DSD passage.

A sensor maps a physical quantity X onto a coordinate on one detuning axis,

    delta_axis = offset - k * X,

where ``k`` (units of Omega_0 per unit of X) comes from the physics:

* mass sensor (degenerate axis): delta1 = delta2 = -R dm, R = omega_m / (2 m);
* magnetometer (nondegenerate axis): delta1 = -gamma_e B, delta2 = +gamma_e B.

``offset`` is the calibrated operating point, applied by shifting both drive
frequencies.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

import numpy as np
from scipy.interpolate import PchipInterpolator

from .propagator import IntegrationError, IntegratorConfig
from .pulses import PulseSchedule, Scheme
from .qcore import TWO_PI, DetuningPair
from .sweeps import Axis, LineCut, axis_pair, line_cut, max_slope, run_cells

#: Default resolution threshold on |dP3/d delta| (per unit of Omega_0).
DEFAULT_RESOLUTION_THRESHOLD = 0.25
#: Half-width (units of Omega_0) of the 3-point probe used in round one.
PROBE_STEP = 1e-2
GAMMA_E_MHZ_PER_GAUSS = 2.8025
#: Omega_0 = 1 MHz read as an angular frequency (rad/s).
DEFAULT_OMEGA0 = 1e6


class CalibrationError(RuntimeError):
    """The requested sensitivity cannot be reached on the scanned cut."""


class SensorPropagationError(IntegrationError):
    def __init__(self, message: str, x: float):
        super().__init__(f"{message} (X={x!r})")
        self.x = x


@dataclass(frozen=True)
class MassSensorModel:
    """Optomechanical mass sensor on the degenerate axis.

    omega_m: mechanical angular frequency in rad/s; m_resonator in grams;
    omega0: peak coupling G_0 in rad/s.
    """

    omega_m: float
    m_resonator: float
    omega0: float = DEFAULT_OMEGA0
    tau_over_taum: float = 1.0
    scheme: Scheme = "dsd"
    responsivity: float = field(init=False)

    axis = "degenerate"
    quantity = "delta_m_grams"

    def __post_init__(self):
        if not self.m_resonator > 0:
            raise ValueError("m_resonator must be positive")
        if not self.omega_m > 0 or not self.omega0 > 0:
            raise ValueError("omega_m and omega0 must be positive")
        object.__setattr__(self, "responsivity", self.omega_m / (2.0 * self.m_resonator))

    @property
    def detuning_per_unit(self) -> float:
        """k in delta_axis = offset - k * dm, per gram."""
        return self.responsivity / self.omega0

    def check_quantity(self, x) -> None:
        if np.any(np.asarray(x) < 0):
            raise ValueError("deposited mass must be non-negative")


@dataclass(frozen=True)
class FieldSensorModel:
    """NV-centre magnetometer on the nondegenerate axis.

    gamma_e is quoted in MHz/Gauss as a cyclic frequency (converted with 2 pi);
    omega0 is the microwave Rabi amplitude in rad/s.
    """

    gamma_e: float = GAMMA_E_MHZ_PER_GAUSS
    omega0: float = DEFAULT_OMEGA0
    tau_over_taum: float = 10.0
    scheme: Scheme = "dsd"

    axis = "nondegenerate"
    quantity = "b_gauss"

    def __post_init__(self):
        if not self.gamma_e > 0 or not self.omega0 > 0:
            raise ValueError("gamma_e and omega0 must be positive")

    @property
    def gamma_rad_per_s(self) -> float:
        return TWO_PI * self.gamma_e * 1e6

    @property
    def detuning_per_unit(self) -> float:
        """k in delta_axis = offset - k * B, per Gauss."""
        return self.gamma_rad_per_s / self.omega0

    def check_quantity(self, x) -> None:
        pass


SensorModel = Union[MassSensorModel, FieldSensorModel]


def mass_frequency_shift(model: MassSensorModel, delta_m: float) -> float:
    """delta omega_m = R * dm in rad/s."""
    return model.responsivity * delta_m


def mass_to_detuning(model: MassSensorModel, delta_m: float) -> DetuningPair:
    if delta_m < 0:
        raise ValueError("deposited mass must be non-negative")
    d = -mass_frequency_shift(model, delta_m) / model.omega0
    return DetuningPair(d, d)


def detuning_to_mass(model: MassSensorModel, delta: float) -> float:
    """Inverse of :func:`mass_to_detuning` for the degenerate value delta."""
    return -delta * model.omega0 / model.responsivity


def field_to_detuning(model: FieldSensorModel, b_z: float) -> DetuningPair:
    d = model.gamma_rad_per_s * b_z / model.omega0
    return DetuningPair(-d, d)


def detuning_to_field(model: FieldSensorModel, delta2: float) -> float:
    """Inverse of :func:`field_to_detuning` given delta2 = gamma_e * B."""
    return delta2 * model.omega0 / model.gamma_rad_per_s


def schedule_for(model: SensorModel) -> PulseSchedule:
    return PulseSchedule.from_taum(model.scheme, model.tau_over_taum)


def axis_coordinate(model: SensorModel, x, offset: float = 0.0):
    return offset - model.detuning_per_unit * np.asarray(x, dtype=float)


@dataclass(frozen=True)
class ResponseCurve:
    """Sampled sensing curve P3 = f(X) at a fixed operating offset."""

    quantity: str
    x: np.ndarray
    p3: np.ndarray
    offset: float = 0.0

    def write_csv(self, path: str | Path, header_lines: Iterable[str] = ()) -> None:
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write(f"# offset={self.offset!r}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([self.quantity, "p3"])
            for x, p in zip(self.x, self.p3):
                w.writerow([repr(float(x)), repr(float(p))])


def _p3_on_axis(model, coords, cfg, parallel=1):
    d1, d2 = axis_pair(model.axis, coords)
    pops, _ = run_cells(schedule_for(model), d1, d2, cfg, parallel)
    return pops[:, 2]


def sensor_response_curve(
    model: SensorModel,
    x_range: tuple[float, float],
    n: int,
    cfg: IntegratorConfig | None = None,
    offset: float = 0.0,
    parallel: int = 1,
) -> ResponseCurve:
    if n < 3:
        raise ValueError("response curve needs n >= 3")
    x = np.linspace(x_range[0], x_range[1], n)
    model.check_quantity(x)
    coords = axis_coordinate(model, x, offset)
    try:
        p3 = _p3_on_axis(model, coords, cfg, parallel)
    except IntegrationError as exc:
        bad = getattr(exc, "detuning", None)
        xbad = float("nan") if bad is None else float((offset - bad.delta1) / model.detuning_per_unit)
        raise SensorPropagationError(str(exc), xbad) from exc
    return ResponseCurve(model.quantity, x, p3, offset)


@dataclass(frozen=True)
class OperatingPoint:
    detuning_offset: float
    slope_at_point: float
    round: int
    threshold: float
    measured_p3: float

    def __post_init__(self):
        if self.round < 1:
            raise ValueError("round must be >= 1")

    def report(self) -> str:
        return "\n".join(
            [
                "calibration report",
                f"round = {self.round}",
                f"offset = {self.detuning_offset!r}",
                f"slope = {self.slope_at_point!r}",
                f"threshold = {self.threshold!r}",
                f"measured_p3 = {self.measured_p3!r}",
            ]
        )


def local_slope(model: SensorModel, offset: float, cfg=None, step: float = PROBE_STEP) -> float:
    """3-point central estimate of dP3/d delta at the given axis offset."""
    p = _p3_on_axis(model, np.array([offset - step, offset + step]), cfg)
    return float((p[1] - p[0]) / (2.0 * step))


def calibration_cut(model: SensorModel, cfg=None, delta_range=(-5.0, 5.0), n=201, parallel=1) -> LineCut:
    return line_cut(model.scheme, model.tau_over_taum, model.axis, delta_range, n, cfg, parallel)


def calibrate_operating_point(
    model: SensorModel,
    measured_p3: float,
    resolution_threshold: float = DEFAULT_RESOLUTION_THRESHOLD,
    cfg: IntegratorConfig | None = None,
    offset: float = 0.0,
    cut: LineCut | None = None,
    parallel: int = 1,
) -> OperatingPoint:
    """Two-round calibration.

    Round 1 keeps ``offset`` when the local slope already meets the
    threshold. Otherwise round 2 moves the operating point to the steepest
    sample of a line cut along the model's axis.
    """
    if not 0.0 <= measured_p3 <= 1.0:
        raise ValueError("measured_p3 must lie in [0, 1]")
    if not resolution_threshold > 0:
        raise ValueError("resolution_threshold must be positive")

    slope = local_slope(model, offset, cfg)
    if abs(slope) >= resolution_threshold:
        return OperatingPoint(offset, slope, 1, resolution_threshold, measured_p3)

    if cut is None:
        cut = calibration_cut(model, cfg, parallel=parallel)
    delta_star, best = max_slope(cut)
    if abs(best) < resolution_threshold:
        raise CalibrationError(
            f"threshold unachievable: max |dP3/d delta| = {abs(best):.4g} "
            f"< threshold {resolution_threshold:.4g}"
        )
    return OperatingPoint(delta_star, best, 2, resolution_threshold, measured_p3)


def _monotone_branch(x: np.ndarray, p: np.ndarray, i0: int) -> tuple[int, int]:
    """Index range [lo, hi] around i0 on which p is strictly monotone."""
    d = np.diff(p)
    # direction taken from the steeper neighbouring interval
    left = d[i0 - 1] if i0 > 0 else 0.0
    right = d[i0] if i0 < d.size else 0.0
    sign = np.sign(right if abs(right) >= abs(left) else left)
    if sign == 0:
        return i0, i0
    lo = i0
    while lo > 0 and np.sign(d[lo - 1]) == sign:
        lo -= 1
    hi = i0
    while hi < d.size and np.sign(d[hi]) == sign:
        hi += 1
    return lo, hi


def monotone_window(curve: ResponseCurve, x0: float = 0.0) -> tuple[float, float]:
    """X range around x0 on which the sampled curve is strictly monotone."""
    i0 = int(np.argmin(np.abs(curve.x - x0)))
    lo, hi = _monotone_branch(curve.x, curve.p3, i0)
    return float(curve.x[lo]), float(curve.x[hi])


def invert_response(curve: ResponseCurve, p3: float, x0: float = 0.0) -> float:
    """X = f^-1(P3) on the monotone branch through x0, by PCHIP interpolation."""
    i0 = int(np.argmin(np.abs(curve.x - x0)))
    lo, hi = _monotone_branch(curve.x, curve.p3, i0)
    if hi - lo < 1:
        raise ValueError("no monotone branch around the operating point")
    xs = curve.x[lo : hi + 1]
    ps = curve.p3[lo : hi + 1]
    order = np.argsort(ps)
    ps, xs = ps[order], xs[order]
    if not ps[0] <= p3 <= ps[-1]:
        raise ValueError(f"P3={p3} outside the monotone range [{ps[0]:.4g}, {ps[-1]:.4g}]")
    return float(PchipInterpolator(ps, xs)(p3))


def default_x_range(model: SensorModel, span: float = 2.0) -> tuple[float, float]:
    """X interval that moves the axis coordinate by ``span`` Omega_0."""
    width = span / model.detuning_per_unit
    if isinstance(model, MassSensorModel):
        return 0.0, width
    return -0.5 * width, 0.5 * width


def resolution(
    model: SensorModel,
    op: OperatingPoint,
    population_step: float = 0.1,
    cfg: IntegratorConfig | None = None,
    n: int = 401,
    parallel: int = 1,
) -> float:
    """Smallest |X| whose response differs from the operating point by population_step.

    Both directions along the monotone branch are tried; for the mass sensor
    only dm >= 0 is physical.
    """
    curve = sensor_response_curve(model, default_x_range(model), n, cfg, op.detuning_offset, parallel)
    p0 = float(np.interp(0.0, curve.x, curve.p3))
    found = []
    for target in (p0 - population_step, p0 + population_step):
        try:
            x = invert_response(curve, target, 0.0)
        except ValueError:
            continue
        if isinstance(model, MassSensorModel) and x < 0:
            continue
        found.append(abs(x))
    if not found:
        raise CalibrationError("population step not reachable on the monotone branch")
    return min(found)


def steep_window(
    model: SensorModel,
    op: OperatingPoint,
    levels: tuple[float, float] = (0.1, 0.9),
    cfg: IntegratorConfig | None = None,
    n: int = 401,
    parallel: int = 1,
    span: float = 2.0,
    max_span: float = 16.0,
) -> tuple[float, float]:
    """Sorted X values where the response crosses ``levels`` on the monotone
    branch through the operating point.

    The scan covers +-span Omega_0 of axis coordinate around the operating
    point and doubles up to max_span until both levels are bracketed. It is
    symmetric in X even for the mass sensor: the window describes the curve
    shape, not a physical measurement.
    """
    while True:
        half = span / model.detuning_per_unit
        x = np.linspace(-half, half, n)
        p3 = _p3_on_axis(model, axis_coordinate(model, x, op.detuning_offset), cfg, parallel)
        curve = ResponseCurve(model.quantity, x, p3, op.detuning_offset)
        try:
            a = invert_response(curve, levels[0], 0.0)
            b = invert_response(curve, levels[1], 0.0)
            return (min(a, b), max(a, b))
        except ValueError as exc:
            if span * 2 > max_span:
                raise CalibrationError(f"steep window levels {levels} not reached: {exc}") from None
            span *= 2


def window_width(window: tuple[float, float]) -> float:
    return math.fabs(window[1] - window[0])
