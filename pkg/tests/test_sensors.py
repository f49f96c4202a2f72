import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsdsense.sensors import (
    CalibrationError,
    FieldSensorModel,
    MassSensorModel,
    OperatingPoint,
    ResponseCurve,
    calibrate_operating_point,
    calibration_cut,
    default_x_range,
    detuning_to_field,
    detuning_to_mass,
    field_to_detuning,
    invert_response,
    local_slope,
    mass_frequency_shift,
    mass_to_detuning,
    monotone_window,
    resolution,
    sensor_response_curve,
    steep_window,
)
from dsdsense.sweeps import max_slope

MASS = MassSensorModel(omega_m=2 * math.pi * 6e9, m_resonator=1e-15)
FIELD = FieldSensorModel()


def test_mass_shift_example():
    assert mass_frequency_shift(MASS, 1e-20) == pytest.approx(2 * math.pi * 3e4, rel=1e-12)


@given(st.floats(0, 1e-17), st.floats(0, 1e-17))
def test_mass_mapping_linear(a, b):
    da = mass_to_detuning(MASS, a).delta1
    db = mass_to_detuning(MASS, b).delta1
    dab = mass_to_detuning(MASS, a + b).delta1
    assert dab == pytest.approx(da + db, rel=1e-12, abs=1e-300)


@given(st.floats(0, 1e-16))
def test_mass_round_trip(dm):
    pair = mass_to_detuning(MASS, dm)
    assert pair.color == "degenerate"
    assert detuning_to_mass(MASS, pair.delta1) == pytest.approx(dm, rel=1e-12, abs=1e-300)


def test_negative_mass_rejected():
    with pytest.raises(ValueError):
        mass_to_detuning(MASS, -1e-20)
    with pytest.raises(ValueError):
        sensor_response_curve(MASS, (-1e-20, 1e-20), 11)


def test_field_one_gauss():
    # 1 G shifts the levels by 2.8025 MHz (cyclic) = 2 pi * 2.8025e6 rad/s
    model = FieldSensorModel(omega0=2 * math.pi * 1e6)
    pair = field_to_detuning(model, 1.0)
    assert pair.delta2 == pytest.approx(2.8025, rel=1e-12)
    assert pair.delta1 == -pair.delta2


@given(st.floats(-10, 10))
def test_field_antisymmetric_and_round_trip(b):
    pair = field_to_detuning(FIELD, b)
    assert pair.delta1 == -pair.delta2
    assert detuning_to_field(FIELD, pair.delta2) == pytest.approx(b, rel=1e-12, abs=1e-15)


def test_models_validate():
    with pytest.raises(ValueError):
        MassSensorModel(omega_m=1.0, m_resonator=0.0)
    with pytest.raises(ValueError):
        FieldSensorModel(gamma_e=-1.0)


def test_default_ranges():
    lo, hi = default_x_range(MASS)
    assert lo == 0.0 and hi > 0
    lo, hi = default_x_range(FIELD)
    assert lo == -hi


def test_response_curve_at_zero_is_transfer():
    curve = sensor_response_curve(MASS, (0.0, 1e-19), 5)
    assert curve.p3[0] > 0.99
    assert curve.quantity == "delta_m_grams"


def test_response_curve_csv(tmp_path):
    curve = ResponseCurve("b_gauss", np.array([0.0, 1.0]), np.array([0.5, 0.6]), offset=-0.65)
    path = tmp_path / "c.csv"
    curve.write_csv(path, ["config: kind = field"])
    lines = path.read_text().splitlines()
    assert lines[:3] == ["# config: kind = field", "# offset=-0.65", "b_gauss,p3"]


@pytest.fixture(scope="module")
def field_cut():
    return calibration_cut(FIELD)


@pytest.fixture(scope="module")
def mass_cut():
    return calibration_cut(MASS)


def test_round_two_lands_on_scan_maximum(field_cut):
    op = calibrate_operating_point(FIELD, 0.99, 0.5, cut=field_cut)
    assert op.round == 2
    where, slope = max_slope(field_cut)
    assert op.detuning_offset == where and op.slope_at_point == slope
    assert abs(op.slope_at_point) >= 0.5


def test_round_one_keeps_good_offset(field_cut):
    where, _ = max_slope(field_cut)
    op = calibrate_operating_point(FIELD, 0.5, 0.5, offset=where)
    assert op.round == 1
    assert op.detuning_offset == where
    assert abs(op.slope_at_point) >= 0.5
    assert op.slope_at_point == pytest.approx(local_slope(FIELD, where), rel=1e-12)


def test_unreachable_threshold_raises(mass_cut):
    _, best = max_slope(mass_cut)
    with pytest.raises(CalibrationError, match="unachievable"):
        calibrate_operating_point(MASS, 0.99, 10 * abs(best), cut=mass_cut)


def test_mass_threshold_default(mass_cut):
    op = calibrate_operating_point(MASS, 0.99, cut=mass_cut)
    assert op.round == 2
    assert abs(op.slope_at_point) >= op.threshold


def test_calibration_input_checks():
    with pytest.raises(ValueError):
        calibrate_operating_point(FIELD, 1.5)
    with pytest.raises(ValueError):
        calibrate_operating_point(FIELD, 0.5, resolution_threshold=0.0)
    with pytest.raises(ValueError):
        OperatingPoint(0.0, 1.0, 0, 0.5, 0.5)


def test_report_fields():
    text = OperatingPoint(-0.65, 4.5, 2, 0.5, 0.99).report()
    for key in ("round = 2", "offset = -0.65", "slope = 4.5", "threshold = 0.5", "measured_p3 = 0.99"):
        assert key in text


def _synthetic(x, p):
    return ResponseCurve("x", np.asarray(x, float), np.asarray(p, float))


def test_monotone_window_stops_at_turning_points():
    x = np.linspace(-3, 3, 61)
    curve = _synthetic(x, np.cos(x))  # decreasing on [0, pi]
    lo, hi = monotone_window(curve, 0.5)
    assert lo == pytest.approx(0.0, abs=0.1) and hi == pytest.approx(3.0)


@given(st.floats(0.05, 0.95))
@settings(max_examples=50)
def test_inversion_inside_window(level):
    x = np.linspace(-4, 4, 201)
    curve = _synthetic(x, 0.5 * (1 + np.tanh(x)))
    xi = invert_response(curve, level)
    lo, hi = monotone_window(curve)
    assert lo <= xi <= hi
    assert xi == pytest.approx(math.atanh(2 * level - 1), abs=1e-4)


def test_inversion_outside_range():
    curve = _synthetic(np.linspace(-1, 1, 11), np.linspace(0.2, 0.4, 11))
    with pytest.raises(ValueError):
        invert_response(curve, 0.9)


@pytest.fixture(scope="module")
def field_op(field_cut):
    return calibrate_operating_point(FIELD, 0.99, cut=field_cut)


def test_steep_window_brackets_operating_point(field_op):
    lo, hi = steep_window(FIELD, field_op)
    assert lo < 0 < hi


def test_resolution_inside_window(field_op):
    lo, hi = steep_window(FIELD, field_op)
    r = resolution(FIELD, field_op)
    assert 0 < r < hi - lo


@pytest.fixture(scope="module")
def mass_op(mass_cut):
    return calibrate_operating_point(MASS, 0.99, cut=mass_cut)


def test_steep_window_widens_scan_for_slow_curves(mass_op):
    # the degenerate tau_m curve only falls to 0.1 several Omega_0 away
    lo, hi = steep_window(MASS, mass_op)
    assert lo < 0 < hi
    assert (hi - lo) * MASS.detuning_per_unit > 4.0


def test_steep_window_unreachable_level(mass_op):
    with pytest.raises(CalibrationError, match="not reached"):
        steep_window(MASS, mass_op, levels=(0.1, 0.9), max_span=2.0)
