import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dsdsense.pulses import (
    PulseSchedule,
    dsd_envelope,
    dsd_gx,
    dsd_mu,
    plain_envelope,
    tau_min,
    theta,
    theta_derivatives,
    write_waveform_csv,
)
from oracles import central_difference

TM = tau_min(1.0)


def test_theta_midpoint():
    assert theta(0.0, 1.0) == pytest.approx(math.pi / 4, abs=1e-15)


def test_theta_limits_without_overflow():
    with np.errstate(over="raise", invalid="raise"):
        assert theta(1e6, 1.0) == pytest.approx(math.pi / 2)
        assert theta(-1e6, 1.0) == pytest.approx(0.0)
        td, tdd = theta_derivatives(np.array([-1e6, 1e6]), 1.0)
    assert np.all(td == 0.0) and np.all(tdd == 0.0)


@pytest.mark.parametrize("t", [0.3, 1.7, 5.0])
def test_theta_symmetry(t):
    assert theta(t, 2.0) + theta(-t, 2.0) == pytest.approx(math.pi / 2, abs=1e-15)


def test_theta_monotone_in_open_interval():
    t = np.linspace(-30, 30, 2001)
    th = theta(t, 1.0)
    assert np.all(np.diff(th) > 0)
    assert np.all((th > 0) & (th < math.pi / 2))


def test_theta_derivatives_at_origin():
    td, tdd = theta_derivatives(0.0, 1.0)
    assert td == pytest.approx(math.pi / 8)
    assert tdd == 0.0


@pytest.mark.parametrize("tau", [0.38, 1.0, 3.8])
def test_theta_dot_at_two_tau(tau):
    expected = math.pi / (8 * tau) / math.cosh(1.0) ** 2
    fd = central_difference(lambda x: theta(x, tau), 2 * tau, 1e-5 * tau)
    td, _ = theta_derivatives(2 * tau, tau)
    assert td == pytest.approx(expected, rel=1e-14)
    assert td == pytest.approx(fd, rel=1e-6)


@given(st.floats(-50, 50), st.floats(0.1, 10))
def test_theta_dot_even(t, tau):
    a, _ = theta_derivatives(t, tau)
    b, _ = theta_derivatives(-t, tau)
    assert a == pytest.approx(b, rel=1e-13, abs=1e-300)


@pytest.mark.parametrize("tau", [TM, 2 * TM, 5 * TM, 10 * TM])
@pytest.mark.parametrize("u", [-3.0, -1.3, -0.5, 0.4, 1.1, 2.5])
def test_derivatives_match_finite_differences(tau, u):
    t = u * tau
    h = 1e-5 * tau
    td, tdd = theta_derivatives(t, tau)
    assert td == pytest.approx(central_difference(lambda x: theta(x, tau), t, h), rel=1e-6)
    fd2 = central_difference(lambda x: theta_derivatives(x, tau)[0], t, h)
    assert tdd == pytest.approx(fd2, rel=1e-6)


@pytest.mark.parametrize("tau", [TM, 10 * TM])
@pytest.mark.parametrize("u", [-2.0, -0.5, 0.5, 2.0])
def test_gx_matches_finite_difference_of_mu(tau, u):
    t = u * tau
    fd = central_difference(lambda x: dsd_mu(x, 1.0, tau), t, 1e-5 * tau)
    assert dsd_gx(t, 1.0, tau) == pytest.approx(fd, rel=1e-6)


def test_plain_envelope_values():
    s = PulseSchedule.from_taum("plain", 1.0)
    o1, o2 = plain_envelope(0.0, s)
    assert o1 == pytest.approx(1 / math.sqrt(2)) and o2 == pytest.approx(1 / math.sqrt(2))
    o1, o2 = plain_envelope(-10 * s.tau, s)
    assert abs(o1) < 1e-3 and abs(o2 - 1.0) < 1e-3


@given(st.floats(-20, 20))
def test_plain_envelope_mirror(t):
    s = PulseSchedule.create("plain", tau=1.3, omega0=2.0)
    o1, _ = s.envelope(t)
    _, o2 = s.envelope(-t)
    assert o1 == pytest.approx(o2, rel=1e-12, abs=1e-15)


def test_plain_counterintuitive_order():
    s = PulseSchedule.create("plain", tau=1.0)
    o1, o2 = s.envelope(np.array([-5.0, 5.0]))
    assert o2[0] > o1[0] and o1[1] > o2[1]


def test_plain_amplitude_constant():
    s = PulseSchedule.create("plain", tau=0.7, omega0=1.9)
    t = np.linspace(*s.window, 10001)
    o1, o2 = s.envelope(t)
    np.testing.assert_allclose(o1**2 + o2**2, 1.9**2, rtol=1e-12)


def test_dsd_center_equals_plain_center():
    s = PulseSchedule.from_taum("dsd", 1.0)
    assert dsd_gx(0.0, 1.0, s.tau) == 0.0
    o1, o2 = dsd_envelope(0.0, s)
    assert o1 == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert o2 == pytest.approx(1 / math.sqrt(2), abs=1e-15)


@pytest.mark.parametrize("m", [1, 2, 5, 10])
def test_dsd_tails_reduce_to_plain(m):
    dsd = PulseSchedule.from_taum("dsd", m)
    plain = PulseSchedule.from_taum("plain", m)

    def gap(u):
        t = np.array([-u * dsd.tau, u * dsd.tau])
        return max(np.max(np.abs(a - b)) for a, b in zip(dsd.envelope(t), plain.envelope(t)))

    # g_x ~ (pi / 2 tau^2) exp(-|t|/tau) in the tails; the envelope gap follows it
    tail = math.pi / (2 * dsd.tau**2) * math.exp(-10.0)
    assert gap(10) == pytest.approx(tail, rel=1e-3)
    assert gap(20) < 1e-6


def test_dsd_amplitude_invariants():
    s = PulseSchedule.from_taum("dsd", 1.0)
    t = np.linspace(*s.window, 10001)
    o1, o2 = s.envelope(t)
    amp = np.sqrt(1.0 + dsd_gx(t, 1.0, s.tau) ** 2)
    np.testing.assert_allclose(o1**2 + o2**2, amp**2, rtol=1e-12)
    assert np.all(amp >= 1.0)


def test_dsd_converges_to_plain_monotonically():
    sups = []
    for m in (1, 2, 5, 10):
        dsd = PulseSchedule.from_taum("dsd", m)
        plain = PulseSchedule.from_taum("plain", m)
        t = np.linspace(*dsd.window, 20001)
        sup = max(np.max(np.abs(a - b)) for a, b in zip(dsd.envelope(t), plain.envelope(t)))
        sups.append(sup)
    assert all(x > y for x, y in zip(sups, sups[1:])), sups


def test_dsd_large_tau_limit():
    s = PulseSchedule.create("dsd", tau=1e4)
    p = PulseSchedule.create("plain", tau=1e4)
    t = np.linspace(-3e4, 3e4, 101)
    for a, b in zip(s.envelope(t), p.envelope(t)):
        np.testing.assert_allclose(a, b, atol=1e-8)


def test_tau_min_values():
    assert tau_min(1.0) == pytest.approx(1 / 2.63)
    assert tau_min(1.0) == pytest.approx(0.38023, abs=1e-5)
    assert tau_min(2.63) == pytest.approx(1 / 6.9169, rel=1e-12)
    with pytest.raises(ValueError):
        tau_min(0.0)
    with pytest.raises(ValueError):
        tau_min(-1.0)


def test_zero_amplitude_schedule():
    s = PulseSchedule.from_taum("dsd", 1.0, omega0=0.0)
    o1, o2 = s.envelope(np.linspace(-1, 1, 5))
    assert np.all(o1 == 0) and np.all(o2 == 0)


def test_schedule_validation():
    with pytest.raises(ValueError):
        PulseSchedule("plain", 1.0, 1.0, (1.0, 2.0))
    with pytest.raises(ValueError):
        PulseSchedule("cd", 1.0, 1.0, (-1.0, 1.0))
    with pytest.raises(ValueError):
        PulseSchedule.create("plain", tau=0.0)
    with pytest.raises(ValueError):
        plain_envelope(0.0, PulseSchedule.create("dsd", tau=1.0))


def test_reversed_schedule_swaps_couplings():
    s = PulseSchedule.from_taum("dsd", 1.0)
    t = np.linspace(*s.window, 101)
    o1, o2 = s.envelope(t)
    r1, r2 = s.reversed().envelope(t)
    np.testing.assert_allclose(r1, o2, atol=1e-14)
    np.testing.assert_allclose(r2, o1, atol=1e-14)


def test_waveform_csv(tmp_path):
    path = tmp_path / "w.csv"
    write_waveform_csv(path, PulseSchedule.from_taum("plain", 1.0), samples=11)
    rows = path.read_text().splitlines()
    assert rows[0] == "t,omega1,omega2"
    assert len(rows) == 12
