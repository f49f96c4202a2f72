"""Pulse envelopes: the logistic ("Vitanov") STIRAP pair and its dressed-state
(DSD) correction.

All functions accept scalars or numpy arrays for ``t``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Literal

import numpy as np
from scipy.special import expit

from .qcore import DetuningLike, Hamiltonian3, as_detuning

Scheme = Literal["plain", "dsd"]

#: tau_m = 1 / (TAU_MIN_FACTOR * Omega_0)
TAU_MIN_FACTOR = 2.63
DEFAULT_WINDOW_MULTIPLIER = 10.0


def tau_min(omega0: float) -> float:
    """Minimum pulse duration parameter for the dressed-state scheme."""
    if not omega0 > 0:
        raise ValueError("omega0 must be positive")
    return 1.0 / (TAU_MIN_FACTOR * omega0)


def _sech(x):
    ax = np.abs(x)
    e = np.exp(-ax)
    return 2.0 * e / (1.0 + e * e)


def theta(t, tau: float):
    """Mixing angle (pi/2) / (1 + exp(-t/tau)); overflow-free for any t."""
    return 0.5 * math.pi * expit(np.asarray(t, dtype=float) / tau)


def theta_derivatives(t, tau: float):
    """Analytic first and second time derivatives of :func:`theta`."""
    x = np.asarray(t, dtype=float) / (2.0 * tau)
    s2 = _sech(x) ** 2
    theta_dot = math.pi / (8.0 * tau) * s2
    theta_ddot = -math.pi / (8.0 * tau**2) * s2 * np.tanh(x)
    return theta_dot, theta_ddot


def plain_envelope_at(t, omega0: float, tau: float):
    th = theta(t, tau)
    return omega0 * np.sin(th), omega0 * np.cos(th)


def dsd_mu(t, omega0: float, tau: float):
    """Dressing angle mu = -arctan(theta_dot / Omega_0)."""
    theta_dot, _ = theta_derivatives(t, tau)
    return -np.arctan2(theta_dot, omega0)


def dsd_gx(t, omega0: float, tau: float):
    """g_x = d(mu)/dt in closed form (Omega_0 is constant)."""
    theta_dot, theta_ddot = theta_derivatives(t, tau)
    return -theta_ddot * omega0 / (omega0**2 + theta_dot**2)


def dsd_envelope_at(t, omega0: float, tau: float):
    """Corrected pair (Omega~ sin theta~, Omega~ cos theta~) with g_z = 0."""
    t = np.asarray(t, dtype=float)
    if omega0 == 0.0:
        z = np.zeros_like(t)
        return z, z.copy()
    gx = dsd_gx(t, omega0, tau)
    th = theta(t, tau) - np.arctan(gx / omega0)
    amp = np.sqrt(omega0**2 + gx**2)
    return amp * np.sin(th), amp * np.cos(th)


@dataclass(frozen=True)
class PulseSchedule:
    """Time-dependent coupling pair on the window ``[t_start, t_end]``.

    ``time_reversed`` evaluates the envelope at ``-t``; since the window is
    symmetric this is the mirrored schedule Omega_1(t) <-> Omega_2(t).
    """

    scheme: Scheme
    omega0: float
    tau: float
    window: tuple[float, float]
    time_reversed: bool = False

    def __post_init__(self):
        if self.scheme not in ("plain", "dsd"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.omega0 < 0 or not math.isfinite(self.omega0):
            raise ValueError("omega0 must be finite and non-negative")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        t0, t1 = self.window
        if not t0 < 0 < t1:
            raise ValueError(f"window must satisfy t_start < 0 < t_end, got {self.window}")

    @classmethod
    def create(
        cls,
        scheme: Scheme,
        tau: float,
        omega0: float = 1.0,
        window_multiplier: float = DEFAULT_WINDOW_MULTIPLIER,
    ) -> "PulseSchedule":
        k = window_multiplier
        return cls(scheme, omega0, tau, (-k * tau, k * tau))

    @classmethod
    def from_taum(
        cls,
        scheme: Scheme,
        tau_over_taum: float,
        omega0: float = 1.0,
        window_multiplier: float = DEFAULT_WINDOW_MULTIPLIER,
    ) -> "PulseSchedule":
        """Schedule with tau given in units of tau_m of the reference Omega_0 = 1.

        The duration does not depend on ``omega0`` so that a zero-amplitude
        schedule still has a well-defined window.
        """
        return cls.create(scheme, tau_over_taum * tau_min(1.0), omega0, window_multiplier)

    @property
    def tau_over_taum(self) -> float:
        return self.tau / tau_min(1.0)

    def with_window(self, window_multiplier: float) -> "PulseSchedule":
        k = window_multiplier
        return replace(self, window=(-k * self.tau, k * self.tau))

    def reversed(self) -> "PulseSchedule":
        return replace(self, time_reversed=not self.time_reversed)

    def envelope(self, t):
        """Return ``(omega1(t), omega2(t))``."""
        t = np.asarray(t, dtype=float)
        if self.time_reversed:
            t = -t
        if self.scheme == "plain":
            return plain_envelope_at(t, self.omega0, self.tau)
        return dsd_envelope_at(t, self.omega0, self.tau)

    def hamiltonian(self, t: float, detuning: DetuningLike) -> Hamiltonian3:
        d = as_detuning(detuning)
        o1, o2 = self.envelope(t)
        return Hamiltonian3(d.delta1, d.delta2, float(o1), float(o2))

    def peak_amplitude(self, samples: int = 4001) -> float:
        """max_t sqrt(omega1^2 + omega2^2) over the window, sampled."""
        t = np.linspace(self.window[0], self.window[1], samples)
        o1, o2 = self.envelope(t)
        return float(np.sqrt(o1 * o1 + o2 * o2).max())


def plain_envelope(t, s: PulseSchedule):
    if s.scheme != "plain":
        raise ValueError("plain_envelope needs a plain schedule")
    return s.envelope(t)


def dsd_envelope(t, s: PulseSchedule):
    if s.scheme != "dsd":
        raise ValueError("dsd_envelope needs a dsd schedule")
    return s.envelope(t)


def write_waveform_csv(path: str | Path, schedule: PulseSchedule, samples: int = 512) -> None:
    t = np.linspace(schedule.window[0], schedule.window[1], samples)
    o1, o2 = schedule.envelope(t)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "omega1", "omega2"])
        for row in zip(t, o1, o2):
            w.writerow([repr(float(x)) for x in row])
