"""Fixed-step RK4 integration of i dv/dt = H(t) v for the three-level system."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from .pulses import PulseSchedule
from .qcore import ComplexState3, DetuningLike, as_detuning, as_state, basis_state

DEFAULT_TRAJECTORY_SAMPLES = 512


class IntegrationError(RuntimeError):
    """Norm drift stayed above tolerance, or the integration setup is invalid.

    ``cell_index`` identifies the worst cell when raised from a batch.
    """

    def __init__(self, message: str, cell_index: int | None = None):
        super().__init__(message)
        self.cell_index = cell_index


@dataclass(frozen=True)
class IntegratorConfig:
    """Integrator settings.

    step: fixed step size, or ``None`` for the automatic policy (start from
        :func:`default_step`, halve until the norm drift is within tolerance).
    window_multiplier: when set, integrate over ``[-k tau, k tau]`` instead of
        the schedule's own window.
    """

    step: float | None = None
    norm_tolerance: float = 1e-8
    window_multiplier: float | None = None
    steps_per_scale: int = 100
    max_refinements: int = 6

    def __post_init__(self):
        if self.step is not None and not self.step > 0:
            raise ValueError("step must be positive")
        if not self.norm_tolerance > 0:
            raise ValueError("norm_tolerance must be positive")
        if self.window_multiplier is not None and not self.window_multiplier > 0:
            raise IntegrationError("window_multiplier must be positive")
        if self.steps_per_scale < 1:
            raise ValueError("steps_per_scale must be >= 1")

    @property
    def policy(self) -> str:
        return "auto" if self.step is None else "fixed"

    def describe(self) -> dict[str, object]:
        return {
            "step_policy": self.policy if self.step is None else f"fixed({self.step!r})",
            "norm_tolerance": self.norm_tolerance,
            "window_multiplier": self.window_multiplier,
            "steps_per_scale": self.steps_per_scale,
        }


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    populations: np.ndarray  # shape (k, 3)
    norm: np.ndarray

    def write_csv(self, path: str | Path, header_lines: tuple[str, ...] = ()) -> None:
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "p1", "p2", "p3", "norm"])
            for t, p, n in zip(self.t, self.populations, self.norm):
                w.writerow([repr(float(t))] + [repr(float(x)) for x in p] + [repr(float(n))])


@dataclass(frozen=True)
class EvolutionResult:
    final_state: ComplexState3
    populations: np.ndarray
    norm_drift: float
    step: float
    n_steps: int
    trajectory: Trajectory | None = None

    @property
    def p3(self) -> float:
        return float(self.populations[2])


@dataclass(frozen=True)
class BatchResult:
    """Final states for many detuning pairs sharing one schedule and step."""

    final_states: np.ndarray  # shape (N, 3)
    populations: np.ndarray  # shape (N, 3)
    norm_drift: np.ndarray
    step: float
    n_steps: int


def integration_window(schedule: PulseSchedule, cfg: IntegratorConfig) -> tuple[float, float]:
    if cfg.window_multiplier is None:
        return schedule.window
    k = cfg.window_multiplier
    return (-k * schedule.tau, k * schedule.tau)


def default_step(schedule: PulseSchedule, max_detuning: float, cfg: IntegratorConfig) -> float:
    """min(tau, 1/L) / steps_per_scale with L = peak amplitude + max |delta|.

    L bounds the spectral radius of H(t), so the step resolves both the pulse
    shape and the fastest phase rotation.
    """
    scale = schedule.peak_amplitude() + abs(max_detuning)
    h = schedule.tau if scale == 0.0 else min(schedule.tau, 1.0 / scale)
    return h / cfg.steps_per_scale


@numba.njit(cache=True)
def _rk4_kernel(o1, o2, d1, d2, x0, y0, h, n, sample_steps, out_samples):
    """RK4 for v = x + i y with real H: dx/dt = H y, dy/dt = -H x.

    ``o1``/``o2`` hold the couplings at the half-step grid t0 + k h/2.
    Each cell is integrated independently, so batching never changes a result.
    """
    ncell = d1.shape[0]
    out = np.empty((ncell, 6))
    hh = 0.5 * h
    h6 = h / 6.0
    for c in range(ncell):
        a1 = d1[c]
        a2 = d2[c]
        x = x0.copy()
        y = y0.copy()
        ks = 0
        if sample_steps.shape[0] > 0 and sample_steps[0] == 0:
            for j in range(3):
                out_samples[0, c, j] = x[j]
                out_samples[0, c, 3 + j] = y[j]
            ks = 1
        for i in range(n):
            p, q = o1[2 * i], o2[2 * i]
            pm, qm = o1[2 * i + 1], o2[2 * i + 1]
            pe, qe = o1[2 * i + 2], o2[2 * i + 2]

            # stage 1
            kx0 = a1 * y[0] + p * y[1]
            kx1 = p * y[0] + q * y[2]
            kx2 = q * y[1] + a2 * y[2]
            ky0 = -(a1 * x[0] + p * x[1])
            ky1 = -(p * x[0] + q * x[2])
            ky2 = -(q * x[1] + a2 * x[2])
            sx0, sx1, sx2 = kx0, kx1, kx2
            sy0, sy1, sy2 = ky0, ky1, ky2
            ux0, ux1, ux2 = x[0] + hh * kx0, x[1] + hh * kx1, x[2] + hh * kx2
            uy0, uy1, uy2 = y[0] + hh * ky0, y[1] + hh * ky1, y[2] + hh * ky2

            # stage 2
            kx0 = a1 * uy0 + pm * uy1
            kx1 = pm * uy0 + qm * uy2
            kx2 = qm * uy1 + a2 * uy2
            ky0 = -(a1 * ux0 + pm * ux1)
            ky1 = -(pm * ux0 + qm * ux2)
            ky2 = -(qm * ux1 + a2 * ux2)
            sx0 += 2.0 * kx0
            sx1 += 2.0 * kx1
            sx2 += 2.0 * kx2
            sy0 += 2.0 * ky0
            sy1 += 2.0 * ky1
            sy2 += 2.0 * ky2
            ux0, ux1, ux2 = x[0] + hh * kx0, x[1] + hh * kx1, x[2] + hh * kx2
            uy0, uy1, uy2 = y[0] + hh * ky0, y[1] + hh * ky1, y[2] + hh * ky2

            # stage 3
            kx0 = a1 * uy0 + pm * uy1
            kx1 = pm * uy0 + qm * uy2
            kx2 = qm * uy1 + a2 * uy2
            ky0 = -(a1 * ux0 + pm * ux1)
            ky1 = -(pm * ux0 + qm * ux2)
            ky2 = -(qm * ux1 + a2 * ux2)
            sx0 += 2.0 * kx0
            sx1 += 2.0 * kx1
            sx2 += 2.0 * kx2
            sy0 += 2.0 * ky0
            sy1 += 2.0 * ky1
            sy2 += 2.0 * ky2
            ux0, ux1, ux2 = x[0] + h * kx0, x[1] + h * kx1, x[2] + h * kx2
            uy0, uy1, uy2 = y[0] + h * ky0, y[1] + h * ky1, y[2] + h * ky2

            # stage 4
            sx0 += a1 * uy0 + pe * uy1
            sx1 += pe * uy0 + qe * uy2
            sx2 += qe * uy1 + a2 * uy2
            sy0 -= a1 * ux0 + pe * ux1
            sy1 -= pe * ux0 + qe * ux2
            sy2 -= qe * ux1 + a2 * ux2

            x[0] += h6 * sx0
            x[1] += h6 * sx1
            x[2] += h6 * sx2
            y[0] += h6 * sy0
            y[1] += h6 * sy1
            y[2] += h6 * sy2

            if ks < sample_steps.shape[0] and sample_steps[ks] == i + 1:
                for j in range(3):
                    out_samples[ks, c, j] = x[j]
                    out_samples[ks, c, 3 + j] = y[j]
                ks += 1
        for j in range(3):
            out[c, j] = x[j]
            out[c, 3 + j] = y[j]
    return out


def step_count(t0: float, t1: float, h_target: float) -> int:
    return max(1, math.ceil((t1 - t0) / h_target - 1e-9))


def _rk4(schedule, t0, t1, h_target, d1, d2, v_init, sample_steps=None):
    """Integrate every (d1[c], d2[c]) from ``v_init``.

    Returns (final states (N, 3), step, n, samples (k, N, 3) or None).
    """
    n = step_count(t0, t1, h_target)
    h = (t1 - t0) / n
    ts = t0 + (0.5 * h) * np.arange(2 * n + 1)
    o1, o2 = schedule.envelope(ts)
    d1 = np.ascontiguousarray(d1, dtype=float)
    d2 = np.ascontiguousarray(d2, dtype=float)
    steps = np.asarray(sample_steps if sample_steps is not None else [], dtype=np.int64)
    samples = np.zeros((steps.size, d1.size, 6))
    raw = _rk4_kernel(
        np.ascontiguousarray(o1, dtype=float), np.ascontiguousarray(o2, dtype=float),
        d1, d2, v_init.real.copy(), v_init.imag.copy(), h, n, steps, samples,
    )
    final = raw[:, :3] + 1j * raw[:, 3:]
    traj = samples[..., :3] + 1j * samples[..., 3:] if steps.size else None
    return final, h, n, traj


def _check_init(init) -> ComplexState3:
    v = as_state(init)
    norm = float(np.linalg.norm(v))
    if abs(norm - 1.0) > 1e-10:
        raise ValueError(f"initial state must be unit-norm, got norm {norm}")
    return v


def propagate_many(
    schedule: PulseSchedule,
    delta1,
    delta2,
    init=None,
    cfg: IntegratorConfig | None = None,
    detuning_scale: float | None = None,
) -> BatchResult:
    """Propagate one schedule for many detuning pairs at once.

    All pairs share one step, chosen from ``detuning_scale`` (default: the
    largest detuning in the batch). Sweeps pass the grid-wide maximum so that
    a cell's result does not depend on which batch it lands in.
    """
    cfg = cfg or IntegratorConfig()
    d1 = np.asarray(delta1, dtype=float).ravel()
    d2 = np.asarray(delta2, dtype=float).ravel()
    if d1.shape != d2.shape:
        raise ValueError("delta1 and delta2 must have the same length")
    v_init = _check_init(basis_state(1) if init is None else init)
    t0, t1 = integration_window(schedule, cfg)
    if not t0 < t1:
        raise IntegrationError(f"invalid integration window ({t0}, {t1})")

    max_det = float(max(np.abs(d1).max(initial=0.0), np.abs(d2).max(initial=0.0)))
    if detuning_scale is not None:
        max_det = max(max_det, detuning_scale)
    h = cfg.step if cfg.step is not None else default_step(schedule, max_det, cfg)
    attempts = 1 if cfg.step is not None else cfg.max_refinements + 1

    for _ in range(attempts):
        states, h_used, n, _ = _rk4(schedule, t0, t1, h, d1, d2, v_init)
        pops = np.abs(states) ** 2
        drift = np.abs(np.sqrt(pops.sum(axis=1)) - 1.0)
        worst = float(drift.max(initial=0.0))
        if worst <= cfg.norm_tolerance:
            return BatchResult(states, pops, drift, h_used, n)
        h = 0.5 * h
    raise IntegrationError(
        f"norm drift {worst:.3e} exceeds tolerance {cfg.norm_tolerance:.1e} "
        f"(last step {h_used:.3e}, policy {cfg.policy})",
        cell_index=int(np.argmax(drift)),
    )


def propagate(
    schedule: PulseSchedule,
    detuning: DetuningLike,
    init=None,
    cfg: IntegratorConfig | None = None,
    trajectory_samples: int = 0,
) -> EvolutionResult:
    """Integrate from ``init`` (default e_1) across the schedule's window.

    The norm drift is reported, never corrected. With ``trajectory_samples``
    > 0 the populations are recorded at that many evenly spaced steps.
    """
    cfg = cfg or IntegratorConfig()
    d = as_detuning(detuning)
    v_init = _check_init(basis_state(1) if init is None else init)
    t0, t1 = integration_window(schedule, cfg)
    if not t0 < t1:
        raise IntegrationError(f"invalid integration window ({t0}, {t1})")

    max_det = max(abs(d.delta1), abs(d.delta2))
    h = cfg.step if cfg.step is not None else default_step(schedule, max_det, cfg)
    attempts = 1 if cfg.step is not None else cfg.max_refinements + 1

    for _ in range(attempts):
        n_est = step_count(t0, t1, h)
        sample_steps = None
        if trajectory_samples > 0:
            k = min(trajectory_samples, n_est + 1)
            sample_steps = np.unique(np.round(np.linspace(0, n_est, k)).astype(np.int64))
        states, h_used, n, samples = _rk4(
            schedule, t0, t1, h, [d.delta1], [d.delta2], v_init, sample_steps
        )
        final = states[0]
        pops = np.abs(final) ** 2
        drift = abs(math.sqrt(float(pops.sum())) - 1.0)
        if drift <= cfg.norm_tolerance:
            break
        h = 0.5 * h
    else:
        raise IntegrationError(
            f"norm drift {drift:.3e} exceeds tolerance {cfg.norm_tolerance:.1e} "
            f"(last step {h_used:.3e}, policy {cfg.policy})"
        )

    traj = None
    if samples is not None:
        p = np.abs(samples[:, 0, :]) ** 2
        traj = Trajectory(
            t=t0 + h_used * sample_steps.astype(float),
            populations=p,
            norm=np.sqrt(p.sum(axis=1)),
        )
    return EvolutionResult(final, pops, drift, h_used, n, traj)


def transfer_population(
    schedule: PulseSchedule, detuning: DetuningLike, cfg: IntegratorConfig | None = None
) -> float:
    """Population of level 3 after starting in level 1."""
    return propagate(schedule, detuning, basis_state(1), cfg).p3
