"""Detuning sweeps: 2-D population maps, diagonal line cuts and slope extraction."""
from __future__ import annotations

import csv
import datetime as _dt
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal

import numpy as np

from .propagator import IntegrationError, IntegratorConfig, propagate_many
from .pulses import DEFAULT_WINDOW_MULTIPLIER, PulseSchedule, Scheme
from .qcore import DetuningPair

__all__ = [
    "DetuningPair",
    "LineCut",
    "PopulationMap",
    "SweepError",
    "bright_length",
    "central_slopes",
    "line_cut",
    "max_slope",
    "run_cells",
    "sweep_2d",
    "symmetric_grid",
]

Axis = Literal["degenerate", "nondegenerate"]

#: Cells per propagation batch. Fixed so results never depend on worker count.
CHUNK_SIZE = 512


class SweepError(IntegrationError):
    """A cell of a sweep failed to integrate; carries its detuning pair."""

    def __init__(self, message: str, detuning: DetuningPair):
        super().__init__(f"{message} at delta1={detuning.delta1!r}, delta2={detuning.delta2!r}")
        self.detuning = detuning


def symmetric_grid(lo: float, hi: float, n: int) -> np.ndarray:
    """n points from lo to hi; exactly antisymmetric when lo == -hi."""
    if n < 2:
        raise ValueError("need at least 2 grid points")
    if not lo < hi:
        raise ValueError("need lo < hi")
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    k = 2.0 * np.arange(n) - (n - 1)
    g = center + half * k / (n - 1)
    g[0], g[-1] = lo, hi
    return g


def axis_pair(axis: Axis, delta):
    delta = np.asarray(delta, dtype=float)
    if axis == "degenerate":
        return delta, delta.copy()
    if axis == "nondegenerate":
        return delta, -delta
    raise ValueError(f"unknown axis {axis!r}")


def _chunk_task(args):
    schedule, d1, d2, cfg, scale = args
    try:
        res = propagate_many(schedule, d1, d2, cfg=cfg, detuning_scale=scale)
    except IntegrationError as exc:
        i = exc.cell_index or 0
        raise SweepError(str(exc), DetuningPair(float(d1[i]), float(d2[i]))) from None
    return res.populations, float(res.norm_drift.max(initial=0.0))


def run_cells(
    schedule: PulseSchedule,
    delta1,
    delta2,
    cfg: IntegratorConfig | None = None,
    parallel: int = 1,
    chunk_size: int = CHUNK_SIZE,
) -> tuple[np.ndarray, float]:
    """Final populations for each (delta1[i], delta2[i]) starting from level 1.

    Cells are split into fixed-size chunks; ``parallel`` only controls how many
    chunks run at once, so the output is identical for any worker count.
    Returns ``(populations (N, 3), max norm drift)``.
    """
    cfg = cfg or IntegratorConfig()
    d1 = np.asarray(delta1, dtype=float).ravel()
    d2 = np.asarray(delta2, dtype=float).ravel()
    scale = float(max(np.abs(d1).max(initial=0.0), np.abs(d2).max(initial=0.0)))
    tasks = [
        (schedule, d1[i : i + chunk_size], d2[i : i + chunk_size], cfg, scale)
        for i in range(0, d1.size, chunk_size)
    ]
    if parallel > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(parallel, len(tasks))) as pool:
            results = list(pool.map(_chunk_task, tasks))
    else:
        results = [_chunk_task(t) for t in tasks]
    pops = np.concatenate([r[0] for r in results], axis=0)
    drift = max(r[1] for r in results)
    return pops, drift


def _metadata(schedule: PulseSchedule, cfg: IntegratorConfig) -> dict[str, object]:
    meta: dict[str, object] = {
        "scheme": schedule.scheme,
        "tau_over_taum": schedule.tau_over_taum,
        "omega0": schedule.omega0,
        "window": f"{schedule.window[0]!r},{schedule.window[1]!r}",
    }
    meta.update(cfg.describe())
    return meta


def _write_comments(fh, meta: dict[str, object], extra: Iterable[str]) -> None:
    for line in extra:
        fh.write(f"# {line}\n")
    for key, value in meta.items():
        fh.write(f"# {key}={value}\n")


@dataclass(frozen=True)
class PopulationMap:
    delta1: np.ndarray
    delta2: np.ndarray
    populations: np.ndarray  # shape (n1, n2, 3)
    metadata: dict[str, object]
    max_norm_drift: float
    created: str = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat())

    def __post_init__(self):
        if not (np.all(np.diff(self.delta1) > 0) and np.all(np.diff(self.delta2) > 0)):
            raise ValueError("map axes must be strictly increasing")

    @property
    def p3(self) -> np.ndarray:
        return self.populations[..., 2]

    @property
    def tau_over_taum(self) -> float:
        return float(self.metadata["tau_over_taum"])

    def diagonal(self, axis: Axis) -> tuple[np.ndarray, np.ndarray]:
        """(delta, p3) along delta1 = delta2 or delta1 = -delta2.

        Needs a square map with identical axes; the anti-diagonal additionally
        needs an axis symmetric about zero.
        """
        if self.delta1.shape != self.delta2.shape or not np.array_equal(self.delta1, self.delta2):
            raise ValueError("diagonal needs identical delta1/delta2 axes")
        n = self.delta1.size
        idx = np.arange(n)
        if axis == "degenerate":
            return self.delta1, self.p3[idx, idx]
        if not np.array_equal(self.delta1, -self.delta1[::-1]):
            raise ValueError("anti-diagonal needs an axis symmetric about zero")
        return self.delta1, self.p3[idx, n - 1 - idx]

    def write_csv(self, path: str | Path, header_lines: Iterable[str] = ()) -> None:
        """Rows in delta1-major order with header ``delta1,delta2,p1,p2,p3``."""
        with open(path, "w", newline="") as fh:
            _write_comments(fh, self.metadata, header_lines)
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["delta1", "delta2", "p1", "p2", "p3"])
            for i, a in enumerate(self.delta1):
                for j, b in enumerate(self.delta2):
                    p = self.populations[i, j]
                    w.writerow([repr(float(a)), repr(float(b))] + [repr(float(x)) for x in p])


@dataclass(frozen=True)
class LineCut:
    axis: Axis
    delta: np.ndarray
    p3: np.ndarray
    tau_over_taum: float
    metadata: dict[str, object] = field(default_factory=dict)
    max_norm_drift: float = 0.0

    def __post_init__(self):
        if self.axis not in ("degenerate", "nondegenerate"):
            raise ValueError(f"unknown axis {self.axis!r}")
        if self.delta.shape != self.p3.shape:
            raise ValueError("delta and p3 must have equal length")
        if not np.all(np.diff(self.delta) > 0):
            raise ValueError("cut samples must be strictly increasing in delta")

    def pairs(self) -> list[DetuningPair]:
        d1, d2 = axis_pair(self.axis, self.delta)
        return [DetuningPair(float(a), float(b)) for a, b in zip(d1, d2)]

    def write_csv(self, path: str | Path, header_lines: Iterable[str] = ()) -> None:
        meta = {"axis": self.axis, **self.metadata}
        with open(path, "w", newline="") as fh:
            _write_comments(fh, meta, header_lines)
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["delta", "p3"])
            for d, p in zip(self.delta, self.p3):
                w.writerow([repr(float(d)), repr(float(p))])


def sweep_2d(
    scheme: Scheme,
    tau_over_taum: float,
    delta_range: tuple[float, float, int] = (-5.0, 5.0, 41),
    cfg: IntegratorConfig | None = None,
    parallel: int = 1,
    omega0: float = 1.0,
    window_multiplier: float = DEFAULT_WINDOW_MULTIPLIER,
) -> PopulationMap:
    """Final populations on the Cartesian grid delta1 x delta2 (same axis for both)."""
    cfg = cfg or IntegratorConfig()
    lo, hi, n = delta_range
    grid = symmetric_grid(lo, hi, int(n))
    schedule = PulseSchedule.from_taum(scheme, tau_over_taum, omega0, window_multiplier)
    d1, d2 = np.meshgrid(grid, grid, indexing="ij")
    pops, drift = run_cells(schedule, d1, d2, cfg, parallel)
    return PopulationMap(
        delta1=grid,
        delta2=grid.copy(),
        populations=pops.reshape(grid.size, grid.size, 3),
        metadata=_metadata(schedule, cfg),
        max_norm_drift=drift,
    )


def line_cut(
    scheme: Scheme,
    tau_over_taum: float,
    axis: Axis,
    delta_range: tuple[float, float] = (-5.0, 5.0),
    n: int = 201,
    cfg: IntegratorConfig | None = None,
    parallel: int = 1,
    omega0: float = 1.0,
    window_multiplier: float = DEFAULT_WINDOW_MULTIPLIER,
) -> LineCut:
    """P3 along delta1 = delta2 (degenerate) or delta1 = -delta2 (nondegenerate)."""
    cfg = cfg or IntegratorConfig()
    grid = symmetric_grid(delta_range[0], delta_range[1], n)
    schedule = PulseSchedule.from_taum(scheme, tau_over_taum, omega0, window_multiplier)
    d1, d2 = axis_pair(axis, grid)
    pops, drift = run_cells(schedule, d1, d2, cfg, parallel)
    return LineCut(
        axis=axis,
        delta=grid,
        p3=pops[:, 2].copy(),
        tau_over_taum=float(tau_over_taum),
        metadata=_metadata(schedule, cfg),
        max_norm_drift=drift,
    )


def central_slopes(x, y) -> tuple[np.ndarray, np.ndarray]:
    """Second-order central differences at the interior samples."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        raise ValueError("slope estimation needs at least 3 samples")
    return x[1:-1], (y[2:] - y[:-2]) / (x[2:] - x[:-2])


def max_slope(cut: LineCut) -> tuple[float, float]:
    """Location and signed value of the largest |dP3/d delta| on the cut."""
    xs, slopes = central_slopes(cut.delta, cut.p3)
    i = int(np.argmax(np.abs(slopes)))
    return float(xs[i]), float(slopes[i])


def bright_length(pmap: PopulationMap, axis: Axis, threshold: float = 0.9) -> float:
    """Extent (in delta) of the cells with P3 > threshold along a diagonal."""
    delta, p3 = pmap.diagonal(axis)
    step = float(delta[1] - delta[0])
    return float(np.count_nonzero(p3 > threshold)) * step
