"""Core types for the driven three-level system.

Frequencies are stored as multiples of a reference amplitude Omega_0 and times
in units of 1/Omega_0. Physical units only enter through :class:`UnitSystem`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Union

import numpy as np

#: A state (or bosonic mode-amplitude) vector: complex array of shape (3,).
ComplexState3 = np.ndarray

Color = Literal["degenerate", "nondegenerate", "general"]

TWO_PI = 2.0 * math.pi


class DegenerateInputError(ValueError):
    """Raised when both couplings vanish and the dark state is undefined."""


def as_state(v) -> ComplexState3:
    arr = np.asarray(v, dtype=complex)
    if arr.shape != (3,):
        raise ValueError(f"expected 3 amplitudes, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("state amplitudes must be finite")
    return arr


def basis_state(index: int) -> ComplexState3:
    """Unit vector e_1, e_2 or e_3 (1-based, matching level labels)."""
    if index not in (1, 2, 3):
        raise ValueError("level index must be 1, 2 or 3")
    v = np.zeros(3, dtype=complex)
    v[index - 1] = 1.0
    return v


@dataclass(frozen=True)
class DetuningPair:
    """Detunings (delta1, delta2) in units of Omega_0."""

    delta1: float
    delta2: float

    @property
    def color(self) -> Color:
        # exact comparisons: grids are built symmetrically
        if self.delta1 == self.delta2:
            return "degenerate"
        if self.delta1 == -self.delta2:
            return "nondegenerate"
        return "general"

    @classmethod
    def degenerate(cls, delta: float) -> "DetuningPair":
        return cls(delta, delta)

    @classmethod
    def nondegenerate(cls, delta: float) -> "DetuningPair":
        return cls(delta, -delta)

    def __iter__(self):
        yield self.delta1
        yield self.delta2

    def scaled(self, factor: float) -> "DetuningPair":
        return DetuningPair(factor * self.delta1, factor * self.delta2)


DetuningLike = Union[DetuningPair, tuple]


def as_detuning(d: DetuningLike) -> DetuningPair:
    if isinstance(d, DetuningPair):
        return d
    d1, d2 = d
    return DetuningPair(float(d1), float(d2))


@dataclass(frozen=True)
class Hamiltonian3:
    """Rotating-frame Hamiltonian

        [[delta1, omega1, 0     ],
         [omega1, 0,      omega2],
         [0,      omega2, delta2]]

    All entries are real, so the matrix is Hermitian by construction.
    """

    delta1: float
    delta2: float
    omega1: float
    omega2: float

    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.delta1, self.omega1, 0.0],
                [self.omega1, 0.0, self.omega2],
                [0.0, self.omega2, self.delta2],
            ]
        )

    def apply(self, v) -> ComplexState3:
        return hamiltonian_apply(self, v)


def hamiltonian_apply(h: Hamiltonian3, v) -> ComplexState3:
    """Return H @ v without building the matrix."""
    v = as_state(v)
    return np.array(
        [
            h.delta1 * v[0] + h.omega1 * v[1],
            h.omega1 * v[0] + h.omega2 * v[2],
            h.omega2 * v[1] + h.delta2 * v[2],
        ]
    )


def eigensystem_resonant(omega1: float, omega2: float) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and eigenvectors of the resonant (zero-detuning) Hamiltonian.

    Returns ``(eigenvalues, vectors)`` where ``eigenvalues = [0, +W, -W]`` with
    ``W = sqrt(omega1**2 + omega2**2)`` and ``vectors[:, k]`` is the matching
    unit eigenvector: the dark state ``[-omega2, 0, omega1] / W`` followed by
    the bright states ``[omega1/W, +-1, omega2/W] / sqrt(2)``.
    """
    w = math.hypot(omega1, omega2)
    if w == 0.0:
        raise DegenerateInputError("omega1 = omega2 = 0: dark state undefined")
    s, c = omega1 / w, omega2 / w
    r = 1.0 / math.sqrt(2.0)
    dark = [-c, 0.0, s]
    plus = [s * r, r, c * r]
    minus = [s * r, -r, c * r]
    vectors = np.array([dark, plus, minus]).T
    return np.array([0.0, w, -w]), vectors


def dark_state(omega1: float, omega2: float) -> np.ndarray:
    return eigensystem_resonant(omega1, omega2)[1][:, 0]


@dataclass(frozen=True)
class UnitSystem:
    """Conversion between physical angular frequencies and internal units.

    ``omega0`` is the reference amplitude in rad/s. ``None`` means the
    dimensionless mode, where every conversion is the identity.
    """

    omega0: float | None = None

    def __post_init__(self):
        if self.omega0 is not None and not self.omega0 > 0:
            raise ValueError("omega0 must be positive")

    @classmethod
    def from_mhz(cls, value: float, convention: Literal["angular", "cyclic"] = "angular") -> "UnitSystem":
        """Build from a value quoted in MHz.

        ``angular``: the quoted number is already an angular frequency,
        1 MHz -> 1e6 rad/s. ``cyclic``: 1 MHz -> 2*pi*1e6 rad/s.
        """
        return cls(mhz_to_rad_per_s(value, convention))

    @property
    def physical(self) -> bool:
        return self.omega0 is not None

    def to_internal_frequency(self, rad_per_s):
        return rad_per_s if self.omega0 is None else rad_per_s / self.omega0

    def to_physical_frequency(self, value):
        return value if self.omega0 is None else value * self.omega0

    def to_internal_time(self, seconds):
        return seconds if self.omega0 is None else seconds * self.omega0

    def to_physical_time(self, value):
        return value if self.omega0 is None else value / self.omega0


def mhz_to_rad_per_s(value: float, convention: Literal["angular", "cyclic"] = "angular") -> float:
    if convention == "angular":
        return value * 1e6
    if convention == "cyclic":
        return TWO_PI * value * 1e6
    raise ValueError(f"unknown frequency convention {convention!r}")
