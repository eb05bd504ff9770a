"""Closed-form sensor and actuator attack signals.

Each signal is a ramp plus a finite sum of sinusoids, active from ``t_on``::

    delta(t) = r * tau + sum_s a_s * wave_s(w_s * tau + phi_s),  tau = t - t_on

with ``wave`` either ``sin`` or ``cos``, and ``delta(t) = 0`` for ``t < t_on``.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatch, UnknownAgent

WAVEFORMS = ("sin", "cos")


@dataclass(frozen=True, eq=False)
class Sinusoid:
    amplitude: np.ndarray
    frequency: float = 1.0
    phase: float = 0.0
    waveform: str = "sin"

    def __post_init__(self):
        if self.waveform not in WAVEFORMS:
            raise ValueError(f"waveform must be one of {WAVEFORMS}, got {self.waveform!r}")
        object.__setattr__(self, "amplitude", np.atleast_1d(np.asarray(self.amplitude, dtype=float)))
        object.__setattr__(self, "frequency", float(self.frequency))
        object.__setattr__(self, "phase", float(self.phase))

    def sin_phase(self) -> float:
        """Phase of the equivalent ``sin`` wave."""
        return self.phase + (math.pi / 2 if self.waveform == "cos" else 0.0)

    def __eq__(self, other):
        if not isinstance(other, Sinusoid):
            return NotImplemented
        return (np.array_equal(self.amplitude, other.amplitude) and self.frequency == other.frequency
                and self.phase == other.phase and self.waveform == other.waveform)


@dataclass(frozen=True, eq=False)
class AttackSignal:
    ramp: np.ndarray
    sinusoids: tuple[Sinusoid, ...] = ()

    def __post_init__(self):
        ramp = np.atleast_1d(np.asarray(self.ramp, dtype=float))
        for s in self.sinusoids:
            if s.amplitude.shape != ramp.shape:
                raise DimensionMismatch(f"sinusoid amplitude {s.amplitude.shape} vs ramp {ramp.shape}")
        object.__setattr__(self, "ramp", ramp)
        object.__setattr__(self, "sinusoids", tuple(self.sinusoids))

    @classmethod
    def zero(cls, dim: int) -> "AttackSignal":
        return cls(np.zeros(dim))

    @property
    def dim(self) -> int:
        return self.ramp.shape[0]

    def value(self, tau: float) -> np.ndarray:
        out = self.ramp * tau
        for s in self.sinusoids:
            arg = s.frequency * tau + s.phase
            out = out + s.amplitude * (math.sin(arg) if s.waveform == "sin" else math.cos(arg))
        return out

    def derivative_bound(self) -> float:
        """Upper bound on ``||d delta / dt||`` valid for all ``t``."""
        return float(np.linalg.norm(self.ramp)
                     + sum(np.linalg.norm(s.amplitude) * abs(s.frequency) for s in self.sinusoids))

    def is_zero(self) -> bool:
        return not self.ramp.any() and not any(s.amplitude.any() for s in self.sinusoids)

    def __eq__(self, other):
        if not isinstance(other, AttackSignal):
            return NotImplemented
        return np.array_equal(self.ramp, other.ramp) and self.sinusoids == other.sinusoids


@dataclass(frozen=True, eq=False)
class AttackProfile:
    """Per-follower signals; ``sensor[i-1]`` and ``actuator[i-1]`` belong to follower ``i``."""

    sensor: tuple[AttackSignal, ...]
    actuator: tuple[AttackSignal, ...]
    t_on: float = 0.0

    def __post_init__(self):
        if len(self.sensor) != len(self.actuator):
            raise DimensionMismatch("sensor and actuator lists must cover the same followers")
        if self.t_on < 0:
            raise ValueError("t_on must be non-negative")
        object.__setattr__(self, "sensor", tuple(self.sensor))
        object.__setattr__(self, "actuator", tuple(self.actuator))

    @classmethod
    def none(cls, n: int, m: list[int]) -> "AttackProfile":
        return cls(tuple(AttackSignal.zero(n) for _ in m), tuple(AttackSignal.zero(mi) for mi in m))

    @property
    def N(self) -> int:
        return len(self.sensor)

    def without_actuator(self) -> "AttackProfile":
        return AttackProfile(self.sensor, tuple(AttackSignal.zero(a.dim) for a in self.actuator), self.t_on)

    def without_sensor(self) -> "AttackProfile":
        return AttackProfile(tuple(AttackSignal.zero(s.dim) for s in self.sensor), self.actuator, self.t_on)

    def _signal(self, signals, i: int) -> AttackSignal:
        if not 1 <= i <= len(signals):
            raise UnknownAgent(f"follower {i} has no attack profile")
        return signals[i - 1]

    def __eq__(self, other):
        if not isinstance(other, AttackProfile):
            return NotImplemented
        return self.sensor == other.sensor and self.actuator == other.actuator and self.t_on == other.t_on


def _evaluate(profile: AttackProfile, signal: AttackSignal, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError("t must be non-negative")
    if t < profile.t_on:
        return np.zeros(signal.dim)
    return signal.value(t - profile.t_on)


def sensor_attack(profile: AttackProfile, i: int, t: float) -> np.ndarray:
    return _evaluate(profile, profile._signal(profile.sensor, i), t)


def actuator_attack(profile: AttackProfile, i: int, t: float) -> np.ndarray:
    return _evaluate(profile, profile._signal(profile.actuator, i), t)


# --- correlated-attack bound -----------------------------------------------

class CorrelationBound(NamedTuple):
    """Neighbour-pair discrepancy of sensor attacks.

    ``bound`` is a closed-form certified bound (per-component sinusoid
    envelope); ``sampled_sup`` is the largest sampled ``||delta_i - delta_j||``.
    Both are ``inf`` when the ramps differ.
    """

    bound: float
    sampled_sup: float
    unbounded: bool


def _difference_envelope(a: AttackSignal, b: AttackSignal) -> float:
    # phasors grouped by frequency, per component
    groups: dict[float, np.ndarray] = defaultdict(lambda: np.zeros(a.dim, dtype=complex))
    for sign, sig in ((1.0, a), (-1.0, b)):
        for s in sig.sinusoids:
            groups[abs(s.frequency)] = groups[abs(s.frequency)] + sign * s.amplitude * np.exp(1j * s.sin_phase())
    per_component = np.zeros(a.dim)
    for freq, phasor in groups.items():
        if freq == 0.0:
            per_component += np.abs(phasor.imag)  # sin(phi) offset
        else:
            per_component += np.abs(phasor)
    return float(np.linalg.norm(per_component))


def check_correlation_bound(profile: AttackProfile, topology, T: float, dt: float) -> dict:
    """Bound on ``delta_i^s - delta_j^s`` for every neighbour pair ``(i, j)`` of ``topology``."""
    if not T > 0 or not dt > 0:
        raise ValueError("T and dt must be positive")
    times = np.linspace(0.0, T, int(math.ceil(T / dt)) + 1)
    out = {}
    for i, j in topology.neighbor_pairs():
        si, sj = profile._signal(profile.sensor, i), profile._signal(profile.sensor, j)
        if not np.array_equal(si.ramp, sj.ramp):
            out[(i, j)] = CorrelationBound(math.inf, math.inf, True)
            continue
        sup = max(float(np.linalg.norm(sensor_attack(profile, i, t) - sensor_attack(profile, j, t)))
                  for t in times)
        out[(i, j)] = CorrelationBound(_difference_envelope(si, sj), sup, False)
    return out


# --- reference scenario ----------------------------------------------------

def reference_sensor_signals() -> tuple[AttackSignal, ...]:
    """Correlated ramp-plus-sinusoid sensor attacks of the six-follower example."""
    r = np.array([1.0, 0.5])
    S = lambda amp, wave: Sinusoid(np.asarray(amp, dtype=float), 1.0, 0.0, wave)  # noqa: E731
    return (
        AttackSignal(r, (S([-0.1, -0.1], "sin"),)),
        AttackSignal(r, (S([0.2, -0.2], "cos"),)),
        AttackSignal(r, (S([-0.3, 0.0], "sin"), S([0.0, 0.3], "cos"))),
        AttackSignal(r, (S([0.4, 0.0], "sin"), S([0.0, -0.4], "cos"))),
        AttackSignal(r, (S([-0.5, 0.0], "cos"), S([0.0, -0.5], "sin"))),
        AttackSignal(r, (S([0.6, 0.0], "cos"), S([0.0, -0.6], "sin"))),
    )


def reference_actuator_signals() -> tuple[AttackSignal, ...]:
    return tuple(AttackSignal(np.array([s])) for s in (0.1, -0.2, 0.3, -0.4, 0.5, -0.6))


def reference_attack_profile() -> AttackProfile:
    return AttackProfile(reference_sensor_signals(), reference_actuator_signals())
