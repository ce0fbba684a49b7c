"""Reference trajectories for the nod and shake feedback gestures.

The nod is a vertical bob (a quadrotor cannot pitch in place without
translating), the shake is a yaw oscillation, and the vocalics shake adds a
fast 10 Hz yaw term on top of the ordinary shake.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

NOD_AMPLITUDE = 0.03            # m
SHAKE_AMPLITUDE = math.pi / 6   # rad
BUZZ_AMPLITUDE = math.pi / 3    # rad
GESTURE_FREQ = 1.0              # Hz
BUZZ_FREQ = 10.0                # Hz
GESTURE_PHASE = math.pi         # start downward / to the right


class GestureKind(enum.Enum):
    POSITIVE_NOD = "nod"
    NEGATIVE_ORDINARY = "shake"
    NEGATIVE_VOCALICS = "vocalics"

    @classmethod
    def parse(cls, name: str | GestureKind) -> GestureKind:
        if isinstance(name, GestureKind):
            return name
        key = name.strip().lower()
        for kind in cls:
            if key in (kind.value, kind.name.lower()):
                return kind
        raise ValueError(f"unknown gesture {name!r}; expected one of nod, shake, vocalics")


@dataclass(frozen=True)
class HarmonicSpec:
    amplitude: float
    frequency: float
    phase: float = 0.0

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError("frequency must be positive")
        if not math.isfinite(self.amplitude):
            raise ValueError("amplitude must be finite")

    def value(self, t):
        return self.amplitude * harmonic(t, self.frequency, self.phase)

    def rate(self, t):
        w = 2 * np.pi * self.frequency
        return self.amplitude * w * np.cos(w * np.asarray(t, dtype=float) + self.phase)

    def accel(self, t):
        w = 2 * np.pi * self.frequency
        return -self.amplitude * w * w * np.sin(w * np.asarray(t, dtype=float) + self.phase)


NOD = HarmonicSpec(NOD_AMPLITUDE, GESTURE_FREQ, GESTURE_PHASE)
SHAKE = HarmonicSpec(SHAKE_AMPLITUDE, GESTURE_FREQ, GESTURE_PHASE)
BUZZ = HarmonicSpec(BUZZ_AMPLITUDE, BUZZ_FREQ, 0.0)


def harmonic(t, f, p):
    """Simple harmonic motion ``sin(2*pi*f*t + p)``; accepts scalars or arrays."""
    out = np.sin(2 * np.pi * f * np.asarray(t, dtype=float) + p)
    return float(out) if out.ndim == 0 else out


def delta_z(t):
    """Height offset of the nod, in metres."""
    return NOD.value(t)


def delta_psi(t):
    """Yaw offset of the ordinary shake, in radians."""
    return SHAKE.value(t)


def delta_psi_voc(t):
    """Yaw offset of the vocalics shake: ordinary shake plus the 10 Hz term."""
    return delta_psi(t) + BUZZ.value(t)


@dataclass(frozen=True)
class GestureSpec:
    kind: GestureKind
    duration: float = 4.0
    base_position: tuple[float, float, float] = (0.0, 0.0, 1.0)
    base_yaw: float = 0.0
    sample_rate: float = 100.0

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        periods = self.duration * GESTURE_FREQ
        if abs(periods - round(periods)) > 1e-9:
            raise ValueError("duration must be a whole number of 1 s gesture periods")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate)) + 1


@dataclass(frozen=True)
class ReferenceSample:
    t: float
    position: np.ndarray
    yaw: float
    velocity: np.ndarray
    yaw_rate: float
    acceleration: np.ndarray
    yaw_accel: float = 0.0


def hover_reference(t: float, position, yaw: float) -> ReferenceSample:
    """Stationary reference used while the hover controller is active."""
    p = np.asarray(position, dtype=float)
    zero = np.zeros(3)
    return ReferenceSample(float(t), p.copy(), float(yaw), zero, 0.0, zero.copy(), 0.0)


def reference_at(kind: GestureKind, t: float, base_position=(0.0, 0.0, 1.0), base_yaw: float = 0.0,
                 t0: float = 0.0) -> ReferenceSample:
    """Evaluate the gesture reference at absolute time ``t`` for a gesture starting at ``t0``."""
    tau = t - t0
    pos = np.array(base_position, dtype=float)
    vel = np.zeros(3)
    acc = np.zeros(3)
    yaw, yaw_rate, yaw_accel = float(base_yaw), 0.0, 0.0
    if kind is GestureKind.POSITIVE_NOD:
        pos[2] += NOD.value(tau)
        vel[2] = NOD.rate(tau)
        acc[2] = NOD.accel(tau)
    else:
        parts = [SHAKE] if kind is GestureKind.NEGATIVE_ORDINARY else [SHAKE, BUZZ]
        for h in parts:
            yaw += h.value(tau)
            yaw_rate += float(h.rate(tau))
            yaw_accel += float(h.accel(tau))
    return ReferenceSample(float(t), pos, yaw, vel, yaw_rate, acc, yaw_accel)


def sample_trajectory(spec: GestureSpec) -> list[ReferenceSample]:
    times = np.arange(spec.n_samples) / spec.sample_rate
    return [reference_at(spec.kind, float(t), spec.base_position, spec.base_yaw) for t in times]


def trajectory_array(samples: Sequence[ReferenceSample]) -> np.ndarray:
    """Stack samples into rows of ``t,x,y,z,yaw,vx,vy,vz,yaw_rate``."""
    return np.array([[s.t, *s.position, s.yaw, *s.velocity, s.yaw_rate] for s in samples])


TRAJECTORY_HEADER = ("t", "x", "y", "z", "yaw", "vx", "vy", "vz", "yaw_rate")


def write_trajectory_csv(samples: Sequence[ReferenceSample], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for row in trajectory_array(samples):
            w.writerow([f"{v:.9g}" for v in row])
    return path
