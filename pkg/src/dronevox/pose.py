"""Stand-in for the external pose tracker: sampling, noise and first-order smoothing."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import QuadState

POSE_RATE = 100.0
DEFAULT_TAU = 0.05


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    out = np.pi - np.mod(np.pi - np.asarray(a, dtype=float), 2 * np.pi)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PoseSample:
    t: float
    position: np.ndarray
    roll: float
    pitch: float
    yaw: float

    @property
    def angles(self) -> np.ndarray:
        return np.array([self.roll, self.pitch, self.yaw])


@dataclass
class SmootherState:
    tau: float = DEFAULT_TAU
    last_output: PoseSample | None = None

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")


@dataclass(frozen=True)
class NoiseModel:
    position_std: float = 0.0005
    angle_std: float = math.radians(0.2)

    def __post_init__(self):
        if self.position_std < 0 or self.angle_std < 0:
            raise ValueError("noise standard deviations must be non-negative")


def observe(true_state: QuadState, t: float, noise: NoiseModel | None = None,
            rng: np.random.Generator | int | None = None) -> PoseSample:
    """Sample the true pose with independent Gaussian noise per channel.

    ``rng`` may be a seed or a Generator; a Generator is advanced in place so a
    single one can drive a whole run reproducibly.
    """
    roll, pitch, yaw = true_state.euler
    pos = np.array(true_state.position, dtype=float)
    angles = np.array([roll, pitch, yaw])
    if noise is not None and (noise.position_std > 0 or noise.angle_std > 0):
        gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        pos = pos + gen.normal(0.0, 1.0, 3) * noise.position_std
        angles = angles + gen.normal(0.0, 1.0, 3) * noise.angle_std
    return PoseSample(float(t), pos, float(angles[0]), float(angles[1]), float(wrap_angle(angles[2])))


def smooth(state: SmootherState, sample: PoseSample, dt: float) -> PoseSample:
    """Exact discretisation of a first-order low-pass; yaw is smoothed along the shortest arc.

    The first sample initialises the filter and passes through unchanged.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    prev = state.last_output
    if prev is None:
        state.last_output = sample
        return sample
    alpha = 1.0 - math.exp(-dt / state.tau)
    pos = prev.position + alpha * (sample.position - prev.position)
    roll = prev.roll + alpha * (sample.roll - prev.roll)
    pitch = prev.pitch + alpha * (sample.pitch - prev.pitch)
    # yaw is kept unwrapped internally so the output stays continuous
    yaw = prev.yaw + alpha * wrap_angle(sample.yaw - prev.yaw)
    out = PoseSample(sample.t, pos, roll, pitch, yaw)
    state.last_output = out
    return out


def amplitude_ratio(freq: float, tau: float = DEFAULT_TAU) -> float:
    """Continuous-time gain of the smoother at ``freq`` Hz."""
    return 1.0 / math.sqrt(1.0 + (2 * math.pi * freq * tau) ** 2)


@dataclass
class RateEstimator:
    """Backward differences of consecutive smoothed poses."""
    last: PoseSample | None = None
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    euler_rates: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def update(self, pose: PoseSample) -> tuple[np.ndarray, np.ndarray]:
        if self.last is not None and pose.t > self.last.t:
            dt = pose.t - self.last.t
            self.velocity = (pose.position - self.last.position) / dt
            d = pose.angles - self.last.angles
            d[2] = wrap_angle(d[2])
            self.euler_rates = d / dt
        self.last = pose
        return self.velocity.copy(), euler_rates_to_body(pose.roll, pose.pitch, self.euler_rates)


def euler_rates_to_body(roll: float, pitch: float, rates) -> np.ndarray:
    dr, dp, dy = rates
    sr, cr = math.sin(roll), math.cos(roll)
    sp, cp = math.sin(pitch), math.cos(pitch)
    return np.array([
        dr - sp * dy,
        cr * dp + sr * cp * dy,
        -sr * dp + cr * cp * dy,
    ])
