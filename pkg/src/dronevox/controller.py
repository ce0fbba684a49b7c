"""Cascaded position/attitude tracking controller with a hover/trajectory mode latch.

Gains are expressed as accelerations per unit error (m/s^2 per m, rad/s^2 per
rad) so the same preset scales with vehicle mass and inertia.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import MotorCommand, QuadParams, _allocation, cross, euler_to_quat, quat_to_rot
from .pose import wrap_angle
from .trajectory import ReferenceSample


class ControlMode(enum.IntEnum):
    HOVER = 0
    TRAJECTORY = 1


class DegenerateThrustError(ValueError):
    pass


@dataclass(frozen=True)
class ControllerGains:
    kp_pos: tuple[float, float, float] = (6.0, 6.0, 9.0)
    kd_pos: tuple[float, float, float] = (3.5, 3.5, 5.0)
    kp_att: tuple[float, float, float] = (80.0, 80.0, 36.0)
    kd_att: tuple[float, float, float] = (14.0, 14.0, 12.0)
    yaw_rate_ff: float = 0.1

    def __post_init__(self):
        for name in ("kp_pos", "kd_pos", "kp_att", "kd_att"):
            v = getattr(self, name)
            if len(v) != 3 or any(g < 0 for g in v):
                raise ValueError(f"{name} must be three non-negative gains")
        if self.yaw_rate_ff < 0:
            raise ValueError("yaw_rate_ff must be non-negative")


@dataclass
class Estimate:
    position: np.ndarray
    velocity: np.ndarray
    roll: float
    pitch: float
    yaw: float
    body_rates: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_rot(euler_to_quat(self.roll, self.pitch, self.yaw))


@dataclass(frozen=True)
class ModeSwitch:
    t: float
    old: ControlMode
    new: ControlMode


@dataclass(frozen=True)
class ControlOutput:
    command: MotorCommand
    thrust: float
    torques: np.ndarray
    event: ModeSwitch | None = None


def position_loop(estimate: Estimate, reference: ReferenceSample, gains: ControllerGains,
                  gravity: float = 9.81) -> np.ndarray:
    """Desired acceleration including gravity compensation (points along the wanted thrust axis)."""
    ep = reference.position - estimate.position
    ev = reference.velocity - estimate.velocity
    acc = reference.acceleration + np.asarray(gains.kp_pos) * ep + np.asarray(gains.kd_pos) * ev
    acc = np.array(acc, dtype=float)
    acc[2] += gravity
    return acc


def attitude_loop(rotation: np.ndarray, body_rates, thrust_dir, desired_yaw: float,
                  gains: ControllerGains, inertia, desired_yaw_rate: float = 0.0) -> np.ndarray:
    """Torques from the rotation error; the rate error uses the reference yaw rate as its target.

    Roll/pitch errors come from the rotation-matrix error, the yaw error is the
    heading difference wrapped to (-pi, pi].
    """
    thrust_dir = np.asarray(thrust_dir, dtype=float)
    norm = np.linalg.norm(thrust_dir)
    if not norm > 1e-9:
        raise DegenerateThrustError("desired thrust direction has zero norm")
    zd = thrust_dir / norm
    xc = np.array([math.cos(desired_yaw), math.sin(desired_yaw), 0.0])
    yd = cross(zd, xc)
    yn = np.linalg.norm(yd)
    if not yn > 1e-9:
        raise DegenerateThrustError("desired thrust direction is horizontal along the heading")
    yd /= yn
    xd = cross(yd, zd)
    rd = np.column_stack((xd, yd, zd))
    m = rd.T @ rotation - rotation.T @ rd
    err = 0.5 * np.array([m[2, 1], m[0, 2], m[1, 0]])
    yaw = math.atan2(rotation[1, 0], rotation[0, 0])
    err[2] = wrap_angle(yaw - desired_yaw)
    inertia = np.asarray(inertia, dtype=float)
    w = np.asarray(body_rates, dtype=float)
    w_des = rotation.T @ np.array([0.0, 0.0, desired_yaw_rate])
    acc = -np.asarray(gains.kp_att) * err - np.asarray(gains.kd_att) * (w - w_des)
    return inertia * acc + cross(w, inertia * w)


def mix(thrust: float, torques, params: QuadParams) -> MotorCommand:
    """Invert the allocation for squared speeds and bring them back into the speed range.

    Yaw torque is given up first: its share of each rotor's squared speed is
    shrunk until the slowest rotor of the decelerating pair rests on the idle
    floor, which leaves thrust and roll/pitch untouched. A pair still above the
    ceiling is lowered as a unit (same-direction rotors share a diagonal, so this
    costs thrust but not roll/pitch). Every rotor that was out of range in the
    unconstrained solution counts as one clamp event.
    """
    if thrust < 0:
        raise ValueError("thrust must be non-negative")
    u = np.concatenate(([thrust], np.asarray(torques, dtype=float)))
    w2 = np.linalg.solve(_allocation(params), u)
    lo, hi = params.omega_min ** 2, params.omega_max ** 2
    clamps = int(np.count_nonzero((w2 < lo) | (w2 > hi)))
    if clamps:
        dirs = np.asarray(params.spin_dirs, dtype=float)
        yaw_share = u[3] / (4 * params.k_tau)
        base = w2 - dirs * yaw_share
        slowing = dirs * np.sign(yaw_share) < 0
        room = max(0.0, float(base[slowing].min() - lo)) if yaw_share else 0.0
        yaw_share = np.sign(yaw_share) * min(abs(yaw_share), room)
        w2 = base + dirs * yaw_share
        for d in (1.0, -1.0):
            pair = dirs == d
            excess = w2[pair].max() - hi
            if excess > 0:
                w2[pair] -= excess
        w2 = np.clip(w2, lo, hi)
    return MotorCommand(np.sqrt(w2), clamps)


def control_step(mode: ControlMode, estimate: Estimate, reference: ReferenceSample,
                 gains: ControllerGains, params: QuadParams, previous_mode: ControlMode | None = None,
                 t: float | None = None) -> ControlOutput:
    acc = position_loop(estimate, reference, gains, params.gravity)
    rot = estimate.rotation
    thrust = max(0.0, params.mass * float(acc @ rot[:, 2]))
    torques = attitude_loop(rot, estimate.body_rates, acc, reference.yaw, gains, params.inertia,
                            gains.yaw_rate_ff * reference.yaw_rate)
    cmd = mix(thrust, torques, params)
    event = None
    if previous_mode is not None and previous_mode != mode:
        event = ModeSwitch(reference.t if t is None else t, previous_mode, mode)
    return ControlOutput(cmd, thrust, torques, event)
