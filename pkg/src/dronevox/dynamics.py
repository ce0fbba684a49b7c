"""Rigid-body quadrotor with first-order motors.

Conventions: world frame z-up, body frame z along thrust, quaternions are
(w, x, y, z) body-to-world. Rotors sit in an X layout at 45, 135, 225 and
315 degrees from the body x-axis. ``spin_dirs`` is the sign of each rotor's
drag reaction torque about body z.
"""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field, replace

import numpy as np

ROTOR_ANGLES = np.deg2rad([45.0, 135.0, 225.0, 315.0])


@dataclass(frozen=True)
class QuadParams:
    mass: float = 0.032
    inertia_diag: tuple[float, float, float] = (1.66e-5, 1.66e-5, 2.93e-5)
    arm_length: float = 0.046
    k_f: float = 2.25e-8
    k_tau: float = 1.3e-10
    omega_min: float = 450.0
    omega_max: float = 2600.0
    tau_up: float = 0.03
    tau_down: float = 0.08
    spin_dirs: tuple[int, int, int, int] = (1, -1, 1, -1)
    gravity: float = 9.81

    def __post_init__(self):
        positive = ("mass", "arm_length", "k_f", "k_tau", "omega_max", "tau_up", "tau_down")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if any(not i > 0 for i in self.inertia_diag):
            raise ValueError("inertia_diag entries must be positive")
        if self.omega_min < 0 or self.gravity < 0:
            raise ValueError("omega_min and gravity must be non-negative")
        if not self.omega_min < self.omega_max:
            raise ValueError("omega_min must be below omega_max")
        s = self.spin_dirs
        if len(s) != 4 or any(abs(d) != 1 for d in s) or s[0] != s[2] or s[1] != s[3] or s[0] == s[1]:
            raise ValueError("spin_dirs must be +/-1 with opposite rotors equal and adjacent rotors opposite")

    @property
    def inertia(self) -> np.ndarray:
        return np.asarray(self.inertia_diag, dtype=float)

    def with_(self, **kw) -> QuadParams:
        return replace(self, **kw)


def allocation_matrix(params: QuadParams) -> np.ndarray:
    """Map squared rotor speeds to (thrust, roll, pitch, yaw torque)."""
    return _allocation(params).copy()


@lru_cache(maxsize=32)
def _allocation(params: QuadParams) -> np.ndarray:
    x = params.arm_length * np.cos(ROTOR_ANGLES)
    y = params.arm_length * np.sin(ROTOR_ANGLES)
    kf = params.k_f
    return np.vstack([
        kf * np.ones(4),
        kf * y,
        -kf * x,
        params.k_tau * np.asarray(params.spin_dirs, dtype=float),
    ])


@dataclass
class QuadState:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    body_rates: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotor_speeds: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def copy(self) -> QuadState:
        return QuadState(self.position.copy(), self.velocity.copy(), self.orientation.copy(),
                         self.body_rates.copy(), self.rotor_speeds.copy())

    @property
    def euler(self) -> tuple[float, float, float]:
        return quat_to_euler(self.orientation)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in
                   (self.position, self.velocity, self.orientation, self.body_rates, self.rotor_speeds))


@dataclass(frozen=True)
class MotorCommand:
    commanded_speeds: np.ndarray
    clamp_events: int = 0


def hover_state(params: QuadParams, position=(0.0, 0.0, 1.0), yaw: float = 0.0) -> QuadState:
    w = min(max(hover_speed(params), params.omega_min), params.omega_max)
    return QuadState(position=np.array(position, dtype=float),
                     orientation=euler_to_quat(0.0, 0.0, yaw),
                     rotor_speeds=np.full(4, w))


def hover_speed(params: QuadParams) -> float:
    return math.sqrt(params.mass * params.gravity / (4 * params.k_f))


def motor_step(current, commanded, dt: float, params: QuadParams):
    """Exact first-order step toward ``commanded``; spin-up uses ``tau_up``, spin-down ``tau_down``."""
    current = np.asarray(current, dtype=float)
    commanded = np.clip(np.asarray(commanded, dtype=float), params.omega_min, params.omega_max)
    tau = np.where(commanded > current, params.tau_up, params.tau_down)
    out = commanded + (current - commanded) * np.exp(-dt / tau)
    out = np.clip(out, params.omega_min, params.omega_max)
    return float(out) if out.ndim == 0 else out


def wrench(rotor_speeds, params: QuadParams) -> tuple[float, np.ndarray]:
    u = _allocation(params) @ np.square(np.asarray(rotor_speeds, dtype=float))
    return float(u[0]), u[1:]


# -- quaternion helpers -------------------------------------------------------

def quat_mul(a, b) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_to_rot(q) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def euler_to_quat(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """ZYX (yaw, pitch, roll) Euler angles to a unit quaternion."""
    cr, sr = math.cos(roll / 2), math.sin(roll / 2)
    cp, sp = math.cos(pitch / 2), math.sin(pitch / 2)
    cy, sy = math.cos(yaw / 2), math.sin(yaw / 2)
    return np.array([
        cr * cp * cy + sr * sp * sy,
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
    ])


def quat_to_euler(q) -> tuple[float, float, float]:
    w, x, y, z = q
    roll = math.atan2(2 * (w * x + y * z), 1 - 2 * (x * x + y * y))
    pitch = math.asin(max(-1.0, min(1.0, 2 * (w * y - z * x))))
    yaw = math.atan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z))
    return roll, pitch, yaw


# -- integration --------------------------------------------------------------

def cross(a, b) -> np.ndarray:
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


def _derivative(y, thrust: float, torque, params: QuadParams, inertia):
    """Time derivative of the 13-element state as a plain list (floats keep the inner loop cheap)."""
    _, _, _, vx, vy, vz, qw, qx, qy, qz, p, q, r = y
    a = thrust / params.mass
    ix, iy, iz = inertia
    tx, ty, tz = torque
    return [
        vx, vy, vz,
        2 * (qx * qz + qw * qy) * a,
        2 * (qy * qz - qw * qx) * a,
        (1 - 2 * (qx * qx + qy * qy)) * a - params.gravity,
        0.5 * (-qx * p - qy * q - qz * r),
        0.5 * (qw * p + qy * r - qz * q),
        0.5 * (qw * q - qx * r + qz * p),
        0.5 * (qw * r + qx * q - qy * p),
        (tx - (q * iz * r - r * iy * q)) / ix,
        (ty - (r * ix * p - p * iz * r)) / iy,
        (tz - (p * iy * q - q * ix * p)) / iz,
    ]


def step(state: QuadState, cmd: MotorCommand, dt: float, params: QuadParams) -> QuadState:
    """Advance motors exactly, then the rigid body by one RK4 step under a constant wrench."""
    if not 0 < dt <= 0.01:
        raise ValueError("dt must lie in (0, 0.01]")
    if not state.is_finite():
        raise FloatingPointError("non-finite quadrotor state")
    speeds = motor_step(state.rotor_speeds, cmd.commanded_speeds, dt, params)
    thrust, torque = wrench(speeds, params)
    torque = [float(v) for v in torque]
    inertia = params.inertia_diag
    y = [float(v) for v in (*state.position, *state.velocity, *state.orientation, *state.body_rates)]
    h = 0.5 * dt
    k1 = _derivative(y, thrust, torque, params, inertia)
    k2 = _derivative([a + h * b for a, b in zip(y, k1)], thrust, torque, params, inertia)
    k3 = _derivative([a + h * b for a, b in zip(y, k2)], thrust, torque, params, inertia)
    k4 = _derivative([a + dt * b for a, b in zip(y, k3)], thrust, torque, params, inertia)
    c = dt / 6.0
    y = np.array([a + c * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)])
    q = y[6:10] / np.linalg.norm(y[6:10])
    return QuadState(y[0:3], y[3:6], q, y[10:13], np.asarray(speeds, dtype=float))


def differential_replay(params: QuadParams, delta, dt: float = 1e-3, omega: float | None = None):
    """Drive the motors alone with ``omega + spin_dir * delta[k]`` and return (speeds, thrust).

    ``delta`` is a commanded differential-speed series at step ``dt``. No body
    dynamics are involved, which isolates how motor lag and the speed limits
    turn a yaw command into a thrust change.
    """
    omega = hover_speed(params) if omega is None else float(omega)
    dirs = np.asarray(params.spin_dirs, dtype=float)
    delta = np.asarray(delta, dtype=float)
    w = np.clip(np.full(4, omega), params.omega_min, params.omega_max)
    speeds = np.empty((delta.size, 4))
    for k, d in enumerate(delta):
        w = motor_step(w, omega + dirs * d, dt, params)
        speeds[k] = w
    thrust = params.k_f * np.sum(speeds ** 2, axis=1)
    return speeds, thrust
