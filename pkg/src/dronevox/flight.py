"""Closed-loop flight: physics at 1 kHz, pose tracker and controller at 100 Hz."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .controller import ControllerGains, ControlMode, Estimate, control_step
from .dynamics import MotorCommand, QuadParams, hover_state, step
from .pose import POSE_RATE, NoiseModel, RateEstimator, SmootherState, observe, smooth
from .trajectory import GestureKind, hover_reference, reference_at

log = logging.getLogger(__name__)

PHYSICS_DT = 1e-3
SUBSTEPS = int(round(1.0 / (POSE_RATE * PHYSICS_DT)))


class DivergenceError(RuntimeError):
    pass


@dataclass
class FlightRecord:
    """One row per control tick. Angles and positions are the smoothed estimates unless prefixed ``raw_``/``true_``."""
    t: np.ndarray
    cmd_speeds: np.ndarray        # (n, 4) commanded at the tick
    rotor_speeds: np.ndarray      # (n, 4) realised at the tick
    position: np.ndarray          # (n, 3) smoothed
    angles: np.ndarray            # (n, 3) smoothed roll, pitch, yaw
    raw_position: np.ndarray
    raw_angles: np.ndarray
    true_position: np.ndarray
    true_yaw: np.ndarray
    ref_position: np.ndarray
    ref_yaw: np.ndarray
    thrust_demand: np.ndarray     # N, controller output before mixing
    thrust_realised: np.ndarray   # N, mean over the hold interval
    control_method: np.ndarray    # 0 hover, 1 trajectory
    clamp_events: np.ndarray
    switch_time: float
    gesture_end: float
    events: list = field(default_factory=list)

    @property
    def gesture_mask(self) -> np.ndarray:
        return (self.t >= self.switch_time) & (self.t < self.gesture_end)


def fly(kind: GestureKind, params: QuadParams | None = None, gains: ControllerGains | None = None,
        tau: float = 0.05, noise: NoiseModel | None = None, seed: int = 0, warmup: float = 2.0,
        duration: float = 4.0, cooldown: float = 1.0, base_position=(0.0, 0.0, 1.0), base_yaw: float = 0.0,
        initial_offset=(0.0, 0.0, 0.0), max_error: float = 1.0, gyro_rates: bool = True) -> FlightRecord:
    """Hover for ``warmup`` s, switch to trajectory control for the gesture, then hover again.

    Position, velocity and attitude fed to the controller come from the smoothed
    pose stream. Body rates come from the onboard gyro (noise-free true rates)
    unless ``gyro_rates`` is False, in which case they are differenced from the
    smoothed attitude as well.
    """
    params = params or QuadParams()
    gains = gains or ControllerGains()
    rng = np.random.default_rng(seed)
    base_position = np.asarray(base_position, dtype=float)
    state = hover_state(params, base_position + np.asarray(initial_offset, dtype=float), base_yaw)
    smoother = SmootherState(tau=tau)
    rates = RateEstimator()
    dt_ctrl = 1.0 / POSE_RATE
    n_ticks = int(round((warmup + duration + cooldown) * POSE_RATE))
    switch_tick = int(round(warmup * POSE_RATE))
    end_tick = int(round((warmup + duration) * POSE_RATE))
    switch_time = switch_tick * dt_ctrl
    gesture_end = end_tick * dt_ctrl

    cols = {k: [] for k in ("cmd", "rot", "pos", "ang", "rpos", "rang", "tpos", "tyaw", "refp", "refy",
                            "thr_d", "thr_r", "mode", "clamp")}
    events = []
    mode = prev_mode = ControlMode.HOVER
    for k in range(n_ticks):
        t = k * dt_ctrl
        raw = observe(state, t, noise, rng)
        est_pose = smooth(smoother, raw, dt_ctrl)
        vel, body_rates = rates.update(est_pose)
        if gyro_rates:
            body_rates = state.body_rates.copy()
        mode = ControlMode.TRAJECTORY if switch_tick <= k < end_tick else ControlMode.HOVER
        if mode is ControlMode.TRAJECTORY:
            ref = reference_at(kind, t, base_position, base_yaw, t0=switch_time)
        else:
            ref = hover_reference(t, base_position, base_yaw)
        est = Estimate(est_pose.position, vel, est_pose.roll, est_pose.pitch, est_pose.yaw, body_rates)
        out = control_step(mode, est, ref, gains, params, previous_mode=prev_mode, t=t)
        if out.event is not None:
            events.append(out.event)
            log.debug("mode switch %s -> %s at t=%.2f", out.event.old.name, out.event.new.name, t)
        prev_mode = mode

        true_yaw = state.euler[2]
        cols["rot"].append(state.rotor_speeds.copy())
        cols["tpos"].append(state.position.copy())
        cols["tyaw"].append(true_yaw)
        thrust_sum = 0.0
        cmd = MotorCommand(out.command.commanded_speeds)
        for _ in range(SUBSTEPS):
            state = step(state, cmd, PHYSICS_DT, params)
            thrust_sum += params.k_f * float(state.rotor_speeds @ state.rotor_speeds)
        err = np.linalg.norm(state.position - ref.position)
        if not np.isfinite(err) or err > max_error:
            raise DivergenceError(f"position error {err:.3g} m exceeds {max_error} m at t={t:.2f} s")
        cols["cmd"].append(out.command.commanded_speeds)
        cols["pos"].append(est_pose.position)
        cols["ang"].append(est_pose.angles)
        cols["rpos"].append(raw.position)
        cols["rang"].append(raw.angles)
        cols["refp"].append(ref.position)
        cols["refy"].append(ref.yaw)
        cols["thr_d"].append(out.thrust)
        cols["thr_r"].append(thrust_sum / SUBSTEPS)
        cols["mode"].append(int(mode))
        cols["clamp"].append(out.command.clamp_events)

    a = {k: np.asarray(v) for k, v in cols.items()}
    return FlightRecord(
        t=np.arange(n_ticks) * dt_ctrl, cmd_speeds=a["cmd"], rotor_speeds=a["rot"], position=a["pos"],
        angles=a["ang"], raw_position=a["rpos"], raw_angles=a["rang"], true_position=a["tpos"],
        true_yaw=np.unwrap(a["tyaw"]), ref_position=a["refp"], ref_yaw=a["refy"], thrust_demand=a["thr_d"],
        thrust_realised=a["thr_r"], control_method=a["mode"], clamp_events=a["clamp"],
        switch_time=switch_time, gesture_end=gesture_end, events=events)


def yaw_range(record: FlightRecord, smoothed: bool = True) -> float:
    """Peak-to-peak yaw over the gesture window, radians."""
    yaw = np.unwrap(record.angles[:, 2]) if smoothed else record.true_yaw
    seg = yaw[record.gesture_mask]
    return float(seg.max() - seg.min())
