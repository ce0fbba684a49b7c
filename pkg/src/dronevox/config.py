"""Run configuration: one JSON document with quad, controller, acoustics, analysis and run groups.

Unknown keys are rejected. Missing keys take the defaults. The config hash
covers everything that can change the outputs, so the output directory is
left out.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .acoustics import AcousticParams
from .controller import ControllerGains
from .dynamics import QuadParams
from .pose import DEFAULT_TAU, NoiseModel
from .spectral import DEFAULT_BAND, DEFAULT_HOP, DEFAULT_WINDOW, ClassifierConfig
from .trajectory import GestureKind

DEFAULT_PRESET = "crazyflie-sim-default"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ControllerConfig:
    kp_pos: tuple[float, float, float] = ControllerGains.kp_pos
    kd_pos: tuple[float, float, float] = ControllerGains.kd_pos
    kp_att: tuple[float, float, float] = ControllerGains.kp_att
    kd_att: tuple[float, float, float] = ControllerGains.kd_att
    yaw_rate_ff: float = ControllerGains.yaw_rate_ff
    pose_tau: float = DEFAULT_TAU
    position_noise_std: float = NoiseModel.position_std
    angle_noise_std: float = NoiseModel.angle_std
    gyro_rates: bool = True

    def gains(self) -> ControllerGains:
        return ControllerGains(self.kp_pos, self.kd_pos, self.kp_att, self.kd_att, self.yaw_rate_ff)

    def noise(self) -> NoiseModel | None:
        if self.position_noise_std == 0 and self.angle_noise_std == 0:
            return None
        return NoiseModel(self.position_noise_std, self.angle_noise_std)

    def __post_init__(self):
        self.gains()
        if not self.pose_tau > 0:
            raise ValueError("pose_tau must be positive")
        if self.position_noise_std < 0 or self.angle_noise_std < 0:
            raise ValueError("noise standard deviations must be non-negative")


@dataclass(frozen=True)
class AcousticsConfig:
    harmonic_amps: tuple[float, ...] = AcousticParams.harmonic_amps
    noise_floor: float = AcousticParams.noise_floor
    master_gain: float = AcousticParams.master_gain
    sample_rate: int = AcousticParams.sample_rate
    tone_freq: float = 2000.0
    tone_duration: float = 0.1
    tone_amplitude: float = 0.2
    tone_lead: float = 0.3      # tone onset precedes the mode switch by this much, s

    def __post_init__(self):
        self.params(0)
        if not self.tone_freq > 0 or not self.tone_duration > 0 or self.tone_amplitude < 0:
            raise ValueError("tone_freq and tone_duration must be positive, tone_amplitude non-negative")
        if self.tone_lead < self.tone_duration:
            raise ValueError("tone_lead must be at least tone_duration so the tone ends before the gesture")

    def params(self, seed: int) -> AcousticParams:
        return AcousticParams(tuple(self.harmonic_amps), self.noise_floor, self.master_gain, self.sample_rate, seed)


@dataclass(frozen=True)
class AnalysisConfig:
    window_len: int = DEFAULT_WINDOW
    hop: int = DEFAULT_HOP
    band: tuple[float, float] = DEFAULT_BAND
    vocalics_band: tuple[float, float] = ClassifierConfig.vocalics_band
    gesture_band: tuple[float, float] = ClassifierConfig.gesture_band
    split_band: tuple[float, float] = ClassifierConfig.split_band
    broadband: tuple[float, float] = ClassifierConfig.broadband
    vocalics_floor: float = ClassifierConfig.vocalics_floor
    confidence_floor: float = ClassifierConfig.confidence_floor
    min_depth_hz: float = ClassifierConfig.min_depth_hz
    min_tonality: float = ClassifierConfig.min_tonality

    def __post_init__(self):
        if self.window_len < 2 or self.window_len & (self.window_len - 1):
            raise ValueError("window_len must be a power of two")
        if not 0 < self.hop <= self.window_len:
            raise ValueError("hop must lie in (0, window_len]")
        for name in ("band", "vocalics_band", "gesture_band", "split_band", "broadband"):
            lo, hi = getattr(self, name)
            if not 0 <= lo < hi:
                raise ValueError(f"{name} must satisfy 0 <= lo < hi")

    def classifier(self) -> ClassifierConfig:
        names = [f.name for f in dataclasses.fields(ClassifierConfig)]
        return ClassifierConfig(**{n: getattr(self, n) for n in names})


@dataclass(frozen=True)
class RunSettings:
    gesture: str = "vocalics"
    warmup: float = 2.0
    duration: float = 4.0
    cooldown: float = 1.0
    seed: int = 0
    hover_height: float = 1.0
    audio_offset: float = 0.5   # audio time minus log time, s
    max_error: float = 1.0
    out_dir: str = "out"

    def __post_init__(self):
        GestureKind.parse(self.gesture)
        if self.warmup < 0.5:
            raise ValueError("warmup must be at least 0.5 s")
        if not self.duration > 0 or self.cooldown < 0:
            raise ValueError("duration must be positive and cooldown non-negative")
        if abs(self.duration - round(self.duration)) > 1e-9:
            raise ValueError("duration must be a whole number of 1 s gesture periods")
        if self.audio_offset < 0:
            raise ValueError("audio_offset must be non-negative")
        if not self.max_error > 0:
            raise ValueError("max_error must be positive")

    @property
    def kind(self) -> GestureKind:
        return GestureKind.parse(self.gesture)


@dataclass(frozen=True)
class RunConfig:
    quad: QuadParams = field(default_factory=QuadParams)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    acoustics: AcousticsConfig = field(default_factory=AcousticsConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    run: RunSettings = field(default_factory=RunSettings)

    def __post_init__(self):
        if self.acoustics.tone_lead > self.run.warmup + self.run.audio_offset:
            raise ValueError("tone would start before the recording")

    def to_dict(self) -> dict:
        return {g: _group_dict(getattr(self, g)) for g in _GROUPS}

    def config_hash(self) -> str:
        d = self.to_dict()
        d["run"].pop("out_dir")
        canon = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]

    def with_run(self, **kw) -> RunConfig:
        return dataclasses.replace(self, run=dataclasses.replace(self.run, **kw))

    def with_group(self, group: str, **kw) -> RunConfig:
        return dataclasses.replace(self, **{group: dataclasses.replace(getattr(self, group), **kw)})

    def flat_items(self) -> list[tuple[str, object]]:
        return [(f"{g}.{k}", v) for g, body in self.to_dict().items() for k, v in body.items()]


_GROUPS = {
    "quad": QuadParams,
    "controller": ControllerConfig,
    "acoustics": AcousticsConfig,
    "analysis": AnalysisConfig,
    "run": RunSettings,
}


def _group_dict(obj) -> dict:
    out = {}
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        out[f.name] = list(v) if isinstance(v, tuple) else v
    return out


def _coerce(cls, name: str, value, default):
    where = f"{cls.__name__}.{name}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where} must be a list")
        if len(default) and name not in ("harmonic_amps",) and len(value) != len(default):
            raise ConfigError(f"{where} must have {len(default)} entries")
        items = [_coerce(cls, name, v, default[0]) for v in value]
        return tuple(items)
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(f"{where} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"{where} must be a finite number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    return value


def from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - set(_GROUPS)
    if unknown:
        raise ConfigError(f"unknown config group(s): {', '.join(sorted(unknown))}")
    groups = {}
    for gname, cls in _GROUPS.items():
        body = data.get(gname, {})
        if not isinstance(body, dict):
            raise ConfigError(f"group {gname!r} must be an object")
        defaults = cls()
        names = {f.name for f in dataclasses.fields(cls)}
        bad = set(body) - names
        if bad:
            raise ConfigError(f"unknown key(s) in {gname!r}: {', '.join(sorted(bad))}")
        kw = {k: _coerce(cls, k, v, getattr(defaults, k)) for k, v in body.items()}
        try:
            groups[gname] = cls(**kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{gname}: {exc}") from exc
    try:
        return RunConfig(**groups)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path=None) -> RunConfig:
    """Load a JSON config file; ``None`` loads the bundled default preset."""
    if path is None:
        text = resources.files("dronevox").joinpath(f"presets/{DEFAULT_PRESET}.json").read_text()
    else:
        p = Path(path)
        if not p.exists():
            cand = resources.files("dronevox").joinpath(f"presets/{path}.json")
            if not cand.is_file():
                raise ConfigError(f"config file {path} not found")
            text = cand.read_text()
        else:
            text = p.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return from_dict(data)


def dump_config(cfg: RunConfig, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
    return path
