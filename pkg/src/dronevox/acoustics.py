"""Rotor sound synthesis, sync tone injection and 16-bit PCM WAV I/O.

Each rotor is a bank of phase-continuous oscillators at multiples of its
blade-pass frequency. The rotors are two-bladed, so the blade-pass frequency
is twice the rotation rate: ``2 * omega / (2*pi)`` Hz.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

DEFAULT_SAMPLE_RATE = 48000
BLADES = 2
EDGE = 0.005  # raised-cosine ramp length of injected tones, s
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class ClippingError(ValueError):
    """Raised when a buffer would exceed unit magnitude; carries a suggested gain."""

    def __init__(self, peak: float, gain: float | None = None):
        self.peak = float(peak)
        self.suggested_gain = None if gain is None else 0.99 * gain / self.peak
        msg = f"audio peak {self.peak:.4g} exceeds 1.0"
        if self.suggested_gain is not None:
            msg += f"; master_gain {gain:.4g} should be at most {self.suggested_gain:.4g}"
        super().__init__(msg)


class WavError(ValueError):
    pass


class WavHeaderError(WavError):
    pass


class UnsupportedEncodingError(WavError):
    pass


class TruncatedDataError(WavError):
    pass


@dataclass
class AudioBuffer:
    sample_rate: int
    samples: np.ndarray
    comment: str = ""

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1:
            raise ValueError("samples must be one-dimensional (mono)")
        if self.samples.size:
            peak = float(np.max(np.abs(self.samples)))
            if not np.isfinite(peak):
                raise ValueError("samples must be finite")
            if peak > 1.0:
                raise ClippingError(peak)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate

    def segment(self, start: float, stop: float) -> AudioBuffer:
        i0 = max(0, int(round(start * self.sample_rate)))
        i1 = min(self.samples.size, int(round(stop * self.sample_rate)))
        return AudioBuffer(self.sample_rate, self.samples[i0:i1].copy(), self.comment)


@dataclass(frozen=True)
class AcousticParams:
    harmonic_amps: tuple[float, ...] = (1.0, 0.35, 0.15)
    noise_floor: float = 0.005
    master_gain: float = 0.1
    sample_rate: int = DEFAULT_SAMPLE_RATE
    seed: int = 0

    def __post_init__(self):
        amps = tuple(self.harmonic_amps)
        if not amps or any(a < 0 for a in amps) or not any(a > 0 for a in amps):
            raise ValueError("harmonic_amps must be non-negative with at least one positive entry")
        if self.noise_floor < 0:
            raise ValueError("noise_floor must be non-negative")
        if not self.master_gain > 0:
            raise ValueError("master_gain must be positive")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")


def blade_pass_frequency(omega) -> np.ndarray | float:
    """Blade-pass frequency in Hz for rotor speed ``omega`` in rad/s."""
    out = BLADES * np.asarray(omega, dtype=float) / (2 * np.pi)
    return float(out) if out.ndim == 0 else out


def initial_phase(rotor_id: int) -> float:
    """Fixed, well-spread starting phase per rotor so identical rotors do not add coherently."""
    return 2 * np.pi * ((rotor_id * _GOLDEN) % 1.0)


def interpolate_speeds(speeds: np.ndarray, control_rate: float, sample_rate: int,
                       lead: float = 0.0) -> np.ndarray:
    """Linearly interpolate a (n, k) control-rate log onto the audio clock.

    Audio time ``s`` maps to log time ``s - lead``; before the first row and
    after the last the nearest row is held. The buffer ends one control
    period after the last row.
    """
    speeds = np.asarray(speeds, dtype=float)
    if speeds.ndim == 1:
        speeds = speeds[:, None]
    n = speeds.shape[0]
    if n < 1:
        raise ValueError("speed log is empty")
    n_audio = int(round((n / control_rate + lead) * sample_rate))
    t_audio = np.arange(n_audio) / sample_rate - lead
    t_log = np.arange(n) / control_rate
    return np.column_stack([np.interp(t_audio, t_log, speeds[:, j]) for j in range(speeds.shape[1])])


def oscillator_bank(speeds_audio: np.ndarray, sample_rate: int, harmonic_amps: Sequence[float],
                    rotor_ids: Sequence[int] | None = None) -> np.ndarray:
    """Sum of per-rotor harmonic oscillators, before noise and gain.

    Phase is the running integral of instantaneous frequency, so frequency
    changes never produce discontinuities.
    """
    speeds_audio = np.asarray(speeds_audio, dtype=float)
    if speeds_audio.ndim == 1:
        speeds_audio = speeds_audio[:, None]
    n, k = speeds_audio.shape
    ids = list(range(k)) if rotor_ids is None else list(rotor_ids)
    if len(ids) != k:
        raise ValueError("rotor_ids must name every column of the speed log")
    out = np.zeros(n)
    for col, rid in enumerate(ids):
        phase = rotor_phase(speeds_audio[:, col], sample_rate, initial_phase(rid))
        for h, amp in enumerate(harmonic_amps, start=1):
            if amp:
                out += amp * np.sin(h * phase)
    return out


def rotor_phase(omega: np.ndarray, sample_rate: int, phase0: float = 0.0) -> np.ndarray:
    """Blade-pass phase at each audio sample: phase0 plus the integral of 2*pi*f up to that sample."""
    f = blade_pass_frequency(omega)
    inc = 2 * np.pi * np.asarray(f, dtype=float) / sample_rate
    phase = np.empty_like(inc)
    phase[0] = phase0
    np.cumsum(inc[:-1], out=phase[1:])
    phase[1:] += phase0
    return np.mod(phase, 2 * np.pi)


def synthesize(rotor_speeds, params: AcousticParams | None = None, control_rate: float = 100.0,
               rotor_ids: Sequence[int] | None = None, lead: float = 0.0) -> AudioBuffer:
    """Microphone signal for a (n, rotors) speed log sampled at ``control_rate``.

    ``lead`` seconds of audio precede the first log row (the recorder starts
    before logging); the first row's speeds are held over that stretch.
    """
    params = params or AcousticParams()
    sr = params.sample_rate
    speeds = interpolate_speeds(rotor_speeds, control_rate, sr, lead)
    x = oscillator_bank(speeds, sr, params.harmonic_amps, rotor_ids)
    if params.noise_floor > 0:
        rng = np.random.default_rng(params.seed)
        x = x + rng.normal(0.0, params.noise_floor, x.size) / params.master_gain
    x *= params.master_gain
    peak = float(np.max(np.abs(x))) if x.size else 0.0
    if peak > 1.0:
        raise ClippingError(peak, params.master_gain)
    return AudioBuffer(sr, x)


def tone_window(n: int, sample_rate: int, edge: float = EDGE) -> np.ndarray:
    """Flat-top window with raised-cosine ramps of ``edge`` seconds at each end."""
    w = np.ones(n)
    m = min(int(round(edge * sample_rate)), n // 2)
    if m > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * (np.arange(m) + 0.5) / m)
        w[:m] = ramp
        w[n - m:] = ramp[::-1]
    return w


def inject_tone(audio: AudioBuffer, freq: float = 2000.0, onset: float = 0.0, duration: float = 0.1,
                amplitude: float = 0.2) -> AudioBuffer:
    """Add a windowed sinusoid starting at ``onset`` seconds; returns a new buffer."""
    if not freq > 0 or not duration > 0:
        raise ValueError("freq and duration must be positive")
    if onset < 0 or onset + duration > audio.duration + 1e-12:
        raise ValueError("tone must lie within the buffer")
    x = audio.samples.copy()
    if amplitude == 0:
        return AudioBuffer(audio.sample_rate, x, audio.comment)
    sr = audio.sample_rate
    i0 = int(round(onset * sr))
    n = min(int(round(duration * sr)), x.size - i0)
    t = np.arange(n) / sr
    x[i0:i0 + n] += amplitude * tone_window(n, sr) * np.sin(2 * np.pi * freq * t)
    peak = float(np.max(np.abs(x)))
    if peak > 1.0:
        raise ClippingError(peak)
    return AudioBuffer(sr, x, audio.comment)


# -- WAV ----------------------------------------------------------------------

_PCM = 1
_SCALE = 32767.0


def write_wav(audio: AudioBuffer, path, comment: str | None = None) -> Path:
    """16-bit PCM mono little-endian RIFF/WAVE; ``comment`` goes in a LIST/INFO ICMT chunk."""
    path = Path(path)
    pcm = np.round(np.clip(audio.samples, -1.0, 1.0) * _SCALE).astype("<i2").tobytes()
    fmt = struct.pack("<HHIIHH", _PCM, 1, audio.sample_rate, audio.sample_rate * 2, 2, 16)
    chunks = [b"fmt " + struct.pack("<I", len(fmt)) + fmt]
    text = audio.comment if comment is None else comment
    if text:
        body = text.encode("ascii") + b"\0"
        if len(body) % 2:
            body += b"\0"
        info = b"INFO" + b"ICMT" + struct.pack("<I", len(body)) + body
        chunks.append(b"LIST" + struct.pack("<I", len(info)) + info)
    data = b"data" + struct.pack("<I", len(pcm)) + pcm
    if len(pcm) % 2:
        data += b"\0"
    chunks.append(data)
    payload = b"WAVE" + b"".join(chunks)
    path.write_bytes(b"RIFF" + struct.pack("<I", len(payload)) + payload)
    return path


def read_wav(path) -> AudioBuffer:
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise WavHeaderError("not a RIFF/WAVE file")
    pos = 12
    fmt = None
    comment = ""
    while pos + 8 <= len(raw):
        cid = raw[pos:pos + 4]
        size = struct.unpack("<I", raw[pos + 4:pos + 8])[0]
        body_start = pos + 8
        if cid == b"fmt ":
            if size < 16 or body_start + 16 > len(raw):
                raise WavHeaderError("fmt chunk too short")
            fmt = struct.unpack("<HHIIHH", raw[body_start:body_start + 16])
        elif cid == b"LIST" and raw[body_start:body_start + 4] == b"INFO":
            comment = _read_info(raw[body_start + 4:body_start + size]) or comment
        elif cid == b"data":
            if fmt is None:
                raise WavHeaderError("data chunk before fmt chunk")
            tag, channels, rate, _, align, bits = fmt
            if tag != _PCM:
                raise UnsupportedEncodingError(f"format tag {tag} is not integer PCM")
            if channels != 1 or bits != 16 or align != 2:
                raise UnsupportedEncodingError(f"need mono 16-bit PCM, got {channels} ch / {bits} bit")
            if body_start + size > len(raw) or size % 2:
                raise TruncatedDataError(f"data chunk declares {size} bytes, {len(raw) - body_start} present")
            pcm = np.frombuffer(raw[body_start:body_start + size], dtype="<i2").astype(float)
            return AudioBuffer(rate, np.clip(pcm / _SCALE, -1.0, 1.0), comment)
        pos = body_start + size + (size % 2)
    if fmt is None:
        raise WavHeaderError("missing fmt chunk")
    raise TruncatedDataError("missing data chunk")


def _read_info(body: bytes) -> str:
    pos = 0
    while pos + 8 <= len(body):
        cid = body[pos:pos + 4]
        size = struct.unpack("<I", body[pos + 4:pos + 8])[0]
        if cid == b"ICMT":
            return body[pos + 8:pos + 8 + size].split(b"\0", 1)[0].decode("ascii", "replace")
        pos += 8 + size + (size % 2)
    return ""
