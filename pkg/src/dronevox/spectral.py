"""Spectrogram, ridge tracking, modulation analysis, gesture classification and sync.

The ridge follows the blade-pass fundamental. Each frame's ridge frequency is
the magnitude-weighted centroid over the analysis band; its spread is the
magnitude-weighted standard deviation. Rotor harmonics are kept out by a
guard just below twice the lowest strong peak.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .acoustics import AudioBuffer

DEFAULT_WINDOW = 2048
DEFAULT_HOP = 480
DEFAULT_BAND = (400.0, 2000.0)
MAX_MOD_FREQ = 20.0


class AnalysisError(ValueError):
    pass


class NoToneFoundError(AnalysisError):
    pass


class SyncError(AnalysisError):
    pass


@dataclass
class Spectrogram:
    frame_times: np.ndarray
    freq_bins: np.ndarray
    magnitudes: np.ndarray  # (frames, bins), linear
    sample_rate: int
    window_len: int
    hop: int

    @property
    def bin_width(self) -> float:
        return self.sample_rate / self.window_len


@dataclass
class RidgeTrack:
    frame_times: np.ndarray
    ridge_freq: np.ndarray
    ridge_bandwidth: np.ndarray
    band: tuple[float, float]

    @property
    def frame_rate(self) -> float:
        return 1.0 / float(np.median(np.diff(self.frame_times)))

    @property
    def duration(self) -> float:
        return len(self.frame_times) / self.frame_rate


@dataclass
class ModulationSpectrum:
    freqs: np.ndarray
    ridge: np.ndarray       # |FFT| of the detrended ridge track
    bandwidth: np.ndarray   # |FFT| of the detrended bandwidth track

    def energy(self, lo: float, hi: float, which: str = "both") -> float:
        m = (self.freqs >= lo) & (self.freqs <= hi)
        parts = {"ridge": [self.ridge], "bandwidth": [self.bandwidth], "both": [self.ridge, self.bandwidth]}[which]
        return float(sum(np.sum(p[m] ** 2) for p in parts))


class GestureLabel(enum.Enum):
    POSITIVE = "Positive"
    NEGATIVE = "Negative"
    NEGATIVE_VOCALICS = "NegativeVocalics"
    UNSURE = "Unsure"


@dataclass(frozen=True)
class ClassifierConfig:
    vocalics_band: tuple[float, float] = (8.5, 11.5)
    gesture_band: tuple[float, float] = (0.8, 1.2)
    split_band: tuple[float, float] = (0.8, 20.0)
    broadband: tuple[float, float] = (0.5, 20.0)
    vocalics_floor: float = 0.2     # share of modulation energy at 10 Hz
    confidence_floor: float = 0.3
    min_depth_hz: float = 2.0       # RMS ridge/bandwidth motion below this means no gesture
    min_tonality: float = 8.0       # in-band peak/median magnitude; white noise sits near 3


@dataclass
class Classification:
    label: GestureLabel
    scores: dict = field(default_factory=dict)
    depth_hz: float = 0.0

    def vector(self) -> np.ndarray:
        return np.array([self.scores[k] for k in ("positive", "negative", "vocalics")])


# -- STFT ---------------------------------------------------------------------

def stft(audio: AudioBuffer, window_len: int = DEFAULT_WINDOW, hop: int = DEFAULT_HOP) -> Spectrogram:
    """Hann-windowed magnitude STFT without padding; frame times are window centres."""
    if window_len < 2 or window_len & (window_len - 1):
        raise ValueError("window_len must be a power of two")
    if not 0 < hop <= window_len:
        raise ValueError("hop must lie in (0, window_len]")
    x = audio.samples
    if x.size < window_len:
        raise AnalysisError(f"audio has {x.size} samples, shorter than one {window_len}-sample window")
    n_frames = 1 + (x.size - window_len) // hop
    frames = np.lib.stride_tricks.sliding_window_view(x, window_len)[::hop][:n_frames]
    mags = np.abs(np.fft.rfft(frames * np.hanning(window_len + 1)[:-1], axis=1))
    sr = audio.sample_rate
    times = (np.arange(n_frames) * hop + window_len / 2) / sr
    return Spectrogram(times, np.fft.rfftfreq(window_len, 1.0 / sr), mags, sr, window_len, hop)


def spectral_energy(spec: Spectrogram) -> float:
    """Time-domain energy implied by a one-sided magnitude spectrogram (Parseval)."""
    p = spec.magnitudes ** 2
    w = np.full(p.shape[1], 2.0)
    w[0] = 1.0
    if spec.window_len % 2 == 0:
        w[-1] = 1.0
    return float(np.sum(p @ w) / spec.window_len)


def windowed_energy(audio: AudioBuffer, window_len: int = DEFAULT_WINDOW, hop: int = DEFAULT_HOP) -> float:
    x = audio.samples
    n_frames = 1 + (x.size - window_len) // hop
    frames = np.lib.stride_tricks.sliding_window_view(x, window_len)[::hop][:n_frames]
    return float(np.sum((frames * np.hanning(window_len + 1)[:-1]) ** 2))


# -- ridge --------------------------------------------------------------------

def extract_ridge(spec: Spectrogram, band=DEFAULT_BAND, harmonic_guard: float | None = 2.0,
                  floor_fraction: float = 0.25) -> RidgeTrack:
    """Per-frame magnitude-weighted centroid and spread inside ``band``.

    With ``harmonic_guard`` set, bins at or above ``harmonic_guard`` times the
    lowest bin reaching ``floor_fraction`` of the frame's in-band maximum are
    ignored. That bin sits on the lower skirt of the lowest fundamental, so the
    cutoff falls just below its second harmonic and the centroid stays on the
    fundamentals.
    """
    lo, hi = float(band[0]), float(band[1])
    if not lo < hi:
        raise AnalysisError("band must satisfy lo < hi")
    sel = (spec.freq_bins >= lo) & (spec.freq_bins <= hi)
    if not np.any(sel):
        raise AnalysisError(f"band [{lo}, {hi}] Hz contains no bins")
    f = spec.freq_bins[sel]
    m = spec.magnitudes[:, sel]
    if harmonic_guard is not None:
        m = m.copy()
        strong = m >= floor_fraction * m.max(axis=1, keepdims=True)
        cutoff = harmonic_guard * f[strong.argmax(axis=1)]
        m[f[None, :] >= cutoff[:, None]] = 0.0
    total = m.sum(axis=1)
    safe = np.where(total > 0, total, 1.0)
    centroid = np.where(total > 0, (m @ f) / safe, 0.5 * (lo + hi))
    var = np.where(total > 0, (m * (f[None, :] - centroid[:, None]) ** 2).sum(axis=1) / safe, 0.0)
    return RidgeTrack(spec.frame_times.copy(), centroid, np.sqrt(var), (lo, hi))


def modulation_spectrum(track: RidgeTrack, max_freq: float = MAX_MOD_FREQ) -> ModulationSpectrum:
    """Magnitude spectrum of the linearly detrended ridge and bandwidth tracks up to ``max_freq``."""
    n = len(track.frame_times)
    if n < 4 or track.duration < 1.0 - 1e-9:
        raise AnalysisError("ridge track must span at least 1 s")
    rate = track.frame_rate
    freqs = np.fft.rfftfreq(n, 1.0 / rate)
    keep = freqs <= max_freq
    out = []
    for y in (track.ridge_freq, track.ridge_bandwidth):
        out.append(np.abs(np.fft.rfft(_detrend(y)))[keep] / n)
    return ModulationSpectrum(freqs[keep], out[0], out[1])


def _detrend(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    t = np.arange(y.size, dtype=float)
    slope, icpt = np.polyfit(t, y, 1)
    return y - (slope * t + icpt)


# -- classification -----------------------------------------------------------

def gesture_scores(mod: ModulationSpectrum, cfg: ClassifierConfig) -> dict:
    """Three scores in [0, 1].

    vocalics: share of broadband modulation energy in the 10 Hz band. The
    spectral features cannot tell which pair is the faster one, so the 10 Hz
    split shows up multiplied by the sign of the slow shake; the band is wide
    enough to hold those 9 and 11 Hz sidebands.

    positive / negative: common-mode against split-mode motion. A nod moves
    all rotors together, so the centroid swings at the gesture rate. A shake
    drives the pairs apart, so the spread moves (twice per cycle for the
    ordinary shake, faster still with the 10 Hz term).
    """
    broad = mod.energy(*cfg.broadband)
    voc = mod.energy(*cfg.vocalics_band) / broad if broad > 0 else 0.0
    common = mod.energy(*cfg.gesture_band, which="ridge")
    split = mod.energy(*cfg.split_band, which="bandwidth")
    diff = (common - split) / (common + split) if common + split > 0 else 0.0
    return {"positive": max(diff, 0.0), "negative": max(-diff, 0.0), "vocalics": voc}


def tonality(spec: Spectrogram, band=DEFAULT_BAND) -> float:
    """Median over frames of the in-band peak-to-median magnitude ratio."""
    sel = (spec.freq_bins >= band[0]) & (spec.freq_bins <= band[1])
    m = spec.magnitudes[:, sel]
    med = np.median(m, axis=1)
    ratio = np.where(med > 0, m.max(axis=1) / np.where(med > 0, med, 1.0), 0.0)
    return float(np.median(ratio))


def classify(audio: AudioBuffer, cfg: ClassifierConfig | None = None, window_len: int = DEFAULT_WINDOW,
             hop: int = DEFAULT_HOP, band=DEFAULT_BAND) -> Classification:
    """Rule-based gesture label from audio alone.

    Audio without a clear rotor tone, or whose ridge barely moves, is Unsure.
    """
    cfg = cfg or ClassifierConfig()
    zero = {"positive": 0.0, "negative": 0.0, "vocalics": 0.0}
    try:
        spec = stft(audio, window_len, hop)
        track = extract_ridge(spec, band)
        mod = modulation_spectrum(track)
    except AnalysisError:
        return Classification(GestureLabel.UNSURE, zero)
    if tonality(spec, band) < cfg.min_tonality:
        return Classification(GestureLabel.UNSURE, zero)
    scores = gesture_scores(mod, cfg)
    depth = float(np.hypot(np.std(_detrend(track.ridge_freq)), np.std(_detrend(track.ridge_bandwidth))))
    if not all(np.isfinite(v) for v in scores.values()) or depth < cfg.min_depth_hz:
        return Classification(GestureLabel.UNSURE, scores, depth)
    if scores["vocalics"] >= cfg.vocalics_floor:
        label = GestureLabel.NEGATIVE_VOCALICS
    else:
        best = max(("positive", "negative"), key=lambda k: scores[k])
        if scores[best] < cfg.confidence_floor:
            label = GestureLabel.UNSURE
        else:
            label = GestureLabel.POSITIVE if best == "positive" else GestureLabel.NEGATIVE
    return Classification(label, scores, depth)


def score_margin(a: Classification, b: Classification) -> float:
    """Euclidean distance between two score vectors."""
    return float(np.linalg.norm(a.vector() - b.vector()))


# -- synchronisation ----------------------------------------------------------

def tone_envelope(audio: AudioBuffer, freq: float, smooth: float = 0.02) -> np.ndarray:
    """Amplitude envelope near ``freq``: heterodyne to DC, then a unit-gain Hann low-pass."""
    sr = audio.sample_rate
    t = np.arange(audio.samples.size) / sr
    base = audio.samples * np.exp(-2j * np.pi * freq * t)
    n = max(3, int(round(smooth * sr)) | 1)
    h = np.hanning(n + 2)[1:-1]
    h /= h.sum()
    return 2.0 * np.abs(np.convolve(base, h, mode="same"))


def detect_tone(audio: AudioBuffer, freq: float = 2000.0, smooth: float = 0.02, edge: float = 0.005,
                min_snr: float = 8.0) -> float:
    """Onset (s) of the first tone burst at ``freq``.

    The threshold sits halfway between the envelope's median (baseline) and its
    maximum. The first upward crossing marks the middle of the raised-cosine
    ramp, so half the ramp length is subtracted.
    """
    env = tone_envelope(audio, freq, smooth)
    if env.size == 0:
        raise NoToneFoundError("empty audio")
    base = float(np.median(env))
    peak = float(env.max())
    spread = 1.4826 * float(np.median(np.abs(env - base)))
    if not peak > base + min_snr * max(spread, 1e-9 * max(peak, 1.0)) or peak <= 1e-6:
        raise NoToneFoundError(f"no burst at {freq:g} Hz stands out of the background")
    thr = 0.5 * (base + peak)
    above = np.flatnonzero(env >= thr)
    i = int(above[0])
    if i > 0:
        frac = (thr - env[i - 1]) / (env[i] - env[i - 1])
        pos = i - 1 + frac
    else:
        pos = 0.0
    return pos / audio.sample_rate - edge / 2


def mode_switch_time(t: np.ndarray, control_method: np.ndarray) -> float:
    """Time of the single hover-to-trajectory transition in a log."""
    cm = np.asarray(control_method).astype(int)
    rises = np.flatnonzero((cm[:-1] == 0) & (cm[1:] == 1)) + 1
    if rises.size == 0:
        raise SyncError("log contains no hover-to-trajectory transition")
    if rises.size > 1:
        raise SyncError(f"log contains {rises.size} hover-to-trajectory transitions, expected one")
    return float(np.asarray(t)[rises[0]])


def align_log(audio_onset: float, t: np.ndarray, control_method: np.ndarray, tone_lead: float = 0.3) -> float:
    """Offset (audio time minus log time) given the tone onset in the audio.

    The tone is played ``tone_lead`` seconds before the controller switches
    from hover to trajectory control.
    """
    return audio_onset + tone_lead - mode_switch_time(t, control_method)


# -- export -------------------------------------------------------------------

def write_spectrogram_csv(spec: Spectrogram, path, fmax: float | None = None) -> Path:
    path = Path(path)
    keep = spec.freq_bins <= (fmax if fmax is not None else spec.freq_bins[-1])
    f = spec.freq_bins[keep]
    with path.open("w", newline="") as fh:
        fh.write("frame_time,freq,magnitude\n")
        for ti, row in zip(spec.frame_times, spec.magnitudes[:, keep]):
            fh.write("".join(f"{ti:.6f},{fi:.6f},{mi:.9g}\n" for fi, mi in zip(f, row)))
    return path


def spectrogram_image(spec: Spectrogram, fmax: float | None = None, dynamic_range_db: float = 80.0) -> np.ndarray:
    """8-bit log-magnitude image: rows are bins from high to low frequency, columns are frames."""
    keep = spec.freq_bins <= (fmax if fmax is not None else spec.freq_bins[-1])
    db = 20 * np.log10(np.maximum(spec.magnitudes[:, keep], 1e-12))
    top = db.max()
    scaled = np.clip((db - (top - dynamic_range_db)) / dynamic_range_db, 0.0, 1.0)
    return np.round(scaled.T[::-1] * 255).astype(np.uint8)


def write_pgm(image: np.ndarray, path) -> Path:
    """Binary P5 PGM with maxval 255."""
    image = np.asarray(image, dtype=np.uint8)
    h, w = image.shape
    path = Path(path)
    path.write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + image.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        fields.append(raw[start:pos])
    if fields[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = (int(v) for v in fields[1:])
    if maxval != 255:
        raise ValueError("only 8-bit PGM is supported")
    data = raw[pos + 1:pos + 1 + w * h]
    if len(data) < w * h:
        raise ValueError("truncated PGM data")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w)
