"""End-to-end runs: fly a gesture, record the rotor sound, analyse it, summarise an experiment."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .acoustics import AudioBuffer, inject_tone, read_wav, synthesize, write_wav
from .config import RunConfig
from .flight import FlightRecord, fly, yaw_range
from .flightlog import FlightLog, write_flight_log
from .spectral import (AnalysisError, Classification, GestureLabel, NoToneFoundError, align_log, classify,
                       detect_tone, extract_ridge, modulation_spectrum, score_margin, spectrogram_image, stft,
                       write_pgm, write_spectrogram_csv)
from .trajectory import SHAKE_AMPLITUDE, GestureKind

log = logging.getLogger(__name__)

COMMANDED_RANGE = 2 * SHAKE_AMPLITUDE
EXPECTED_LABEL = {
    GestureKind.POSITIVE_NOD: GestureLabel.POSITIVE,
    GestureKind.NEGATIVE_ORDINARY: GestureLabel.NEGATIVE,
    GestureKind.NEGATIVE_VOCALICS: GestureLabel.NEGATIVE_VOCALICS,
}


@dataclass
class SimulationResult:
    kind: GestureKind
    record: FlightRecord
    log: FlightLog
    audio: AudioBuffer
    tone_onset: float
    audio_offset: float
    config_hash: str
    paths: dict = field(default_factory=dict)

    @property
    def gesture_window_audio(self) -> tuple[float, float]:
        return (self.record.switch_time + self.audio_offset, self.record.gesture_end + self.audio_offset)


@dataclass
class AnalysisReport:
    classification: Classification
    tone_onset: float | None
    window: tuple[float, float]
    paths: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "label": self.classification.label.value,
            "scores": {k: round(v, 6) for k, v in self.classification.scores.items()},
            "tone_onset": None if self.tone_onset is None else round(self.tone_onset, 6),
            "window": [round(w, 6) for w in self.window],
        }


def simulate(cfg: RunConfig, out_dir=None) -> SimulationResult:
    """Fly the configured gesture, synthesise the recording and inject the sync tone.

    The recording starts ``run.audio_offset`` seconds before the log. The tone
    starts ``acoustics.tone_lead`` seconds before the hover-to-trajectory switch.
    """
    r = cfg.run
    kind = r.kind
    rec = fly_config(cfg)
    h = cfg.config_hash()
    meta = {"config_hash": h, "gesture": kind.value}
    meta.update({k: v for k, v in cfg.flat_items() if k != "run.out_dir"})
    flog = FlightLog.from_record(rec, meta)
    audio, onset = record_audio(rec, cfg)
    audio.comment = f"config_hash={h};gesture={kind.value}"
    res = SimulationResult(kind, rec, flog, audio, onset, r.audio_offset, h)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        res.paths["log"] = write_flight_log(flog, out / f"{kind.value}_log.csv")
        res.paths["wav"] = write_wav(audio, out / f"{kind.value}.wav")
    return res


def fly_config(cfg: RunConfig) -> FlightRecord:
    r, c = cfg.run, cfg.controller
    return fly(r.kind, cfg.quad, c.gains(), tau=c.pose_tau, noise=c.noise(), seed=r.seed, warmup=r.warmup,
               duration=r.duration, cooldown=r.cooldown, base_position=(0.0, 0.0, r.hover_height),
               max_error=r.max_error, gyro_rates=c.gyro_rates)


def record_audio(rec: FlightRecord, cfg: RunConfig) -> tuple[AudioBuffer, float]:
    """Recording of a flight with the sync tone; returns (audio, tone onset in audio time)."""
    r, a = cfg.run, cfg.acoustics
    audio = synthesize(rec.rotor_speeds, a.params(r.seed), lead=r.audio_offset)
    onset = rec.switch_time + r.audio_offset - a.tone_lead
    return inject_tone(audio, a.tone_freq, onset, a.tone_duration, a.tone_amplitude), onset


def analyze(audio, cfg: RunConfig, out_dir=None, stem: str = "analysis", figures: bool = True) -> AnalysisReport:
    """Classify a recording and optionally write spectrogram, ridge and modulation artifacts.

    When the sync tone is found, the analysis window is the gesture that
    follows it; otherwise the whole recording is used.
    """
    if not isinstance(audio, AudioBuffer):
        audio = read_wav(audio)
    an, ac = cfg.analysis, cfg.acoustics
    try:
        onset = detect_tone(audio, ac.tone_freq)
    except NoToneFoundError:
        onset = None
    start, stop = 0.0, audio.duration
    if onset is not None:
        s0 = onset + ac.tone_lead
        s1 = s0 + cfg.run.duration
        if s1 <= audio.duration + 1e-9:
            start, stop = s0, s1
    seg = audio.segment(start, stop)
    cls = classify(seg, an.classifier(), an.window_len, an.hop, an.band)
    report = AnalysisReport(cls, onset, (start, stop))
    if out_dir is None:
        return report
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = stft(audio, an.window_len, an.hop)
    report.paths["spectrogram_csv"] = write_spectrogram_csv(spec, out / f"{stem}_spectrogram.csv", an.band[1])
    report.paths["spectrogram_pgm"] = write_pgm(spectrogram_image(spec, an.band[1]), out / f"{stem}_spectrogram.pgm")
    try:
        seg_spec = stft(seg, an.window_len, an.hop)
        track = extract_ridge(seg_spec, an.band)
        mod = modulation_spectrum(track)
    except AnalysisError as exc:
        log.warning("skipping ridge/modulation output: %s", exc)
        track = mod = None
    if track is not None:
        report.paths["ridge_csv"] = _write_rows(out / f"{stem}_ridge.csv", ("frame_time", "ridge_freq", "ridge_bandwidth"),
                                                zip(track.frame_times + start, track.ridge_freq, track.ridge_bandwidth))
        report.paths["modulation_csv"] = _write_rows(out / f"{stem}_modulation.csv", ("mod_freq", "ridge", "bandwidth"),
                                                     zip(mod.freqs, mod.ridge, mod.bandwidth))
    report.paths["label_json"] = _write_json(out / f"{stem}_label.json", report.to_dict())
    if figures:
        from . import plotting
        shifted = None
        if track is not None:
            shifted = type(track)(track.frame_times + start, track.ridge_freq, track.ridge_bandwidth, track.band)
        report.paths["spectrogram_png"] = plotting.plot_spectrogram(spec, out / f"{stem}_spectrogram.png", shifted,
                                                                    an.band[1], cls.label.value)
        if mod is not None:
            report.paths["modulation_png"] = plotting.plot_modulation(mod, out / f"{stem}_modulation.png", cls.label.value,
                                                                     an.vocalics_band)
    return report


def sync(audio, flog: FlightLog, cfg: RunConfig) -> tuple[float, float]:
    """(tone onset in audio, offset audio-minus-log) recovered from the recording and the log."""
    if not isinstance(audio, AudioBuffer):
        audio = read_wav(audio)
    onset = detect_tone(audio, cfg.acoustics.tone_freq)
    return onset, align_log(onset, flog.t, flog.control_method, cfg.acoustics.tone_lead)


def altitude_metrics(res: SimulationResult, params) -> dict:
    rec = res.record
    m = rec.gesture_mask
    hover_thrust = params.mass * params.gravity
    z_err = rec.true_position[m, 2] - rec.ref_position[m, 2]
    return {
        "mean_altitude_error_m": float(np.mean(z_err)),
        "peak_altitude_error_m": float(np.max(z_err)),
        "mean_thrust_surplus_n": float(np.mean(rec.thrust_realised[m]) - hover_thrust),
        "hover_thrust_n": hover_thrust,
    }


def run_experiment(cfg: RunConfig, out_dir=None, figures: bool = True) -> dict:
    """All three gestures with the same settings; returns (and writes) the summary."""
    out = Path(out_dir) if out_dir is not None else None
    sims, reports = {}, {}
    for kind in GestureKind:
        sub = cfg.with_run(gesture=kind.value)
        sims[kind] = simulate(sub, out)
        reports[kind] = analyze(sims[kind].audio, sub, out, stem=kind.value, figures=figures)
    nod, shake, voc = (GestureKind.POSITIVE_NOD, GestureKind.NEGATIVE_ORDINARY, GestureKind.NEGATIVE_VOCALICS)
    ranges = {k.value: math.degrees(yaw_range(sims[k].record)) for k in GestureKind}
    bump = altitude_metrics(sims[shake], cfg.quad)
    cls = {k: reports[k].classification for k in GestureKind}
    margins = {
        "positive_vs_ordinary": score_margin(cls[nod], cls[shake]),
        "positive_vs_vocalics": score_margin(cls[nod], cls[voc]),
    }
    sync_err = {}
    for k in GestureKind:
        try:
            _, off = sync(sims[k].audio, sims[k].log, cfg)
            sync_err[k.value] = off - sims[k].audio_offset
        except AnalysisError:
            sync_err[k.value] = float("nan")
    commanded = math.degrees(COMMANDED_RANGE)
    checks = {
        "yaw_ordering": ranges["vocalics"] < ranges["shake"] < commanded,
        "ordinary_at_least_half_commanded": ranges["shake"] >= 0.5 * commanded,
        "labels_match": all(cls[k].label is EXPECTED_LABEL[k] for k in GestureKind),
        "vocalics_more_distinct_than_ordinary": margins["positive_vs_ordinary"] < margins["positive_vs_vocalics"],
        "altitude_bump_positive": bump["mean_altitude_error_m"] > 0 and bump["mean_thrust_surplus_n"] > 0,
        "sync_within_10ms": all(abs(e) <= 0.010 for e in sync_err.values()),
    }
    summary = {
        "config_hash": cfg.config_hash(),
        "commanded_yaw_range_deg": round(commanded, 6),
        "yaw_range_deg": {k: round(v, 6) for k, v in ranges.items()},
        "altitude_bump": {k: round(v, 9) for k, v in bump.items()},
        "classification": {k.value: reports[k].to_dict() for k in GestureKind},
        "margins": {k: round(v, 6) for k, v in margins.items()},
        "sync_error_s": {k: round(v, 6) for k, v in sync_err.items()},
        "checks": checks,
        "passed": all(checks.values()),
    }
    if out is not None:
        _write_json(out / "summary.json", summary)
        rows = [(name, "pass" if ok else "fail") for name, ok in checks.items()]
        _write_rows(out / "summary.csv", ("check", "result"), rows)
        _write_rows(out / "yaw_ranges.csv", ("gesture", "yaw_range_deg"),
                    [(k, f"{v:.6f}") for k, v in ranges.items()])
        if figures:
            from . import plotting
            traces = {k.value: (sims[k].record.t, np.unwrap(sims[k].record.angles[:, 2])) for k in GestureKind
                      if k is not nod}
            refs = {k.value: (sims[k].record.t, sims[k].record.ref_yaw) for k in GestureKind if k is not nod}
            plotting.plot_yaw_traces(traces, out / "yaw_traces.png", refs)
            rec = sims[shake].record
            plotting.plot_altitude(rec.t, rec.true_position[:, 2] - rec.ref_position[:, 2], out / "shake_altitude.png",
                                   "ordinary shake")
    return summary


def _write_rows(path: Path, header, rows) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else f"{v:.9g}" for v in row])
    return path


def _write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path
