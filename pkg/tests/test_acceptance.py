"""Acceptance criteria, one test per criterion; the session summary prints PASS/FAIL per line."""
import math
import time

import numpy as np
import pytest

from dronevox.acoustics import AcousticParams, read_wav, synthesize
from dronevox.cli import main
from dronevox.config import RunConfig
from dronevox.dynamics import QuadParams, differential_replay, hover_speed
from dronevox.flight import yaw_range
from dronevox.pipeline import COMMANDED_RANGE, fly_config, record_audio
from dronevox.pose import PoseSample, SmootherState, smooth
from dronevox.spectral import (ClassifierConfig, GestureLabel, align_log, classify, detect_tone, extract_ridge,
                               modulation_spectrum, stft)
from dronevox.stats import ContingencyTable2x2, barnard_exact, fisher_exact, zscore_outliers
from dronevox.trajectory import GestureKind

SEEDS = range(1, 21)
STUDY = ContingencyTable2x2(44, 64, 52, 32)
NOD, SHAKE, VOC = GestureKind.POSITIVE_NOD, GestureKind.NEGATIVE_ORDINARY, GestureKind.NEGATIVE_VOCALICS


def _db(a, b):
    return 10 * math.log10(a / b)


def _gesture_audio(recordings, kind, seed):
    rec, audio, _ = recordings(kind, seed)
    offset = RunConfig().run.audio_offset
    return audio.segment(rec.switch_time + offset, rec.gesture_end + offset)


def test_criterion_01_study_table_p_value(capsys, note):
    start = time.perf_counter()
    assert main(["stats", "--table", "44,64,52,32"]) == 0
    elapsed = time.perf_counter() - start
    out = dict(line.split(None, 1) for line in capsys.readouterr().out.splitlines())
    p = float(out["p_value"])
    fisher = float(out["fisher_p_two_sided"])
    note(f"p = {p:.6g} ({out['p_percent'].strip()} %), two-sided Fisher {fisher:.6g} "
         f"vs Barnard {float(out['p_value_two_sided']):.6g}, {elapsed:.2f} s")
    assert f"{100 * p:.2g}" == "0.19"
    assert elapsed < 10.0
    assert fisher >= float(out["p_value_two_sided"])
    assert fisher_exact(STUDY) >= barnard_exact(STUDY).p_value


def test_criterion_02_trivial_statistics(note):
    assert barnard_exact(ContingencyTable2x2(1, 1, 1, 1)).p_value == 1.0
    for alt in ("two-sided", "less", "greater"):
        p = barnard_exact(STUDY, alt).p_value
        mirror = {"two-sided": "two-sided", "less": "greater", "greater": "less"}[alt]
        assert barnard_exact(STUDY.swap_groups(), mirror).p_value == pytest.approx(p, abs=1e-15)
        assert barnard_exact(STUDY.swap_outcomes(), mirror).p_value == pytest.approx(p, abs=1e-15)
    p = barnard_exact(STUDY).p_value
    assert barnard_exact(STUDY.swap_groups()).p_value == pytest.approx(p, abs=1e-15)
    assert barnard_exact(STUDY.swap_outcomes()).p_value == pytest.approx(p, abs=1e-15)
    coarse = barnard_exact(STUDY, grid_points=1001).p_value
    fine = barnard_exact(STUDY, grid_points=2002).p_value
    note(f"grid 1001 vs 2002: |dp| = {abs(coarse - fine):.2e}")
    assert abs(coarse - fine) < 1e-6


def _smoother_gain(freq, tau=0.05, rate=100.0, seconds=10.0, settle=2.0):
    t = np.arange(int(seconds * rate)) / rate
    yaw_in = 0.5 * np.sin(2 * np.pi * freq * t)
    state = SmootherState(tau=tau)
    out = np.array([smooth(state, PoseSample(ti, np.zeros(3), 0.0, 0.0, y), 1 / rate).yaw
                    for ti, y in zip(t, yaw_in)])
    keep = t >= settle
    basis = np.column_stack([np.sin(2 * np.pi * freq * t[keep]), np.cos(2 * np.pi * freq * t[keep])])
    coef, *_ = np.linalg.lstsq(basis, out[keep], rcond=None)
    return float(np.hypot(*coef)) / 0.5


def test_criterion_03_filter_transfer(note):
    g10, g1 = _smoother_gain(10.0), _smoother_gain(1.0)
    note(f"10 Hz gain {g10:.4f}, 1 Hz gain {g1:.4f}")
    assert g10 == pytest.approx(0.303, abs=0.01)
    assert g1 == pytest.approx(0.954, abs=0.01)


def test_criterion_04_smoothed_yaw_suppresses_10hz(flights, note):
    margins = []
    for seed in SEEDS:
        rec = flights(VOC, seed)
        yaw = np.unwrap(rec.angles[:, 2])[rec.gesture_mask]
        power = np.abs(np.fft.rfft(yaw - yaw.mean())) ** 2
        freqs = np.fft.rfftfreq(yaw.size, rec.t[1] - rec.t[0])
        e10 = power[np.abs(freqs - 10.0) <= 0.5].sum()
        e1 = power[np.abs(freqs - 1.0) <= 0.2].sum()
        margins.append(_db(e1, e10))
    note(f"1 Hz over 10 Hz: min {min(margins):.1f} dB over {len(margins)} seeds")
    assert min(margins) >= 10.0


def test_criterion_05_vocalics_audible_and_classified(recordings, note):
    lo, hi = ClassifierConfig().vocalics_band
    margins, narrow, labels_voc, labels_nod = [], [], [], []
    for seed in SEEDS:
        mods = {}
        for kind in (VOC, SHAKE):
            mods[kind] = modulation_spectrum(extract_ridge(stft(_gesture_audio(recordings, kind, seed))))
        margins.append(_db(mods[VOC].energy(lo, hi), mods[SHAKE].energy(lo, hi)))
        narrow.append(_db(mods[VOC].energy(9.5, 10.5), mods[SHAKE].energy(9.5, 10.5)))
        labels_voc.append(classify(_gesture_audio(recordings, VOC, seed)).label)
        labels_nod.append(classify(_gesture_audio(recordings, NOD, seed)).label)
    note(f"vocalics over ordinary, {lo:g}-{hi:g} Hz band: min {min(margins):.1f} dB")
    note(f"(9.5-10.5 Hz band, not asserted: min {min(narrow):.1f} dB)")
    note(f"labels: vocalics {sum(lb is GestureLabel.NEGATIVE_VOCALICS for lb in labels_voc)}/20, "
         f"nod {sum(lb is GestureLabel.POSITIVE for lb in labels_nod)}/20")
    assert min(margins) >= 10.0
    assert all(lb is GestureLabel.NEGATIVE_VOCALICS for lb in labels_voc)
    assert all(lb is GestureLabel.POSITIVE for lb in labels_nod)


def test_criterion_06_yaw_range_ordering(flights, note):
    commanded = math.degrees(COMMANDED_RANGE)
    assert commanded == pytest.approx(60.0)
    rows = [(math.degrees(yaw_range(flights(VOC, s))), math.degrees(yaw_range(flights(SHAKE, s)))) for s in SEEDS]
    voc, ordinary = np.array(rows).T
    note(f"ordinary {ordinary.min():.1f}-{ordinary.max():.1f} deg, vocalics {voc.min():.1f}-{voc.max():.1f} deg")
    assert np.all(voc < ordinary)
    assert np.all(ordinary < commanded)
    assert np.all(ordinary >= 0.5 * commanded)


def _shake_differential(rec, params):
    """Commanded yaw differential of a closed-loop shake, held over 1 ms steps."""
    dirs = np.asarray(params.spin_dirs, dtype=float)
    delta = (rec.cmd_speeds[rec.gesture_mask] * dirs).mean(axis=1)
    return np.repeat(delta, 10)


def test_criterion_07_altitude_bump(flights, note):
    params = QuadParams()
    assert params.tau_up < params.tau_down
    hover_thrust = params.mass * params.gravity
    surplus, z_err = [], []
    for seed in SEEDS:
        rec = flights(SHAKE, seed)
        m = rec.gesture_mask
        surplus.append(np.mean(rec.thrust_realised[m]) - hover_thrust)
        z_err.append(np.mean(rec.true_position[m, 2] - rec.ref_position[m, 2]))
    note(f"closed loop: thrust surplus min {min(surplus) * 1e3:.3f} mN, altitude error min {min(z_err) * 1e3:.2f} mm")
    assert min(surplus) > 0 and min(z_err) > 0

    delta = _shake_differential(flights(SHAKE, 1), params)
    omega = hover_speed(params)
    _, thrust = differential_replay(params, delta)
    open_loop = float(np.mean(thrust)) - 4 * params.k_f * omega ** 2
    assert open_loop > 0

    equal = params.with_(tau_up=0.05, tau_down=0.05)
    speeds, thrust = differential_replay(equal, delta)
    assert np.all((speeds > equal.omega_min) & (speeds < equal.omega_max))
    realised = ((speeds - omega) * np.asarray(equal.spin_dirs)).mean(axis=1)
    got = float(np.mean(thrust)) - 4 * equal.k_f * omega ** 2
    oracle = 4 * equal.k_f * float(np.mean(realised ** 2))
    note(f"open loop: asymmetric surplus {open_loop * 1e3:.3f} mN, equal-lag {got * 1e3:.4f} vs {oracle * 1e3:.4f} mN")
    assert got == pytest.approx(oracle, rel=0.01)


def test_criterion_08_blade_pass_at_twice_rotation(note):
    audio = synthesize(np.full((100, 4), 2 * math.pi * 400.0), AcousticParams())
    spec = stft(audio)
    peak = spec.freq_bins[spec.magnitudes.mean(axis=0).argmax()]
    note(f"peak {peak:.2f} Hz, bin width {spec.bin_width:.2f} Hz")
    assert abs(peak - 800.0) <= spec.bin_width


def test_criterion_09_sync_round_trip(note):
    rng = np.random.default_rng(2024)
    kinds = list(GestureKind)
    tone_err, log_err = [], []
    for seed in SEEDS:
        base = RunConfig().with_run(gesture=kinds[seed % 3].value, seed=seed, warmup=0.5)
        lead = base.acoustics.tone_lead
        onset = rng.uniform(0.5, 2.0)
        cfg = base.with_run(audio_offset=onset - base.run.warmup + lead)
        rec = fly_config(cfg)
        audio, injected = record_audio(rec, cfg)
        assert injected == pytest.approx(onset, abs=1e-9)
        found = detect_tone(audio, cfg.acoustics.tone_freq)
        offset = align_log(found, rec.t, rec.control_method, lead)
        tone_err.append(abs(found - onset))
        log_err.append(abs(offset - cfg.run.audio_offset))
    note(f"max tone error {max(tone_err) * 1e3:.2f} ms, max log offset error {max(log_err) * 1e3:.2f} ms")
    assert max(tone_err) <= 0.005
    assert max(log_err) <= 0.010


def test_criterion_10_outlier_screen(note):
    for seed in range(20):
        rng = np.random.default_rng(seed)
        values = list(np.clip(rng.normal(2.7, 1.0, 190), 0.5, None))
        i44, i264 = sorted(rng.choice(192, 2, replace=False))
        values.insert(i44, 44.0)
        values.insert(i264, 264.0)
        assert zscore_outliers(values, 2.0) == [i44, i264], seed
    note("planted values flagged alone in 20 random layouts")


def test_criterion_11_experiment_is_deterministic(tmp_path, note):
    for d in ("a", "b"):
        assert main(["experiment", "--out", str(tmp_path / d), "--no-figures"]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir() if p.suffix in (".wav", ".csv"))
    assert any(n.endswith(".wav") for n in names) and any(n.endswith(".csv") for n in names)
    assert names == sorted(p.name for p in (tmp_path / "b").iterdir() if p.suffix in (".wav", ".csv"))
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
    comment = read_wav(tmp_path / "a" / "nod.wav").comment
    assert f"config_hash={RunConfig().with_run(gesture='nod').config_hash()}" in comment
    note(f"{len(names)} WAV/CSV files byte-identical")
