"""Command-line entry point.

Exit codes: 0 success, 2 invalid input or configuration, 3 numerical failure
(divergence, non-finite state, clipping).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .acoustics import ClippingError, WavError, read_wav
from .config import ConfigError, load_config
from .flight import DivergenceError
from .flightlog import FlightLogError, read_flight_log
from .spectral import AnalysisError, spectrogram_image, stft, write_pgm, write_spectrogram_csv
from .stats import ALTERNATIVES, ContingencyTable2x2, barnard_exact, fisher_exact

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dronevox", description="Quadrotor gesture simulation, rotor-sound analysis and study statistics.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="fly one gesture and write the flight log and WAV recording")
    s.add_argument("--gesture", choices=("nod", "shake", "vocalics"), required=True)
    s.add_argument("--config", help="JSON config file or preset name (default preset if omitted)")
    s.add_argument("--out", help="output directory (default: run.out_dir from the config)")
    s.add_argument("--seed", type=int)

    a = sub.add_parser("analyze", help="classify a recording and write spectrogram/ridge/modulation files")
    a.add_argument("--wav", required=True)
    a.add_argument("--config")
    a.add_argument("--out", help="output directory (default: next to the WAV)")
    a.add_argument("--no-figures", action="store_true", help="skip PNG figures")

    t = sub.add_parser("stats", help="Barnard's exact test (and Fisher for comparison) on a 2x2 table")
    t.add_argument("--table", required=True, help="a,b,c,d: group A successes, group B successes, "
                                                   "group A failures, group B failures")
    t.add_argument("--alternative", choices=ALTERNATIVES, default="less",
                   help="'less' (default) asks whether group A's success rate is lower")
    t.add_argument("--grid-points", type=int, default=1001)
    t.add_argument("--csv", help="also write the report as CSV")

    y = sub.add_parser("sync", help="recover the audio/log offset from the sync tone")
    y.add_argument("--wav", required=True)
    y.add_argument("--log", required=True)
    y.add_argument("--config")

    e = sub.add_parser("experiment", help="run all three gestures and write a summary")
    e.add_argument("--config")
    e.add_argument("--out")
    e.add_argument("--no-figures", action="store_true")

    g = sub.add_parser("spectrogram", help="write a spectrogram as an 8-bit PGM image (and optional CSV)")
    g.add_argument("--wav", required=True)
    g.add_argument("--pgm", required=True)
    g.add_argument("--csv")
    g.add_argument("--fmax", type=float, default=2000.0)
    g.add_argument("--config")
    return p


def _cmd_simulate(args) -> int:
    from .pipeline import simulate
    cfg = load_config(args.config).with_run(gesture=args.gesture)
    if args.seed is not None:
        cfg = cfg.with_run(seed=args.seed)
    out = Path(args.out or cfg.run.out_dir)
    res = simulate(cfg, out)
    print(f"config_hash,{res.config_hash}")
    print(f"log,{res.paths['log']}")
    print(f"wav,{res.paths['wav']}")
    print(f"audio_offset_s,{res.audio_offset:.6f}")
    print(f"tone_onset_s,{res.tone_onset:.6f}")
    return EXIT_OK


def _cmd_analyze(args) -> int:
    from .pipeline import analyze
    cfg = load_config(args.config)
    wav = Path(args.wav)
    out = Path(args.out) if args.out else wav.parent
    rep = analyze(wav, cfg, out, stem=wav.stem, figures=not args.no_figures)
    d = rep.to_dict()
    print(f"label,{d['label']}")
    for k, v in d["scores"].items():
        print(f"score_{k},{v:.6f}")
    print(f"tone_onset_s,{'' if d['tone_onset'] is None else format(d['tone_onset'], '.6f')}")
    for k, v in rep.paths.items():
        print(f"{k},{v}")
    return EXIT_OK


def _cmd_stats(args) -> int:
    table = ContingencyTable2x2.parse(args.table)
    res = barnard_exact(table, args.alternative, args.grid_points)
    two = res if args.alternative == "two-sided" else barnard_exact(table, "two-sided", args.grid_points)
    fisher = fisher_exact(table)
    rows = [
        ("table", f"{table.a};{table.b};{table.c};{table.d}"),
        ("statistic", f"{res.statistic:.6f}"),
        ("alternative", args.alternative),
        ("p_value", f"{res.p_value:.6g}"),
        ("p_percent", f"{100 * res.p_value:.2g}"),
        ("nuisance_argmax", f"{res.nuisance_argmax:.6f}"),
        ("p_value_two_sided", f"{two.p_value:.6g}"),
        ("fisher_p_two_sided", f"{fisher:.6g}"),
        ("fisher_ge_barnard", str(fisher >= two.p_value).lower()),
    ]
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        print(f"{k:<{width}}  {v}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            fh.write("field,value\n")
            fh.writelines(f"{k},{v}\n" for k, v in rows)
    return EXIT_OK


def _cmd_sync(args) -> int:
    from .pipeline import sync
    cfg = load_config(args.config)
    flog = read_flight_log(args.log)
    onset, offset = sync(read_wav(args.wav), flog, cfg)
    print(f"tone_onset_s,{onset:.6f}")
    print(f"offset_s,{offset:.6f}")
    return EXIT_OK


def _cmd_experiment(args) -> int:
    from .pipeline import run_experiment
    cfg = load_config(args.config)
    out = Path(args.out or cfg.run.out_dir)
    summary = run_experiment(cfg, out, figures=not args.no_figures)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_spectrogram(args) -> int:
    cfg = load_config(args.config)
    audio = read_wav(args.wav)
    spec = stft(audio, cfg.analysis.window_len, cfg.analysis.hop)
    write_pgm(spectrogram_image(spec, args.fmax), args.pgm)
    print(f"pgm,{args.pgm}")
    if args.csv:
        write_spectrogram_csv(spec, args.csv, args.fmax)
        print(f"csv,{args.csv}")
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "analyze": _cmd_analyze,
    "stats": _cmd_stats,
    "sync": _cmd_sync,
    "experiment": _cmd_experiment,
    "spectrogram": _cmd_spectrogram,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (DivergenceError, FloatingPointError, ClippingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, WavError, FlightLogError, AnalysisError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
