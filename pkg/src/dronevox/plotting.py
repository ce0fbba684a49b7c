"""PNG figures for analysis and experiment reports (Agg canvas, no pyplot state)."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .spectral import ModulationSpectrum, RidgeTrack, Spectrogram

_META = {"Software": None}


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    FigureCanvasAgg(fig)
    fig.savefig(path, dpi=110, metadata=_META)
    return path


def plot_spectrogram(spec: Spectrogram, path, ridge: RidgeTrack | None = None, fmax: float = 2000.0,
                     title: str = "") -> Path:
    fig = Figure(figsize=(8, 4))
    ax = fig.add_subplot()
    keep = spec.freq_bins <= fmax
    db = 20 * np.log10(np.maximum(spec.magnitudes[:, keep], 1e-12))
    ax.pcolormesh(spec.frame_times, spec.freq_bins[keep], db.T, shading="auto", vmin=db.max() - 80,
                  vmax=db.max(), cmap="magma")
    if ridge is not None:
        ax.plot(ridge.frame_times, ridge.ridge_freq, color="cyan", lw=0.8, label="ridge")
        ax.legend(loc="upper right", fontsize=8)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("frequency [Hz]")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_modulation(mod: ModulationSpectrum, path, title: str = "", band=(8.5, 11.5)) -> Path:
    """``band`` is shaded; pass the classifier's vocalics band."""
    fig = Figure(figsize=(6, 3.5))
    ax = fig.add_subplot()
    ax.semilogy(mod.freqs, np.maximum(mod.ridge, 1e-6), label="ridge")
    ax.semilogy(mod.freqs, np.maximum(mod.bandwidth, 1e-6), label="spread")
    ax.axvspan(*band, color="0.85", zorder=0)
    ax.set_xlabel("modulation frequency [Hz]")
    ax.set_ylabel("|FFT| [Hz]")
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_yaw_traces(traces: dict, path, commanded: dict | None = None) -> Path:
    """``traces`` maps a label to (t, yaw_rad); optional ``commanded`` likewise."""
    fig = Figure(figsize=(8, 4))
    ax = fig.add_subplot()
    for name, (t, yaw) in traces.items():
        ax.plot(t, np.degrees(yaw), lw=1.0, label=f"{name} (tracked)")
    for name, (t, yaw) in (commanded or {}).items():
        ax.plot(t, np.degrees(yaw), lw=0.6, ls="--", label=f"{name} (reference)")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("yaw [deg]")
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    return _save(fig, path)


def plot_altitude(t, z_err, path, title: str = "") -> Path:
    fig = Figure(figsize=(6, 3))
    ax = fig.add_subplot()
    ax.plot(t, np.asarray(z_err) * 1000, lw=1.0)
    ax.axhline(0, color="0.5", lw=0.5)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("altitude error [mm]")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)
