"""Quadrotor nod/shake gestures, their rotor sound, and the statistics around them."""
from .acoustics import AcousticParams, AudioBuffer, inject_tone, read_wav, synthesize, write_wav
from .config import RunConfig, load_config
from .controller import ControllerGains, ControlMode, control_step, mix
from .dynamics import QuadParams, QuadState, hover_speed, hover_state, step
from .flight import fly, yaw_range
from .spectral import GestureLabel, classify, detect_tone, extract_ridge, stft
from .stats import ContingencyTable2x2, barnard_exact, fisher_exact, wald_pooled, zscore_outliers
from .trajectory import GestureKind, GestureSpec, sample_trajectory

__version__ = "0.1.0"
