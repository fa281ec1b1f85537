"""Toy paired-signal pipeline: synthetic pairs, STFT, losses, SI-SNR, predictors."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.signal import ShortTimeFFT
from scipy.signal.windows import hann

__all__ = [
    "PairedSignal",
    "WindowInfo",
    "Spectrogram",
    "LossBreakdown",
    "DEFAULT_LAMBDAS",
    "synth_pair",
    "stft",
    "istft",
    "si_snr_db",
    "si_snr_ratio",
    "spectral_terms",
    "total_loss",
    "make_predictor",
]

DEFAULT_LAMBDAS = (0.01, 0.7, 0.3)
# relative guard: adds EPS * ||x_t||^2 to the error energy, keeping the ratio scale free
SI_SNR_EPS = 1e-10
COMPRESS_FLOOR = 1e-8
WINDOW_SECONDS = 0.032


@dataclass(frozen=True)
class PairedSignal:
    s: np.ndarray
    y: np.ndarray
    sample_rate: int
    snr_db: float

    def __post_init__(self):
        if np.shape(self.s) != np.shape(self.y):
            raise ValueError("clean and noisy signals differ in length")


@dataclass(frozen=True)
class WindowInfo:
    length: int
    hop: int
    n_fft: int
    kind: str
    sample_rate: int


@dataclass(frozen=True)
class Spectrogram:
    bins: np.ndarray  # F x L
    window: WindowInfo
    n_samples: int


@dataclass(frozen=True)
class LossBreakdown:
    sisnr_term: float
    mag_term: float
    ri_term: float
    total: float
    lambdas: tuple[float, float, float]


def _pink(rng: np.random.Generator, n: int) -> np.ndarray:
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.arange(spec.size, dtype=float)
    f[0] = 1.0
    spec /= np.sqrt(f)
    spec[0] = 0.0
    return np.fft.irfft(spec, n)


def synth_pair(
    n_tones: int = 4,
    duration_s: float = 1.0,
    sample_rate: int = 16000,
    snr_db: float = 0.0,
    noise_kind: str = "white",
    seed: int = 0,
) -> PairedSignal:
    """Random-phase tone mixture at unit RMS plus noise mixed at ``snr_db``."""
    n = int(round(duration_s * sample_rate))
    if n <= 0:
        raise ValueError("zero-length signal")
    if n < 256:
        raise ValueError("signal must have at least 256 samples")
    if not math.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    if n_tones < 1:
        raise ValueError("need at least one tone")
    if noise_kind not in ("white", "pink"):
        raise ValueError(f"unknown noise kind {noise_kind!r}")
    rng = np.random.default_rng(seed)
    t = np.arange(n) / sample_rate
    freqs = rng.uniform(100.0, 0.4 * sample_rate, n_tones)
    phases = rng.uniform(0.0, 2 * np.pi, n_tones)
    amps = rng.uniform(0.5, 1.0, n_tones)
    s = (amps[:, None] * np.sin(2 * np.pi * freqs[:, None] * t + phases[:, None])).sum(axis=0)
    s /= np.sqrt(np.mean(s**2))
    noise = rng.standard_normal(n) if noise_kind == "white" else _pink(rng, n)
    noise *= math.sqrt(np.sum(s**2) / np.sum(noise**2) / 10.0 ** (snr_db / 10.0))
    y = s + noise
    achieved = 10.0 * math.log10(np.sum(s**2) / np.sum((y - s) ** 2))
    return PairedSignal(s, y, sample_rate, achieved)


def _transform(sample_rate: int) -> tuple[ShortTimeFFT, WindowInfo]:
    length = int(round(WINDOW_SECONDS * sample_rate))
    hop = length // 2
    win = np.sqrt(hann(length, sym=False))
    info = WindowInfo(length, hop, length, "sqrt-hann", sample_rate)
    return ShortTimeFFT(win, hop, fs=sample_rate, fft_mode="onesided", mfft=length), info


def stft(x, sample_rate: int = 16000) -> Spectrogram:
    """32 ms sqrt-Hann analysis at 50% overlap (512 points at 16 kHz)."""
    x = np.asarray(x, dtype=float)
    sft, info = _transform(sample_rate)
    if x.ndim != 1 or x.size < info.length:
        raise ValueError(f"input shorter than one window ({info.length} samples)")
    return Spectrogram(sft.stft(x), info, x.size)


def istft(X: Spectrogram) -> np.ndarray:
    sft, _ = _transform(X.window.sample_rate)
    return sft.istft(X.bins, k1=X.n_samples)


def si_snr_ratio(x_hat, x) -> float:
    """``||x_t||^2 / ||x_hat - x_t||^2`` with the relative guard in the denominator."""
    x_hat = np.asarray(x_hat, dtype=float)
    x = np.asarray(x, dtype=float)
    if x_hat.shape != x.shape:
        raise ValueError("length mismatch")
    ref = float(np.dot(x, x))
    if ref == 0.0:
        raise ValueError("zero reference signal")
    target = (np.dot(x_hat, x) / ref) * x
    t_energy = float(np.dot(target, target))
    e = x_hat - target
    e_energy = float(np.dot(e, e))
    tiny = np.finfo(float).tiny
    return (t_energy + tiny) / (e_energy + SI_SNR_EPS * t_energy + tiny)


def si_snr_db(x_hat, x) -> float:
    return 10.0 * math.log10(si_snr_ratio(x_hat, x))


def spectral_terms(X_hat, X) -> tuple[float, float]:
    """Compressed-magnitude and compressed real/imaginary MSE between two bin arrays."""
    X_hat = np.asarray(X_hat, dtype=complex)
    X = np.asarray(X, dtype=complex)
    if X_hat.shape != X.shape:
        raise ValueError("spectrogram shape mismatch")
    mag_hat, mag = np.abs(X_hat), np.abs(X)
    mag_term = float(np.mean((mag_hat**0.3 - mag**0.3) ** 2))
    den_hat = np.maximum(mag_hat**0.7, COMPRESS_FLOOR)
    den = np.maximum(mag**0.7, COMPRESS_FLOOR)
    c_hat, c = X_hat / den_hat, X / den
    ri_term = float(np.mean((c_hat.real - c.real) ** 2) + np.mean((c_hat.imag - c.imag) ** 2))
    return mag_term, ri_term


def total_loss(x_hat, x, lambdas: tuple[float, float, float] = DEFAULT_LAMBDAS, sample_rate: int = 16000) -> LossBreakdown:
    x_hat = np.asarray(x_hat, dtype=float)
    x = np.asarray(x, dtype=float)
    if x_hat.shape != x.shape:
        raise ValueError("length mismatch")
    # printed without the factor 10 of the dB metric
    sisnr_term = -math.log10(si_snr_ratio(x_hat, x))
    mag_term, ri_term = spectral_terms(stft(x_hat, sample_rate).bins, stft(x, sample_rate).bins)
    l1, l2, l3 = (float(v) for v in lambdas)
    total = l1 * sisnr_term + l2 * mag_term + l3 * ri_term
    return LossBreakdown(sisnr_term, mag_term, ri_term, total, (l1, l2, l3))


def make_predictor(kind: str, params: dict | None = None, reference: PairedSignal | None = None) -> Callable:
    """Stand-in for a trained data-prediction network: ``f(x_t, y, t) -> s_hat``."""
    params = dict(params or {})
    if reference is None:
        raise ValueError("predictors need a reference pair")
    s_ref = np.asarray(reference.s)
    if kind == "oracle":
        return lambda x, y, t: s_ref.copy()
    if kind == "blend":
        beta = float(params.get("beta", 0.5))
        if not 0.0 <= beta <= 1.0:
            raise ValueError("blend beta must be in [0, 1]")
        return lambda x, y, t: beta * s_ref + (1.0 - beta) * np.asarray(y)
    if kind == "wiener":
        rate = reference.sample_rate
        S = stft(reference.s, rate).bins
        N = stft(np.asarray(reference.y) - s_ref, rate).bins
        ps, pn = np.abs(S) ** 2, np.abs(N) ** 2
        den = ps + pn
        gain = np.divide(ps, den, out=np.ones_like(ps), where=den > 0)
        cache: dict[bytes, np.ndarray] = {}

        def wiener(x, y, t):
            y = np.asarray(y)
            key = y.tobytes()
            if key not in cache:
                Y = stft(y.real if np.iscomplexobj(y) else y, rate)
                out = istft(Spectrogram(Y.bins * gain, Y.window, Y.n_samples))
                cache[key] = out.astype(y.dtype)
            return cache[key].copy()

        return wiener
    raise ValueError(f"unknown predictor kind {kind!r}")
