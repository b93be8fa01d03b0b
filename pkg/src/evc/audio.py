"""Waveform I/O and spectral feature extraction.

All features share one framing convention: the signal is padded by half a
window on each side, frames start every ``hop_length`` samples, and a signal
of ``n`` samples yields ``1 + n // hop_length`` frames.  Mel spectrograms use
natural log with a fixed amplitude floor so silence maps to a finite value.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy.fft
import scipy.io.wavfile
import scipy.signal

from .errors import ValidationError
from .store import load_archive, save_archive

AMPLITUDE_FLOOR = 1e-5
LOG_FLOOR = float(np.log(AMPLITUDE_FLOOR))


@dataclass(frozen=True)
class AudioConfig:
    """Framing and mel-filterbank parameters shared by every feature."""

    sample_rate: int = 16000
    n_fft: int = 1024
    win_length: int = 800
    hop_length: int = 200
    n_mels: int = 80
    fmin: float = 0.0
    fmax: float = 8000.0

    def __post_init__(self) -> None:
        if self.sample_rate <= 0:
            raise ValidationError(f"sample_rate must be positive, got {self.sample_rate}")
        if not (0 < self.hop_length <= self.win_length <= self.n_fft):
            raise ValidationError(
                f"need 0 < hop_length <= win_length <= n_fft, got "
                f"hop={self.hop_length} win={self.win_length} n_fft={self.n_fft}"
            )
        if self.n_mels < 1:
            raise ValidationError(f"n_mels must be >= 1, got {self.n_mels}")
        if not (0.0 <= self.fmin < self.fmax <= self.sample_rate / 2):
            raise ValidationError(
                f"need 0 <= fmin < fmax <= sample_rate/2, got "
                f"fmin={self.fmin} fmax={self.fmax} sample_rate={self.sample_rate}"
            )

    def frame_count(self, n_samples: int) -> int:
        """Number of frames extracted from a signal of ``n_samples``."""
        return 1 + n_samples // self.hop_length

    def fingerprint(self) -> str:
        """Short stable digest of every field, for feature-cache validation."""
        blob = json.dumps(asdict(self), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class VoicingTrack:
    """Per-frame voicing decisions with the f0 estimate where voiced."""

    voiced: np.ndarray  # bool, shape (frames,)
    f0: np.ndarray  # float32, shape (frames,); 0 where unvoiced
    hop_length: int
    sample_rate: int

    def voiced_duration(self) -> float:
        """Total voiced time in seconds (frame count times hop duration)."""
        return float(np.count_nonzero(self.voiced)) * self.hop_length / self.sample_rate


def hz_to_mel(f: np.ndarray | float) -> np.ndarray | float:
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m: np.ndarray | float) -> np.ndarray | float:
    return 700.0 * (np.power(10.0, np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(config: AudioConfig) -> np.ndarray:
    """Triangular mel filterbank, shape ``(n_mels, n_fft // 2 + 1)``.

    Filters peak at 1 and overlap at their half-power points on the mel axis.
    """
    n_freqs = config.n_fft // 2 + 1
    freqs = np.linspace(0.0, config.sample_rate / 2.0, n_freqs)
    edges = mel_to_hz(np.linspace(hz_to_mel(config.fmin), hz_to_mel(config.fmax), config.n_mels + 2))
    fb = np.zeros((config.n_mels, n_freqs), dtype=np.float64)
    for k in range(config.n_mels):
        lo, mid, hi = edges[k], edges[k + 1], edges[k + 2]
        rising = (freqs - lo) / max(mid - lo, 1e-12)
        falling = (hi - freqs) / max(hi - mid, 1e-12)
        fb[k] = np.clip(np.minimum(rising, falling), 0.0, 1.0)
    return fb.astype(np.float32)


def load_waveform(path: str | Path, config: AudioConfig) -> np.ndarray:
    """Read a mono wav file as float32 in [-1, 1].

    The file's sample rate must match the configuration; resampling is out of
    scope and silent mismatches would corrupt every downstream feature.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"audio file not found: {path}")
    rate, data = scipy.io.wavfile.read(path)
    if rate != config.sample_rate:
        raise ValidationError(f"{path} has sample rate {rate}, expected {config.sample_rate}")
    if data.ndim != 1:
        raise ValidationError(f"{path} has {data.shape[1]} channels, expected mono")
    if data.dtype == np.int16:
        wave = data.astype(np.float32) / 32768.0
    elif data.dtype == np.int32:
        wave = data.astype(np.float32) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        wave = data.astype(np.float32)
    else:
        raise ValidationError(f"{path} has unsupported sample format {data.dtype}")
    return wave


def save_waveform(path: str | Path, wave: np.ndarray, config: AudioConfig) -> None:
    """Write float32 samples as 16-bit PCM, clipping to the representable range."""
    wave = np.asarray(wave, dtype=np.float32)
    if wave.ndim != 1:
        raise ValidationError(f"waveform must be 1-D, got shape {wave.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    clipped = np.clip(wave, -1.0, 32767.0 / 32768.0)
    scipy.io.wavfile.write(path, config.sample_rate, (clipped * 32768.0).astype(np.int16))


def _frame_signal(wave: np.ndarray, frame_length: int, hop: int, n_frames: int) -> np.ndarray:
    """Slice a centre-padded signal into ``(n_frames, frame_length)`` rows."""
    pad = frame_length // 2
    mode = "reflect" if wave.size > pad else "constant"
    padded = np.pad(wave.astype(np.float64), pad, mode=mode)
    idx = np.arange(frame_length)[None, :] + hop * np.arange(n_frames)[:, None]
    return padded[idx]


def _stft_window(config: AudioConfig) -> np.ndarray:
    """Periodic Hann window zero-padded to ``n_fft`` and centred in the frame."""
    win = scipy.signal.get_window("hann", config.win_length, fftbins=True)
    lpad = (config.n_fft - config.win_length) // 2
    out = np.zeros(config.n_fft)
    out[lpad : lpad + config.win_length] = win
    return out


def _stft_magnitude(wave: np.ndarray, config: AudioConfig) -> np.ndarray:
    """Magnitude spectrogram, shape ``(frames, n_fft // 2 + 1)``."""
    wave = np.asarray(wave, dtype=np.float64)
    if wave.ndim != 1:
        raise ValidationError(f"waveform must be 1-D, got shape {wave.shape}")
    if wave.size == 0:
        raise ValidationError("waveform is empty")
    n_frames = config.frame_count(wave.size)
    frames = _frame_signal(wave, config.n_fft, config.hop_length, n_frames)
    return np.abs(np.fft.rfft(frames * _stft_window(config), axis=1))


def extract_mel(wave: np.ndarray, config: AudioConfig) -> np.ndarray:
    """Log-mel spectrogram, float32, shape ``(frames, n_mels)``."""
    mag = _stft_magnitude(wave, config)
    mel = mag @ mel_filterbank(config).astype(np.float64).T
    return np.log(np.maximum(mel, AMPLITUDE_FLOOR)).astype(np.float32)


def save_mel(path: str | Path, mel: np.ndarray, config: AudioConfig) -> None:
    """Persist a mel spectrogram together with the extraction fingerprint."""
    mel = np.asarray(mel, dtype=np.float32)
    if mel.ndim != 2 or mel.shape[1] != config.n_mels:
        raise ValidationError(f"expected (frames, {config.n_mels}) mel array, got shape {mel.shape}")
    save_archive(path, {"mel": mel}, {"kind": "mel", "audio_fingerprint": config.fingerprint()})


def load_mel(path: str | Path, config: AudioConfig) -> np.ndarray:
    """Load a mel spectrogram, refusing features extracted under other settings."""
    arrays, meta = load_archive(path)
    if meta.get("kind") != "mel" or "mel" not in arrays:
        raise ValidationError(f"{path} is not a mel-spectrogram file")
    if meta.get("audio_fingerprint") != config.fingerprint():
        raise ValidationError(
            f"{path} was extracted under a different audio configuration "
            f"({meta.get('audio_fingerprint')} != {config.fingerprint()})"
        )
    return arrays["mel"].astype(np.float32)


def _istft(spec: np.ndarray, config: AudioConfig) -> np.ndarray:
    """Overlap-add inverse of the padded-domain STFT used by Griffin-Lim.

    Returns the centre-padded signal of length ``(frames - 1) * hop + n_fft``;
    callers trim the half-window pads themselves.
    """
    window = _stft_window(config)
    frames = np.fft.irfft(spec, n=config.n_fft, axis=1) * window
    n_frames = spec.shape[0]
    length = (n_frames - 1) * config.hop_length + config.n_fft
    out = np.zeros(length)
    norm = np.zeros(length)
    for t in range(n_frames):
        start = t * config.hop_length
        out[start : start + config.n_fft] += frames[t]
        norm[start : start + config.n_fft] += window**2
    return out / np.maximum(norm, 1e-10)


def griffin_lim_invert(
    mel: np.ndarray, config: AudioConfig, n_iter: int = 60, seed: int = 0
) -> np.ndarray:
    """Invert a log-mel spectrogram to a waveform by phase reconstruction.

    The linear spectrum is estimated through the filterbank pseudo-inverse,
    the phase starts random from ``seed``, and ``n_iter`` rounds of magnitude
    projection refine it.  A ``(frames, n_mels)`` input yields exactly
    ``frames * hop_length`` samples.
    """
    mel = np.asarray(mel, dtype=np.float64)
    if mel.ndim != 2 or mel.shape[1] != config.n_mels:
        raise ValidationError(f"expected (frames, {config.n_mels}) mel array, got shape {mel.shape}")
    if n_iter < 0:
        raise ValidationError(f"n_iter must be >= 0, got {n_iter}")
    fb = mel_filterbank(config).astype(np.float64)
    magnitude = np.maximum(np.exp(mel) @ np.linalg.pinv(fb).T, 0.0)  # (frames, n_freqs)

    rng = np.random.default_rng(seed)
    phase = np.exp(2j * np.pi * rng.random(magnitude.shape))
    window = _stft_window(config)
    idx = np.arange(config.n_fft)[None, :] + config.hop_length * np.arange(mel.shape[0])[:, None]
    for _ in range(n_iter):
        padded = _istft(magnitude * phase, config)
        spec = np.fft.rfft(padded[idx] * window, axis=1)
        phase = np.exp(1j * np.angle(spec))
    padded = _istft(magnitude * phase, config)
    start = config.n_fft // 2
    target = mel.shape[0] * config.hop_length
    out = padded[start : start + target]
    if out.size < target:
        out = np.pad(out, (0, target - out.size))
    peak = np.max(np.abs(out))
    if peak > 1.0:
        out = out / peak
    return out.astype(np.float32)


def extract_mcep(
    wave: np.ndarray, order: int, config: AudioConfig, n_warp_bins: int = 128
) -> np.ndarray:
    """Mel-cepstral coefficients, shape ``(frames, order + 1)``.

    Each frame's log magnitude spectrum is resampled onto a mel-uniform
    frequency grid and decorrelated with an orthonormal DCT-II; coefficient 0
    carries the frame gain, so distance metrics drop it.
    """
    if order < 1:
        raise ValidationError(f"order must be >= 1, got {order}")
    if order + 1 > n_warp_bins:
        raise ValidationError(
            f"order {order} exceeds the spectral resolution of {n_warp_bins} warped bins"
        )
    mag = _stft_magnitude(wave, config)
    log_mag = np.log(np.maximum(mag, AMPLITUDE_FLOOR))
    freqs = np.linspace(0.0, config.sample_rate / 2.0, mag.shape[1])
    warp_freqs = mel_to_hz(np.linspace(hz_to_mel(config.fmin), hz_to_mel(config.fmax), n_warp_bins))
    warped = np.stack([np.interp(warp_freqs, freqs, row) for row in log_mag])
    ceps = scipy.fft.dct(warped, type=2, norm="ortho", axis=1)
    return ceps[:, : order + 1].astype(np.float32)


def detect_voicing(
    wave: np.ndarray,
    config: AudioConfig,
    f0_min: float = 50.0,
    f0_max: float = 500.0,
    threshold: float = 0.3,
    energy_floor: float = 1e-3,
) -> VoicingTrack:
    """Frame-level voicing from the normalised autocorrelation peak.

    A frame is voiced when its RMS clears ``energy_floor`` and the peak
    normalised autocorrelation in the ``[f0_min, f0_max]`` lag band reaches
    ``threshold``.
    """
    if not (0 < f0_min < f0_max <= config.sample_rate / 2):
        raise ValidationError(f"need 0 < f0_min < f0_max <= sample_rate/2, got {f0_min}, {f0_max}")
    wave = np.asarray(wave, dtype=np.float64)
    if wave.ndim != 1 or wave.size == 0:
        raise ValidationError(f"waveform must be non-empty and 1-D, got shape {wave.shape}")
    lag_lo = max(1, int(np.floor(config.sample_rate / f0_max)))
    lag_hi = int(np.ceil(config.sample_rate / f0_min))
    if lag_hi >= config.win_length // 2:
        raise ValidationError(
            f"f0_min {f0_min} needs lags up to {lag_hi}, too long for window {config.win_length}"
        )
    n_frames = config.frame_count(wave.size)
    frames = _frame_signal(wave, config.win_length, config.hop_length, n_frames)
    rms = np.sqrt(np.mean(frames**2, axis=1))

    w = config.win_length
    # Full autocorrelation via FFT, then lag-dependent energy normalisation.
    n_fft = int(2 ** np.ceil(np.log2(2 * w)))
    spectrum = np.fft.rfft(frames, n=n_fft, axis=1)
    autocorr = np.fft.irfft(spectrum * np.conj(spectrum), n=n_fft, axis=1)[:, : lag_hi + 1]
    sq = np.concatenate([np.zeros((n_frames, 1)), np.cumsum(frames**2, axis=1)], axis=1)
    lags = np.arange(lag_lo, lag_hi + 1)
    head = sq[:, w - lags]  # energy of x[0 : w - lag]
    tail = sq[:, [w]] - sq[:, lags]  # energy of x[lag : w]
    ncc = autocorr[:, lags] / np.sqrt(np.maximum(head * tail, 1e-20))

    peak = np.max(ncc, axis=1)
    # A periodic frame correlates equally at every multiple of its period, so
    # take the shortest lag within a margin of the peak, not the global argmax.
    near_peak = ncc >= np.maximum(threshold, 0.97 * peak)[:, None]
    best = np.where(near_peak.any(axis=1), np.argmax(near_peak, axis=1), np.argmax(ncc, axis=1))
    voiced = (peak >= threshold) & (rms >= energy_floor)
    f0 = np.where(voiced, config.sample_rate / lags[best], 0.0)
    return VoicingTrack(
        voiced=voiced, f0=f0.astype(np.float32), hop_length=config.hop_length, sample_rate=config.sample_rate
    )
