"""WAV decoding and band-limited magnitude spectrograms.

Analysis settings are fixed: 20 ms rectangular frames, 50% overlap,
FFT length chosen so the bin spacing never exceeds 48000/1024 Hz, and
only bins between 1 kHz and 10 kHz retained (wind noise lives below
1 kHz, little bird energy above 10 kHz).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ClipTooShort, MalformedHeader, UnsupportedFormat

BAND_LOW_HZ = 1000.0
BAND_HIGH_HZ = 10000.0
FRAME_SECONDS = 0.020
# Reference bin spacing: 48 kHz analysed with a 1024-point FFT.
MAX_BIN_SPACING_HZ = 48000.0 / 1024.0

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE

# Frames per rfft batch; bounds transient memory on hour-long recordings.
_FFT_CHUNK = 8192


@dataclass(frozen=True)
class AudioClip:
    """Decoded mono audio: float64 samples in [-1, 1] plus sample rate."""

    samples: np.ndarray
    sample_rate: int
    source_id: str = ""

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class Spectrogram:
    """Band-limited magnitude spectrogram with per-frame power.

    ``frames`` has shape (n_frames, n_bins); ``freqs`` holds the bin
    center frequencies in Hz (strictly increasing, spaced by
    sample_rate/nfft). ``frame_power`` is the sum of squared
    time-domain samples of each frame, computed before zero padding.
    """

    frames: np.ndarray
    freqs: np.ndarray
    frame_power: np.ndarray
    frame_hop_s: float
    nfft: int
    sample_rate: int
    frame_len: int

    def __len__(self) -> int:
        return self.frames.shape[0]


def fft_size_for(sample_rate: int) -> int:
    """Smallest power of two >= 1024 * sample_rate / 48000.

    Keeps the bin spacing at or below 46.875 Hz regardless of the
    recording's native rate (1024 points at 48 kHz, 2048 at 96 kHz).
    """
    if sample_rate <= 0:
        raise ValueError("sample_rate must be positive")
    proportion = 1024 * sample_rate / 48000
    n = 1
    while n < proportion:
        n <<= 1
    return n


def decode_wav(data: bytes, source_id: str = "") -> AudioClip:
    """Decode a RIFF/WAVE byte string into a mono AudioClip.

    Accepts PCM 16-bit and IEEE float32, one or two channels. Stereo is
    downmixed by averaging the channels; integer samples are scaled by
    1/32768 so full-scale positive becomes 32767/32768.

    Raises MalformedHeader for broken containers and UnsupportedFormat
    for compressed codecs or unhandled sample layouts.
    """
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedHeader("not a RIFF/WAVE container")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise MalformedHeader("fmt chunk too small")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            if len(body) < chunk_size:
                raise MalformedHeader("data chunk truncated")
            payload = body
        # chunks are word-aligned; odd sizes carry a pad byte
        pos += 8 + chunk_size + (chunk_size & 1)

    if fmt is None or payload is None:
        raise MalformedHeader("missing fmt or data chunk")

    format_tag, n_channels, sample_rate, _byte_rate, _block_align, bits = fmt
    if format_tag == _WAVE_FORMAT_EXTENSIBLE:
        raise UnsupportedFormat("WAVE_FORMAT_EXTENSIBLE not supported")
    if format_tag not in (_WAVE_FORMAT_PCM, _WAVE_FORMAT_IEEE_FLOAT):
        raise UnsupportedFormat(f"compressed or unknown codec (tag 0x{format_tag:04x})")
    if n_channels not in (1, 2):
        raise UnsupportedFormat(f"{n_channels} channels (expected 1 or 2)")
    if sample_rate <= 0:
        raise MalformedHeader("non-positive sample rate")

    if format_tag == _WAVE_FORMAT_PCM:
        if bits != 16:
            raise UnsupportedFormat(f"{bits}-bit PCM (expected 16)")
        raw = np.frombuffer(payload[:len(payload) - len(payload) % 2], dtype="<i2")
        samples = raw.astype(np.float64) / 32768.0
    else:
        if bits != 32:
            raise UnsupportedFormat(f"{bits}-bit float (expected 32)")
        raw = np.frombuffer(payload[:len(payload) - len(payload) % 4], dtype="<f4")
        samples = raw.astype(np.float64)

    if n_channels == 2:
        samples = samples[:len(samples) - len(samples) % 2]
        samples = samples.reshape(-1, 2).mean(axis=1)

    return AudioClip(samples=samples, sample_rate=int(sample_rate), source_id=source_id)


def compute_spectrogram(clip: AudioClip) -> Spectrogram:
    """Magnitude spectrogram of ``clip`` under the fixed analysis settings.

    Frames are round(0.020 * fs) samples long with a hop of half a
    frame, rectangular-windowed, zero-padded to fft_size_for(fs).
    A trailing partial frame is discarded. Only bins with center
    frequency in [1 kHz, 10 kHz] (inclusive) are retained.
    """
    fs = clip.sample_rate
    frame_len = int(round(FRAME_SECONDS * fs))
    hop = frame_len // 2
    samples = np.asarray(clip.samples, dtype=np.float64)
    if len(samples) < frame_len:
        raise ClipTooShort(
            f"{len(samples)} samples < one {frame_len}-sample frame"
        )

    nfft = fft_size_for(fs)
    freqs_all = np.arange(nfft // 2 + 1) * (fs / nfft)
    band = (freqs_all >= BAND_LOW_HZ) & (freqs_all <= BAND_HIGH_HZ)
    freqs = freqs_all[band]
    if freqs.size == 0:
        raise ValueError(f"no spectrum bins between 1 and 10 kHz at {fs} Hz")

    n_frames = (len(samples) - frame_len) // hop + 1
    windows = np.lib.stride_tricks.sliding_window_view(samples, frame_len)[::hop]
    windows = windows[:n_frames]
    frame_power = np.einsum("ij,ij->i", windows, windows)

    frames = np.empty((n_frames, freqs.size), dtype=np.float64)
    for start in range(0, n_frames, _FFT_CHUNK):
        block = windows[start:start + _FFT_CHUNK]
        spectra = np.fft.rfft(block, n=nfft, axis=1)
        frames[start:start + _FFT_CHUNK] = np.abs(spectra[:, band])

    return Spectrogram(
        frames=frames,
        freqs=freqs,
        frame_power=frame_power,
        frame_hop_s=hop / fs,
        nfft=nfft,
        sample_rate=fs,
        frame_len=frame_len,
    )
