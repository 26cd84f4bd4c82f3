"""Shared synthesis helpers and fixtures.

WAV bytes for decoder tests are produced by the stdlib ``wave`` module
(PCM16) or a minimal hand-packed writer (float32), keeping the writers
independent of the package's own parser.
"""

import io
import struct
import wave

import numpy as np
import pytest

from chorusid import AudioClip


def wav_pcm16_bytes(samples: np.ndarray, sample_rate: int, channels: int = 1) -> bytes:
    """PCM16 WAV via the stdlib writer; samples are int16 values."""
    data = np.asarray(samples, dtype="<i2")
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wf:
        wf.setnchannels(channels)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(data.tobytes())
    return buf.getvalue()


def wav_float32_bytes(samples: np.ndarray, sample_rate: int, channels: int = 1) -> bytes:
    """IEEE float32 WAV, hand-packed."""
    payload = np.asarray(samples, dtype="<f4").tobytes()
    block_align = 4 * channels
    fmt = struct.pack(
        "<HHIIHH", 3, channels, sample_rate, sample_rate * block_align, block_align, 32
    )
    body = (
        b"fmt " + struct.pack("<I", len(fmt)) + fmt
        + b"data" + struct.pack("<I", len(payload)) + payload
    )
    return b"RIFF" + struct.pack("<I", 4 + len(body)) + b"WAVE" + body


def float_to_pcm16(samples: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(samples) * 32768.0), -32768, 32767).astype(np.int16)


def tone(freq_hz: float, duration_s: float, sample_rate: int = 48000,
         amplitude: float = 0.5, phase: float = 0.0) -> np.ndarray:
    t = np.arange(int(round(duration_s * sample_rate))) / sample_rate
    return amplitude * np.sin(2 * np.pi * freq_hz * t + phase)


def tone_clip(freq_hz: float, duration_s: float = 1.0, sample_rate: int = 48000,
              amplitude: float = 0.5, source_id: str = "") -> AudioClip:
    return AudioClip(tone(freq_hz, duration_s, sample_rate, amplitude),
                     sample_rate, source_id)


def noisy_tone_clip(rng: np.random.Generator, freq_hz: float, duration_s: float,
                    sample_rate: int = 48000, snr_db: float = 20.0,
                    source_id: str = "") -> AudioClip:
    """Sine plus white noise at the requested SNR."""
    signal = tone(freq_hz, duration_s, sample_rate, amplitude=0.5)
    signal_power = float(np.mean(signal ** 2))
    noise_power = signal_power / (10.0 ** (snr_db / 10.0))
    noise = rng.normal(0.0, np.sqrt(noise_power), size=len(signal))
    return AudioClip(signal + noise, sample_rate, source_id)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20150301)
