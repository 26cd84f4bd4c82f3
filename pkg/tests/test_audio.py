"""WAV decoding, FFT-size rule and spectrogram computation."""

import numpy as np
import pytest

from chorusid import AudioClip, compute_spectrogram, decode_wav, fft_size_for
from chorusid.audio import MAX_BIN_SPACING_HZ
from chorusid.errors import ClipTooShort, MalformedHeader, UnsupportedFormat

from conftest import tone, wav_float32_bytes, wav_pcm16_bytes


class TestDecodeWav:
    def test_silence_one_second(self):
        data = wav_pcm16_bytes(np.zeros(48000, dtype=np.int16), 48000)
        clip = decode_wav(data)
        assert clip.sample_rate == 48000
        assert len(clip.samples) == 48000
        assert np.all(clip.samples == 0.0)

    def test_stereo_opposite_channels_cancel(self):
        x = (np.sin(2 * np.pi * 440 * np.arange(4410) / 44100) * 10000).astype(np.int16)
        interleaved = np.empty(2 * len(x), dtype=np.int16)
        interleaved[0::2] = x
        interleaved[1::2] = -x
        clip = decode_wav(wav_pcm16_bytes(interleaved, 44100, channels=2))
        assert np.all(clip.samples == 0.0)

    def test_full_scale_positive_square_wave(self):
        data = wav_pcm16_bytes(np.full(1000, 32767, dtype=np.int16), 48000)
        clip = decode_wav(data)
        assert np.all(clip.samples == 32767 / 32768)

    def test_full_scale_negative(self):
        data = wav_pcm16_bytes(np.full(1000, -32768, dtype=np.int16), 48000)
        clip = decode_wav(data)
        assert np.all(clip.samples == -1.0)

    def test_stereo_downmix_is_channel_average(self):
        interleaved = np.array([1000, 3000, -2000, 4000], dtype=np.int16)
        clip = decode_wav(wav_pcm16_bytes(interleaved, 48000, channels=2))
        expected = np.array([2000.0, 1000.0]) / 32768.0
        np.testing.assert_allclose(clip.samples, expected)

    def test_float32_roundtrip(self):
        samples = np.linspace(-1, 1, 480, dtype=np.float32)
        clip = decode_wav(wav_float32_bytes(samples, 48000))
        np.testing.assert_array_equal(clip.samples, samples.astype(np.float64))

    def test_not_riff_raises(self):
        with pytest.raises(MalformedHeader):
            decode_wav(b"OggS" + b"\x00" * 100)

    def test_truncated_header_raises(self):
        with pytest.raises(MalformedHeader):
            decode_wav(b"RIFF\x04\x00")

    def test_missing_data_chunk_raises(self):
        data = wav_pcm16_bytes(np.zeros(10, dtype=np.int16), 48000)
        with pytest.raises(MalformedHeader):
            decode_wav(data[: data.index(b"data")])

    def test_compressed_codec_raises_unsupported(self):
        # mu-law format tag (7) in an otherwise valid container
        fmt = np.frombuffer(wav_pcm16_bytes(np.zeros(10, np.int16), 8000), dtype=np.uint8).copy()
        pos = bytes(fmt).index(b"fmt ") + 8
        fmt[pos] = 7
        with pytest.raises(UnsupportedFormat):
            decode_wav(bytes(fmt))

    def test_24bit_pcm_raises_unsupported(self):
        payload = b"\x00" * 30
        import struct
        fmt = struct.pack("<HHIIHH", 1, 1, 48000, 48000 * 3, 3, 24)
        body = (b"fmt " + struct.pack("<I", len(fmt)) + fmt
                + b"data" + struct.pack("<I", len(payload)) + payload)
        data = b"RIFF" + struct.pack("<I", 4 + len(body)) + b"WAVE" + body
        with pytest.raises(UnsupportedFormat):
            decode_wav(data)


class TestFftSizeFor:
    def test_48k_gives_1024(self):
        assert fft_size_for(48000) == 1024

    def test_96k_gives_2048(self):
        assert fft_size_for(96000) == 2048
        assert 96000 / 2048 == pytest.approx(46.875)

    def test_44100_gives_1024(self):
        # proportion 940.8 -> next power of two is 1024; spacing 43.07 Hz
        assert fft_size_for(44100) == 1024
        assert 44100 / 1024 == pytest.approx(43.066, abs=1e-3)

    def test_spacing_bound_over_random_rates(self, rng):
        for fs in rng.integers(8000, 192001, size=200):
            nfft = fft_size_for(int(fs))
            assert nfft & (nfft - 1) == 0  # power of two
            assert fs / nfft <= MAX_BIN_SPACING_HZ + 1e-12


class TestComputeSpectrogram:
    def test_tone_frame_count_and_peak_bin(self):
        clip = AudioClip(tone(2000, 1.0, 48000), 48000)
        spec = compute_spectrogram(clip)
        # (48000 - 960) // 480 + 1
        assert len(spec) == 99
        assert spec.frame_hop_s == pytest.approx(480 / 48000)
        peak_freqs = spec.freqs[np.argmax(spec.frames, axis=1)]
        assert np.all(np.abs(peak_freqs - 2000) <= 48000 / 1024)

    def test_all_zero_clip_power(self):
        spec = compute_spectrogram(AudioClip(np.zeros(48000), 48000))
        assert np.all(spec.frame_power == 0.0)

    def test_below_band_tone_is_attenuated(self):
        in_band = compute_spectrogram(AudioClip(tone(2000, 0.5, 48000), 48000))
        below = compute_spectrogram(AudioClip(tone(500, 0.5, 48000), 48000))
        # retained spectrum of the 500 Hz tone is leakage only, peaking
        # at the low band edge
        assert below.frames.max() < 0.05 * in_band.frames.max()
        assert np.all(np.argmax(below.frames, axis=1) == 0)

    def test_matches_naive_dft_oracle(self):
        samples = np.sin(np.arange(2000) * 0.7) + 0.3 * np.cos(np.arange(2000) * 0.11)
        spec = compute_spectrogram(AudioClip(samples, 48000))
        # naive DFT of the first frame, zero-padded to nfft
        frame = np.zeros(spec.nfft)
        frame[:960] = samples[:960]
        n = np.arange(spec.nfft)
        bins = np.arange(spec.nfft // 2 + 1)
        dft = (frame[None, :] * np.exp(-2j * np.pi * bins[:, None] * n[None, :] / spec.nfft)).sum(axis=1)
        freqs_all = bins * 48000 / spec.nfft
        keep = (freqs_all >= 1000) & (freqs_all <= 10000)
        np.testing.assert_allclose(spec.frames[0], np.abs(dft[keep]), rtol=1e-9, atol=1e-9)

    def test_clip_too_short(self):
        with pytest.raises(ClipTooShort):
            compute_spectrogram(AudioClip(np.zeros(959), 48000))

    def test_single_frame_clip_accepted(self):
        spec = compute_spectrogram(AudioClip(np.zeros(960), 48000))
        assert len(spec) == 1

    @pytest.mark.parametrize("n_samples", [960, 961, 1439, 1440, 48000, 48001])
    def test_frame_count_formula(self, n_samples):
        spec = compute_spectrogram(AudioClip(np.zeros(n_samples), 48000))
        assert len(spec) == (n_samples - 960) // 480 + 1

    def test_band_limits_inclusive(self, rng):
        for fs in [8000, 22050, 44100, 48000, 96000, 192000]:
            spec = compute_spectrogram(AudioClip(np.zeros(fs), fs))
            assert spec.freqs[0] >= 1000.0
            assert spec.freqs[-1] <= 10000.0
            spacing = np.diff(spec.freqs)
            np.testing.assert_allclose(spacing, fs / spec.nfft)
            assert spacing[0] <= MAX_BIN_SPACING_HZ + 1e-12

    def test_frame_power_matches_analytic_tone_energy(self):
        # sum of sin^2 over a frame ~ L/2 for a unit-amplitude tone
        clip = AudioClip(tone(3000, 1.0, 48000, amplitude=1.0), 48000)
        spec = compute_spectrogram(clip)
        np.testing.assert_allclose(spec.frame_power, 480.0, rtol=0.05)

    def test_deterministic(self):
        data = wav_pcm16_bytes(
            (np.sin(np.arange(24000) * 0.3) * 20000).astype(np.int16), 48000
        )
        a = compute_spectrogram(decode_wav(data))
        b = compute_spectrogram(decode_wav(data))
        assert np.array_equal(a.frames, b.frames)
        assert np.array_equal(a.frame_power, b.frame_power)

    def test_non_48k_rates_frame_length(self):
        spec = compute_spectrogram(AudioClip(np.zeros(44100), 44100))
        assert spec.frame_len == 882
        assert len(spec) == (44100 - 882) // 441 + 1
