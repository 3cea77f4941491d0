import math
import wave

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SR, interior, sawtooth, sine
from voxanon.audio import AudioBuffer, read_wav, write_wav
from voxanon.errors import ContractError, FormatError
from voxanon.pitch import (
    PitchTrack,
    Yingram,
    YingramConfig,
    bin_frequencies,
    cmndf,
    difference_function,
    frame_signal,
    yin_f0,
    yingram,
    yingram_argmin,
    yingram_bins,
    yingram_first_dip,
)


def naive_difference(x, tau_max):
    w = len(x) - tau_max
    out = []
    for tau in range(tau_max + 1):
        diffs = [x[j] - x[j + tau] for j in range(w)]
        out.append(math.fsum(v * v for v in diffs))
    return out


class TestDifferenceFunction:
    def test_constant_frame_is_zero(self):
        for method in ("direct", "fft"):
            d = difference_function(np.full(64, 0.3), 20, method=method)
            assert d.shape == (21,)
            assert np.all(d == 0.0)

    def test_zero_lag_is_exactly_zero(self, rng):
        assert difference_function(rng.normal(size=100), 30)[0] == 0.0

    @pytest.mark.parametrize("n, tau_max", [(16, 8), (101, 37), (512, 256), (2048, 1024)])
    def test_direct_matches_double_loop_exactly(self, rng, n, tau_max):
        x = rng.normal(size=n)
        expected = naive_difference(x.tolist(), tau_max)
        assert difference_function(x, tau_max, method="direct").tolist() == expected

    @pytest.mark.parametrize("n, tau_max", [(16, 8), (101, 37), (1024, 512), (2048, 1024)])
    def test_fft_within_1e6_of_double_loop(self, rng, n, tau_max):
        x = rng.uniform(-1, 1, size=n)
        expected = np.array(naive_difference(x.tolist(), tau_max))
        got = difference_function(x, tau_max, method="fft")
        assert np.max(np.abs(got - expected)) <= 1e-6
        assert np.all(got >= 0)

    def test_sine_has_local_minimum_at_period(self):
        period = 80  # 200 Hz at 16 kHz
        x = np.sin(2 * np.pi * np.arange(1024) / period)
        d = difference_function(x, 200, method="direct")
        assert d[period] < d[period - 1] and d[period] < d[period + 1]
        assert d[period] < 1e-20

    def test_too_short(self):
        with pytest.raises(ContractError, match="at least 40 samples"):
            difference_function(np.zeros(39), 20)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            difference_function(np.zeros(8), 2, method="slow")


class TestCmndf:
    def test_constant_d_gives_ones(self):
        assert cmndf([0.0, 2.5, 2.5, 2.5]).tolist() == [1.0, 1.0, 1.0, 1.0]

    def test_silent_frame_gives_ones(self):
        d = difference_function(np.zeros(256), 100)
        assert np.all(cmndf(d) == 1.0)

    def test_hand_values(self):
        # d = [0, 1, 3, 2]: d'(1) = 1*1/1, d'(2) = 3*2/4, d'(3) = 2*3/6
        assert cmndf([0.0, 1.0, 3.0, 2.0]).tolist() == [1.0, 1.0, 1.5, 1.0]

    def test_sine_global_minimum_at_period(self):
        period = 64
        x = np.sin(2 * np.pi * np.arange(1024) / period)
        dp = cmndf(difference_function(x, 100))
        assert int(np.argmin(dp[1:])) + 1 == period
        assert dp[period] < 1e-6

    def test_white_noise_hovers_near_one(self, rng):
        dp = cmndf(difference_function(rng.normal(size=2048), 512))
        assert abs(np.mean(dp[50:]) - 1.0) < 0.1

    def test_empty(self):
        with pytest.raises(ContractError):
            cmndf([])


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(1e-3, 1e3))
def test_cmndf_scale_invariance(seed, scale):
    x = np.random.default_rng(seed).normal(size=256)
    a = cmndf(difference_function(x, 100, method="direct"))
    b = cmndf(difference_function(scale * x, 100, method="direct"))
    np.testing.assert_allclose(b, a, rtol=1e-9, atol=0)


class TestFraming:
    def test_frame_count_and_centering(self):
        x = np.arange(1000, dtype=float)
        frames = frame_signal(x, 64, 200)
        assert frames.shape == (1 + 1000 // 200, 64)
        # frame i is centred on sample i * hop
        assert frames[2][32] == 400.0
        assert frames[0][32] == 0.0


class TestYin:
    def test_220_sine_interior_frames(self):
        track = yin_f0(sine(220))
        idx = interior(len(track))
        assert track.voiced[idx].all()
        assert np.all(np.abs(track.f0[idx] - 220) / 220 < 0.01)

    def test_silence_is_unvoiced(self):
        track = yin_f0(AudioBuffer(np.zeros(SR), SR))
        assert not track.voiced.any()
        assert np.all(track.f0 == 0)

    def test_sawtooth_100_no_octave_error(self):
        track = yin_f0(sawtooth(100))
        f0 = track.f0[interior(len(track))]
        assert np.all(np.abs(f0 - 100) / 100 < 0.01)

    def test_sweep_has_no_gross_errors(self):
        for f in np.geomspace(55, 760, 9):
            for make in (sine, sawtooth):
                track = yin_f0(make(f))
                f0 = track.f0[interior(len(track))]
                assert np.all(np.abs(f0 - f) / f <= 0.05), (make.__name__, f)

    def test_hop_and_frame_count(self):
        track = yin_f0(sine(220, seconds=0.5))
        assert track.hop_s == 200 / SR
        assert len(track) == 1 + 8000 // 200

    @pytest.mark.parametrize("kw, match", [
        (dict(f_min=300, f_max=200), "f_min < f_max"),
        (dict(f_max=9000), "Nyquist"),
        (dict(threshold=1.5), "threshold"),
        (dict(f_min=20), "raise f_min to at least 31.25"),
    ])
    def test_precondition_errors(self, kw, match):
        with pytest.raises(ContractError, match=match):
            yin_f0(sine(220, seconds=0.1), **kw)


class TestPitchTrack:
    def test_from_f0(self):
        t = PitchTrack.from_f0([0.0, 120.0, 121.0])
        assert t.voiced.tolist() == [False, True, True]
        np.testing.assert_allclose(t.times, [0.0, 0.0125, 0.025])

    def test_invariants(self):
        with pytest.raises(ContractError):
            PitchTrack(0.01, [100.0], [False])
        with pytest.raises(ContractError):
            PitchTrack(0.01, [0.0], [True])
        with pytest.raises(ContractError):
            PitchTrack(0.0, [100.0], [True])


class TestYingram:
    def test_bin_count_and_edges(self):
        cfg = YingramConfig()
        f = bin_frequencies(cfg)
        assert cfg.n_bins == yingram_bins(1) == math.ceil(12 * math.log2(768.40 / 10.77))
        assert f[0] == 10.77
        assert f[-1] <= 768.40

    @pytest.mark.parametrize("bps", [1, 2, 80])
    def test_map_is_increasing_and_log_linear(self, bps):
        f = bin_frequencies(YingramConfig(bins_per_semitone=bps))
        assert np.all(np.diff(f) > 0)
        m = 12 * bps * np.log2(f / f[0])
        np.testing.assert_allclose(m, np.arange(f.size), rtol=0, atol=1e-9)

    def test_440_argmin_within_a_semitone(self):
        yg = yingram(sine(440))
        rows = interior(yg.matrix.shape[0])
        freqs = yg.frequencies[yingram_argmin(yg)[rows]]
        assert np.all(np.abs(12 * np.log2(freqs / 440)) <= 1.0)

    def test_first_dip_on_sawtooth(self):
        yg = yingram(sawtooth(220))
        rows = interior(yg.matrix.shape[0])
        freqs = yg.frequencies[yingram_first_dip(yg)[rows]]
        assert np.all(np.abs(12 * np.log2(freqs / 220)) <= 1.0)

    def test_constant_signal_rows_are_flat(self):
        yg = yingram(AudioBuffer(np.full(4000, 0.25), SR))
        assert np.all(yg.matrix == 1.0)
        assert np.all(yingram_first_dip(yg) == -1)

    def test_bins_beyond_window_are_clamped(self):
        yg = yingram(sine(440, seconds=0.1))
        # lags above 512 samples are frequencies below 31.25 Hz
        expected = [m for m, f in enumerate(yg.frequencies) if SR / f > 512]
        assert list(yg.clamped_bins) == expected
        assert len(expected) == 19
        assert np.all(yg.matrix[:, expected] == 1.0)

    def test_values_interpolate_cmndf(self):
        x = sine(300, seconds=0.2)
        yg = yingram(x)
        frame = frame_signal(x.samples, 1024, 200)[5]
        dp = cmndf(difference_function(frame, 512))
        lag = SR / yg.frequencies[40]
        lo = int(lag)
        expected = dp[lo] + (lag - lo) * (dp[lo + 1] - dp[lo])
        assert abs(yg.matrix[5, 40] - expected) < 1e-12

    def test_low_rate_rejected_with_feasible_limit(self):
        audio = AudioBuffer(np.zeros(8000), 8000)
        with pytest.raises(ContractError, match="feasible f_max <= 4000"):
            yingram(audio, YingramConfig(f_max_hz=5000.0))

    def test_config_validation(self):
        with pytest.raises(ContractError):
            YingramConfig(bins_per_semitone=0)
        with pytest.raises(ContractError):
            YingramConfig(window=1023)

    def test_matrix_shape_checked(self):
        with pytest.raises(ContractError, match="expected 74"):
            Yingram(1, 10.77, 768.40, 1024, np.ones((2, 10)))


class TestWav:
    def test_round_trip(self, tmp_path):
        pcm = np.array([0, 1, -1, 32767, -32768, 1000], dtype=np.int16)
        audio = AudioBuffer(pcm / 32768.0, 16000)
        write_wav(tmp_path / "a.wav", audio)
        back = read_wav(tmp_path / "a.wav")
        assert back.sample_rate == 16000
        assert np.array_equal(back.samples, audio.samples)

    def _write(self, path, channels=1, width=2, rate=16000, frames=b"\x00\x00" * 4):
        with wave.open(str(path), "wb") as w:
            w.setnchannels(channels)
            w.setsampwidth(width)
            w.setframerate(rate)
            w.writeframes(frames)

    def test_rejects_stereo(self, tmp_path):
        self._write(tmp_path / "s.wav", channels=2)
        with pytest.raises(FormatError, match="mono"):
            read_wav(tmp_path / "s.wav")

    def test_rejects_8bit(self, tmp_path):
        self._write(tmp_path / "b.wav", width=1)
        with pytest.raises(FormatError, match="16-bit"):
            read_wav(tmp_path / "b.wav")

    def test_rejects_low_rate_and_garbage(self, tmp_path):
        self._write(tmp_path / "l.wav", rate=4000)
        with pytest.raises(FormatError, match="below"):
            read_wav(tmp_path / "l.wav")
        (tmp_path / "g.wav").write_bytes(b"not audio at all")
        with pytest.raises(FormatError, match="g.wav"):
            read_wav(tmp_path / "g.wav")

    def test_buffer_contracts(self):
        with pytest.raises(ContractError):
            AudioBuffer(np.zeros(0), 16000)
        with pytest.raises(ContractError):
            AudioBuffer(np.zeros(10), 4000)
        with pytest.raises(ContractError):
            AudioBuffer(np.array([np.nan]), 16000)
        assert AudioBuffer(np.array([2.0, -3.0]), 16000).samples.tolist() == [1.0, -1.0]
