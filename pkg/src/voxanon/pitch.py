"""YIN pitch tracking and Yingram extraction.

Frames are ``window`` samples long and centred on multiples of the hop;
the signal is reflect-padded by half a window on each side so frame ``i``
is centred on sample ``i * hop``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 1024
DEFAULT_HOP_S = 0.0125
DEFAULT_THRESHOLD = 0.15
YINGRAM_F_MIN = 10.77
YINGRAM_F_MAX = 768.40


def difference_function(frame, tau_max, method="fft"):
    """Squared-difference function ``d(tau)`` for ``tau = 0 .. tau_max``.

    The integration window is ``len(frame) - tau_max`` samples, so every lag
    sums the same number of terms::

        d(tau) = sum_{j < W} (x[j] - x[j + tau]) ** 2

    ``method="direct"`` sums each lag with ``math.fsum`` (correctly rounded,
    slow); ``method="fft"`` expands the square and computes the cross term
    with a real FFT. Values of the FFT path below ``1e-10`` times the frame
    energy are rounding residue and are set to zero.
    """
    x = np.asarray(frame, dtype=np.float64).ravel()
    tau_max = int(tau_max)
    if tau_max < 0:
        raise ContractError(f"tau_max must be non-negative, got {tau_max}")
    if x.size < 2 * tau_max or x.size == 0:
        raise ContractError(
            f"frame of {x.size} samples is too short: tau_max={tau_max} needs at least "
            f"{max(2 * tau_max, 1)} samples"
        )
    w = x.size - tau_max

    if method == "direct":
        out = np.zeros(tau_max + 1)
        head = x[:w]
        for tau in range(1, tau_max + 1):
            diff = head - x[tau:tau + w]
            out[tau] = math.fsum(diff * diff)
        return out
    if method != "fft":
        raise ValueError(f"unknown method {method!r}")

    energy = np.concatenate(([0.0], np.cumsum(x * x)))
    taus = np.arange(tau_max + 1)
    n = 1 << (x.size - 1).bit_length()
    cross = np.fft.irfft(np.conj(np.fft.rfft(x[:w], n)) * np.fft.rfft(x, n), n)[:tau_max + 1]
    d = energy[w] + energy[taus + w] - energy[taus] - 2.0 * cross
    d[0] = 0.0
    d[d < 1e-10 * energy[-1]] = 0.0
    return d


def cmndf(d):
    """Cumulative mean normalised difference ``d'(tau) = d(tau) * tau / sum_{j<=tau} d(j)``.

    ``d'(0) = 1``. Lags whose cumulative sum is zero (silence, constant
    input) carry no periodicity evidence and are set to 1.
    """
    d = np.asarray(d, dtype=np.float64).ravel()
    if d.size == 0:
        raise ContractError("difference function is empty")
    out = np.ones_like(d)
    if d.size > 1:
        tail = d[1:]
        cum = np.cumsum(tail)
        taus = np.arange(1, d.size, dtype=np.float64)
        ok = cum > 0
        out[1:][ok] = tail[ok] * taus[ok] / cum[ok]
    return out


def hop_samples(hop_s, sample_rate):
    hop = int(round(hop_s * sample_rate))
    if hop < 1:
        raise ContractError(f"hop of {hop_s} s is shorter than one sample at {sample_rate} Hz")
    return hop


def frame_signal(samples, window, hop):
    """Centred frames, shape ``(1 + len(samples) // hop, window)``."""
    x = np.asarray(samples, dtype=np.float64)
    half = window // 2
    padded = np.pad(x, (half, window - half), mode="reflect")
    n_frames = 1 + x.size // hop
    view = np.lib.stride_tricks.sliding_window_view(padded, window)
    return view[::hop][:n_frames]


@dataclass(frozen=True, eq=False)
class PitchTrack:
    """Per-frame F0 in Hz and a voicing flag; unvoiced frames carry F0 = 0."""

    hop_s: float
    f0: np.ndarray
    voiced: np.ndarray

    def __post_init__(self):
        f0 = np.array(self.f0, dtype=np.float64).ravel()
        voiced = np.array(self.voiced, dtype=bool).ravel()
        if f0.shape != voiced.shape:
            raise ContractError("f0 and voicing arrays differ in length")
        if not self.hop_s > 0:
            raise ContractError(f"hop_s must be positive, got {self.hop_s}")
        if not np.all(np.isfinite(f0)) or np.any(f0 < 0):
            raise ContractError("f0 values must be finite and non-negative")
        if np.any(f0[~voiced] != 0):
            raise ContractError("unvoiced frames must have f0 = 0")
        if np.any(f0[voiced] <= 0):
            raise ContractError("voiced frames must have f0 > 0")
        f0.flags.writeable = False
        voiced.flags.writeable = False
        object.__setattr__(self, "f0", f0)
        object.__setattr__(self, "voiced", voiced)
        object.__setattr__(self, "hop_s", float(self.hop_s))

    @classmethod
    def from_f0(cls, f0, hop_s=DEFAULT_HOP_S):
        """Track where every positive value is voiced."""
        f0 = np.asarray(f0, dtype=np.float64)
        return cls(hop_s, np.where(f0 > 0, f0, 0.0), f0 > 0)

    @property
    def times(self):
        return np.arange(len(self)) * self.hop_s

    def __len__(self):
        return self.f0.size

    def __eq__(self, other):
        if not isinstance(other, PitchTrack):
            return NotImplemented
        return (self.hop_s == other.hop_s and np.array_equal(self.f0, other.f0)
                and np.array_equal(self.voiced, other.voiced))

    __hash__ = None


def _best_lag(dp, tau_min, threshold):
    below = np.flatnonzero(dp[tau_min:] < threshold)
    if below.size == 0:
        return None
    tau = tau_min + int(below[0])
    # walk to the bottom of the dip that first crossed the threshold
    while tau + 1 < dp.size and dp[tau + 1] < dp[tau]:
        tau += 1
    if 0 < tau < dp.size - 1:
        a, b, c = dp[tau - 1], dp[tau], dp[tau + 1]
        denom = a - 2.0 * b + c
        if denom > 0:
            return tau + float(np.clip(0.5 * (a - c) / denom, -1.0, 1.0))
    return float(tau)


def yin_f0(audio, f_min=40.0, f_max=800.0, threshold=DEFAULT_THRESHOLD,
           hop_s=DEFAULT_HOP_S, window=DEFAULT_WINDOW):
    """Frame-wise F0 with the YIN absolute-threshold rule.

    For each frame the first lag whose CMNDF value drops below
    ``threshold`` selects a dip; the dip minimum is refined by a parabola
    through its two neighbours. Frames with no such lag, or whose estimate
    falls outside ``[f_min, f_max]``, are unvoiced.
    """
    sr = audio.sample_rate
    if not 0 < f_min < f_max:
        raise ContractError(f"need 0 < f_min < f_max, got f_min={f_min}, f_max={f_max}")
    if f_max > sr / 2:
        raise ContractError(f"f_max={f_max} Hz exceeds the Nyquist limit {sr / 2} Hz")
    if not 0 < threshold < 1:
        raise ContractError(f"threshold must lie in (0, 1), got {threshold}")
    tau_max = int(math.ceil(sr / f_min))
    if 2 * tau_max > window:
        raise ContractError(
            f"window of {window} samples must cover two periods of f_min={f_min} Hz "
            f"({2 * tau_max} samples at {sr} Hz); raise f_min to at least {2 * sr / window:.2f} Hz"
        )
    tau_min = max(2, int(math.floor(sr / f_max)))
    hop = hop_samples(hop_s, sr)

    frames = frame_signal(audio.samples, window, hop)
    f0 = np.zeros(len(frames))
    for i, frame in enumerate(frames):
        lag = _best_lag(cmndf(difference_function(frame, tau_max)), tau_min, threshold)
        if lag is None or lag <= 0:
            continue
        freq = sr / lag
        if f_min <= freq <= f_max:
            f0[i] = freq
    return PitchTrack(hop / sr, f0, f0 > 0)


@dataclass(frozen=True)
class YingramConfig:
    bins_per_semitone: int = 1
    f_min_hz: float = YINGRAM_F_MIN
    f_max_hz: float = YINGRAM_F_MAX
    window: int = DEFAULT_WINDOW
    hop_s: float = DEFAULT_HOP_S

    def __post_init__(self):
        if int(self.bins_per_semitone) != self.bins_per_semitone or self.bins_per_semitone < 1:
            raise ContractError(f"bins_per_semitone must be a positive integer, got {self.bins_per_semitone}")
        if not 0 < self.f_min_hz < self.f_max_hz:
            raise ContractError(f"need 0 < f_min < f_max, got {self.f_min_hz}, {self.f_max_hz}")
        if self.window < 4 or self.window % 2:
            raise ContractError(f"window must be an even number of samples >= 4, got {self.window}")

    @property
    def n_bins(self):
        return yingram_bins(self.bins_per_semitone, self.f_min_hz, self.f_max_hz)


def yingram_bins(bins_per_semitone, f_min_hz=YINGRAM_F_MIN, f_max_hz=YINGRAM_F_MAX):
    return int(math.ceil(bins_per_semitone * 12.0 * math.log2(f_max_hz / f_min_hz)))


def bin_frequencies(cfg):
    """Frequency of each Yingram bin: ``f_min * 2 ** (m / (12 * bins_per_semitone))``."""
    m = np.arange(cfg.n_bins, dtype=np.float64)
    return cfg.f_min_hz * np.exp2(m / (12.0 * cfg.bins_per_semitone))


@dataclass(frozen=True, eq=False)
class Yingram:
    bins_per_semitone: int
    f_min_hz: float
    f_max_hz: float
    window: int
    matrix: np.ndarray
    clamped_bins: tuple = field(default=())

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        if m.ndim != 2:
            raise ContractError("Yingram matrix must be 2-D (frames x bins)")
        expected = yingram_bins(self.bins_per_semitone, self.f_min_hz, self.f_max_hz)
        if m.shape[1] != expected:
            raise ContractError(f"Yingram has {m.shape[1]} bins, expected {expected}")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise ContractError("Yingram values must be finite and non-negative")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "clamped_bins", tuple(int(b) for b in self.clamped_bins))

    @property
    def frequencies(self):
        return bin_frequencies(YingramConfig(self.bins_per_semitone, self.f_min_hz,
                                             self.f_max_hz, self.window))

    def __eq__(self, other):
        if not isinstance(other, Yingram):
            return NotImplemented
        return (self.bins_per_semitone == other.bins_per_semitone
                and self.f_min_hz == other.f_min_hz and self.f_max_hz == other.f_max_hz
                and np.array_equal(self.matrix, other.matrix))

    __hash__ = None


def yingram(audio, cfg=None):
    """CMNDF sampled on a log-frequency grid.

    Bin ``m`` holds ``d'`` linearly interpolated at the fractional lag
    ``sample_rate / f(m)``. Bins whose lag falls outside ``[1, window / 2]``
    cannot be measured at this sample rate; they are filled with 1 (no
    periodicity evidence) and listed in ``clamped_bins``.
    """
    cfg = cfg or YingramConfig()
    sr = audio.sample_rate
    if cfg.f_max_hz > sr / 2:
        raise ContractError(
            f"sample rate {sr} Hz is too low for f_max={cfg.f_max_hz} Hz; "
            f"feasible f_max <= {sr / 2} Hz"
        )
    tau_max = cfg.window // 2
    lags = sr / bin_frequencies(cfg)
    feasible = (lags >= 1.0) & (lags <= tau_max)
    if not feasible.any():
        raise ContractError(f"no Yingram bin has a lag within [1, {tau_max}] at {sr} Hz")
    clamped = np.flatnonzero(~feasible)
    if clamped.size:
        logger.warning("%d of %d Yingram bins need lags beyond %d samples at %d Hz; filled with 1",
                       clamped.size, lags.size, tau_max, sr)

    frames = frame_signal(audio.samples, cfg.window, hop_samples(cfg.hop_s, sr))
    grid = np.arange(tau_max + 1, dtype=np.float64)
    out = np.ones((len(frames), lags.size))
    for i, frame in enumerate(frames):
        dp = cmndf(difference_function(frame, tau_max))
        out[i, feasible] = np.interp(lags[feasible], grid, dp)
    return Yingram(cfg.bins_per_semitone, cfg.f_min_hz, cfg.f_max_hz, cfg.window, out,
                   tuple(clamped))


def yingram_argmin(yg):
    """Per-frame bin index of the smallest Yingram value."""
    return np.argmin(yg.matrix, axis=1)


def yingram_first_dip(yg, threshold=DEFAULT_THRESHOLD):
    """Per-frame bin chosen by the YIN absolute-threshold rule.

    Bins are scanned from the highest frequency (shortest lag) downwards;
    the first value under ``threshold`` opens a dip and the lowest bin of
    that dip is returned. Frames without such a value get -1.

    A periodic signal has CMNDF minima at every multiple of its period, so
    the plain :func:`yingram_argmin` can land on a subharmonic; this rule
    prefers the shortest period, as YIN does.
    """
    out = np.full(yg.matrix.shape[0], -1, dtype=np.int64)
    for i, row in enumerate(yg.matrix):
        rev = row[::-1]
        below = np.flatnonzero(rev < threshold)
        if below.size == 0:
            continue
        j = int(below[0])
        while j + 1 < rev.size and rev[j + 1] < rev[j]:
            j += 1
        out[i] = row.size - 1 - j
    return out
