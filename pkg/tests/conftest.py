import numpy as np
import pytest

from voxanon.audio import AudioBuffer

SR = 16000


def sine(f0, seconds=1.0, sr=SR, amp=0.5):
    t = np.arange(int(seconds * sr)) / sr
    return AudioBuffer(amp * np.sin(2 * np.pi * f0 * t), sr)


def sawtooth(f0, seconds=1.0, sr=SR, amp=0.5):
    t = np.arange(int(seconds * sr)) / sr
    return AudioBuffer(amp * (2.0 * ((f0 * t) % 1.0) - 1.0), sr)


def interior(n_frames, window=1024, hop=200, n_samples=SR):
    """Frame indices whose window lies fully inside the signal."""
    half = window // 2
    return [i for i in range(n_frames) if i * hop - half >= 0 and i * hop + half <= n_samples]


@pytest.fixture
def rng():
    return np.random.default_rng(20221019)
