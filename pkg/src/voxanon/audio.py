"""Mono PCM audio buffers and 16-bit WAV input/output."""

from __future__ import annotations

import logging
import wave
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, FormatError

logger = logging.getLogger(__name__)

MIN_SAMPLE_RATE = 8000


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64).ravel()
        if x.size == 0:
            raise ContractError("audio buffer is empty")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate < MIN_SAMPLE_RATE:
            raise ContractError(
                f"sample rate must be an integer >= {MIN_SAMPLE_RATE} Hz, got {self.sample_rate}"
            )
        if not np.all(np.isfinite(x)):
            raise ContractError("audio contains non-finite samples")
        if np.any(np.abs(x) > 1.0):
            logger.warning("clipping %d samples outside [-1, 1]", int(np.sum(np.abs(x) > 1.0)))
            x = np.clip(x, -1.0, 1.0)
        x.flags.writeable = False
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration(self):
        return self.samples.size / self.sample_rate


def read_wav(path):
    """Read a mono 16-bit PCM WAV file, scaling samples by 1/32768."""
    try:
        with wave.open(str(path), "rb") as w:
            channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
    except (wave.Error, EOFError) as exc:
        raise FormatError(f"not a PCM WAV file ({exc})", path=path) from None
    if channels != 1:
        raise FormatError(f"expected mono audio, found {channels} channels", path=path)
    if width != 2:
        raise FormatError(f"expected 16-bit PCM, found {8 * width}-bit samples", path=path)
    if rate < MIN_SAMPLE_RATE:
        raise FormatError(f"sample rate {rate} Hz is below {MIN_SAMPLE_RATE} Hz", path=path)
    pcm = np.frombuffer(raw, dtype="<i2")
    if pcm.size == 0:
        raise FormatError("WAV file contains no samples", path=path)
    return AudioBuffer(pcm.astype(np.float64) / 32768.0, rate)


def write_wav(path, audio):
    pcm = np.clip(np.round(audio.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(audio.sample_rate)
        w.writeframes(pcm.tobytes())
