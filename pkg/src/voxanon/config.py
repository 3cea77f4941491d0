"""``key = value`` run configuration shared by all subcommands."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .anonymizer import CHALLENGE_WEIGHTS, AnonymizationConfig
from .errors import FormatError
from .pitch import YingramConfig
from .simulator import SimConfig


def _float_list(text):
    return tuple(float(tok) for tok in text.replace(",", " ").split())


@dataclass(frozen=True)
class RunConfig:
    # anonymization
    k: int = 10
    w_pseudo: float = 0.6
    w_avg: float = 0.4
    mode: str = "weighted-concat"
    selection_seed: int = 0
    # simulation
    n_speakers: int = 40
    utts_per_speaker: int = 10
    dim: int = 64
    within_speaker_noise: float = 0.3
    seed: int = 0
    lut_size: int = 1407
    lut_seed: int = -1
    conditions: tuple = tuple(wp for wp, _ in CHALLENGE_WEIGHTS)
    # pitch
    f_min: float = 40.0
    f_max: float = 800.0
    threshold: float = 0.15
    hop_s: float = 0.0125
    window: int = 1024
    bins_per_semitone: int = 1
    # metrics
    rho_threshold: float = 0.3
    gvd_epsilon: float = 1e-12

    @classmethod
    def keys(cls):
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def _convert(cls, key, raw):
        kind = {f.name: f.type for f in dataclasses.fields(cls)}[key]
        if key == "conditions":
            return _float_list(raw)
        return {"int": int, "float": float, "str": str}[kind](raw)

    @classmethod
    def parse(cls, text, path=None):
        """Values from ``key = value`` lines; ``#`` starts a comment."""
        values = {}
        for lineno, line in enumerate(text.split("\n"), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, raw = line.partition("=")
            key, raw = key.strip(), raw.strip()
            if not sep or not key:
                raise FormatError(f"expected 'key = value', got {line!r}", path, lineno)
            if key not in cls.keys():
                raise FormatError(f"unknown configuration key {key!r}", path, lineno)
            if key in values:
                raise FormatError(f"key {key!r} set twice", path, lineno)
            try:
                values[key] = cls._convert(key, raw)
            except ValueError:
                raise FormatError(f"bad value {raw!r} for {key!r}", path, lineno) from None
        return values

    @classmethod
    def resolve(cls, file_values=None, overrides=None):
        """Defaults, then file values, then command-line overrides.

        When only one of ``w_pseudo``/``w_avg`` is given, the other is set to
        its complement.
        """
        merged = dict(file_values or {})
        merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
        if "w_pseudo" in merged and "w_avg" not in merged:
            merged["w_avg"] = 1.0 - merged["w_pseudo"]
        elif "w_avg" in merged and "w_pseudo" not in merged:
            merged["w_pseudo"] = 1.0 - merged["w_avg"]
        return cls(**merged)

    def dump(self):
        out = []
        for key in self.keys():
            v = getattr(self, key)
            if key == "conditions":
                v = ", ".join(repr(x) for x in v)
            out.append(f"{key} = {v}")
        return "\n".join(out) + "\n"

    def anonymization(self, w_pseudo=None):
        if w_pseudo is None:
            return AnonymizationConfig(self.k, self.w_pseudo, self.w_avg, self.mode, self.selection_seed)
        return AnonymizationConfig.for_weight(w_pseudo, k=self.k, mode=self.mode,
                                              selection_seed=self.selection_seed)

    def simulation(self):
        return SimConfig(self.n_speakers, self.utts_per_speaker, self.dim,
                         self.within_speaker_noise, self.seed, self.lut_size,
                         None if self.lut_seed < 0 else self.lut_seed)

    def yingram(self):
        return YingramConfig(self.bins_per_semitone, window=self.window, hop_s=self.hop_s)
