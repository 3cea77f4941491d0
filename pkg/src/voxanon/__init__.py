"""Pseudo-speaker embedding anonymization and VoicePrivacy-style metrics."""

from .anonymizer import (
    CHALLENGE_WEIGHTS,
    PSEUDO_ID,
    AnonymizationConfig,
    Mode,
    SpeakerLUT,
    anonymized_embedding,
    averaged_embedding,
    build_lut,
    challenge_conditions,
)
from .audio import AudioBuffer, read_wav, write_wav
from .errors import ContractError, DegenerateResultWarning, FormatError
from .metrics import (
    ScoreSet,
    SimilarityMatrix,
    SubsetResult,
    eer,
    gain_of_voice_distinctiveness,
    pitch_correlation,
    similarity_matrix,
    weighted_average,
    wer,
)
from .pitch import (
    PitchTrack,
    Yingram,
    YingramConfig,
    cmndf,
    difference_function,
    yin_f0,
    yingram,
    yingram_argmin,
    yingram_first_dip,
)
from .simulator import SimConfig, generate_corpus, run_experiment

__version__ = "0.1.0"
