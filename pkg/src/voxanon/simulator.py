"""Synthetic speakers standing in for encoder outputs, and the evaluation loop.

Speaker centres are random unit vectors; each utterance is its speaker's
centre plus isotropic Gaussian noise, renormalised. ``within_speaker_noise``
is the RMS length of that noise relative to the unit centre, so each
coordinate gets standard deviation ``within_speaker_noise / sqrt(dim)``.

The anonymized view replaces every speaker's centre with the direction of
its anonymized embedding and re-applies utterance noise at the same
relative level. Enrollment and test material are both anonymized (a
"lazy-informed" attacker); retraining the verifier on anonymized data is
not modelled.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .anonymizer import AnonymizationConfig, anonymized_embedding, build_lut
from .audio import AudioBuffer
from .errors import ContractError
from .metrics import ScoreSet, eer, gain_of_voice_distinctiveness, similarity_matrix
from .pitch import yin_f0

logger = logging.getLogger(__name__)

ATTACK_MODEL = "lazy-informed (enrollment and test utterances both anonymized)"
DEFAULT_LUT_SIZE = 1407


@dataclass(frozen=True, eq=False)
class EmbeddingCorpus:
    """Utterance embeddings with their speaker and utterance ids (row-aligned)."""

    speaker_ids: tuple
    utt_ids: tuple
    vectors: np.ndarray

    def __post_init__(self):
        spk = tuple(self.speaker_ids)
        utt = tuple(self.utt_ids)
        vec = np.array(self.vectors, dtype=np.float64)
        if vec.ndim != 2 or not (len(spk) == len(utt) == vec.shape[0]):
            raise ContractError("speaker ids, utterance ids and vectors must have matching lengths")
        if vec.shape[0] == 0 or vec.shape[1] == 0:
            raise ContractError("corpus is empty")
        if len(set(utt)) != len(utt):
            raise ContractError("utterance ids must be unique")
        if not np.all(np.isfinite(vec)):
            raise ContractError("corpus contains non-finite values")
        vec.flags.writeable = False
        object.__setattr__(self, "speaker_ids", spk)
        object.__setattr__(self, "utt_ids", utt)
        object.__setattr__(self, "vectors", vec)

    @classmethod
    def from_entries(cls, entries):
        entries = list(entries)
        return cls([e[0] for e in entries], [e[1] for e in entries],
                   np.vstack([np.asarray(e[2], dtype=np.float64) for e in entries]))

    @property
    def dim(self):
        return self.vectors.shape[1]

    def speakers(self):
        """Distinct speaker ids in order of first appearance."""
        return list(dict.fromkeys(self.speaker_ids))

    def entries(self):
        return zip(self.speaker_ids, self.utt_ids, self.vectors)

    def __len__(self):
        return len(self.utt_ids)

    def __eq__(self, other):
        if not isinstance(other, EmbeddingCorpus):
            return NotImplemented
        return (self.speaker_ids == other.speaker_ids and self.utt_ids == other.utt_ids
                and self.vectors.shape == other.vectors.shape
                and self.vectors.tobytes() == other.vectors.tobytes())

    __hash__ = None


@dataclass(frozen=True)
class TrialList:
    enroll_ids: tuple
    test_ids: tuple
    is_target: tuple

    def __post_init__(self):
        object.__setattr__(self, "enroll_ids", tuple(self.enroll_ids))
        object.__setattr__(self, "test_ids", tuple(self.test_ids))
        object.__setattr__(self, "is_target", tuple(bool(t) for t in self.is_target))
        if not (len(self.enroll_ids) == len(self.test_ids) == len(self.is_target)):
            raise ContractError("trial columns differ in length")

    def keys(self):
        return list(zip(self.enroll_ids, self.test_ids))

    def __len__(self):
        return len(self.enroll_ids)


@dataclass(frozen=True)
class SimConfig:
    n_speakers: int = 40
    utts_per_speaker: int = 10
    dim: int = 64
    within_speaker_noise: float = 0.3
    seed: int = 0
    lut_size: int = DEFAULT_LUT_SIZE
    lut_seed: int | None = None

    def __post_init__(self):
        for name in ("n_speakers", "utts_per_speaker", "dim", "lut_size"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ContractError(f"{name} must be a positive integer, got {v}")
        if self.utts_per_speaker < 2:
            raise ContractError("utts_per_speaker must be at least 2")
        if self.n_speakers < 2:
            raise ContractError("n_speakers must be at least 2")
        if not self.within_speaker_noise >= 0:
            raise ContractError(f"within_speaker_noise must be >= 0, got {self.within_speaker_noise}")
        if self.lut_size < self.n_speakers:
            raise ContractError(f"lut_size={self.lut_size} is smaller than n_speakers={self.n_speakers}")

    @property
    def effective_lut_seed(self):
        return self.seed if self.lut_seed is None else self.lut_seed


@dataclass(frozen=True)
class SimCorpus:
    original: EmbeddingCorpus
    anonymized: EmbeddingCorpus
    condition: AnonymizationConfig | None
    identities: dict = field(default_factory=dict, compare=False)


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def speaker_ids(n):
    return [f"spk{i:04d}" for i in range(n)]


def generate_corpus(cfg):
    """Original-view corpus; rows are grouped by speaker."""
    rng = np.random.default_rng(int(cfg.seed) % 2**64)
    centers = _unit(rng.standard_normal((cfg.n_speakers, cfg.dim)))
    noise = rng.standard_normal((cfg.n_speakers, cfg.utts_per_speaker, cfg.dim))
    vectors = centers[:, None, :] + (cfg.within_speaker_noise / math.sqrt(cfg.dim)) * noise
    vectors = _unit(vectors).reshape(-1, cfg.dim)
    spk, utt = [], []
    for s in speaker_ids(cfg.n_speakers):
        for u in range(cfg.utts_per_speaker):
            spk.append(s)
            utt.append(f"{s}-u{u:03d}")
    return EmbeddingCorpus(spk, utt, vectors)


def anonymize_corpus(corpus, lut, cfg, within_speaker_noise=0.0, seed=0):
    """Replace each speaker with its anonymized identity plus fresh utterance noise.

    All utterances of one speaker share one identity vector; per-utterance
    noise is drawn in corpus row order from ``seed``.
    """
    identities = {}
    for spk in corpus.speakers():
        if spk not in lut.real_ids:
            raise ContractError(f"corpus speaker {spk!r} is not a real speaker in the LUT")
        identities[spk] = anonymized_embedding(lut, spk, cfg)
    dim = cfg.output_dim(lut.dim)
    directions = {s: _unit(v) for s, v in identities.items()}
    base = np.vstack([directions[s] for s in corpus.speaker_ids])
    rng = np.random.default_rng(int(seed) % 2**64)
    noise = rng.standard_normal((len(corpus), dim)) * (within_speaker_noise / math.sqrt(dim))
    anon = EmbeddingCorpus(corpus.speaker_ids, corpus.utt_ids, _unit(base + noise))
    return SimCorpus(corpus, anon, cfg, identities)


def make_trials(corpus):
    """Every (enrollment speaker, test utterance) pair."""
    enroll, test, target = [], [], []
    for spk in corpus.speakers():
        for utt_spk, utt in zip(corpus.speaker_ids, corpus.utt_ids):
            enroll.append(spk)
            test.append(utt)
            target.append(utt_spk == spk)
    return TrialList(enroll, test, target)


def trial_scores(view, trials):
    """Cosine score per trial, in trial order.

    The enrollment model is the mean of the enrollment speaker's utterance
    vectors, leaving out the test utterance when it belongs to that speaker.
    """
    row = {u: i for i, u in enumerate(view.utt_ids)}
    spk_rows = {}
    for i, s in enumerate(view.speaker_ids):
        spk_rows.setdefault(s, []).append(i)
    missing = sorted({e for e in trials.enroll_ids if e not in spk_rows}
                     | {t for t in trials.test_ids if t not in row})
    if missing:
        raise ContractError(f"trial ids not found in corpus: {' '.join(missing[:10])}"
                            + (" ..." if len(missing) > 10 else ""))
    spk_names = list(spk_rows)
    spk_index = {s: i for i, s in enumerate(spk_names)}
    sums = np.vstack([view.vectors[spk_rows[s]].sum(axis=0) for s in spk_names])
    counts = np.array([len(spk_rows[s]) for s in spk_names], dtype=np.float64)

    e_idx = np.array([spk_index[e] for e in trials.enroll_ids])
    t_idx = np.array([row[t] for t in trials.test_ids])
    test_vec = view.vectors[t_idx]
    own = np.array([view.speaker_ids[t] == e for e, t in zip(trials.enroll_ids, t_idx)])
    model_sum = sums[e_idx] - np.where(own[:, None], test_vec, 0.0)
    model_cnt = counts[e_idx] - own
    if np.any(model_cnt == 0):
        bad = trials.enroll_ids[int(np.flatnonzero(model_cnt == 0)[0])]
        raise ContractError(f"speaker {bad!r} has no enrollment utterances besides the test utterance")
    model = model_sum / model_cnt[:, None]
    num = np.einsum("ij,ij->i", model, test_vec)
    den = np.linalg.norm(model, axis=1) * np.linalg.norm(test_vec, axis=1)
    if np.any(den == 0):
        raise ContractError("zero-length enrollment model or test vector")
    return num / den


def score_trials(view, trials):
    scores = trial_scores(view, trials)
    target = np.array(trials.is_target, dtype=bool)
    return ScoreSet(scores[target], scores[~target])


@dataclass(frozen=True)
class ConditionResult:
    name: str
    w_pseudo: float
    w_avg: float
    eer_orig: float
    eer_anon: float
    gvd_db: float


def build_sim_lut(sim):
    """LUT holding the corpus speakers followed by pool speakers up to ``lut_size``."""
    ids = speaker_ids(sim.n_speakers) + [f"pool{i:04d}" for i in range(sim.lut_size - sim.n_speakers)]
    return build_lut(ids, sim.dim, sim.effective_lut_seed)


def run_experiment(sim, conditions, lut=None):
    """EER of both views and G_VD for each condition.

    A ``None`` condition evaluates the original view against itself.
    Condition ``i`` draws its utterance noise from ``[seed, i]``.
    """
    original = generate_corpus(sim)
    trials = make_trials(original)
    eer_orig = eer(score_trials(original, trials))
    m_orig = similarity_matrix(original)
    lut = lut if lut is not None else build_sim_lut(sim)

    rows = []
    for i, cond in enumerate(conditions):
        if cond is None:
            view, name, wp, wa = original, "identity", 0.0, 1.0
        else:
            noise_seed = np.random.SeedSequence([int(sim.seed) % 2**64, i]).generate_state(1)[0]
            view = anonymize_corpus(original, lut, cond, sim.within_speaker_noise,
                                    int(noise_seed)).anonymized
            name, wp, wa = f"C{i + 1}", cond.w_pseudo, cond.w_avg
        rows.append(ConditionResult(
            name, wp, wa, eer_orig,
            eer(score_trials(view, trials)),
            gain_of_voice_distinctiveness(m_orig, similarity_matrix(view)),
        ))
        logger.info("%s: w_pseudo=%s eer_anon=%.4f gvd=%.2f dB", name, wp, rows[-1].eer_anon,
                    rows[-1].gvd_db)
    return rows


def format_report(sim, rows, precision=2, conditions=None):
    lines = [
        "# voxanon simulation report",
        f"# attack model: {ATTACK_MODEL}",
        f"# n_speakers {sim.n_speakers} utts_per_speaker {sim.utts_per_speaker} dim {sim.dim} "
        f"within_speaker_noise {sim.within_speaker_noise!r} seed {sim.seed} "
        f"lut_size {sim.lut_size} lut_seed {sim.effective_lut_seed}",
    ]
    if conditions:
        c = next((c for c in conditions if c is not None), None)
        if c is not None:
            lines.append(f"# k {c.k} mode {c.mode.value} selection_seed {c.selection_seed}")
    lines.append("condition w_pseudo w_avg eer_orig eer_anon gvd_db")
    p = precision
    for r in rows:
        lines.append(f"{r.name} {r.w_pseudo:.{p}f} {r.w_avg:.{p}f} {100 * r.eer_orig:.{p}f} "
                     f"{100 * r.eer_anon:.{p}f} {r.gvd_db:.{p}f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# pitch contour pairs
# ---------------------------------------------------------------------------

def _contour(rng, duration):
    """Semitone offset as a smooth function of time (seconds)."""
    amps = rng.uniform(1.0, 3.0, 3)
    freqs = rng.uniform(0.4, 2.5, 3)
    phases = rng.uniform(0, 2 * np.pi, 3)
    return lambda t: np.sum(amps[:, None] * np.sin(2 * np.pi * freqs[:, None] * t + phases[:, None]), axis=0)


def _synth(f0, voiced, sr):
    phase = 2 * np.pi * np.cumsum(np.where(voiced, f0, 0.0)) / sr
    x = sum(np.sin(h * phase) / h for h in range(1, 6))
    return 0.4 * np.where(voiced, x, 0.0) / 1.5


def simulate_pitch_pairs(n_utts=8, seed=0, sample_rate=16000, duration_s=1.2,
                         jitter_semitones=0.5, stretch=0.05):
    """``{utt_id: (original_track, anonymized_track)}`` measured by :func:`yin_f0`.

    The original voice follows a smooth random intonation contour around a
    speaker base F0 with one silent gap. The anonymized voice keeps the
    contour shape, moves it to another base F0, adds slowly varying
    jitter, and is time-stretched by up to ``stretch``, so the two tracks
    differ in length.
    """
    rng = np.random.default_rng(int(seed) % 2**64)
    pairs = {}
    for u in range(n_utts):
        base = rng.uniform(90.0, 240.0)
        target = rng.uniform(100.0, 220.0)
        contour = _contour(rng, duration_s)
        gap_start = rng.uniform(0.3, 0.7) * duration_s
        gap_len = rng.uniform(0.08, 0.15)
        factor = 1.0 + rng.uniform(-stretch, stretch)
        jitter = _contour(rng, duration_s)

        t = np.arange(int(duration_s * sample_rate)) / sample_rate
        voiced = (t < gap_start) | (t >= gap_start + gap_len)
        f0 = base * 2.0 ** (contour(t) / 12.0)

        t2 = np.arange(int(duration_s * factor * sample_rate)) / sample_rate
        src = t2 / factor
        voiced2 = (src < gap_start) | (src >= gap_start + gap_len)
        f0_2 = target * 2.0 ** ((contour(src) + jitter_semitones / 3.0 * jitter(src)) / 12.0)

        orig = yin_f0(AudioBuffer(_synth(f0, voiced, sample_rate), sample_rate))
        anon = yin_f0(AudioBuffer(_synth(f0_2, voiced2, sample_rate), sample_rate))
        pairs[f"utt{u:03d}"] = (orig, anon)
    return pairs
