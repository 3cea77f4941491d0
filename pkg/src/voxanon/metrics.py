"""Privacy and utility metrics: EER, WER, pitch correlation and G_VD."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ContractError, DegenerateResultWarning

logger = logging.getLogger(__name__)

RHO_F0_THRESHOLD = 0.3
GVD_EPSILON = 1e-12


# ---------------------------------------------------------------------------
# EER
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScoreSet:
    genuine: np.ndarray
    impostor: np.ndarray

    def __post_init__(self):
        for name in ("genuine", "impostor"):
            arr = np.array(getattr(self, name), dtype=np.float64).ravel()
            if arr.size == 0:
                raise ContractError(f"{name} score list is empty")
            if not np.all(np.isfinite(arr)):
                raise ContractError(f"{name} scores contain non-finite values")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def transformed(self, fn):
        return ScoreSet(fn(self.genuine), fn(self.impostor))


@dataclass(frozen=True)
class EERResult:
    eer: float
    threshold: float
    degenerate: bool = False


def operating_points(scores):
    """FAR/FRR at every unique score threshold, then at +inf.

    A trial is accepted when ``score >= threshold``. Returns
    ``(thresholds, far, frr)`` with thresholds ascending.
    """
    gen = np.sort(scores.genuine)
    imp = np.sort(scores.impostor)
    thresholds = np.unique(np.concatenate([gen, imp]))
    frr = np.searchsorted(gen, thresholds, side="left") / gen.size
    far = (imp.size - np.searchsorted(imp, thresholds, side="left")) / imp.size
    return (np.append(thresholds, np.inf), np.append(far, 0.0), np.append(frr, 1.0))


def eer_result(scores):
    """EER with the threshold where FAR and FRR cross.

    FAR - FRR is non-increasing in the threshold. The crossing is located
    between the last operating point with FAR > FRR and the next one, and
    the rate is interpolated linearly between them.
    """
    thresholds, far, frr = operating_points(scores)
    degenerate = thresholds.size == 2
    if degenerate:
        warnings.warn("all scores are identical; EER is 0.5 by convention",
                      DegenerateResultWarning, stacklevel=3)
        return EERResult(0.5, float(thresholds[0]), True)
    diff = far - frr
    exact = np.flatnonzero(diff == 0)
    if exact.size:
        i = exact[0]
        return EERResult(float(far[i]), float(thresholds[i]))
    i = int(np.flatnonzero(diff > 0)[-1])
    t = diff[i] / (diff[i] - diff[i + 1])
    rate = far[i] + t * (far[i + 1] - far[i])
    hi = thresholds[i + 1] if np.isfinite(thresholds[i + 1]) else thresholds[i]
    return EERResult(float(rate), float(thresholds[i] + t * (hi - thresholds[i])))


def eer(scores):
    """Equal error rate as a fraction; see :func:`eer_result`."""
    return eer_result(scores).eer


# ---------------------------------------------------------------------------
# weighted averages over evaluation subsets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubsetResult:
    dataset: str
    gender: str
    weight: float
    value: float

    def __post_init__(self):
        if not 0.0 <= self.weight <= 1.0:
            raise ContractError(f"weight for {self.dataset}/{self.gender} must lie in [0, 1], got {self.weight}")


def weighted_average(results):
    results = list(results)
    if not results:
        raise ContractError("no subset results to average")
    total = math.fsum(r.weight for r in results)
    if abs(total - 1.0) > 1e-9:
        raise ContractError(f"subset weights must sum to 1, got {total!r}")
    # exact rational sum, rounded once
    return float(sum(Fraction(r.weight) * Fraction(r.value) for r in results))


# ---------------------------------------------------------------------------
# WER
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Alignment:
    substitutions: int
    deletions: int
    insertions: int
    ref_len: int

    @property
    def errors(self):
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self):
        return self.errors / self.ref_len


def align(reference, hypothesis):
    """Minimum-edit alignment with unit costs.

    On equal cost the backtrace prefers match/substitution, then deletion,
    then insertion, so a substitution is never split into a delete/insert pair.
    """
    ref = list(reference)
    hyp = list(hypothesis)
    n, m = len(ref), len(hyp)
    cost = np.zeros((n + 1, m + 1), dtype=np.int64)
    cost[:, 0] = np.arange(n + 1)
    cost[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        row, prev = cost[i], cost[i - 1]
        r = ref[i - 1]
        for j in range(1, m + 1):
            sub = prev[j - 1] + (r != hyp[j - 1])
            row[j] = min(sub, prev[j] + 1, row[j - 1] + 1)

    s = d = ins = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and cost[i, j] == cost[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            s += ref[i - 1] != hyp[j - 1]
            i, j = i - 1, j - 1
        elif i > 0 and cost[i, j] == cost[i - 1, j] + 1:
            d += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return Alignment(int(s), d, ins, n)


def wer(reference, hypothesis):
    if len(reference) == 0:
        raise ContractError("reference transcript is empty")
    return align(reference, hypothesis).wer


def corpus_wer(references, hypotheses):
    """Pooled WER over utterances keyed by id; a missing hypothesis counts as empty."""
    s = d = ins = n = 0
    for utt, ref in references.items():
        if not ref:
            raise ContractError(f"reference transcript for {utt!r} is empty")
        a = align(ref, hypotheses.get(utt, []))
        s, d, ins, n = s + a.substitutions, d + a.deletions, ins + a.insertions, n + a.ref_len
    if n == 0:
        raise ContractError("no reference transcripts")
    extra = sorted(set(hypotheses) - set(references))
    if extra:
        logger.warning("ignoring %d hypotheses without a reference (first: %s)", len(extra), extra[0])
    return Alignment(s, d, ins, n)


# ---------------------------------------------------------------------------
# pitch correlation
# ---------------------------------------------------------------------------

def pearson(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return math.nan
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def _resample_track(track, n_out):
    """Linear map of ``track`` onto ``n_out`` frames.

    A resampled frame is voiced only when both bracketing source frames are
    voiced; its F0 is interpolated between them.
    """
    n = len(track)
    if n == n_out:
        return track.f0.copy(), track.voiced.copy()
    pos = np.arange(n_out) * ((n - 1) / (n_out - 1)) if n_out > 1 else np.zeros(1)
    lo = np.clip(np.floor(pos).astype(int), 0, n - 1)
    hi = np.clip(lo + 1, 0, n - 1)
    frac = pos - lo
    exact = frac == 0
    voiced = track.voiced[lo] & (track.voiced[hi] | exact)
    f0 = np.where(exact, track.f0[lo], (1 - frac) * track.f0[lo] + frac * track.f0[hi])
    return np.where(voiced, f0, 0.0), voiced


def aligned_voiced_f0(original, anonymized):
    """F0 pairs over jointly voiced frames after mapping the shorter track onto the longer."""
    n = max(len(original), len(anonymized))
    f0a, va = _resample_track(original, n)
    f0b, vb = _resample_track(anonymized, n)
    joint = va & vb
    return f0a[joint], f0b[joint]


def pitch_correlation(original, anonymized):
    """Pearson correlation of F0 over jointly voiced frames.

    Returns NaN (with a :class:`DegenerateResultWarning`) when fewer than two
    joint voiced frames remain or either contour is flat.
    """
    if len(original) == 0 or len(anonymized) == 0:
        raise ContractError("pitch tracks must be non-empty")
    a, b = aligned_voiced_f0(original, anonymized)
    if a.size < 2:
        warnings.warn(f"only {a.size} jointly voiced frames; correlation undefined",
                      DegenerateResultWarning, stacklevel=2)
        return math.nan
    r = pearson(a, b)
    if math.isnan(r):
        warnings.warn("flat F0 contour; correlation undefined", DegenerateResultWarning, stacklevel=2)
    return r


@dataclass(frozen=True)
class PitchCorrelationResult:
    per_utterance: tuple
    mean: float
    excluded: tuple = ()

    def passes(self, threshold=RHO_F0_THRESHOLD):
        return self.mean > threshold


def corpus_pitch_correlation(pairs):
    """Per-utterance and mean correlation over ``{utt_id: (original, anonymized)}``.

    Utterances with an undefined correlation are excluded from the mean.
    """
    per, excluded = [], []
    for utt in sorted(pairs):
        orig, anon = pairs[utt]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateResultWarning)
            r = pitch_correlation(orig, anon)
        if math.isnan(r):
            excluded.append(utt)
        else:
            per.append((utt, r))
    if excluded:
        warnings.warn(f"{len(excluded)} utterances have undefined pitch correlation and are excluded",
                      DegenerateResultWarning, stacklevel=2)
    if not per:
        raise ContractError("no utterance has a defined pitch correlation")
    mean = math.fsum(r for _, r in per) / len(per)
    return PitchCorrelationResult(tuple(per), mean, tuple(excluded))


# ---------------------------------------------------------------------------
# voice distinctiveness
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    speaker_ids: tuple
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        ids = tuple(self.speaker_ids)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] != len(ids):
            raise ContractError(f"similarity matrix of shape {v.shape} does not match {len(ids)} speakers")
        if not np.all(np.isfinite(v)):
            raise ContractError("similarity matrix contains non-finite values")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "speaker_ids", ids)


def similarity_matrix(corpus):
    """Speaker-by-speaker mean cosine similarity.

    ``corpus`` is an :class:`~voxanon.simulator.EmbeddingCorpus` or any
    iterable of ``(speaker_id, utt_id, vector)``. The diagonal averages over
    pairs of distinct utterances of the same speaker.
    """
    if hasattr(corpus, "entries"):
        corpus = corpus.entries()
    groups = {}
    for spk, utt, vec in corpus:
        groups.setdefault(spk, []).append(np.asarray(vec, dtype=np.float64))
    speakers = sorted(groups)
    if len(speakers) < 2:
        raise ContractError("similarity matrix needs at least two speakers")
    for spk in speakers:
        if len(groups[spk]) < 2:
            raise ContractError(f"speaker {spk!r} has a single utterance; the diagonal is undefined")

    unit = []
    for spk in speakers:
        block = np.vstack(groups[spk])
        norms = np.linalg.norm(block, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ContractError(f"speaker {spk!r} has a zero embedding")
        unit.append(block / norms)

    n = len(speakers)
    out = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            gram = unit[i] @ unit[j].T
            if i == j:
                u = gram.shape[0]
                out[i, i] = (gram.sum() - np.trace(gram)) / (u * (u - 1))
            else:
                out[i, j] = out[j, i] = gram.mean()
    return SimilarityMatrix(tuple(speakers), out)


def diagonal_dominance(m):
    """``|mean(diagonal) - mean(off-diagonal)|``."""
    v = m.values if isinstance(m, SimilarityMatrix) else np.asarray(m, dtype=np.float64)
    n = v.shape[0]
    off = v[~np.eye(n, dtype=bool)]
    return abs(float(np.mean(np.diag(v))) - float(np.mean(off)))


def gain_of_voice_distinctiveness(m_orig, m_anon, eps=GVD_EPSILON):
    """G_VD in dB: ``10 log10(D(anon) / D(orig))`` with each D floored at ``eps``.

    Flooring happens when a matrix has no dominant diagonal; it is reported
    through a :class:`DegenerateResultWarning`.
    """
    if tuple(m_orig.speaker_ids) != tuple(m_anon.speaker_ids):
        raise ContractError("similarity matrices cover different speakers or orders")
    d_orig = diagonal_dominance(m_orig)
    d_anon = diagonal_dominance(m_anon)
    if d_orig < eps or d_anon < eps:
        warnings.warn("diagonal dominance floored at eps; G_VD is degenerate",
                      DegenerateResultWarning, stacklevel=2)
    # difference of logs, so swapping the arguments negates the result exactly
    return 10.0 * (math.log10(max(d_anon, eps)) - math.log10(max(d_orig, eps)))
