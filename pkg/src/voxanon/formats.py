"""Line-oriented text formats.

Every writer returns a ``str`` (UTF-8, LF line endings, whitespace-delimited)
and every reader takes the text plus an optional ``path`` used in
``file:line`` diagnostics. Floats are written with ``repr`` so a parsed value
re-serializes to the same bytes.
"""

from __future__ import annotations

import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .anonymizer import PSEUDO_ID, SpeakerLUT
from .errors import ContractError, FormatError
from .metrics import SubsetResult
from .pitch import PitchTrack, Yingram
from .simulator import EmbeddingCorpus, TrialList


def _f(x):
    return repr(float(x))


def _lines(text):
    """Yield ``(lineno, fields)`` for non-blank, non-comment lines."""
    for lineno, line in enumerate(text.split("\n"), start=1):
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            yield lineno, stripped.split()


def _float(tok, path, lineno, what="value"):
    try:
        v = float(tok)
    except ValueError:
        raise FormatError(f"{what} {tok!r} is not a number", path, lineno) from None
    if not math.isfinite(v):
        raise FormatError(f"{what} {tok!r} is not finite", path, lineno)
    return v


def _int(tok, path, lineno, what="value"):
    try:
        return int(tok)
    except ValueError:
        raise FormatError(f"{what} {tok!r} is not an integer", path, lineno) from None


def _header(lines, path, keys):
    """Parse ``key value key value ...`` from the first line."""
    try:
        lineno, fields = next(lines)
    except StopIteration:
        raise FormatError("file is empty; expected a header line", path, 1) from None
    if len(fields) != 2 * len(keys) or fields[0::2] != list(keys):
        expected = " ".join(f"{k} <{k}>" for k in keys)
        raise FormatError(f"bad header, expected '{expected}'", path, lineno)
    return lineno, fields[1::2]


def read_text(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"not UTF-8 text ({exc.reason})", path) from None


def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temporary file and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- speaker LUT -------------------------------------------------------------

def dump_lut(lut):
    out = [f"dim {lut.dim} seed {lut.init_seed}"]
    for sid, row in zip(lut.ids, lut.table):
        out.append(" ".join([sid] + [_f(v) for v in row]))
    return "\n".join(out) + "\n"


def parse_lut(text, path=None):
    lines = _lines(text)
    hline, (dim_tok, seed_tok) = _header(lines, path, ("dim", "seed"))
    dim = _int(dim_tok, path, hline, "dim")
    seed = _int(seed_tok, path, hline, "seed")
    if dim <= 0:
        raise FormatError(f"dim must be positive, got {dim}", path, hline)
    ids, rows, seen = [], [], {}
    for lineno, fields in lines:
        if len(fields) != dim + 1:
            raise FormatError(f"expected speaker id and {dim} values, found {len(fields)} fields",
                              path, lineno)
        sid = fields[0]
        if sid in seen:
            raise FormatError(f"duplicate speaker id {sid!r} (first on line {seen[sid]})", path, lineno)
        seen[sid] = lineno
        ids.append(sid)
        rows.append([_float(t, path, lineno) for t in fields[1:]])
    if PSEUDO_ID not in seen:
        raise FormatError(f"LUT has no pseudo-speaker row {PSEUDO_ID!r}", path)
    if ids[-1] != PSEUDO_ID:
        raise FormatError("pseudo-speaker row must be last", path, seen[PSEUDO_ID])
    if len(ids) < 2:
        raise FormatError("LUT has no real speakers", path)
    return SpeakerLUT(dim=dim, ids=tuple(ids), table=np.array(rows), init_seed=seed)


# -- embedding corpora ---------------------------------------------------------

def dump_corpus(corpus):
    out = [f"dim {corpus.dim}"]
    for spk, utt, vec in corpus.entries():
        out.append(" ".join([spk, utt] + [_f(v) for v in vec]))
    return "\n".join(out) + "\n"


def parse_corpus(text, path=None):
    lines = _lines(text)
    hline, (dim_tok,) = _header(lines, path, ("dim",))
    dim = _int(dim_tok, path, hline, "dim")
    if dim <= 0:
        raise FormatError(f"dim must be positive, got {dim}", path, hline)
    spks, utts, rows, seen = [], [], [], {}
    for lineno, fields in lines:
        if len(fields) != dim + 2:
            raise FormatError(f"expected speaker id, utterance id and {dim} values, "
                              f"found {len(fields)} fields", path, lineno)
        if fields[1] in seen:
            raise FormatError(f"duplicate utterance id {fields[1]!r} (first on line {seen[fields[1]]})",
                              path, lineno)
        seen[fields[1]] = lineno
        spks.append(fields[0])
        utts.append(fields[1])
        rows.append([_float(t, path, lineno) for t in fields[2:]])
    if not rows:
        raise FormatError("corpus has no embeddings", path)
    return EmbeddingCorpus(spks, utts, np.array(rows))


# -- pitch tracks and Yingrams -------------------------------------------------

def dump_pitch_track(track):
    out = [f"hop_s {_f(track.hop_s)}"]
    for t, f0, v in zip(track.times, track.f0, track.voiced):
        out.append(f"{_f(t)} {_f(f0)} {int(v)}")
    return "\n".join(out) + "\n"


def parse_pitch_track(text, path=None):
    lines = _lines(text)
    hline, (hop_tok,) = _header(lines, path, ("hop_s",))
    hop = _float(hop_tok, path, hline, "hop_s")
    if hop <= 0:
        raise FormatError(f"hop_s must be positive, got {hop}", path, hline)
    f0s, voiced = [], []
    for lineno, fields in lines:
        if len(fields) != 3:
            raise FormatError(f"expected '<t_s> <f0_hz> <voiced>', found {len(fields)} fields", path, lineno)
        t = _float(fields[0], path, lineno, "time")
        expected = len(f0s) * hop
        if abs(t - expected) > 1e-6 * max(1.0, expected):
            raise FormatError(f"frame time {t} does not match frame {len(f0s)} at hop {hop}", path, lineno)
        f0 = _float(fields[1], path, lineno, "f0")
        if fields[2] not in ("0", "1"):
            raise FormatError(f"voicing flag must be 0 or 1, got {fields[2]!r}", path, lineno)
        v = fields[2] == "1"
        if f0 < 0 or (v and f0 == 0) or (not v and f0 != 0):
            raise FormatError(f"f0 {f0} inconsistent with voicing flag {fields[2]}", path, lineno)
        f0s.append(f0)
        voiced.append(v)
    return PitchTrack(hop, np.array(f0s), np.array(voiced, dtype=bool))


def dump_yingram(yg):
    out = [f"bins {yg.matrix.shape[1]} bins_per_semitone {yg.bins_per_semitone} "
           f"fmin {yg.f_min_hz:.2f} fmax {yg.f_max_hz:.2f}"]
    for row in yg.matrix:
        out.append(" ".join(_f(v) for v in row))
    return "\n".join(out) + "\n"


def parse_yingram(text, path=None, window=1024):
    lines = _lines(text)
    hline, (bins_tok, bps_tok, fmin_tok, fmax_tok) = _header(
        lines, path, ("bins", "bins_per_semitone", "fmin", "fmax"))
    bins = _int(bins_tok, path, hline, "bins")
    bps = _int(bps_tok, path, hline, "bins_per_semitone")
    fmin = _float(fmin_tok, path, hline, "fmin")
    fmax = _float(fmax_tok, path, hline, "fmax")
    rows = []
    for lineno, fields in lines:
        if len(fields) != bins:
            raise FormatError(f"expected {bins} values, found {len(fields)}", path, lineno)
        rows.append([_float(t, path, lineno) for t in fields])
    matrix = np.array(rows, dtype=np.float64).reshape(len(rows), bins)
    try:
        return Yingram(bps, fmin, fmax, window, matrix)
    except ContractError as exc:
        raise FormatError(str(exc), path, hline) from None


# -- scores, trials, subset results, transcripts -------------------------------

def dump_scores(keys, scores):
    return "".join(f"{e} {t} {_f(s)}\n" for (e, t), s in zip(keys, scores))


def parse_scores(text, path=None):
    """``{(enroll_id, test_utt_id): score}`` in file order."""
    out, where = {}, {}
    for lineno, fields in _lines(text):
        if len(fields) != 3:
            raise FormatError(f"expected '<enroll_id> <test_utt_id> <score>', found {len(fields)} fields",
                              path, lineno)
        key = (fields[0], fields[1])
        if key in out:
            raise FormatError(f"duplicate trial {key} (first on line {where[key]})", path, lineno)
        out[key] = _float(fields[2], path, lineno, "score")
        where[key] = lineno
    return out


def dump_trials(trials):
    return "".join(f"{e} {t} {'target' if y else 'nontarget'}\n"
                   for e, t, y in zip(trials.enroll_ids, trials.test_ids, trials.is_target))


def parse_trials(text, path=None):
    enroll, test, target, where = [], [], [], {}
    for lineno, fields in _lines(text):
        if len(fields) != 3 or fields[2] not in ("target", "nontarget"):
            raise FormatError("expected '<enroll_id> <test_utt_id> target|nontarget'", path, lineno)
        key = (fields[0], fields[1])
        if key in where:
            raise FormatError(f"duplicate trial {key} (first on line {where[key]})", path, lineno)
        where[key] = lineno
        enroll.append(fields[0])
        test.append(fields[1])
        target.append(fields[2] == "target")
    if not enroll:
        raise FormatError("trial file is empty", path)
    return TrialList(enroll, test, target)


def parse_subset_weights(text, path=None):
    """``{(dataset, gender): weight}`` from ``<dataset> <gender> <weight>`` lines."""
    out = {}
    for lineno, fields in _lines(text):
        if len(fields) != 3:
            raise FormatError("expected '<dataset> <gender> <weight>'", path, lineno)
        key = (fields[0], fields[1])
        if key in out:
            raise FormatError(f"duplicate subset {key}", path, lineno)
        out[key] = _float(fields[2], path, lineno, "weight")
    return out


def parse_subset_results(text, path=None, weights=None):
    """Subset results from ``<dataset> <gender> <weight> <value>`` lines.

    With ``weights`` given, lines are ``<dataset> <gender> <value>`` and the
    weight is looked up by ``(dataset, gender)``.
    """
    out = []
    ncols = 3 if weights is not None else 4
    for lineno, fields in _lines(text):
        if len(fields) != ncols:
            layout = "<dataset> <gender> <value>" if weights is not None else \
                "<dataset> <gender> <weight> <value>"
            raise FormatError(f"expected '{layout}'", path, lineno)
        if weights is not None:
            key = (fields[0], fields[1])
            if key not in weights:
                raise FormatError(f"no weight for subset {key}", path, lineno)
            w = weights[key]
        else:
            w = _float(fields[2], path, lineno, "weight")
        value = _float(fields[-1], path, lineno, "value")
        if not 0.0 <= w <= 1.0:
            raise FormatError(f"weight {w} outside [0, 1]", path, lineno)
        out.append(SubsetResult(fields[0], fields[1], w, value))
    if not out:
        raise FormatError("no subset results", path)
    return out


def parse_transcripts(text, path=None):
    """``{utt_id: [tokens]}`` from ``<utt_id> <token> ...`` lines (blank lines skipped)."""
    out, where = {}, {}
    for lineno, line in enumerate(text.split("\n"), start=1):
        fields = line.split()
        if not fields:
            continue
        if fields[0] in out:
            raise FormatError(f"duplicate utterance {fields[0]!r} (first on line {where[fields[0]]})",
                              path, lineno)
        out[fields[0]] = fields[1:]
        where[fields[0]] = lineno
    return out


def parse_speaker_list(text, path=None):
    """``[(speaker_id, utt_id)]`` from lines holding ``<speaker_id> [<utt_id>]``.

    A missing utterance id defaults to the speaker id.
    """
    out = []
    for lineno, fields in _lines(text):
        if len(fields) not in (1, 2):
            raise FormatError("expected '<speaker_id> [<utt_id>]'", path, lineno)
        out.append((fields[0], fields[-1]))
    if not out:
        raise FormatError("speaker list is empty", path)
    return out
