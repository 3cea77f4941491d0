"""Command-line interface.

Exit status: 0 on success, 2 for unreadable or malformed input files,
3 when inputs parse but violate a documented precondition.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

from . import formats
from .anonymizer import anonymized_embedding, build_lut
from .audio import read_wav
from .config import RunConfig
from .errors import ContractError, DegenerateResultWarning, FormatError
from .metrics import (
    ScoreSet,
    corpus_pitch_correlation,
    corpus_wer,
    diagonal_dominance,
    eer_result,
    gain_of_voice_distinctiveness,
    operating_points,
    similarity_matrix,
    weighted_average,
)
from .pitch import yin_f0, yingram
from .simulator import EmbeddingCorpus, format_report, run_experiment

logger = logging.getLogger("voxanon")

EXIT_FORMAT = 2
EXIT_CONTRACT = 3


def _common(parser):
    g = parser.add_argument_group("global options")
    g.add_argument("--config", type=Path, default=argparse.SUPPRESS, help="key = value configuration file")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed for every random draw")
    g.add_argument("--output", type=Path, default=argparse.SUPPRESS, help="write result here instead of stdout")
    g.add_argument("--precision", type=int, default=argparse.SUPPRESS, help="decimals in printed numbers (default 2)")
    g.add_argument("-q", "--quiet", action="store_true", default=argparse.SUPPRESS)
    return parser


def _leaf(sub, name, help_):
    return _common(sub.add_parser(name, help=help_, description=help_))


def build_parser():
    parser = _common(argparse.ArgumentParser(prog="voxanon", description=__doc__.splitlines()[0]))
    cmds = parser.add_subparsers(dest="command", required=True)

    lut = cmds.add_parser("lut", help="speaker look-up tables").add_subparsers(dest="action", required=True)
    p = _leaf(lut, "build", "build a LUT from a speaker list")
    p.add_argument("--speakers", type=Path, required=True, help="one speaker id per line")
    p.add_argument("--dim", type=int)
    p.set_defaults(func=cmd_lut_build)

    p = _leaf(cmds, "anonymize", "anonymized embeddings for listed speakers")
    p.add_argument("--lut", type=Path, required=True)
    p.add_argument("--speakers", type=Path, required=True, help="lines '<speaker_id> [<utt_id>]'")
    p.add_argument("--k", type=int)
    p.add_argument("--w-pseudo", type=float)
    p.add_argument("--w-avg", type=float)
    p.add_argument("--mode", choices=["weighted-concat", "weighted-sum"])
    p.set_defaults(func=cmd_anonymize)

    pitch = cmds.add_parser("pitch", help="F0 tracking").add_subparsers(dest="action", required=True)
    p = _leaf(pitch, "extract", "YIN pitch track(s) from WAV file(s)")
    p.add_argument("wavs", type=Path, nargs="+")
    p.add_argument("--output-dir", type=Path, help="write <stem>.f0 per input")
    _pitch_flags(p)
    p.set_defaults(func=cmd_pitch_extract)

    p = _leaf(cmds, "yingram", "Yingram matrix from a WAV file")
    p.add_argument("wav", type=Path)
    p.add_argument("--bins-per-semitone", type=int)
    p.add_argument("--hop-s", type=float)
    p.set_defaults(func=cmd_yingram)

    metric = cmds.add_parser("metric", help="evaluation metrics").add_subparsers(dest="action", required=True)
    p = _leaf(metric, "eer", "equal error rate from scores and trial labels")
    p.add_argument("--scores", type=Path, required=True)
    p.add_argument("--trials", type=Path, required=True)
    p.add_argument("--operating-points", type=Path, help="dump 'threshold far frr' lines here")
    p.set_defaults(func=cmd_eer)

    p = _leaf(metric, "wer", "word error rate of hypothesis transcripts")
    p.add_argument("--ref", type=Path, required=True)
    p.add_argument("--hyp", type=Path, required=True)
    p.set_defaults(func=cmd_wer)

    p = _leaf(metric, "rho-f0", "pitch correlation between two directories of pitch tracks")
    p.add_argument("--original", type=Path, required=True)
    p.add_argument("--anonymized", type=Path, required=True)
    p.set_defaults(func=cmd_rho_f0)

    p = _leaf(metric, "gvd", "gain of voice distinctiveness between two embedding corpora")
    p.add_argument("--original", type=Path, required=True)
    p.add_argument("--anonymized", type=Path, required=True)
    p.set_defaults(func=cmd_gvd)

    p = _leaf(metric, "weighted-avg", "weighted average of per-subset results")
    p.add_argument("--results", type=Path, required=True)
    p.add_argument("--weights", type=Path, help="'<dataset> <gender> <weight>' lines")
    p.set_defaults(func=cmd_weighted_avg)

    p = _leaf(cmds, "simulate", "run the synthetic-speaker experiment")
    p.add_argument("--n-speakers", type=int)
    p.add_argument("--utts-per-speaker", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--within-speaker-noise", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--mode", choices=["weighted-concat", "weighted-sum"])
    p.set_defaults(func=cmd_simulate)
    return parser


def _pitch_flags(p):
    p.add_argument("--f-min", type=float)
    p.add_argument("--f-max", type=float)
    p.add_argument("--threshold", type=float)
    p.add_argument("--hop-s", type=float)


# -- helpers -----------------------------------------------------------------

def _read(path):
    try:
        return formats.read_text(path)
    except OSError as exc:
        raise FormatError(f"cannot read file ({exc.strerror})", path) from None


def _emit(args, text):
    out = getattr(args, "output", None)
    if out is None:
        sys.stdout.write(text)
    else:
        formats.write_atomic(out, text)


def _num(args, value):
    return f"{value:.{_precision(args)}f}"


def _precision(args):
    return getattr(args, "precision", 2)


def _resolve(args, **overrides):
    file_values = {}
    path = getattr(args, "config", None)
    if path is not None:
        file_values = RunConfig.parse(_read(path), path)
    cfg = RunConfig.resolve(file_values, overrides)
    logger.info("resolved configuration:\n%s", cfg.dump().rstrip())
    return cfg


# -- subcommands -------------------------------------------------------------

def cmd_lut_build(args):
    cfg = _resolve(args, dim=args.dim)
    seed = getattr(args, "seed", cfg.seed)
    ids = [spk for spk, _ in formats.parse_speaker_list(_read(args.speakers), args.speakers)]
    _emit(args, formats.dump_lut(build_lut(ids, cfg.dim, seed)))


def cmd_anonymize(args):
    cfg = _resolve(args, k=args.k, w_pseudo=args.w_pseudo, w_avg=args.w_avg, mode=args.mode,
                   selection_seed=getattr(args, "seed", None))
    lut = formats.parse_lut(_read(args.lut), args.lut)
    cond = cfg.anonymization()
    entries = formats.parse_speaker_list(_read(args.speakers), args.speakers)
    cache = {}
    for spk, _ in entries:
        if spk not in cache:
            cache[spk] = anonymized_embedding(lut, spk, cond)
    corpus = EmbeddingCorpus([s for s, _ in entries], [u for _, u in entries],
                             [cache[s] for s, _ in entries])
    _emit(args, formats.dump_corpus(corpus))


def cmd_pitch_extract(args):
    cfg = _resolve(args, f_min=args.f_min, f_max=args.f_max, threshold=args.threshold, hop_s=args.hop_s)
    if len(args.wavs) > 1 and args.output_dir is None:
        raise ContractError("several WAV inputs need --output-dir")
    for wav in args.wavs:
        audio = _load_wav(wav)
        track = yin_f0(audio, cfg.f_min, cfg.f_max, cfg.threshold, cfg.hop_s, cfg.window)
        text = formats.dump_pitch_track(track)
        if args.output_dir is not None:
            args.output_dir.mkdir(parents=True, exist_ok=True)
            formats.write_atomic(args.output_dir / f"{wav.stem}.f0", text)
        else:
            _emit(args, text)


def _load_wav(path):
    try:
        return read_wav(path)
    except OSError as exc:
        raise FormatError(f"cannot read file ({exc.strerror})", path) from None


def cmd_yingram(args):
    cfg = _resolve(args, bins_per_semitone=args.bins_per_semitone, hop_s=args.hop_s)
    _emit(args, formats.dump_yingram(yingram(_load_wav(args.wav), cfg.yingram())))


def scores_for_trials(scores, trials):
    """Split scored trials into genuine and impostor lists, in trial order."""
    missing = [k for k in trials.keys() if k not in scores]
    if missing:
        raise ContractError(f"{len(missing)} trials have no score, e.g. {' '.join(missing[0])}")
    genuine = [scores[k] for k, t in zip(trials.keys(), trials.is_target) if t]
    impostor = [scores[k] for k, t in zip(trials.keys(), trials.is_target) if not t]
    if len(scores) > len(trials):
        logger.warning("ignoring %d scores without a trial label", len(scores) - len(trials))
    return ScoreSet(genuine, impostor)


def cmd_eer(args):
    _resolve(args)
    scores = formats.parse_scores(_read(args.scores), args.scores)
    trials = formats.parse_trials(_read(args.trials), args.trials)
    score_set = scores_for_trials(scores, trials)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateResultWarning)
        res = eer_result(score_set)
    lines = [f"eer {_num(args, 100 * res.eer)}", f"threshold {res.threshold!r}",
             f"n_target {score_set.genuine.size}", f"n_nontarget {score_set.impostor.size}"]
    if caught or res.degenerate:
        lines.append("degenerate 1")
    if args.operating_points is not None:
        th, far, frr = operating_points(score_set)
        formats.write_atomic(args.operating_points, "threshold far frr\n" + "".join(
            f"{t!r} {a!r} {r!r}\n" for t, a, r in zip(th.tolist(), far.tolist(), frr.tolist())))
    _emit(args, "\n".join(lines) + "\n")


def cmd_wer(args):
    _resolve(args)
    ref = formats.parse_transcripts(_read(args.ref), args.ref)
    hyp = formats.parse_transcripts(_read(args.hyp), args.hyp)
    a = corpus_wer(ref, hyp)
    _emit(args, f"wer {_num(args, 100 * a.wer)}\nsubstitutions {a.substitutions}\n"
                f"deletions {a.deletions}\ninsertions {a.insertions}\nref_words {a.ref_len}\n")


def _track_dir(path):
    if not path.is_dir():
        raise FormatError("not a directory", path)
    return {p.stem: p for p in sorted(path.iterdir()) if p.is_file() and not p.name.startswith(".")}


def cmd_rho_f0(args):
    cfg = _resolve(args)
    orig, anon = _track_dir(args.original), _track_dir(args.anonymized)
    missing = sorted(set(orig) ^ set(anon))
    if missing:
        raise ContractError(f"pitch-track directories differ; unmatched: {' '.join(missing)}")
    pairs = {u: (formats.parse_pitch_track(_read(orig[u]), orig[u]),
                 formats.parse_pitch_track(_read(anon[u]), anon[u])) for u in orig}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateResultWarning)
        res = corpus_pitch_correlation(pairs)
    lines = [f"rho {u} {_num(args, r)}" for u, r in res.per_utterance]
    lines += [f"undefined {u}" for u in res.excluded]
    lines += [f"mean_rho_f0 {_num(args, res.mean)}", f"rho_f0_pass {int(res.passes(cfg.rho_threshold))}"]
    if res.excluded:
        logger.warning("%d utterances excluded: fewer than two jointly voiced frames", len(res.excluded))
    _emit(args, "\n".join(lines) + "\n")


def cmd_gvd(args):
    cfg = _resolve(args)
    m_orig = similarity_matrix(formats.parse_corpus(_read(args.original), args.original))
    m_anon = similarity_matrix(formats.parse_corpus(_read(args.anonymized), args.anonymized))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateResultWarning)
        g = gain_of_voice_distinctiveness(m_orig, m_anon, cfg.gvd_epsilon)
    lines = [f"gvd_db {_num(args, g)}",
             f"d_diag_orig {diagonal_dominance(m_orig)!r}",
             f"d_diag_anon {diagonal_dominance(m_anon)!r}",
             f"degenerate {int(bool(caught))}"]
    _emit(args, "\n".join(lines) + "\n")


def cmd_weighted_avg(args):
    _resolve(args)
    weights = None
    if args.weights is not None:
        weights = formats.parse_subset_weights(_read(args.weights), args.weights)
    results = formats.parse_subset_results(_read(args.results), args.results, weights)
    _emit(args, f"weighted_average {_num(args, weighted_average(results))}\n")


def cmd_simulate(args):
    cfg = _resolve(args, n_speakers=args.n_speakers, utts_per_speaker=args.utts_per_speaker,
                   dim=args.dim, within_speaker_noise=args.within_speaker_noise, k=args.k,
                   mode=args.mode, seed=getattr(args, "seed", None))
    sim = cfg.simulation()
    conditions = [cfg.anonymization(w) for w in cfg.conditions]
    rows = run_experiment(sim, conditions)
    _emit(args, format_report(sim, rows, _precision(args), conditions))


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING if getattr(args, "quiet", False) else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logger.setLevel(level)
    if _precision(args) < 0:
        parser.error("--precision must be non-negative")
    try:
        args.func(args)
    except FormatError as exc:
        print(f"voxanon: input error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except ContractError as exc:
        print(f"voxanon: contract violated: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    return 0


if __name__ == "__main__":
    sys.exit(main())
