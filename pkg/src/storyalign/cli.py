"""Command-line interface.

Every data output is a JSON document ``{"provenance": ..., "records": [...]}``
(or an aligned text table with ``--format table``). Provenance echoes the
configuration and the SHA-256 of each input, so a run can be replayed; no
timestamps are written, so reruns are byte-identical.

Errors go to stderr as one JSON line ``{"error": code, "message": ...}``.
Exit status is 0 on success, 2 for usage errors and missing inputs, 1 for
invalid input content.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .align import BACKEND, DropCosts, drop_dtw_align, dtw_align, percentile_drop_costs, to_cost
from .core import LANGUAGE_NAMES, LANGUAGES, Alignment, ValidationError, ground_alignment
from .dataio import (
    dedup_split,
    group_by_video,
    parse_annotations,
    parse_clips,
    parse_manifests,
    parse_similarity_csv,
    parse_subtitles,
    read_feature_matrix,
    weak_supervise,
)
from .metrics import EvalResult, aggregate_report, agreement_iou, evaluate_video
from .sim import (
    DEFAULT_TEMPERATURE,
    ContrastiveBatch,
    cosine_similarity,
    infonce_grad_check,
    infonce_loss,
    sample_negatives,
)

EXIT_VALIDATION = 1
EXIT_USAGE = 2


class CliError(Exception):
    def __init__(self, code: str, message: str, status: int = EXIT_VALIDATION):
        super().__init__(message)
        self.code = code
        self.status = status


# -- helpers ---------------------------------------------------------------


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _input(path_str: str) -> Path:
    path = Path(path_str)
    if not path.is_file():
        raise CliError("input-not-found", f"input file not found: {path_str}", EXIT_USAGE)
    return path


def _provenance(args, inputs: Sequence[Path], **extra) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",) and v is not None}
    prov = {
        "tool": "storyalign",
        "version": __version__,
        "command": args.command,
        "config": config,
        "inputs": {str(p): _sha256(p) for p in inputs},
    }
    if getattr(args, "seed", None) is not None:
        prov["seed"] = args.seed
    prov.update(extra)
    return prov


def _json_number(x: float):
    return None if math.isinf(x) else x


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _emit_doc(args, provenance: dict, records: list, **extra) -> None:
    doc = {"provenance": provenance, "records": records}
    doc.update(extra)
    _emit(args, json.dumps(doc, indent=2, ensure_ascii=False, allow_nan=False) + "\n")


def _load_doc(path: Path) -> dict:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CliError("format-error", f"{path}: invalid JSON ({exc.msg}, line {exc.lineno})") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("records"), list):
        raise CliError("format-error", f"{path}: expected a document with a 'records' list")
    return doc


def _pct(x: float) -> str:
    return f"{100.0 * x:.1f}"


def _table(header: Sequence[str], rows: Sequence[Sequence[str]], comments: Sequence[str] = ()) -> str:
    widths = [max(len(str(r[k])) for r in [header, *rows]) for k in range(len(header))]
    lines = [f"# {c}" for c in comments]
    fmt = lambda row: "  ".join(str(v).ljust(w) if k == 0 else str(v).rjust(w) for k, (v, w) in enumerate(zip(row, widths)))
    lines.append(fmt(header))
    lines.append("  ".join("-" * w for w in widths))
    lines.extend(fmt(r) for r in rows)
    return "\n".join(lines) + "\n"


# -- alignment records -----------------------------------------------------


def alignment_to_record(a: Alignment, costs: DropCosts) -> dict:
    return {
        "video_id": a.video_id,
        "n_clips": a.n_clips,
        "n_sentences": a.n_sentences,
        "assignments": [[s, c] for s, c in a.assignments],
        "dropped_sentences": sorted(a.dropped_sentences),
        "dropped_clips": sorted(a.dropped_clips),
        "total_cost": a.total_cost,
        "drop_costs": {"video": _json_number(costs.drop_clip), "text": _json_number(costs.drop_sent)},
    }


def alignment_from_record(rec: dict) -> Alignment:
    try:
        return Alignment(
            tuple(tuple(p) for p in rec["assignments"]),
            frozenset(rec.get("dropped_sentences", ())),
            frozenset(rec.get("dropped_clips", ())),
            float(rec.get("total_cost", 0.0)),
            str(rec.get("video_id", "")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError("format-error", f"bad alignment record: {exc}") from None


# -- commands --------------------------------------------------------------


def _drop_costs(args, cost: np.ndarray) -> tuple[DropCosts, str]:
    fixed = args.drop_video is not None or args.drop_text is not None
    modes = [fixed, args.drop_percentile is not None, args.no_drops]
    if sum(modes) != 1:
        raise CliError(
            "usage-error",
            "choose exactly one drop-cost mode: --drop-video/--drop-text, --drop-percentile or --no-drops",
            EXIT_USAGE,
        )
    if args.no_drops:
        return DropCosts.disabled(), "none"
    if args.drop_percentile is not None:
        return percentile_drop_costs(cost, args.drop_percentile), "percentile"
    dv = math.inf if args.drop_video is None else args.drop_video
    dt = math.inf if args.drop_text is None else args.drop_text
    return DropCosts(dv, dt), "fixed"


def cmd_align(args) -> None:
    if args.sim:
        inputs = [_input(args.sim)]
        sim = parse_similarity_csv(inputs[0])
    elif args.clip_feats and args.sent_feats:
        inputs = [_input(args.clip_feats), _input(args.sent_feats)]
        sim = cosine_similarity(read_feature_matrix(inputs[0], "clip"), read_feature_matrix(inputs[1], "sentence"))
    else:
        raise CliError("usage-error", "align needs --sim or both --clip-feats and --sent-feats", EXIT_USAGE)
    video_id = args.video_id or inputs[0].stem
    cost = to_cost(sim)
    costs, mode = _drop_costs(args, cost)
    if mode == "none":
        a = dtw_align(sim, video_id)
    else:
        a = drop_dtw_align(sim, costs, video_id)
    rec = alignment_to_record(a, costs)
    prov = _provenance(args, inputs, drop_mode=mode, backend=BACKEND)
    if args.format == "table":
        rows = []
        for s, clips in enumerate(a.mapping()):
            rows.append([str(s), "dropped" if clips is None else " ".join(map(str, clips))])
        if a.dropped_clips:
            rows.append(["dropped clips", " ".join(map(str, sorted(a.dropped_clips)))])
        _emit(args, _table(["sentence", "clips"], rows, [f"video {video_id}", f"total_cost {a.total_cost!r}"]))
    else:
        _emit_doc(args, prov, [rec])


def _load_alignments(paths: Sequence[Path]) -> dict[str, Alignment]:
    out: dict[str, Alignment] = {}
    for p in paths:
        for rec in _load_doc(p)["records"]:
            a = alignment_from_record(rec)
            if a.video_id in out:
                raise CliError("validation-error", f"duplicate prediction for video {a.video_id!r}")
            out[a.video_id] = a
    return out


def _eval_records(args) -> tuple[list[Path], list[dict]]:
    pred_paths = [_input(p) for p in args.pred]
    gold_path, clip_path = _input(args.gold), _input(args.clips)
    preds = _load_alignments(pred_paths)
    gold = group_by_video(parse_annotations(gold_path))
    clips = group_by_video(parse_clips(clip_path))
    if not gold:
        raise CliError("validation-error", "gold annotation file is empty")
    if set(preds) != set(gold):
        raise CliError(
            "validation-error",
            f"video ids differ between predictions and gold: only in pred {sorted(set(preds) - set(gold))}, "
            f"only in gold {sorted(set(gold) - set(preds))}",
        )
    records = []
    for vid in sorted(preds):
        if vid not in clips:
            raise CliError("validation-error", f"no clip boundaries for video {vid!r}")
        a, g = preds[vid], gold[vid]
        if a.n_sentences != len(g):
            raise CliError("validation-error", f"video {vid!r}: prediction has {a.n_sentences} sentences, gold {len(g)}")
        res = evaluate_video(ground_alignment(a, clips[vid]), g, clips[vid])
        records.append({"video_id": vid, "lang": g[0].language, "method": args.method, **res.as_dict()})
    return pred_paths + [gold_path, clip_path], records


def cmd_eval(args) -> None:
    inputs, records = _eval_records(args)
    prov = _provenance(args, inputs)
    report = aggregate_report([(r["lang"], _result_of(r)) for r in records], pooled=args.pooled)
    summary = {
        "languages": {lang: report.language_means[lang].as_dict() for lang in report.languages()},
        "average": report.average.as_dict(),
        "pooled": report.pooled,
    }
    if args.format == "table":
        rows = [
            [r["video_id"], r["lang"], _pct(r["clip_accuracy"]), _pct(r["sentence_iou"]), _pct(r["f1"])] for r in records
        ]
        for lang in report.languages():
            m = report.language_means[lang]
            rows.append([f"mean[{lang}]", lang, _pct(m.clip_accuracy), _pct(m.sentence_iou), _pct(m.f1)])
        _emit(args, _table(["video", "lang", "Clip.", "Sent.", "F1"], rows, [f"method {args.method}"]))
    else:
        _emit_doc(args, prov, records, summary=summary)


def _result_of(rec: dict) -> EvalResult:
    try:
        ca, si = float(rec["clip_accuracy"]), float(rec["sentence_iou"])
        f = float(rec["f1"]) if "f1" in rec else None
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError("format-error", f"bad evaluation record: {exc}") from None
    return EvalResult(
        ca,
        si,
        f if f is not None else EvalResult.from_scores(ca, si).f1,
        float(rec.get("matched_duration", 0.0)),
        float(rec.get("total_duration", 0.0)),
        int(rec.get("sentence_count", 0)),
    )


def cmd_weaklabel(args) -> None:
    clip_path, sub_path = _input(args.clips), _input(args.subs)
    clips = group_by_video(parse_clips(clip_path))
    subs = group_by_video(parse_subtitles(sub_path))
    records = []
    for vid in sorted(clips):
        pairs = weak_supervise(clips[vid], subs.get(vid, []))
        records.append({"video_id": vid, "pairs": [[c, s] for c, s in pairs], "n_clips": len(clips[vid])})
    if args.format == "table":
        rows = [[r["video_id"], str(len(r["pairs"])), str(r["n_clips"])] for r in records]
        _emit(args, _table(["video", "paired clips", "clips"], rows))
    else:
        _emit_doc(args, _provenance(args, [clip_path, sub_path]), records)


def cmd_split(args) -> None:
    man_path = _input(args.manifest)
    manifests = parse_manifests(man_path)
    inputs = [man_path]
    if args.annotated:
        ann_path = _input(args.annotated)
        inputs.append(ann_path)
        annotated = {ln.strip() for ln in ann_path.read_text(encoding="utf-8").splitlines() if ln.strip()}
    else:
        raise CliError("usage-error", "split needs --annotated (one annotated video_id per line)", EXIT_USAGE)
    split = dedup_split(manifests, annotated, tuple(args.ratios), args.seed)
    lang = {m.video_id: m.language for m in manifests}
    movie = {m.video_id: m.movie_name for m in manifests}
    records = [{"video_id": v, "lang": lang[v], "movie_name": movie[v], "split": s} for v, s in split.assignments.items()]
    records += [{"video_id": v, "lang": lang[v], "movie_name": movie[v], "split": "excluded"} for v in split.excluded]
    records.sort(key=lambda r: r["video_id"])
    if args.format == "table":
        names = ("sup_train", "validation", "test", "weak_train", "excluded")
        langs = sorted({r["lang"] for r in records}, key=lambda x: (LANGUAGES + ("other",)).index(x))
        rows = [[lg] + [str(sum(1 for r in records if r["lang"] == lg and r["split"] == n)) for n in names] for lg in langs]
        _emit(args, _table(["lang", *names], rows, [f"seed {args.seed}"]))
    else:
        _emit_doc(args, _provenance(args, inputs), records)


def cmd_agreement(args) -> None:
    pa, pb = _input(args.ann_a), _input(args.ann_b)
    a, b = parse_annotations(pa), parse_annotations(pb)
    ga, gb = group_by_video(a), group_by_video(b)
    if set(ga) != set(gb):
        raise CliError("validation-error", "the two annotation files cover different videos")
    overall = agreement_iou(a, b)
    per_video = []
    for vid in sorted(ga):
        per_video.append({"video_id": vid, "lang": ga[vid][0].language, "iou": agreement_iou(ga[vid], gb[vid])})
    by_lang: dict[str, list[float]] = {}
    for r in per_video:
        by_lang.setdefault(r["lang"], []).append(r["iou"])
    lang_means = {lg: math.fsum(v) / len(v) for lg, v in by_lang.items()}
    if args.format == "table":
        langs = [lg for lg in LANGUAGES + ("other",) if lg in lang_means]
        rows = [[LANGUAGE_NAMES[lg], _pct(lang_means[lg]) + "%"] for lg in langs]
        rows.append(["All sentences", _pct(overall) + "%"])
        _emit(args, _table(["language", "IoU"], rows))
    else:
        _emit_doc(args, _provenance(args, [pa, pb]), per_video, languages=lang_means, overall=overall)


def cmd_report(args) -> None:
    paths = [_input(p) for p in args.inputs]
    cells: dict[tuple[str, str], list[float]] = {}
    methods: list[str] = []
    for p in paths:
        for rec in _load_doc(p)["records"]:
            try:
                method, lang, value = str(rec.get("method", p.stem)), str(rec["lang"]), float(rec[args.metric])
            except (KeyError, TypeError, ValueError) as exc:
                raise CliError("format-error", f"{p}: bad evaluation record ({exc})") from None
            if method not in methods:
                methods.append(method)
            cells.setdefault((method, lang), []).append(value)
    if not cells:
        raise CliError("validation-error", "no evaluation records to report")
    present = {lang for _, lang in cells}
    langs = [lg for lg in LANGUAGES + ("other",) if lg in present] + sorted(present - set(LANGUAGES) - {"other"})
    records, rows = [], []
    for m in methods:
        row_vals = {}
        for lg in langs:
            vals = cells.get((m, lg))
            if vals:
                row_vals[lg] = math.fsum(vals) / len(vals)
        avg = math.fsum(row_vals.values()) / len(row_vals)
        records.append({"method": m, args.metric: row_vals, "average": avg})
        rows.append([m] + [_pct(row_vals[lg]) if lg in row_vals else "-" for lg in langs] + [_pct(avg)])
    if args.format == "table":
        header = ["", *(LANGUAGE_NAMES.get(lg, lg) for lg in langs), "Average"]
        _emit(args, _table(header, rows, [f"metric {args.metric}"]))
    else:
        _emit_doc(args, _provenance(args, paths), records)


def cmd_infonce(args) -> None:
    cpath, spath, ppath = _input(args.clip_feats), _input(args.sent_feats), _input(args.pairs)
    clips = read_feature_matrix(cpath, "clip")
    sents = read_feature_matrix(spath, "sentence")
    doc = _load_doc(ppath)
    recs = doc["records"]
    if args.video_id:
        recs = [r for r in recs if r.get("video_id") == args.video_id]
    if len(recs) != 1:
        raise CliError("validation-error", "pairs file must hold exactly one video (select with --video-id)")
    positives = tuple((int(c), int(s)) for c, s in recs[0]["pairs"])
    batch = ContrastiveBatch(positives, args.negatives, args.tau, args.seed)
    cands = sample_negatives(batch, [0] * clips.count, [0] * sents.count)
    loss = infonce_loss(clips, sents, batch, cands, normalize=args.normalize)
    rec = {
        "video_id": recs[0].get("video_id", ""),
        "loss": loss,
        "pairs": len(positives),
        "sentence_candidates": [list(c) for c in cands.sentence_candidates],
        "clip_candidates": [list(c) for c in cands.clip_candidates],
    }
    if args.grad_check:
        rec["grad_check_max_rel_error"] = infonce_grad_check(clips, sents, batch, cands, args.epsilon, args.normalize)
    _emit_doc(args, _provenance(args, [cpath, spath, ppath]), [rec])


# -- parser ----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage-error", message, EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="storyalign", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"storyalign {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, formats=True):
        p.add_argument("--out", help="output path (default: stdout)")
        if formats:
            p.add_argument("--format", choices=("records", "table"), default="records")

    p = sub.add_parser("align", help="align clips to sentences with DTW / Drop-DTW")
    p.add_argument("--sim", help="similarity CSV, rows = clips, columns = sentences")
    p.add_argument("--clip-feats", help="clip feature binary")
    p.add_argument("--sent-feats", help="sentence feature binary")
    p.add_argument("--video-id", help="video id recorded in the output (default: input file stem)")
    p.add_argument("--drop-video", type=float, help="cost of dropping a clip")
    p.add_argument("--drop-text", type=float, help="cost of dropping a sentence")
    p.add_argument("--drop-percentile", type=float, help="set both drop costs to this percentile of 1 - sim")
    p.add_argument("--no-drops", action="store_true", help="plain DTW, nothing dropped")
    common(p)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("eval", help="score predicted alignments against gold annotations")
    p.add_argument("--pred", action="append", required=True, help="alignment document from `align` (repeatable)")
    p.add_argument("--gold", required=True, help="annotation JSONL")
    p.add_argument("--clips", required=True, help="clip boundary JSONL")
    p.add_argument("--method", default="pred", help="method label stored on each record")
    p.add_argument("--pooled", action="store_true", help="pool durations instead of averaging videos")
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("weaklabel", help="clip/sentence pairs from subtitle timing")
    p.add_argument("--clips", required=True, help="clip boundary JSONL")
    p.add_argument("--subs", required=True, help="subtitle segment JSONL")
    common(p)
    p.set_defaults(func=cmd_weaklabel)

    p = sub.add_parser("split", help="20/20/60 split of annotated videos with movie deduplication")
    p.add_argument("--manifest", required=True, help="video manifest JSONL")
    p.add_argument("--annotated", help="file of annotated video ids, one per line")
    p.add_argument("--ratios", type=float, nargs=3, default=[0.2, 0.2, 0.6], metavar=("TRAIN", "VAL", "TEST"))
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("agreement", help="IoU agreement between two annotations")
    p.add_argument("ann_a")
    p.add_argument("ann_b")
    common(p)
    p.set_defaults(func=cmd_agreement)

    p = sub.add_parser("report", help="language x method table from `eval` outputs")
    p.add_argument("inputs", nargs="+", help="evaluation documents")
    p.add_argument("--metric", choices=("f1", "clip_accuracy", "sentence_iou"), default="f1")
    common(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("infonce", help="reference InfoNCE loss on one video's features")
    p.add_argument("--clip-feats", required=True)
    p.add_argument("--sent-feats", required=True)
    p.add_argument("--pairs", required=True, help="document with a 'pairs' record, e.g. from `weaklabel`")
    p.add_argument("--video-id")
    p.add_argument("--tau", type=float, default=DEFAULT_TEMPERATURE)
    p.add_argument("--negatives", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--normalize", action="store_true", help="L2-normalize rows before the dot products")
    p.add_argument("--grad-check", action="store_true")
    p.add_argument("--epsilon", type=float, default=1e-5)
    common(p, formats=False)
    p.set_defaults(func=cmd_infonce)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except CliError as exc:
        _report_error(exc.code, str(exc))
        return exc.status
    except ValidationError as exc:
        _report_error("validation-error", str(exc))
        return EXIT_VALIDATION
    except OSError as exc:
        _report_error("io-error", str(exc))
        return EXIT_VALIDATION
    return 0


def _report_error(code: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": code, "message": message}) + "\n")


if __name__ == "__main__":
    sys.exit(main())
