"""
File formats and dataset engineering.

Formats
-------
annotation JSONL
    one sentence per line: ``video_id``, ``lang``, ``idx``, ``text`` and
    either ``start``/``end`` (seconds) or ``"unmatched": true``. An optional
    ``schema`` field must equal 1 when present.
subtitle JSONL
    ``video_id``, ``idx``, ``start``, ``end``, ``text``.
clip JSONL
    ``video_id``, ``idx``, ``start``, ``end``.
manifest JSONL
    ``video_id``, ``lang``, ``movie_name``, ``duration`` and optional
    ``clips`` / ``sentences`` path references.
feature binary
    ``b"MSYM1"``, rows and dim as little-endian uint32, then row-major
    little-endian float32 values.
similarity CSV
    UTF-8, comma separated, no header; rows are clips, columns sentences.
"""

from __future__ import annotations

import csv
import io
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator, Optional, Sequence, Union

import numpy as np

from .core import (
    ClipRecord,
    SentenceRecord,
    TimeInterval,
    ValidationError,
    normalize_language,
)
from .sim import FeatureMatrix

SCHEMA_VERSION = 1
FEATURE_MAGIC = b"MSYM1"
_HEADER = struct.Struct("<5sII")

Source = Union[str, Path, IO[str]]


class FormatError(ValidationError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)
        self.line = line
        self.column = column


class FeatureFileError(ValidationError):
    pass


class BadMagic(FeatureFileError):
    pass


class TruncatedPayload(FeatureFileError):
    pass


class NonFiniteValue(FeatureFileError):
    pass


class TrailingData(FeatureFileError):
    pass


def _lines(source: Source) -> Iterator[str]:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            yield from fh
    else:
        yield from source


def _read_jsonl(source: Source) -> Iterator[tuple[int, dict]]:
    for lineno, line in enumerate(_lines(source), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON ({exc.msg})", lineno) from None
        if not isinstance(rec, dict):
            raise FormatError("record is not a JSON object", lineno)
        yield lineno, rec


def _field(rec: dict, key: str, kind, lineno: int):
    if key not in rec:
        raise FormatError(f"missing field {key!r}", lineno)
    val = rec[key]
    if kind is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise FormatError(f"field {key!r} must be a number", lineno)
        val = float(val)
        if not math.isfinite(val):
            raise FormatError(f"field {key!r} must be finite", lineno)
    elif kind is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise FormatError(f"field {key!r} must be an integer", lineno)
    elif not isinstance(val, kind):
        raise FormatError(f"field {key!r} must be a {kind.__name__}", lineno)
    return val


def _interval(rec: dict, lineno: int) -> TimeInterval:
    start, end = _field(rec, "start", float, lineno), _field(rec, "end", float, lineno)
    try:
        return TimeInterval(start, end)
    except ValidationError as exc:
        raise FormatError(str(exc), lineno) from None


def _group_contiguous(items, kind: str):
    """Order records per video by index and check indices are 0..n-1."""
    by_video: dict[str, list] = {}
    for lineno, idx, obj in items:
        by_video.setdefault(obj.video_id, []).append((idx, lineno, obj))
    out = []
    for vid, rows in by_video.items():
        rows.sort(key=lambda r: r[0])
        for k, (idx, lineno, _) in enumerate(rows):
            if idx != k:
                raise FormatError(f"{kind} indices of video {vid!r} are not contiguous from 0 (found {idx} at position {k})", lineno)
        out.extend(obj for _, _, obj in rows)
    return out


# -- annotations -----------------------------------------------------------


def parse_annotations(source: Source) -> list[SentenceRecord]:
    """Read annotation JSONL into per-video ordered sentence records."""
    items = []
    for lineno, rec in _read_jsonl(source):
        if rec.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise FormatError(f"unsupported schema version {rec['schema']!r}", lineno)
        vid = _field(rec, "video_id", str, lineno)
        idx = _field(rec, "idx", int, lineno)
        text = _field(rec, "text", str, lineno) if "text" in rec else ""
        try:
            lang = normalize_language(_field(rec, "lang", str, lineno))
        except ValidationError as exc:
            raise FormatError(str(exc), lineno) from None
        unmatched = rec.get("unmatched", False)
        if unmatched not in (True, False):
            raise FormatError("field 'unmatched' must be a boolean", lineno)
        if unmatched:
            if "start" in rec or "end" in rec:
                raise FormatError("an unmatched sentence cannot carry start/end", lineno)
            gold = None
        else:
            gold = _interval(rec, lineno)
        items.append((lineno, idx, SentenceRecord(idx, text, gold, lang, vid)))
    return _group_contiguous(items, "sentence")


def annotation_record(s: SentenceRecord) -> dict:
    rec = {"schema": SCHEMA_VERSION, "video_id": s.video_id, "lang": s.language, "idx": s.sentence_index, "text": s.text}
    if s.gold is None:
        rec["unmatched"] = True
    else:
        rec["start"] = s.gold.start
        rec["end"] = s.gold.end
    return rec


def dump_jsonl(records: Iterable[dict]) -> str:
    return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records)


def serialize_annotations(sentences: Iterable[SentenceRecord]) -> str:
    return dump_jsonl(annotation_record(s) for s in sentences)


# -- clips and subtitles ---------------------------------------------------


@dataclass(frozen=True)
class SubtitleSegment:
    sentence_index: int
    interval: TimeInterval
    text: str = ""
    video_id: str = ""


def parse_clips(source: Source) -> list[ClipRecord]:
    items = []
    for lineno, rec in _read_jsonl(source):
        vid = _field(rec, "video_id", str, lineno)
        idx = _field(rec, "idx", int, lineno)
        items.append((lineno, idx, ClipRecord(idx, _interval(rec, lineno), vid)))
    clips = _group_contiguous(items, "clip")
    _check_ordered(clips, lambda c: c.interval, "clip")
    return clips


def serialize_clips(clips: Iterable[ClipRecord]) -> str:
    return dump_jsonl(
        {"video_id": c.video_id, "idx": c.clip_index, "start": c.interval.start, "end": c.interval.end} for c in clips
    )


def parse_subtitles(source: Source) -> list[SubtitleSegment]:
    items = []
    for lineno, rec in _read_jsonl(source):
        vid = _field(rec, "video_id", str, lineno)
        idx = _field(rec, "idx", int, lineno)
        text = _field(rec, "text", str, lineno) if "text" in rec else ""
        items.append((lineno, idx, SubtitleSegment(idx, _interval(rec, lineno), text, vid)))
    segs = _group_contiguous(items, "subtitle")
    _check_ordered(segs, lambda s: s.interval, "subtitle segment")
    return segs


def serialize_subtitles(segments: Iterable[SubtitleSegment]) -> str:
    return dump_jsonl(
        {"video_id": s.video_id, "idx": s.sentence_index, "start": s.interval.start, "end": s.interval.end, "text": s.text}
        for s in segments
    )


def _check_ordered(items: Sequence, interval_of, kind: str) -> None:
    for k, (prev, cur) in enumerate(zip(items, items[1:]), 1):
        if prev.video_id != cur.video_id:
            continue
        if interval_of(cur).start < interval_of(prev).end:
            raise ValidationError(f"{kind}s of video {cur.video_id!r} overlap or are out of order at position {k}")


def group_by_video(items: Iterable) -> dict[str, list]:
    out: dict[str, list] = {}
    for it in items:
        out.setdefault(it.video_id, []).append(it)
    return out


# -- weak supervision ------------------------------------------------------


def weak_supervise(clips: Sequence[ClipRecord], segments: Sequence[SubtitleSegment]) -> list[tuple[int, int]]:
    """Pair each clip with the subtitle segment it overlaps most.

    Ties go to the earlier segment; clips overlapping no segment are left
    out. Returns ``(clip_index, sentence_index)`` pairs in clip order.
    """
    _check_ordered(list(clips), lambda c: c.interval, "clip")
    _check_ordered(list(segments), lambda s: s.interval, "subtitle segment")
    pairs = []
    k = 0
    for clip in clips:
        cs, ce = clip.interval.start, clip.interval.end
        # segments ending at or before the clip start can never overlap later clips
        while k < len(segments) and segments[k].interval.end <= cs:
            k += 1
        best, best_ov = None, 0.0
        j = k
        while j < len(segments) and segments[j].interval.start < ce:
            seg = segments[j].interval
            ov = min(ce, seg.end) - max(cs, seg.start)
            if ov > best_ov:
                best, best_ov = segments[j].sentence_index, ov
            j += 1
        if best is not None:
            pairs.append((clip.clip_index, best))
    return pairs


# -- manifests and splitting -----------------------------------------------

SPLITS = ("weak_train", "sup_train", "validation", "test")
ANNOTATED_SPLITS = ("sup_train", "validation", "test")


@dataclass(frozen=True)
class VideoManifest:
    video_id: str
    language: str
    movie_name: str = ""
    duration: float = 0.0
    clips: str = ""
    sentences: str = ""


def movie_key(name: str) -> str:
    return name.strip().casefold()


def parse_manifests(source: Source) -> list[VideoManifest]:
    out = []
    seen = set()
    for lineno, rec in _read_jsonl(source):
        vid = _field(rec, "video_id", str, lineno)
        if vid in seen:
            raise FormatError(f"duplicate video_id {vid!r}", lineno)
        seen.add(vid)
        try:
            lang = normalize_language(_field(rec, "lang", str, lineno))
        except ValidationError as exc:
            raise FormatError(str(exc), lineno) from None
        movie = rec.get("movie_name") or ""
        if not isinstance(movie, str):
            raise FormatError("field 'movie_name' must be a string", lineno)
        duration = _field(rec, "duration", float, lineno) if "duration" in rec else 0.0
        out.append(VideoManifest(vid, lang, movie, duration, rec.get("clips", ""), rec.get("sentences", "")))
    return out


def serialize_manifests(manifests: Iterable[VideoManifest]) -> str:
    return dump_jsonl(
        {"video_id": m.video_id, "lang": m.language, "movie_name": m.movie_name, "duration": m.duration, "clips": m.clips, "sentences": m.sentences}
        for m in manifests
    )


@dataclass(frozen=True)
class SplitAssignment:
    assignments: dict
    excluded: tuple = ()
    seed: int = 0
    ratios: tuple = (0.2, 0.2, 0.6)

    def videos_in(self, split: str) -> list[str]:
        return sorted(v for v, s in self.assignments.items() if s == split)


def largest_remainder(n: int, ratios: Sequence[float]) -> list[int]:
    """Integer counts summing to ``n`` closest to ``n * ratios``; ties favour earlier splits."""
    total = math.fsum(ratios)
    if total <= 0 or any(r < 0 for r in ratios):
        raise ValidationError(f"invalid split ratios {ratios}")
    quotas = [n * r / total for r in ratios]
    counts = [math.floor(q + 1e-9) for q in quotas]
    order = sorted(range(len(ratios)), key=lambda k: (-(quotas[k] - counts[k]), k))
    for k in order[: n - sum(counts)]:
        counts[k] += 1
    return counts


def dedup_split(
    manifests: Sequence[VideoManifest],
    annotated_ids: Iterable[str],
    ratios: Sequence[float] = (0.2, 0.2, 0.6),
    rng_seed: int = 0,
) -> SplitAssignment:
    """Split annotated videos per language and keep their movies out of weak training.

    Annotated videos of each language are shuffled with ``rng_seed`` and cut
    into sup_train / validation / test by largest-remainder counts. Every
    other video goes to weak_train unless its movie name (trimmed,
    case-folded) matches an annotated video's, in which case it is excluded.
    """
    annotated = set(annotated_ids)
    by_id = {m.video_id: m for m in manifests}
    missing = sorted(annotated - by_id.keys())
    if missing:
        raise ValidationError(f"annotated videos missing from the manifest: {missing}")
    if len(ratios) != 3:
        raise ValidationError("ratios must give (sup_train, validation, test)")

    rng = np.random.default_rng(rng_seed)
    assign: dict[str, str] = {}
    held_movies = set()
    by_lang: dict[str, list[str]] = {}
    for vid in sorted(annotated):
        m = by_id[vid]
        if not movie_key(m.movie_name):
            raise ValidationError(f"annotated video {vid!r} has no movie_name")
        held_movies.add(movie_key(m.movie_name))
        by_lang.setdefault(m.language, []).append(vid)
    for lang in sorted(by_lang):
        vids = by_lang[lang]
        order = rng.permutation(len(vids))
        counts = largest_remainder(len(vids), ratios)
        pos = 0
        for split, cnt in zip(ANNOTATED_SPLITS, counts):
            for k in order[pos : pos + cnt]:
                assign[vids[int(k)]] = split
            pos += cnt

    excluded = []
    for m in sorted(manifests, key=lambda m: m.video_id):
        if m.video_id in annotated:
            continue
        if movie_key(m.movie_name) and movie_key(m.movie_name) in held_movies:
            excluded.append(m.video_id)
        else:
            assign[m.video_id] = "weak_train"
    return SplitAssignment(dict(sorted(assign.items())), tuple(excluded), rng_seed, tuple(ratios))


def check_split(split: SplitAssignment, manifests: Sequence[VideoManifest]) -> None:
    """Raise if any movie appears in weak_train and in an annotated split."""
    by_id = {m.video_id: m for m in manifests}
    weak = {movie_key(by_id[v].movie_name) for v, s in split.assignments.items() if s == "weak_train"}
    held = {movie_key(by_id[v].movie_name) for v, s in split.assignments.items() if s in ANNOTATED_SPLITS}
    clash = (weak & held) - {""}
    if clash:
        raise ValidationError(f"movies in both weak_train and annotated splits: {sorted(clash)}")


# -- feature binary --------------------------------------------------------


def encode_feature_matrix(m) -> bytes:
    values = m.values if isinstance(m, FeatureMatrix) else np.asarray(m)
    with np.errstate(over="ignore"):
        arr = np.ascontiguousarray(values, dtype="<f4")
    if arr.ndim != 2:
        raise ValidationError(f"feature matrix must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue("feature matrix has non-finite values (possibly after float32 conversion)")
    rows, dim = arr.shape
    return _HEADER.pack(FEATURE_MAGIC, rows, dim) + arr.tobytes()


def decode_feature_matrix(data: bytes, role: str = "clip") -> FeatureMatrix:
    head = bytes(data[: len(FEATURE_MAGIC)])
    if not FEATURE_MAGIC.startswith(head) or not head:
        raise BadMagic(f"bad magic {head!r}, expected {FEATURE_MAGIC!r}")
    if len(data) < _HEADER.size:
        raise TruncatedPayload(f"truncated header: {len(data)} bytes")
    _, rows, dim = _HEADER.unpack_from(data)
    need = rows * dim * 4
    payload = data[_HEADER.size :]
    if len(payload) < need:
        raise TruncatedPayload(f"truncated payload: header declares {rows}x{dim} ({need} bytes), found {len(payload)}")
    if len(payload) > need:
        raise TrailingData(f"{len(payload) - need} unexpected bytes after the payload")
    arr = np.frombuffer(payload, dtype="<f4").reshape(rows, dim).astype(np.float32)
    if not np.all(np.isfinite(arr)):
        row = int(np.argwhere(~np.isfinite(arr))[0][0])
        raise NonFiniteValue(f"non-finite value in row {row}")
    if rows == 0 or dim == 0:
        raise FeatureFileError(f"empty feature matrix {rows}x{dim}")
    return FeatureMatrix(arr, role)


def write_feature_matrix(path, m) -> None:
    Path(path).write_bytes(encode_feature_matrix(m))


def read_feature_matrix(path, role: str = "clip") -> FeatureMatrix:
    return decode_feature_matrix(Path(path).read_bytes(), role)


# -- similarity CSV --------------------------------------------------------


def parse_similarity_csv(source: Source) -> np.ndarray:
    """Read a clip x sentence similarity matrix; errors carry row/column."""
    text = "".join(_lines(source))
    rows = []
    width = None
    for r, row in enumerate(csv.reader(io.StringIO(text)), 1):
        if not row or all(not c.strip() for c in row):
            continue
        vals = []
        for c, cell in enumerate(row, 1):
            try:
                v = float(cell)
            except ValueError:
                raise FormatError(f"non-numeric cell {cell!r}", r, c) from None
            if not math.isfinite(v):
                raise FormatError(f"non-finite cell {cell!r}", r, c)
            vals.append(v)
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise FormatError(f"ragged row: {len(vals)} cells, expected {width}", r)
        rows.append(vals)
    if not rows:
        raise FormatError("empty similarity matrix")
    return np.array(rows, dtype=np.float64)


def serialize_similarity_csv(sim) -> str:
    arr = np.asarray(sim, dtype=np.float64)
    return "".join(",".join(repr(float(x)) for x in row) + "\n" for row in arr)
