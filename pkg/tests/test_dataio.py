import io
import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from storyalign.core import ClipRecord, SentenceRecord, TimeInterval, ValidationError
from storyalign.dataio import (
    FEATURE_MAGIC,
    BadMagic,
    FeatureFileError,
    FormatError,
    NonFiniteValue,
    SubtitleSegment,
    TrailingData,
    TruncatedPayload,
    VideoManifest,
    check_split,
    decode_feature_matrix,
    dedup_split,
    encode_feature_matrix,
    largest_remainder,
    parse_annotations,
    parse_clips,
    parse_manifests,
    parse_similarity_csv,
    parse_subtitles,
    read_feature_matrix,
    serialize_annotations,
    serialize_clips,
    serialize_manifests,
    serialize_similarity_csv,
    serialize_subtitles,
    weak_supervise,
    write_feature_matrix,
)
from storyalign.sim import FeatureMatrix

iv = TimeInterval


def src(text):
    return io.StringIO(text)


# -- annotations -----------------------------------------------------------


def test_parse_annotation_examples():
    text = (
        '{"video_id":"v1","lang":"en","idx":1,"text":"b","unmatched":true}\n'
        '{"video_id":"v1","lang":"en","idx":0,"text":"a","start":3.0,"end":7.5}\n'
    )
    s = parse_annotations(src(text))
    assert [x.sentence_index for x in s] == [0, 1]
    assert s[0].gold == iv(3.0, 7.5)
    assert s[1].unmatched


def test_parse_annotation_language_alias():
    s = parse_annotations(src('{"video_id":"v","lang":"ch","idx":0,"start":0,"end":1}\n'))
    assert s[0].language == "zh"


@pytest.mark.parametrize(
    "line, needle",
    [
        ('{"video_id":"v","lang":"en","idx":0,"start":5.0,"end":4.0}', "end"),
        ('{"video_id":"v","lang":"en","idx":0,"start":"x","end":4.0}', "number"),
        ('{"video_id":"v","lang":"en","idx":0,"unmatched":true,"start":1,"end":2}', "unmatched"),
        ('{"video_id":"v","lang":"xx","idx":0,"start":1,"end":2}', "language"),
        ('{"video_id":"v","idx":0,"start":1,"end":2}', "lang"),
        ('{"schema":2,"video_id":"v","lang":"en","idx":0,"start":1,"end":2}', "schema"),
    ],
)
def test_parse_annotation_rejects(line, needle):
    good = '{"video_id":"v","lang":"en","idx":1,"start":1,"end":2}\n'
    with pytest.raises(FormatError, match=needle) as exc:
        parse_annotations(src(good + line + "\n"))
    assert exc.value.line == 2


def test_parse_annotation_malformed_json_line_number():
    text = '{"video_id":"v","lang":"en","idx":0,"start":1,"end":2}\n\n{not json\n'
    with pytest.raises(FormatError) as exc:
        parse_annotations(src(text))
    assert exc.value.line == 3
    assert "line 3" in str(exc.value)


def test_parse_annotation_non_contiguous():
    text = "".join(f'{{"video_id":"v","lang":"en","idx":{k},"start":{k},"end":{k + 1}}}\n' for k in (0, 2))
    with pytest.raises(FormatError, match="contiguous"):
        parse_annotations(src(text))


def _random_sentences(rng, n_videos=3):
    out = []
    for v in range(n_videos):
        for k in range(int(rng.integers(1, 6))):
            a = float(rng.uniform(0, 100))
            gold = None if rng.random() < 0.3 else iv(a, a + float(rng.uniform(0, 10)))
            out.append(SentenceRecord(k, f"line {k} ünï", gold, str(rng.choice(["en", "zh", "hi"])), f"vid{v}"))
    return out


@pytest.mark.parametrize("seed", range(5))
def test_annotation_round_trip(seed):
    sents = _random_sentences(np.random.default_rng(seed))
    text = serialize_annotations(sents)
    back = parse_annotations(src(text))
    assert back == sents
    assert serialize_annotations(back) == text


# -- clips and subtitles ---------------------------------------------------


def test_clip_and_subtitle_round_trip():
    rng = np.random.default_rng(0)
    edges = np.cumsum(rng.uniform(0.1, 3.0, size=8))
    clips = [ClipRecord(k, iv(float(edges[k]), float(edges[k + 1])), "v") for k in range(7)]
    assert parse_clips(src(serialize_clips(clips))) == clips
    segs = [SubtitleSegment(k, iv(float(edges[k]), float(edges[k + 1])), f"t{k}", "v") for k in range(7)]
    assert parse_subtitles(src(serialize_subtitles(segs))) == segs


def test_parse_clips_rejects_overlap():
    text = '{"video_id":"v","idx":0,"start":0,"end":2}\n{"video_id":"v","idx":1,"start":1,"end":3}\n'
    with pytest.raises(ValidationError, match="overlap"):
        parse_clips(src(text))


# -- weak supervision ------------------------------------------------------


def _clip(k, a, b):
    return ClipRecord(k, iv(a, b), "v")


def _seg(k, a, b):
    return SubtitleSegment(k, iv(a, b), "", "v")


def test_weak_supervise_fixtures():
    s = [_seg(0, 0, 5), _seg(1, 5, 10)]
    assert weak_supervise([_clip(0, 0, 2)], s) == [(0, 0)]
    assert weak_supervise([_clip(0, 4, 7)], s) == [(0, 1)]
    assert weak_supervise([_clip(0, 20, 22)], [_seg(0, 0, 5), _seg(1, 10, 15)]) == []


def test_weak_supervise_tie_goes_to_earlier():
    assert weak_supervise([_clip(0, 4, 6)], [_seg(0, 0, 5), _seg(1, 5, 10)]) == [(0, 0)]


def brute_weak(clips, segs):
    out = []
    for c in clips:
        ovs = [max(0.0, min(c.interval.end, s.interval.end) - max(c.interval.start, s.interval.start)) for s in segs]
        if ovs and max(ovs) > 0:
            out.append((c.clip_index, segs[int(np.argmax(ovs))].sentence_index))
    return out


@st.composite
def partitions(draw, max_n=8):
    n = draw(st.integers(1, max_n))
    gaps = draw(st.lists(st.integers(0, 3), min_size=n, max_size=n))
    lens = draw(st.lists(st.integers(1, 5), min_size=n, max_size=n))
    out, t = [], 0
    for g, ln in zip(gaps, lens):
        out.append((t + g, t + g + ln))
        t += g + ln
    return out


@settings(max_examples=200, deadline=None)
@given(partitions(), partitions())
def test_weak_supervise_matches_brute_force(cb, sb):
    clips = [_clip(k, a, b) for k, (a, b) in enumerate(cb)]
    segs = [_seg(k, a, b) for k, (a, b) in enumerate(sb)]
    pairs = weak_supervise(clips, segs)
    assert pairs == brute_weak(clips, segs)
    assert [s for _, s in pairs] == sorted(s for _, s in pairs)


# -- splitting -------------------------------------------------------------


def test_largest_remainder():
    assert largest_remainder(10, (0.2, 0.2, 0.6)) == [2, 2, 6]
    assert largest_remainder(7, (0.2, 0.2, 0.6)) == [2, 1, 4]
    assert largest_remainder(1, (0.2, 0.2, 0.6)) == [0, 0, 1]
    assert sum(largest_remainder(13, (0.2, 0.2, 0.6))) == 13


def test_split_ten_english():
    ms = [VideoManifest(f"e{k}", "en", f"Movie {k}") for k in range(10)]
    sp = dedup_split(ms, [m.video_id for m in ms], rng_seed=4)
    counts = [len(sp.videos_in(s)) for s in ("sup_train", "validation", "test")]
    assert counts == [2, 2, 6]


def test_split_excludes_shared_movie():
    ms = [VideoManifest("t", "en", "Inception"), VideoManifest("w1", "fr", "  inception "), VideoManifest("w2", "fr", "Up")]
    sp = dedup_split(ms, {"t"})
    assert sp.excluded == ("w1",)
    assert sp.assignments["w2"] == "weak_train"
    assert "w1" not in sp.assignments


def test_split_deterministic_and_seeded():
    ms = [VideoManifest(f"v{k}", ["en", "hi"][k % 2], f"M{k}") for k in range(30)]
    ids = [m.video_id for m in ms]
    assert dedup_split(ms, ids, rng_seed=8) == dedup_split(ms, ids, rng_seed=8)
    assert dedup_split(ms, ids, rng_seed=8) != dedup_split(ms, ids, rng_seed=9)


def test_split_errors():
    with pytest.raises(ValidationError, match="movie_name"):
        dedup_split([VideoManifest("a", "en", "")], {"a"})
    with pytest.raises(ValidationError, match="missing"):
        dedup_split([VideoManifest("a", "en", "X")], {"b"})


@settings(max_examples=150, deadline=None)
@given(
    st.lists(st.tuples(st.sampled_from(["en", "zh", "ru"]), st.sampled_from(["A", "b", "B ", "c", "D", ""]), st.booleans()), min_size=1, max_size=25),
    st.integers(0, 2**32 - 1),
)
def test_split_no_movie_overlap(rows, seed):
    ms = [VideoManifest(f"v{k}", lg, mv or ("Z" if ann else "")) for k, (lg, mv, ann) in enumerate(rows)]
    ann = {f"v{k}" for k, (_, _, a) in enumerate(rows) if a}
    sp = dedup_split(ms, ann, rng_seed=seed)
    check_split(sp, ms)
    assert set(sp.assignments) | set(sp.excluded) == {m.video_id for m in ms}


def test_check_split_detects_clash():
    from storyalign.dataio import SplitAssignment

    ms = [VideoManifest("a", "en", "X"), VideoManifest("b", "en", "x")]
    with pytest.raises(ValidationError):
        check_split(SplitAssignment({"a": "test", "b": "weak_train"}), ms)


def test_manifest_round_trip():
    ms = [VideoManifest("a", "en", "Up", 93.5, "a.clips.jsonl", "a.ann.jsonl"), VideoManifest("b", "zh", "", 0.0)]
    assert parse_manifests(src(serialize_manifests(ms))) == ms
    with pytest.raises(FormatError, match="duplicate"):
        parse_manifests(src(serialize_manifests(ms + ms[:1])))


# -- feature binary --------------------------------------------------------


def test_feature_round_trip_bitwise(tmp_path):
    arr = np.random.default_rng(0).normal(size=(3, 4)).astype(np.float32)
    p = tmp_path / "f.bin"
    write_feature_matrix(p, FeatureMatrix(arr, "clip"))
    back = read_feature_matrix(p)
    assert back.values.dtype == np.float32
    assert back.values.tobytes() == arr.tobytes()


def test_feature_layout():
    data = encode_feature_matrix(np.array([[1.0, 2.0]], dtype=np.float32))
    assert data[:5] == FEATURE_MAGIC
    assert struct.unpack("<II", data[5:13]) == (1, 2)
    assert np.frombuffer(data[13:], "<f4").tolist() == [1.0, 2.0]


def test_feature_errors():
    good = encode_feature_matrix(np.ones((5, 2), dtype=np.float32))
    with pytest.raises(BadMagic):
        decode_feature_matrix(b"XXXXX" + good[5:])
    with pytest.raises(BadMagic):
        decode_feature_matrix(b"")
    lying = FEATURE_MAGIC + struct.pack("<II", 10, 2) + good[13:]
    with pytest.raises(TruncatedPayload, match="10x2"):
        decode_feature_matrix(lying)
    with pytest.raises(TruncatedPayload):
        decode_feature_matrix(good[:8])
    with pytest.raises(TrailingData):
        decode_feature_matrix(good + b"\0")
    bad = bytearray(good)
    bad[13 + 4 * 3 : 13 + 4 * 4] = struct.pack("<f", math.nan)
    with pytest.raises(NonFiniteValue, match="row 1"):
        decode_feature_matrix(bytes(bad))
    with pytest.raises(NonFiniteValue):
        encode_feature_matrix(np.array([[1e39]]))
    assert issubclass(BadMagic, FeatureFileError) and issubclass(FeatureFileError, ValidationError)


# -- similarity CSV --------------------------------------------------------


def test_csv_examples():
    assert parse_similarity_csv(src("1.0,0.0\n0.0,1.0")).tolist() == [[1.0, 0.0], [0.0, 1.0]]
    assert parse_similarity_csv(src("0.25")).tolist() == [[0.25]]


def test_csv_errors():
    with pytest.raises(FormatError, match="ragged") as exc:
        parse_similarity_csv(src("1,2\n3\n"))
    assert exc.value.line == 2
    with pytest.raises(FormatError) as exc:
        parse_similarity_csv(src("1,2\n3,abc\n"))
    assert (exc.value.line, exc.value.column) == (2, 2)
    with pytest.raises(FormatError, match="non-finite"):
        parse_similarity_csv(src("nan"))
    with pytest.raises(FormatError, match="empty"):
        parse_similarity_csv(src("\n"))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.data())
def test_csv_round_trip_bitwise(m, n, data):
    vals = data.draw(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=m * n, max_size=m * n))
    arr = np.array(vals, dtype=np.float64).reshape(m, n)
    back = parse_similarity_csv(src(serialize_similarity_csv(arr)))
    assert back.tobytes() == arr.tobytes()
