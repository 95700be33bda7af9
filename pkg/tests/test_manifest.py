import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factories import make_example
from s2tcurate.manifest import (
    AudioRef,
    DataError,
    Example,
    ManifestError,
    SchemaError,
    StatsAccumulator,
    accumulate,
    corpus_stats,
    detect_text_features,
    format_table,
    read_manifest,
    read_records,
    read_texts,
    stats_rows,
    write_manifest,
)


def write_lines(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def test_empty_file(tmp_path):
    p = write_lines(tmp_path / "m.jsonl", [])
    assert list(read_manifest(p)) == []


def test_two_lines_round_trip(tmp_path):
    exs = [make_example("a", "Hello there."), make_example("b", "你好", language="zho")]
    p = tmp_path / "m.jsonl"
    write_manifest(exs, p)
    assert list(read_manifest(p)) == exs


def test_missing_field_names_field_and_line(tmp_path):
    good = json.dumps(make_example("a").to_dict())
    bad = make_example("b").to_dict()
    del bad["y_tgt"]
    p = write_lines(tmp_path / "m.jsonl", [good, json.dumps(bad)])
    with pytest.raises(SchemaError) as ei:
        list(read_manifest(p))
    err = ei.value
    assert err.field == "y_tgt" and err.line_no == 2
    assert "y_tgt" in str(err) and ":2:" in str(err)
    assert '"id": "b"' in err.content


def test_malformed_json_carries_line(tmp_path):
    p = write_lines(tmp_path / "m.jsonl", [json.dumps(make_example("a").to_dict()), "{not json"])
    with pytest.raises(ManifestError) as ei:
        list(read_manifest(p))
    assert ei.value.line_no == 2 and ei.value.content == "{not json"
    assert isinstance(ei.value, DataError)


def test_duplicate_ids(tmp_path):
    line = json.dumps(make_example("a").to_dict())
    p = write_lines(tmp_path / "m.jsonl", [line, line])
    with pytest.raises(SchemaError, match="duplicate"):
        list(read_manifest(p))
    assert len(list(read_manifest(p, check_unique=False))) == 2


def test_invariants_enforced():
    with pytest.raises(SchemaError):
        AudioRef("r", 2.0, 2.0)
    with pytest.raises(SchemaError):
        make_example(task="mt")
    with pytest.raises(SchemaError):
        make_example(target_language="deu")
    make_example(task="st", target_language="deu")
    with pytest.raises(SchemaError):
        Example.from_dict({**make_example().to_dict(), "schema_version": 99})


def test_unknown_fields_survive(tmp_path):
    d = make_example("a").to_dict()
    d["speaker"] = "spk1"
    p = write_lines(tmp_path / "m.jsonl", [json.dumps(d)])
    (ex,) = read_manifest(p)
    assert ex.extra == {"speaker": "spk1"}
    assert ex.to_dict() == d


def test_canonical_round_trip_bytes(tmp_path):
    rng = random.Random(0)
    exs = [
        make_example(f"id{i}", rng.choice(["a b", "Ça va?", "你好。", "x"]), start=i * 1.5, duration=1.25,
                     recording="r", y_prev="prev" if i else "", note=i)
        for i in range(20)
    ]
    first = tmp_path / "a.jsonl"
    second = tmp_path / "b.jsonl"
    write_manifest(exs, first)
    write_manifest(read_manifest(first), second)
    assert first.read_bytes() == second.read_bytes()


def test_volume_arithmetic():
    exs = [make_example("a", duration=3.0), make_example("b", duration=5.0)]
    (s,) = corpus_stats(exs).values()
    assert s.volume_hours == pytest.approx(8 / 3600, rel=1e-6) and s.num_examples == 2


def test_two_datasets_two_rows():
    exs = [make_example("a", dataset="x"), make_example("b", dataset="y")]
    stats = corpus_stats(exs)
    assert len(stats_rows(stats)) == 2
    table = format_table(["dataset", "n"], [["x", "1"], ["y", "1"]])
    assert table.splitlines()[1].startswith("x")


def test_aidatatang_shaped_fixture():
    # 164,000 clips totalling exactly 140 hours
    n, total = 164_000, 140 * 3600
    base = total / n
    exs = (make_example(f"u{i}", "你好", dataset="aidatatang", language="zho", duration=base) for i in range(n))
    (s,) = corpus_stats(exs).values()
    assert s.num_examples == 164_000
    assert s.volume_hours == pytest.approx(140.0, rel=1e-6)
    assert s.has_case is None and not s.has_punctuation
    row = stats_rows({"aidatatang": s})[0]
    assert row[1] == "140.000" and row[3] == "164000" and row[5] == "-"


def test_feature_detection():
    assert detect_text_features([make_example(text="hello world")]) == {"demo": (False, False)}
    assert detect_text_features([make_example(text="Hello, world")]) == {"demo": (True, True)}
    zh = [make_example(text="我爱北京", language="zho")]
    assert detect_text_features(zh) == {"demo": (False, None)}


def test_feature_threshold():
    plain = [make_example(f"p{i}", "plain text") for i in range(199)]
    assert detect_text_features(plain + [make_example("x", "Odd.")])["demo"] == (False, False)
    two = plain[:198] + [make_example("x", "Odd."), make_example("y", "Odd.")]
    assert detect_text_features(two)["demo"] == (True, True)


def test_longform_detection():
    assert not corpus_stats([make_example()])["demo"].has_longform
    assert corpus_stats([make_example(y_prev="earlier")])["demo"].has_longform


texts = st.sampled_from(["plain", "Cased", "punct.", "Both!", "你好", "ok"])


@settings(max_examples=100, deadline=None)
@given(items=st.lists(st.tuples(texts, st.floats(0.1, 30)), min_size=1, max_size=30), seed=st.integers(0, 99))
def test_stats_permutation_invariant(items, seed):
    exs = [make_example(f"u{i}", t, duration=d) for i, (t, d) in enumerate(items)]
    shuffled = list(exs)
    random.Random(seed).shuffle(shuffled)
    assert corpus_stats(exs) == corpus_stats(shuffled)
    # sharded accumulation agrees with one pass
    half = len(exs) // 2
    merged = accumulate(exs[:half]).get("demo", StatsAccumulator("demo")).merge(accumulate(exs[half:])["demo"])
    assert merged.result() == corpus_stats(exs)["demo"]


@settings(max_examples=100, deadline=None)
@given(items=st.lists(texts, max_size=30), extra=st.sampled_from(["Yes, indeed.", "really?", "a, b"]))
def test_punctuation_monotone(items, extra):
    exs = [make_example(f"u{i}", t) for i, t in enumerate(items)]
    before = detect_text_features(exs).get("demo", (False, None))[0]
    after = detect_text_features(exs + [make_example("new", extra)])["demo"][0]
    assert after or not before


def test_read_texts_formats(tmp_path):
    j = write_lines(tmp_path / "h.jsonl", ['{"id": "a", "text": "x y"}', '{"id": "b", "hyp": ""}'])
    assert read_texts(j) == {"a": "x y", "b": ""}
    k = write_lines(tmp_path / "h.txt", ["a x y", "b"])
    assert read_texts(k) == {"a": "x y", "b": ""}
    bad = write_lines(tmp_path / "bad.jsonl", ['{"text": "x"}'])
    with pytest.raises(SchemaError):
        read_texts(bad)
    assert read_records(j)["a"]["text"] == "x y"
