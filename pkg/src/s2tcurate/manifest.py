"""Example data model, JSONL manifest I/O and per-dataset corpus statistics.

A manifest is UTF-8 text with one JSON object per line. Canonical lines are
written by :func:`dumps_example`; reading a canonical file and writing it back
reproduces it byte for byte.
"""

from __future__ import annotations

import json
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import IO, Iterable, Iterator

from .textnorm import CASELESS_LANGUAGES, has_punctuation

SCHEMA_VERSION = 1
TASKS = ("asr", "st")
REQUIRED_FIELDS = ("id", "dataset", "language", "task", "audio", "y_src", "y_tgt", "duration_sec")
KNOWN_FIELDS = frozenset(REQUIRED_FIELDS) | {"schema_version", "target_language", "y_prev"}


class DataError(Exception):
    """Input data is malformed or inconsistent."""


class ManifestError(DataError):
    def __init__(self, message: str, path=None, line_no: int | None = None, content: str | None = None):
        self.path = str(path) if path is not None else None
        self.line_no = line_no
        self.content = content
        where = ""
        if self.path is not None:
            where = f"{self.path}:{line_no}: " if line_no is not None else f"{self.path}: "
        elif line_no is not None:
            where = f"line {line_no}: "
        shown = ""
        if content is not None:
            snippet = content if len(content) <= 120 else content[:117] + "..."
            shown = f" [{snippet}]"
        super().__init__(f"{where}{message}{shown}")
        self.message = message


class SchemaError(ManifestError):
    def __init__(self, message: str, field_name: str | None = None, **kw):
        self.field = field_name
        super().__init__(message, **kw)


@dataclass(frozen=True)
class AudioRef:
    recording_id: str
    start_sec: float
    end_sec: float

    def __post_init__(self):
        if self.start_sec < 0:
            raise SchemaError("audio.start_sec must be nonnegative", "audio.start_sec")
        if not self.end_sec > self.start_sec:
            raise SchemaError("audio.end_sec must exceed audio.start_sec", "audio.end_sec")

    def to_dict(self) -> dict:
        return {"recording_id": self.recording_id, "start_sec": self.start_sec, "end_sec": self.end_sec}


@dataclass(frozen=True)
class Example:
    id: str
    dataset: str
    language: str
    task: str
    audio: AudioRef
    y_src: str
    y_tgt: str
    duration_sec: float
    y_prev: str = ""
    target_language: str | None = None
    # unknown fields are carried through untouched (e.g. long-form clip_ids)
    extra: dict = field(default_factory=dict, compare=True)

    def __post_init__(self):
        if self.task not in TASKS:
            raise SchemaError(f"task must be one of {TASKS}, got {self.task!r}", "task")
        if not self.duration_sec > 0:
            raise SchemaError("duration_sec must be positive", "duration_sec")
        if self.task == "asr" and self.target_language is not None:
            raise SchemaError("asr examples must not set target_language", "target_language")

    def replace(self, **changes) -> "Example":
        d = {
            "id": self.id,
            "dataset": self.dataset,
            "language": self.language,
            "task": self.task,
            "audio": self.audio,
            "y_src": self.y_src,
            "y_tgt": self.y_tgt,
            "duration_sec": self.duration_sec,
            "y_prev": self.y_prev,
            "target_language": self.target_language,
            "extra": dict(self.extra),
        }
        d.update(changes)
        return Example(**d)

    def to_dict(self) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "id": self.id,
            "dataset": self.dataset,
            "language": self.language,
            "task": self.task,
            "target_language": self.target_language,
            "audio": self.audio.to_dict(),
            "y_src": self.y_src,
            "y_tgt": self.y_tgt,
            "y_prev": self.y_prev,
            "duration_sec": self.duration_sec,
        }
        for k in sorted(self.extra):
            d[k] = self.extra[k]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Example":
        if not isinstance(d, dict):
            raise SchemaError("record must be a JSON object")
        for name in REQUIRED_FIELDS:
            if name not in d:
                raise SchemaError(f"missing required field '{name}'", name)
        version = d.get("schema_version", SCHEMA_VERSION)
        if not isinstance(version, int) or version > SCHEMA_VERSION:
            raise SchemaError(f"unsupported schema_version {version!r}", "schema_version")
        for name in ("id", "dataset", "language", "task", "y_src", "y_tgt"):
            if not isinstance(d[name], str):
                raise SchemaError(f"field '{name}' must be a string", name)
        y_prev = d.get("y_prev", "")
        if not isinstance(y_prev, str):
            raise SchemaError("field 'y_prev' must be a string", "y_prev")
        audio = d["audio"]
        if not isinstance(audio, dict):
            raise SchemaError("field 'audio' must be an object", "audio")
        for name in ("recording_id", "start_sec", "end_sec"):
            if name not in audio:
                raise SchemaError(f"missing required field 'audio.{name}'", f"audio.{name}")
        if not _is_number(d["duration_sec"]):
            raise SchemaError("field 'duration_sec' must be a number", "duration_sec")
        if not (_is_number(audio["start_sec"]) and _is_number(audio["end_sec"])):
            raise SchemaError("audio times must be numbers", "audio")
        extra = {k: v for k, v in d.items() if k not in KNOWN_FIELDS}
        return cls(
            id=d["id"],
            dataset=d["dataset"],
            language=d["language"],
            task=d["task"],
            audio=AudioRef(str(audio["recording_id"]), audio["start_sec"], audio["end_sec"]),
            y_src=d["y_src"],
            y_tgt=d["y_tgt"],
            duration_sec=d["duration_sec"],
            y_prev=y_prev,
            target_language=d.get("target_language"),
            extra=extra,
        )


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def dumps_example(example: Example) -> str:
    return json.dumps(example.to_dict(), ensure_ascii=False)


def iter_jsonl(path) -> Iterator[tuple[int, dict]]:
    """Yield ``(line_no, record)`` for every non-blank line of a JSONL file."""
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ManifestError(f"invalid JSON ({e.msg})", path, line_no, line.rstrip("\n")) from None
            yield line_no, rec


def read_manifest(path, check_unique: bool = True) -> Iterator[Example]:
    seen = set()
    for line_no, rec in iter_jsonl(path):
        try:
            ex = Example.from_dict(rec)
        except SchemaError as e:
            raise SchemaError(e.message, e.field, path=path, line_no=line_no, content=json.dumps(rec, ensure_ascii=False)) from None
        if check_unique:
            if ex.id in seen:
                raise SchemaError(f"duplicate id {ex.id!r}", "id", path=path, line_no=line_no)
            seen.add(ex.id)
        yield ex


@contextmanager
def _open_out(path_or_file):
    if hasattr(path_or_file, "write"):
        yield path_or_file
    else:
        p = Path(path_or_file)
        p.parent.mkdir(parents=True, exist_ok=True)
        with open(p, "w", encoding="utf-8", newline="\n") as f:
            yield f


def write_jsonl(records: Iterable[dict], path_or_file: str | Path | IO) -> int:
    n = 0
    with _open_out(path_or_file) as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False))
            f.write("\n")
            n += 1
    return n


def write_manifest(examples: Iterable[Example], path_or_file) -> int:
    n = 0
    with _open_out(path_or_file) as f:
        for ex in examples:
            f.write(dumps_example(ex))
            f.write("\n")
            n += 1
    return n


# --- statistics -----------------------------------------------------------

FEATURE_THRESHOLD = 0.01
_NS = 10**9


@dataclass(frozen=True)
class CorpusStats:
    dataset: str
    volume_hours: float
    num_examples: int
    languages: frozenset
    has_punctuation: bool
    # None means the dataset's languages have no case distinction
    has_case: bool | None
    has_longform: bool

    def as_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "volume_hours": self.volume_hours,
            "num_examples": self.num_examples,
            "languages": sorted(self.languages),
            "has_punctuation": self.has_punctuation,
            "has_case": self.has_case,
            "has_longform": self.has_longform,
        }


@dataclass
class StatsAccumulator:
    """Mergeable partial statistics for one dataset.

    Durations are summed as integer nanoseconds so the total does not depend on
    input order or on how a manifest was sharded.
    """

    dataset: str
    nanoseconds: int = 0
    count: int = 0
    languages: set = field(default_factory=set)
    punct_count: int = 0
    case_count: int = 0
    cased_language_seen: bool = False
    longform: bool = False

    def add(self, ex: Example, caseless=CASELESS_LANGUAGES) -> None:
        self.nanoseconds += round(ex.duration_sec * _NS)
        self.count += 1
        self.languages.add(ex.language)
        if has_punctuation(ex.y_tgt):
            self.punct_count += 1
        if any(ch.isupper() for ch in ex.y_tgt):
            self.case_count += 1
        if ex.language not in caseless:
            self.cased_language_seen = True
        if ex.y_prev or len(ex.extra.get("clip_ids") or ()) > 1:
            self.longform = True

    def merge(self, other: "StatsAccumulator") -> "StatsAccumulator":
        if other.dataset != self.dataset:
            raise ValueError("cannot merge statistics of different datasets")
        return StatsAccumulator(
            self.dataset,
            self.nanoseconds + other.nanoseconds,
            self.count + other.count,
            self.languages | other.languages,
            self.punct_count + other.punct_count,
            self.case_count + other.case_count,
            self.cased_language_seen or other.cased_language_seen,
            self.longform or other.longform,
        )

    def result(self, threshold: float = FEATURE_THRESHOLD) -> CorpusStats:
        has_case = _over_threshold(self.case_count, self.count, threshold) if self.cased_language_seen else None
        return CorpusStats(
            dataset=self.dataset,
            volume_hours=self.nanoseconds / (3600 * _NS),
            num_examples=self.count,
            languages=frozenset(self.languages),
            has_punctuation=_over_threshold(self.punct_count, self.count, threshold),
            has_case=has_case,
            has_longform=self.longform,
        )


def _over_threshold(hits: int, n: int, threshold: float) -> bool:
    if n == 0 or hits == 0:
        return False
    return Fraction(hits, n) >= Fraction(str(threshold))


def accumulate(examples: Iterable[Example], caseless=CASELESS_LANGUAGES) -> dict[str, StatsAccumulator]:
    acc: dict[str, StatsAccumulator] = {}
    for ex in examples:
        if ex.dataset not in acc:
            acc[ex.dataset] = StatsAccumulator(ex.dataset)
        acc[ex.dataset].add(ex, caseless)
    return acc


def corpus_stats(
    examples: Iterable[Example], threshold: float = FEATURE_THRESHOLD, caseless=CASELESS_LANGUAGES
) -> dict[str, CorpusStats]:
    acc = accumulate(examples, caseless)
    return {name: acc[name].result(threshold) for name in sorted(acc)}


def detect_text_features(
    examples: Iterable[Example], threshold: float = FEATURE_THRESHOLD, caseless=CASELESS_LANGUAGES
) -> dict[str, tuple[bool, bool | None]]:
    stats = corpus_stats(examples, threshold, caseless)
    return {name: (s.has_punctuation, s.has_case) for name, s in stats.items()}


def _mark(v: bool | None) -> str:
    return "-" if v is None else ("yes" if v else "no")


STATS_COLUMNS = ("dataset", "volume_h", "languages", "examples", "punctuation", "case", "long_form")


def stats_rows(stats: dict[str, CorpusStats]) -> list[list[str]]:
    rows = []
    for s in stats.values():
        langs = sorted(s.languages)
        rows.append(
            [
                s.dataset,
                f"{s.volume_hours:.3f}",
                langs[0] if len(langs) == 1 else str(len(langs)),
                str(s.num_examples),
                _mark(s.has_punctuation),
                _mark(s.has_case),
                _mark(s.has_longform),
            ]
        )
    return rows


def format_table(header, rows) -> str:
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)] if rows else [len(h) for h in header]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(header, widths)).rstrip()]
    for row in rows:
        lines.append("  ".join(str(c).ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines)


def _first_content_char(path) -> str:
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                return line.lstrip()[0]
    return ""


def is_jsonl(path) -> bool:
    return _first_content_char(path) == "{"


TEXT_KEYS = ("text", "hyp", "candidate_text", "y_tgt")


def read_texts(path) -> dict[str, str]:
    """Read ``id -> text`` from JSONL (``{"id", "text"}``) or Kaldi-style ``<id> <text>`` lines."""
    out: dict[str, str] = {}
    if is_jsonl(path):
        for line_no, rec in iter_jsonl(path):
            if not isinstance(rec, dict) or "id" not in rec:
                raise SchemaError("missing required field 'id'", "id", path=path, line_no=line_no)
            key = next((k for k in TEXT_KEYS if k in rec), None)
            if key is None:
                raise SchemaError("missing required field 'text'", "text", path=path, line_no=line_no)
            out[str(rec["id"])] = rec[key] or ""
        return out
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split(maxsplit=1)
            out[parts[0]] = parts[1] if len(parts) > 1 else ""
    return out


def read_records(path) -> dict[str, dict]:
    """Read JSONL records keyed by their ``id`` field."""
    out = {}
    for line_no, rec in iter_jsonl(path):
        if not isinstance(rec, dict) or "id" not in rec:
            raise SchemaError("missing required field 'id'", "id", path=path, line_no=line_no)
        out[str(rec["id"])] = rec
    return out
