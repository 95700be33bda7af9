"""Long-form splicing of consecutive clips, untranscribed-gap detection and deletion reports.

A timeline lists the timed segments of one recording. Segments with
``text = None`` are known untranscribed speech. A spliced example that spans
such a segment, or that leaves a large unexplained gap between its clips, has
audio the text does not cover. It is marked unclean.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .align import ErrorRates
from .manifest import AudioRef, DataError, Example, iter_jsonl

DEFAULT_MAX_DURATION = 30.0
DEFAULT_GAP_TOLERANCE = 0.5
DEFAULT_OVERLAP_TOLERANCE = 0.01


@dataclass(frozen=True)
class Segment:
    start_sec: float
    end_sec: float
    text: str | None = None
    id: str | None = None

    @property
    def transcribed(self) -> bool:
        return self.text is not None


@dataclass
class SegmentTimeline:
    recording_id: str
    segments: list[Segment]
    dataset: str = "longform"
    language: str = "eng"

    def validate(self, overlap_tolerance: float = DEFAULT_OVERLAP_TOLERANCE) -> None:
        for s in self.segments:
            if s.start_sec < 0 or not s.end_sec > s.start_sec:
                raise DataError(f"{self.recording_id}: bad segment times [{s.start_sec}, {s.end_sec}]")
        for a, b in zip(self.segments, self.segments[1:]):
            if b.start_sec < a.start_sec:
                raise DataError(f"{self.recording_id}: segments not sorted by start time")
            if a.end_sec > b.start_sec + overlap_tolerance:
                raise DataError(
                    f"{self.recording_id}: segments overlap ({a.start_sec}-{a.end_sec} vs {b.start_sec}-{b.end_sec})"
                )


@dataclass
class LongFormExample:
    example: Example
    clip_ids: list[str]
    clean: bool
    oversize: bool = False

    def to_example(self) -> Example:
        extra = dict(self.example.extra)
        extra.update({"clip_ids": list(self.clip_ids), "clean": self.clean, "oversize": self.oversize})
        return self.example.replace(extra=extra)

    @classmethod
    def from_example(cls, ex: Example) -> "LongFormExample":
        extra = dict(ex.extra)
        clip_ids = extra.pop("clip_ids", [ex.id])
        clean = extra.pop("clean", True)
        oversize = extra.pop("oversize", False)
        return cls(ex.replace(extra=extra), clip_ids, bool(clean), bool(oversize))


def read_segments(path) -> list[SegmentTimeline]:
    """Group a segments JSONL file into timelines, in first-seen recording order.

    Each line: ``{"recording_id", "start_sec", "end_sec", "text" (null if
    untranscribed), ["id", "dataset", "language"]}``. Segments are sorted by
    start time within each recording.
    """
    timelines: dict[str, SegmentTimeline] = {}
    for line_no, rec in iter_jsonl(path):
        try:
            rid = str(rec["recording_id"])
            seg = Segment(float(rec["start_sec"]), float(rec["end_sec"]), rec.get("text"), rec.get("id"))
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"{path}:{line_no}: bad segment record ({e!r})") from None
        if rid not in timelines:
            timelines[rid] = SegmentTimeline(rid, [], rec.get("dataset", "longform"), rec.get("language", "eng"))
        timelines[rid].segments.append(seg)
    for t in timelines.values():
        t.segments.sort(key=lambda s: (s.start_sec, s.end_sec))
    return list(timelines.values())


def _clip_id(timeline: SegmentTimeline, seg: Segment) -> str:
    return seg.id or f"{timeline.recording_id}-{round(seg.start_sec * 1000):08d}"


def window_is_clean(clips: list[Segment], untranscribed: Iterable[Segment], gap_tolerance: float) -> bool:
    start, end = clips[0].start_sec, clips[-1].end_sec
    for a, b in zip(clips, clips[1:]):
        if b.start_sec - a.end_sec > gap_tolerance:
            return False
    return not any(u.start_sec < end and u.end_sec > start for u in untranscribed)


def splice(
    timeline: SegmentTimeline,
    max_duration_sec: float = DEFAULT_MAX_DURATION,
    gap_tolerance: float = DEFAULT_GAP_TOLERANCE,
    overlap_tolerance: float = DEFAULT_OVERLAP_TOLERANCE,
) -> list[LongFormExample]:
    """Greedily pack consecutive transcribed clips into windows of at most ``max_duration_sec``.

    A clip longer than the limit on its own is emitted alone and flagged
    ``oversize``. ``y_prev`` of each window is the text of the previous window
    of the same recording.
    """
    timeline.validate(overlap_tolerance)
    clips = [s for s in timeline.segments if s.transcribed]
    untranscribed = [s for s in timeline.segments if not s.transcribed]

    windows: list[list[Segment]] = []
    for seg in clips:
        if windows and seg.end_sec - windows[-1][0].start_sec <= max_duration_sec:
            windows[-1].append(seg)
        else:
            windows.append([seg])

    out = []
    prev_text = ""
    for w in windows:
        start, end = w[0].start_sec, w[-1].end_sec
        text = " ".join(s.text.strip() for s in w if s.text.strip())
        ex_id = f"{timeline.recording_id}-{round(start * 1000):08d}-{round(end * 1000):08d}"
        ex = Example(
            id=ex_id,
            dataset=timeline.dataset,
            language=timeline.language,
            task="asr",
            audio=AudioRef(timeline.recording_id, start, end),
            y_src=text,
            y_tgt=text,
            duration_sec=end - start,
            y_prev=prev_text,
        )
        out.append(
            LongFormExample(
                ex,
                [_clip_id(timeline, s) for s in w],
                window_is_clean(w, untranscribed, gap_tolerance),
                oversize=end - start > max_duration_sec,
            )
        )
        prev_text = text
    return out


def clean_subset(examples: Iterable[LongFormExample]) -> list[LongFormExample]:
    return [e for e in examples if e.clean]


# --- deletion report ---------------------------------------------------------


def relative_change(old: float, new: float) -> float | None:
    """Signed relative change ``(new - old) / old``; negative means a reduction."""
    if old == 0:
        return 0.0 if new == 0 else None
    return (new - old) / old


@dataclass(frozen=True)
class DeletionRow:
    subset: str
    old_total: float
    old_del: float
    new_total: float
    new_del: float

    @classmethod
    def from_error_rates(cls, subset: str, old: ErrorRates, new: ErrorRates) -> "DeletionRow":
        return cls(subset, old.total, old.del_rate, new.total, new.del_rate)

    @property
    def rel_total(self) -> float | None:
        return relative_change(self.old_total, self.new_total)

    @property
    def rel_del(self) -> float | None:
        return relative_change(self.old_del, self.new_del)

    def as_dict(self) -> dict:
        return {
            "subset": self.subset,
            "old_total": self.old_total,
            "old_del": self.old_del,
            "new_total": self.new_total,
            "new_del": self.new_del,
            "rel_total": self.rel_total,
            "rel_del": self.rel_del,
        }

    def display(self, scale: float = 100.0) -> list[str]:
        def pct(v):
            return "n/a" if v is None else f"{v * 100:+.1f}%"

        return [
            self.subset,
            f"{self.old_total * scale:.1f} ({self.old_del * scale:.1f})",
            f"{self.new_total * scale:.1f} ({self.new_del * scale:.1f})",
            f"{pct(self.rel_total)} ({pct(self.rel_del)})",
        ]


def deletion_report(scored: Mapping[str, tuple[ErrorRates, ErrorRates]]) -> list[DeletionRow]:
    """One row per subset from ``{subset: (old system rates, new system rates)}``."""
    return [DeletionRow.from_error_rates(name, old, new) for name, (old, new) in scored.items()]
