"""Constrained acceptance of LLM punctuation and casing restoration.

The LLM candidate is aligned word by word against the original text. Only
casing substitutions, punctuation substitutions and inserted punctuation-only
tokens are taken from the candidate; every original word is kept. If the
candidate still differs too much from the result, it is rejected outright.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .align import DEL, INS, MATCH, SUB, AlignOp, align, error_rate
from .manifest import Example
from .textnorm import IDENTITY, PLAIN, fold_case, is_caseless, normalize, strip_punctuation, tokenize

EXACT_MATCH = "exact_match"
CASE_SUB = "case_sub"
PUNCT_SUB = "punct_sub"
PUNCT_INS = "punct_ins"
WORD_CHANGE = "word_change"
WORD_DELETION = "word_deletion"
ACCEPTED_CLASSES = frozenset({EXACT_MATCH, CASE_SUB, PUNCT_SUB, PUNCT_INS})

ACCEPTED = "accepted"
REJECTED_RESIDUAL = "rejected_residual"
REJECTED_NO_CHANGE = "rejected_no_change"

DEFAULT_THRESHOLD = 0.30


@dataclass(frozen=True)
class EditDecision:
    op: AlignOp
    cls: str
    accepted: bool

    def as_dict(self) -> dict:
        return {
            "kind": self.op.kind,
            "original": self.op.ref_token.surface if self.op.ref_token else None,
            "candidate": self.op.hyp_token.surface if self.op.hyp_token else None,
            "class": self.cls,
            "accepted": self.accepted,
        }


@dataclass(frozen=True)
class RestorationOutcome:
    original: str
    candidate: str
    applied: str
    residual_wer: float
    status: str
    decisions: tuple[EditDecision, ...] = ()
    field: str = "y_tgt"
    # text after accepted edits, before the residual check; equals applied unless rejected
    proposed: str | None = None

    def as_dict(self) -> dict:
        return {
            "field": self.field,
            "status": self.status,
            "residual_wer": self.residual_wer,
            "original": self.original,
            "candidate": self.candidate,
            "applied": self.applied,
            "proposed": self.proposed,
            "decisions": [d.as_dict() for d in self.decisions],
        }


def _plain(surface: str) -> str:
    return normalize(surface, PLAIN)


def _classify_sub(orig: str, cand: str, case_sensitive: bool) -> str:
    if _plain(orig) != _plain(cand):
        return WORD_CHANGE
    if fold_case(orig) == fold_case(cand):
        return CASE_SUB if case_sensitive else WORD_CHANGE
    if not case_sensitive and strip_punctuation(orig) != strip_punctuation(cand):
        return WORD_CHANGE
    return PUNCT_SUB


def classify_op(op: AlignOp, case_sensitive: bool = True) -> str:
    if op.kind == MATCH:
        return EXACT_MATCH
    if op.kind == SUB:
        return _classify_sub(op.ref_token.surface, op.hyp_token.surface, case_sensitive)
    if op.kind == INS:
        return PUNCT_INS if _plain(op.hyp_token.surface) == "" else WORD_CHANGE
    return WORD_DELETION


def classify_edits(original: str, candidate: str, case_sensitive: bool = True) -> list[EditDecision]:
    """Align ``candidate`` against ``original`` and classify every aligned pair.

    ``case_sensitive=False`` is for languages without a case distinction:
    case-only differences then count as word changes.
    """
    alignment = align(tokenize(original), tokenize(candidate))
    out = []
    for op in alignment.ops:
        cls = classify_op(op, case_sensitive)
        out.append(EditDecision(op, cls, cls in ACCEPTED_CLASSES))
    return out


def apply_accepted(original: str, decisions: Iterable[EditDecision]) -> str:
    decisions = list(decisions)
    if not any(d.accepted and d.op.kind != MATCH for d in decisions):
        return original
    words = []
    for d in decisions:
        kind = d.op.kind
        if kind == MATCH:
            words.append(d.op.ref_token.surface)
        elif kind == SUB:
            words.append((d.op.hyp_token if d.accepted else d.op.ref_token).surface)
        elif kind == INS:
            if d.accepted:
                words.append(d.op.hyp_token.surface)
        elif kind == DEL:
            words.append(d.op.ref_token.surface)
    return " ".join(words)


def residual_wer(applied: str, candidate: str) -> float:
    """WER of the raw candidate against the accepted text, punctuation and case retained."""
    return error_rate(applied, candidate, policy=IDENTITY.with_unit("word")).total


def restore_text(
    original: str, candidate: str, reject_threshold: float = DEFAULT_THRESHOLD, case_sensitive: bool = True,
    field: str = "y_tgt",
) -> RestorationOutcome:
    if not original.split():
        return RestorationOutcome(
            original, candidate, original, 0.0 if not candidate.split() else 1.0, REJECTED_NO_CHANGE, (), field, original
        )
    decisions = classify_edits(original, candidate, case_sensitive)
    applied = apply_accepted(original, decisions)
    residual = residual_wer(applied, candidate)
    if residual > reject_threshold:
        return RestorationOutcome(
            original, candidate, original, residual, REJECTED_RESIDUAL, tuple(decisions), field, applied
        )
    return RestorationOutcome(original, candidate, applied, residual, ACCEPTED, tuple(decisions), field, applied)


def restore_example(
    example: Example, candidate: str, reject_threshold: float = DEFAULT_THRESHOLD, field: str = "y_tgt"
) -> tuple[RestorationOutcome, Example]:
    """Restore one text field of ``example`` from an LLM ``candidate``.

    For ASR examples a restored ``y_tgt`` is copied to ``y_src`` as well. For ST
    examples ``field="y_src"`` restores the source transcript on its own. The
    successor's ``y_prev`` is handled by :func:`restore_manifest`.
    """
    if field not in ("y_tgt", "y_src"):
        raise ValueError(f"field must be y_tgt or y_src, got {field!r}")
    if field == "y_tgt" and example.task == "st":
        language = example.target_language
    else:
        language = example.language
    outcome = restore_text(
        getattr(example, field), candidate, reject_threshold, not is_caseless(language), field
    )
    if outcome.status != ACCEPTED or outcome.applied == outcome.original:
        return outcome, example
    changes = {field: outcome.applied}
    if example.task == "asr":
        changes = {"y_tgt": outcome.applied, "y_src": outcome.applied}
    return outcome, example.replace(**changes)


def _chain_order(examples: list[Example]) -> list[list[int]]:
    chains: dict[str, list[int]] = {}
    for i, ex in enumerate(examples):
        chains.setdefault(ex.audio.recording_id, []).append(i)
    return [sorted(idxs, key=lambda i: (examples[i].audio.start_sec, examples[i].id)) for idxs in chains.values()]


def propagate_prev(originals: list[Example], restored: list[Example]) -> list[Example]:
    """Rewrite each successor's ``y_prev`` when it quoted its predecessor's old ``y_tgt``.

    Successors are consecutive examples of the same recording ordered by start
    time. Only the immediate successor is rewritten.
    """
    out = list(restored)
    for chain in _chain_order(originals):
        for a, b in zip(chain, chain[1:]):
            old, new = originals[a].y_tgt, restored[a].y_tgt
            if old != new and out[b].y_prev == old and old:
                out[b] = out[b].replace(y_prev=new)
    return out


def restore_manifest(
    examples: Iterable[Example], candidates: Mapping[str, dict], reject_threshold: float = DEFAULT_THRESHOLD
) -> tuple[list[Example], list[dict]]:
    """Apply candidate records (``{id, candidate_text, status[, src_candidate_text]}``) to a manifest.

    Returns the restored examples in input order and one audit record per
    restoration attempt.
    """
    originals = list(examples)
    restored, audit = [], []
    for ex in originals:
        rec = candidates.get(ex.id)
        if rec is None:
            audit.append({"id": ex.id, "status": "no_candidate"})
            restored.append(ex)
            continue
        if rec.get("status", "ok") != "ok":
            audit.append({"id": ex.id, "status": rec.get("status")})
            restored.append(ex)
            continue
        cur = ex
        for field, key in (("y_tgt", "candidate_text"), ("y_src", "src_candidate_text")):
            text = rec.get(key)
            if text is None or (field == "y_src" and cur.task == "asr"):
                continue
            outcome, cur = restore_example(cur, text, reject_threshold, field)
            audit.append({"id": ex.id, **outcome.as_dict()})
        restored.append(cur)
    return propagate_prev(originals, restored), audit
