"""Levenshtein alignment with traceback and the error rates derived from it."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .textnorm import PLAIN, NormalizationPolicy, Token, metric_unit_for, normalize, tokenize

MATCH, SUB, INS, DEL = "match", "sub", "ins", "del"


@dataclass(frozen=True)
class AlignOp:
    kind: str
    ref_token: Token | None = None
    hyp_token: Token | None = None


@dataclass(frozen=True)
class Alignment:
    ops: tuple[AlignOp, ...]
    ref_len: int
    distance: int

    def count(self, kind: str) -> int:
        return sum(1 for op in self.ops if op.kind == kind)

    @property
    def counts(self) -> dict[str, int]:
        out = {MATCH: 0, SUB: 0, INS: 0, DEL: 0}
        for op in self.ops:
            out[op.kind] += 1
        return out

    def replay(self) -> list[Token]:
        """Apply the ops to the reference; yields the hypothesis tokens."""
        return [op.hyp_token for op in self.ops if op.kind != DEL]


def _surface(tok) -> str:
    return tok.surface if isinstance(tok, Token) else str(tok)


def align(ref: Sequence[Token], hyp: Sequence[Token]) -> Alignment:
    """Unit-cost Levenshtein alignment of two token lists.

    Tokens are compared by surface. Traceback prefers match, then sub, del,
    ins, so equal-cost alignments always resolve the same way.
    """
    r = [_surface(t) for t in ref]
    h = [_surface(t) for t in hyp]
    n, m = len(r), len(h)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        d[i][0] = i
    for j in range(1, m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        ri = r[i - 1]
        row, prev = d[i], d[i - 1]
        for j in range(1, m + 1):
            diag = prev[j - 1] + (0 if ri == h[j - 1] else 1)
            row[j] = min(diag, prev[j] + 1, row[j - 1] + 1)

    ops = []
    i, j = n, m
    while i > 0 or j > 0:
        cur = d[i][j]
        if i > 0 and j > 0 and r[i - 1] == h[j - 1] and d[i - 1][j - 1] == cur:
            ops.append(AlignOp(MATCH, ref[i - 1], hyp[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and d[i - 1][j - 1] + 1 == cur:
            ops.append(AlignOp(SUB, ref[i - 1], hyp[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and d[i - 1][j] + 1 == cur:
            ops.append(AlignOp(DEL, ref[i - 1], None))
            i -= 1
        else:
            ops.append(AlignOp(INS, None, hyp[j - 1]))
            j -= 1
    ops.reverse()
    return Alignment(tuple(ops), n, d[n][m])


@dataclass(frozen=True)
class ErrorRates:
    total: float
    sub_rate: float
    ins_rate: float
    del_rate: float
    sub: int = 0
    ins: int = 0
    dele: int = 0
    ref_len: int = 0
    hyp_len: int = 0
    # ref was empty while hyp was not; rates use max(1, hyp_len) as denominator
    degenerate: bool = False

    @property
    def errors(self) -> int:
        return self.sub + self.ins + self.dele

    @classmethod
    def from_counts(cls, sub: int, ins: int, dele: int, ref_len: int, hyp_len: int) -> "ErrorRates":
        if ref_len == 0 and hyp_len == 0:
            return cls(0.0, 0.0, 0.0, 0.0, sub, ins, dele, 0, 0)
        degenerate = ref_len == 0
        denom = ref_len if ref_len else max(1, hyp_len)
        return cls(
            (sub + ins + dele) / denom,
            sub / denom,
            ins / denom,
            dele / denom,
            sub,
            ins,
            dele,
            ref_len,
            hyp_len,
            degenerate,
        )

    @classmethod
    def from_alignment(cls, alignment: Alignment) -> "ErrorRates":
        c = alignment.counts
        hyp_len = c[MATCH] + c[SUB] + c[INS]
        return cls.from_counts(c[SUB], c[INS], c[DEL], alignment.ref_len, hyp_len)

    def as_dict(self) -> dict:
        return {
            "ref_len": self.ref_len,
            "hyp_len": self.hyp_len,
            "sub": self.sub,
            "ins": self.ins,
            "del": self.dele,
            "errors": self.errors,
            "rate": self.total,
            "degenerate": self.degenerate,
        }


def prepare(text: str, language: str | None, policy: NormalizationPolicy) -> list[Token]:
    unit = policy.unit or metric_unit_for(language)
    return tokenize(normalize(text, policy.with_unit(unit)), unit, policy.extra_punctuation)


def error_rate(
    ref_text: str, hyp_text: str, language: str | None = None, policy: NormalizationPolicy = PLAIN
) -> ErrorRates:
    ref = prepare(ref_text, language, policy)
    hyp = prepare(hyp_text, language, policy)
    return ErrorRates.from_alignment(align(ref, hyp))


def corpus_error_rate(
    pairs: Iterable[tuple],
    language: str | None = None,
    policy: NormalizationPolicy = PLAIN,
    average: bool = False,
) -> ErrorRates:
    """Pool error counts over ``(ref, hyp[, language])`` pairs.

    The default is the pooled rate (total errors over total reference length).
    ``average=True`` returns the unweighted mean of per-pair rates instead;
    counts are still summed.
    """
    sub = ins = dele = ref_len = hyp_len = 0
    per_pair = []
    for pair in pairs:
        ref, hyp = pair[0], pair[1]
        lang = pair[2] if len(pair) > 2 else language
        er = error_rate(ref, hyp, lang, policy)
        sub, ins, dele = sub + er.sub, ins + er.ins, dele + er.dele
        ref_len, hyp_len = ref_len + er.ref_len, hyp_len + er.hyp_len
        if average:
            per_pair.append(er)
    pooled = ErrorRates.from_counts(sub, ins, dele, ref_len, hyp_len)
    if not average or not per_pair:
        return pooled
    k = len(per_pair)
    return ErrorRates(
        sum(e.total for e in per_pair) / k,
        sum(e.sub_rate for e in per_pair) / k,
        sum(e.ins_rate for e in per_pair) / k,
        sum(e.del_rate for e in per_pair) / k,
        sub,
        ins,
        dele,
        ref_len,
        hyp_len,
        any(e.degenerate for e in per_pair),
    )
