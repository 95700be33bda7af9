"""Text normalization and tokenization shared by scoring, filtering and restoration.

Punctuation is any character in a Unicode ``P*`` category, plus optional
extras. Apostrophes and hyphens with a letter on both sides are treated as part
of the word, so ``don't`` and ``well-known`` survive punctuation stripping.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass

CHAR_UNIT_LANGUAGES = frozenset({"zho", "jpn", "kor", "tha"})
CASELESS_LANGUAGES = frozenset({"zho", "jpn", "kor", "tha"})

INTRA_WORD = frozenset("'-’‐‑")

UNITS = ("word", "char")


@dataclass(frozen=True)
class NormalizationPolicy:
    fold_case: bool = False
    strip_punctuation: bool = False
    collapse_whitespace: bool = False
    # None defers to metric_unit_for(language)
    unit: str | None = None
    extra_punctuation: str = ""

    def __post_init__(self):
        if self.unit is not None and self.unit not in UNITS:
            raise ValueError(f"unit must be one of {UNITS}, got {self.unit!r}")

    def with_unit(self, unit: str | None) -> "NormalizationPolicy":
        return NormalizationPolicy(
            self.fold_case, self.strip_punctuation, self.collapse_whitespace, unit, self.extra_punctuation
        )


IDENTITY = NormalizationPolicy()
PLAIN = NormalizationPolicy(fold_case=True, strip_punctuation=True, collapse_whitespace=True)

METRICS = {
    "wer": PLAIN.with_unit("word"),
    "cer": PLAIN.with_unit("char"),
    "pc-wer": IDENTITY.with_unit("word"),
    "pc-cer": IDENTITY.with_unit("char"),
    # unit chosen per language
    "auto": PLAIN,
    "pc-auto": IDENTITY,
}


def policy_for_metric(name: str) -> NormalizationPolicy:
    try:
        return METRICS[name]
    except KeyError:
        raise ValueError(f"unknown metric {name!r}; choose from {sorted(METRICS)}") from None


def is_punct(ch: str, extras: str = "") -> bool:
    return unicodedata.category(ch).startswith("P") or ch in extras


def _is_letter(ch: str) -> bool:
    # combining marks count so decomposed accents keep their word intact
    return ch.isalpha() or unicodedata.category(ch).startswith("M")


def _removable(text: str, i: int, extras: str) -> bool:
    ch = text[i]
    if not is_punct(ch, extras):
        return False
    if ch in INTRA_WORD and 0 < i < len(text) - 1:
        return not (_is_letter(text[i - 1]) and _is_letter(text[i + 1]))
    return True


def strip_punctuation(text: str, extras: str = "") -> str:
    return "".join(ch for i, ch in enumerate(text) if not _removable(text, i, extras))


def has_punctuation(text: str, extras: str = "") -> bool:
    return any(_removable(text, i, extras) for i in range(len(text)))


def fold_case(text: str) -> str:
    # str.lower is the closest stdlib analogue of simple (1:1) case folding;
    # casefold() would expand e.g. "ß" to "ss" and change token lengths.
    return text.lower()


def normalize(text: str, policy: NormalizationPolicy) -> str:
    """Apply ``policy`` to ``text``. Deterministic and idempotent."""
    if policy.fold_case:
        text = fold_case(text)
    if policy.strip_punctuation:
        text = strip_punctuation(text, policy.extra_punctuation)
    if policy.collapse_whitespace or policy.unit == "char":
        text = " ".join(text.split())
    return text


@dataclass(frozen=True)
class Token:
    surface: str
    core: str
    lead_punct: str = ""
    trail_punct: str = ""

    @classmethod
    def from_surface(cls, surface: str, extras: str = "") -> "Token":
        n = len(surface)
        i = 0
        while i < n and is_punct(surface[i], extras):
            i += 1
        if i == n:
            return cls(surface, "", surface, "")
        j = n
        while j > i and is_punct(surface[j - 1], extras):
            j -= 1
        return cls(surface, surface[i:j], surface[:i], surface[j:])

    @property
    def is_punct_only(self) -> bool:
        return self.core == "" and self.surface != ""

    def __str__(self):
        return self.surface


def tokenize(text: str, unit: str = "word", extras: str = "") -> list[Token]:
    if unit == "word":
        return [Token.from_surface(w, extras) for w in text.split()]
    if unit == "char":
        return [Token.from_surface(c, extras) for c in text if not c.isspace()]
    raise ValueError(f"unit must be one of {UNITS}, got {unit!r}")


def metric_unit_for(language: str | None, char_languages=CHAR_UNIT_LANGUAGES) -> str:
    return "char" if language in char_languages else "word"


def is_caseless(language: str | None, caseless_languages=CASELESS_LANGUAGES) -> bool:
    return language in caseless_languages
