"""CER-based data filtering: rank, discard the worst k%, group languages, sample proxy sets."""

from __future__ import annotations

import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .align import error_rate
from .manifest import DataError, Example
from .textnorm import PLAIN

KEEP, DISCARD = "keep", "discard"

DEFAULT_K = 5.0
# dataset name (case-insensitive) -> k%
DEFAULT_K_OVERRIDES = {"librispeech": 15.0, "gigaspeech": 35.0, "wenetspeech": 45.0, "gigast": 35.0}


class ConfigError(ValueError):
    pass


def _check_k(k_percent) -> Fraction:
    try:
        k = Fraction(str(k_percent))
    except ValueError:
        raise ConfigError(f"k must be a number, got {k_percent!r}") from None
    if not 0 <= k <= 100:
        raise ConfigError(f"k must lie in [0, 100], got {k_percent}")
    return k


@dataclass
class FilterConfig:
    k_percent: float = DEFAULT_K
    group_size: int = 5
    proxy_N: int = 50_000
    seed: int = 0
    per_dataset_overrides: dict = field(default_factory=lambda: dict(DEFAULT_K_OVERRIDES))
    by_duration: bool = False

    def __post_init__(self):
        _check_k(self.k_percent)
        for name, k in self.per_dataset_overrides.items():
            _check_k(k)
        if self.proxy_N < 1:
            raise ConfigError("proxy_N must be at least 1")
        if self.group_size < 1:
            raise ConfigError("group_size must be at least 1")

    def k_for(self, dataset: str) -> float:
        lowered = {name.lower(): k for name, k in self.per_dataset_overrides.items()}
        return lowered.get(dataset.lower(), self.k_percent)


@dataclass(frozen=True)
class FilterDecision:
    example_id: str
    cer: float
    rank: int
    verdict: str
    dataset: str | None = None
    k_percent: float | None = None

    def as_dict(self) -> dict:
        d = {"id": self.example_id, "cer": self.cer, "rank": self.rank, "verdict": self.verdict}
        if self.dataset is not None:
            d["dataset"] = self.dataset
            d["k_percent"] = self.k_percent
        return d


def discard_count(n: int, k_percent) -> int:
    return math.floor(n * _check_k(k_percent) / 100)


def _ranked(scored):
    for ex_id, cer in scored:
        if not cer >= 0:
            raise DataError(f"CER must be nonnegative, got {cer!r} for {ex_id!r}")
    # worst first; ties broken by ascending id
    return sorted(scored, key=lambda p: (-p[1], p[0]))


def rank_and_discard(scored: Iterable[tuple[str, float]], k_percent: float) -> list[FilterDecision]:
    """Sort by CER (descending, ties by id) and discard the first floor(n*k/100).

    Decisions come back in input order; ``rank`` 1 is the worst example.
    """
    scored = list(scored)
    n_discard = discard_count(len(scored), k_percent)
    rank_of = {ex_id: r for r, (ex_id, _) in enumerate(_ranked(scored), 1)}
    if len(rank_of) != len(scored):
        raise DataError("duplicate example ids in scored input")
    return [
        FilterDecision(ex_id, cer, rank_of[ex_id], DISCARD if rank_of[ex_id] <= n_discard else KEEP)
        for ex_id, cer in scored
    ]


def rank_and_discard_by_duration(
    scored: Iterable[tuple[str, float, float]], k_percent: float
) -> list[FilterDecision]:
    """Duration-weighted variant: discard worst-first while the discarded hours stay within k% of the total."""
    k = _check_k(k_percent)
    scored = list(scored)
    budget = k / 100 * sum(Fraction(d) for _, _, d in scored)
    ranked = _ranked([(i, c) for i, c, _ in scored])
    dur = {i: Fraction(d) for i, _, d in scored}
    rank_of, used, cutoff = {}, Fraction(0), 0
    for r, (ex_id, _) in enumerate(ranked, 1):
        rank_of[ex_id] = r
        if cutoff == r - 1 and used + dur[ex_id] <= budget:
            used += dur[ex_id]
            cutoff = r
    return [
        FilterDecision(ex_id, cer, rank_of[ex_id], DISCARD if rank_of[ex_id] <= cutoff else KEEP)
        for ex_id, cer, _ in scored
    ]


def group_languages(per_language_mean_cer: Mapping[str, float], group_size: int = 5) -> list[list[str]]:
    if group_size < 1:
        raise ConfigError("group_size must be at least 1")
    langs = sorted(per_language_mean_cer, key=lambda lang: (per_language_mean_cer[lang], lang))
    return [langs[i : i + group_size] for i in range(0, len(langs), group_size)]


def proxy_target_size(k_percent: float, N: int) -> int:
    exact = N * (100 - _check_k(k_percent)) / 100
    return math.floor(exact + Fraction(1, 2))


def proxy_sample(kept: Iterable[str], k_percent: float, N: int = 50_000, seed: int = 0) -> list[str]:
    if N < 1:
        raise ConfigError("N must be at least 1")
    pool = sorted(kept)
    size = min(proxy_target_size(k_percent, N), len(pool))
    return sorted(random.Random(seed).sample(pool, size))


# --- manifest-level driver -------------------------------------------------


def example_cer(example: Example, hypothesis: str) -> float:
    # ASR on y_src is the proxy for every task, including ST
    return error_rate(example.y_src, hypothesis, example.language, PLAIN.with_unit("char")).total


def _cer_job(args):
    return example_cer(*args)


def score_examples(examples: list[Example], hyps: Mapping[str, str], jobs: int = 1) -> list[float]:
    missing = [ex.id for ex in examples if ex.id not in hyps]
    if missing:
        shown = ", ".join(missing[:5]) + (" ..." if len(missing) > 5 else "")
        raise DataError(f"{len(missing)} example(s) have no hypothesis: {shown}")
    work = [(ex, hyps[ex.id]) for ex in examples]
    if jobs > 1 and len(work) > 256:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_cer_job, work, chunksize=128))
    return [_cer_job(w) for w in work]


def mean_cer_by_language(examples: list[Example], cers: list[float]) -> dict[str, float]:
    sums: dict[str, list] = {}
    for ex, c in zip(examples, cers):
        sums.setdefault(ex.language, []).append(c)
    return {lang: sum(v) / len(v) for lang, v in sums.items()}


def filter_examples(
    examples: Iterable[Example], hyps: Mapping[str, str], config: FilterConfig | None = None, jobs: int = 1
) -> tuple[list[Example], list[FilterDecision]]:
    """Score every example against its hypothesis and apply the per-dataset k% discard.

    Returns kept examples in input order and one decision per input example
    (input order).
    """
    config = config or FilterConfig()
    examples = list(examples)
    cers = score_examples(examples, hyps, jobs)
    by_dataset: dict[str, list[int]] = {}
    for idx, ex in enumerate(examples):
        by_dataset.setdefault(ex.dataset, []).append(idx)

    decisions: list[FilterDecision | None] = [None] * len(examples)
    for dataset, idxs in by_dataset.items():
        k = config.k_for(dataset)
        if config.by_duration:
            part = rank_and_discard_by_duration(
                [(examples[i].id, cers[i], examples[i].duration_sec) for i in idxs], k
            )
        else:
            part = rank_and_discard([(examples[i].id, cers[i]) for i in idxs], k)
        for i, dec in zip(idxs, part):
            decisions[i] = FilterDecision(dec.example_id, dec.cer, dec.rank, dec.verdict, dataset, k)
    kept = [ex for ex, dec in zip(examples, decisions) if dec.verdict == KEEP]
    return kept, decisions
