"""Independent reference implementations used to check the production code.

None of these share code with the package beyond plain data types.
"""

from __future__ import annotations

import sys
from functools import lru_cache
from itertools import product

PREFERENCE = ("match", "sub", "del", "ins")


def _prefix_distance(a, b):
    """Memoized recursion d(i, j) = distance(a[:i], b[:j]); no table, no traceback."""
    sys.setrecursionlimit(max(10_000, sys.getrecursionlimit()))

    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(
            d(i - 1, j - 1) + (a[i - 1] != b[j - 1]),
            d(i - 1, j) + 1,
            d(i, j - 1) + 1,
        )

    return d


def recursive_distance(a, b) -> int:
    a, b = tuple(a), tuple(b)
    return _prefix_distance(a, b)(len(a), len(b))


def lexmin_ops(a, b) -> list[str]:
    """Op kinds of the optimal alignment whose reversed op sequence is
    lexicographically smallest under match < sub < del < ins."""
    a, b = tuple(a), tuple(b)
    d = _prefix_distance(a, b)
    ops = []
    i, j = len(a), len(b)
    while i or j:
        target = d(i, j)
        options = {
            "match": (i > 0 and j > 0 and a[i - 1] == b[j - 1], i - 1, j - 1, 0),
            "sub": (i > 0 and j > 0, i - 1, j - 1, 1),
            "del": (i > 0, i - 1, j, 1),
            "ins": (j > 0, i, j - 1, 1),
        }
        for kind in PREFERENCE:
            ok, pi, pj, cost = options[kind]
            if ok and d(pi, pj) + cost == target:
                ops.append(kind)
                i, j = pi, pj
                break
    return ops[::-1]


def achievable_decompositions(a, b) -> set[tuple[int, int, int]]:
    """Every (sub, ins, del) triple reachable by some minimum-cost alignment."""
    n, m = len(a), len(b)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    sets = [[set() for _ in range(m + 1)] for _ in range(n + 1)]
    sets[0][0] = {(0, 0, 0)}
    for i in range(n + 1):
        for j in range(m + 1):
            if i == 0 and j == 0:
                continue
            cands = []
            if i and j:
                c = 0 if a[i - 1] == b[j - 1] else 1
                cands.append((dist[i - 1][j - 1] + c, [(s + c, ins, de) for s, ins, de in sets[i - 1][j - 1]]))
            if i:
                cands.append((dist[i - 1][j] + 1, [(s, ins, de + 1) for s, ins, de in sets[i - 1][j]]))
            if j:
                cands.append((dist[i][j - 1] + 1, [(s, ins + 1, de) for s, ins, de in sets[i][j - 1]]))
            best = min(c for c, _ in cands)
            dist[i][j] = best
            sets[i][j] = {t for c, ts in cands if c == best for t in ts}
    return sets[n][m]


def enumerate_alignments(a, b):
    """Yield every alignment (as a list of op kinds) of two short sequences."""

    def rec(i, j):
        if i == len(a) and j == len(b):
            yield []
            return
        if i < len(a) and j < len(b):
            kind = "match" if a[i] == b[j] else "sub"
            for rest in rec(i + 1, j + 1):
                yield [kind] + rest
        if i < len(a):
            for rest in rec(i + 1, j):
                yield ["del"] + rest
        if j < len(b):
            for rest in rec(i, j + 1):
                yield ["ins"] + rest

    yield from rec(0, 0)


def brute_force_best(a, b):
    """(distance, lexmin reversed alignment) by exhaustive enumeration."""
    rank = {k: r for r, k in enumerate(PREFERENCE)}
    best = None
    for ops in enumerate_alignments(a, b):
        cost = sum(k != "match" for k in ops)
        key = (cost, [rank[k] for k in reversed(ops)])
        if best is None or key < best[0]:
            best = (key, ops)
    return best[0][0], best[1]


def all_sequences(alphabet, max_len):
    for n in range(max_len + 1):
        yield from product(alphabet, repeat=n)


def scan_clean(segments, clip_ids, gap_tolerance):
    """Sweep a recording's segments in time order and decide whether the window
    formed by ``clip_ids`` is free of untranscribed speech and large gaps.

    ``segments`` are dicts with id, start, end, text (None = untranscribed).
    """
    chosen = [s for s in segments if s["id"] in set(clip_ids)]
    lo = min(s["start"] for s in chosen)
    hi = max(s["end"] for s in chosen)
    covered = None
    for s in sorted(segments, key=lambda s: (s["start"], s["end"])):
        if s["end"] <= lo or s["start"] >= hi:
            continue
        if s["text"] is None:
            return False
        if s["id"] not in clip_ids:
            continue
        if covered is not None and s["start"] - covered > gap_tolerance:
            return False
        covered = s["end"] if covered is None else max(covered, s["end"])
    return True
