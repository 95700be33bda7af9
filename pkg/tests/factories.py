from s2tcurate.manifest import AudioRef, Example


def make_example(id="u1", text="hello world", dataset="demo", language="eng", task="asr", start=0.0,
                 duration=1.0, recording=None, y_prev="", y_src=None, target_language=None, **extra):
    return Example(
        id=id,
        dataset=dataset,
        language=language,
        task=task,
        audio=AudioRef(recording or f"rec-{id}", start, start + duration),
        y_src=text if y_src is None else y_src,
        y_tgt=text,
        duration_sec=duration,
        y_prev=y_prev,
        target_language=target_language,
        extra=extra,
    )


WORDS = ("the cat sat on mat he went toward god and made reverence began to speak apollo o joy what "
         "years of happiness have been mine through your friendship for me said admetus don't well-known").split()
PUNCT = (",", ".", "?", "!", ";", ":", "'", "\"", "?'")


def mutate(rng, words):
    """Candidate text derived from ``words`` by case flips, punctuation
    attachment, word swaps, word insertions and the occasional deletion."""
    out = []
    for w in words:
        r = rng.random()
        if r < 0.2:
            w = w[:1].upper() + w[1:]
        elif r < 0.25:
            w = w.upper()
        r = rng.random()
        if r < 0.2:
            w = w + rng.choice(PUNCT)
        elif r < 0.25:
            w = rng.choice(PUNCT) + w
        r = rng.random()
        if r < 0.08:
            w = rng.choice(WORDS)
        elif r < 0.12:
            continue
        out.append(w)
        r = rng.random()
        if r < 0.06:
            out.append(rng.choice(WORDS))
        elif r < 0.1:
            out.append(rng.choice(PUNCT))
    return " ".join(out)


def random_sentence(rng, lo=1, hi=15):
    return " ".join(rng.choice(WORDS) for _ in range(rng.randint(lo, hi)))


def random_timeline(rng, rid="rec", n_segments=None, max_clip=12.0):
    """A sorted, non-overlapping segment list with short gaps, long gaps and
    untranscribed stretches. Returns ``(SegmentTimeline, list of dicts)``."""
    from s2tcurate.longform import Segment, SegmentTimeline

    n = n_segments if n_segments is not None else rng.randint(0, 25)
    t = round(rng.uniform(0, 2), 1)
    segs = []
    for i in range(n):
        dur = round(rng.uniform(0.3, max_clip), 1) if rng.random() > 0.03 else round(rng.uniform(30, 40), 1)
        untranscribed = rng.random() < 0.15
        text = None if untranscribed else f"w{i} " * rng.randint(1, 3)
        segs.append({"id": f"{rid}-s{i}", "start": t, "end": round(t + dur, 1), "text": text})
        r = rng.random()
        gap = 0.0 if r < 0.3 else round(rng.uniform(0.1, 0.5), 1) if r < 0.8 else round(rng.uniform(0.6, 5), 1)
        t = round(t + dur + gap, 1)
    timeline = SegmentTimeline(rid, [Segment(s["start"], s["end"], s["text"], s["id"]) for s in segs])
    return timeline, segs
