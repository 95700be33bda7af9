"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 endpoint failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .align import corpus_error_rate, error_rate
from .filtering import (
    DEFAULT_K_OVERRIDES,
    DISCARD,
    ConfigError,
    FilterConfig,
    filter_examples,
    group_languages,
    mean_cer_by_language,
    proxy_sample,
)
from .llmgate import (
    LLM_FAILED,
    OK,
    EndpointConfig,
    EndpointError,
    FeatureUnavailable,
    LLMClient,
    PromptRegistry,
    corpus_perplexity,
    generate_candidates,
    mock_client,
    perplexity,
)
from .longform import DeletionRow, LongFormExample, clean_subset, read_segments, splice
from .manifest import (
    STATS_COLUMNS,
    DataError,
    corpus_stats,
    format_table,
    is_jsonl,
    read_manifest,
    read_records,
    read_texts,
    stats_rows,
    write_jsonl,
    write_manifest,
)
from .restore import restore_manifest
from .textnorm import METRICS, policy_for_metric

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ENDPOINT = 0, 1, 2, 3

log = logging.getLogger("s2tcurate")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(rows_header, rows, fmt, records=None):
    if fmt == "json":
        print(json.dumps(records, indent=2, ensure_ascii=False))
    elif fmt == "tsv":
        print("\t".join(rows_header))
        for r in rows:
            print("\t".join(str(c) for c in r))
    else:
        print(format_table(rows_header, rows))


# --- stats -------------------------------------------------------------------


def cmd_stats(args):
    stats = corpus_stats(read_manifest(args.manifest), threshold=args.threshold)
    _emit(STATS_COLUMNS, stats_rows(stats), args.format, [s.as_dict() for s in stats.values()])
    if args.plot:
        from .plotting import plot_volume

        plot_volume(stats, args.plot)
    return EXIT_OK


# --- score -------------------------------------------------------------------


def _load_refs(path, field):
    """id -> (text, language) from a manifest or a Kaldi-style text file."""
    if is_jsonl(path):
        first = next(iter(read_records(path).values()), {})
        if "audio" in first:
            return {ex.id: (getattr(ex, field), ex.language) for ex in read_manifest(path)}
    return {k: (v, None) for k, v in read_texts(path).items()}


def cmd_score(args):
    refs = _load_refs(args.ref, args.field)
    hyps = read_texts(args.hyp)
    missing = [i for i in refs if i not in hyps]
    if missing:
        raise DataError(f"{len(missing)} reference id(s) have no hypothesis, e.g. {missing[0]!r}")
    policy = policy_for_metric(args.metric)
    pairs = [(ref, hyps[i], lang or args.language) for i, (ref, lang) in refs.items()]
    if args.per_example:
        write_jsonl(
            ({"id": i, **error_rate(r, h, lang, policy).as_dict()} for i, (r, h, lang) in zip(refs, pairs)),
            args.per_example,
        )
    rates = corpus_error_rate(pairs, policy=policy, average=args.average)
    header = ("metric", "utts", "ref_len", "errors", "rate", "sub", "ins", "del")
    row = [args.metric, len(pairs), rates.ref_len, rates.errors, f"{100 * rates.total:.2f}",
           f"{100 * rates.sub_rate:.2f}", f"{100 * rates.ins_rate:.2f}", f"{100 * rates.del_rate:.2f}"]
    rec = {"metric": args.metric, "utts": len(pairs), **rates.as_dict(), "sub_rate": rates.sub_rate,
           "ins_rate": rates.ins_rate, "del_rate": rates.del_rate, "averaged": args.average}
    _emit(header, [row], args.format, rec)
    return EXIT_OK


# --- filter ------------------------------------------------------------------


def _parse_overrides(items):
    out = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep or not name:
            raise UsageError(f"--k-override expects dataset=K, got {item!r}")
        try:
            out[name] = float(value)
        except ValueError:
            raise UsageError(f"--k-override value must be a number, got {value!r}") from None
    return out


def cmd_filter(args):
    overrides = {} if args.no_default_overrides else dict(DEFAULT_K_OVERRIDES)
    overrides.update(_parse_overrides(args.k_override))
    config = FilterConfig(k_percent=args.k, per_dataset_overrides=overrides, seed=args.seed,
                          proxy_N=args.proxy_n, by_duration=args.by_duration)
    examples = list(read_manifest(args.manifest))
    kept, decisions = filter_examples(examples, read_texts(args.hyp), config, jobs=args.jobs)
    write_manifest(kept, args.out)
    if args.decisions:
        write_jsonl((d.as_dict() for d in decisions), args.decisions)
    if args.proxy_out:
        sample = proxy_sample([e.id for e in kept], args.k, args.proxy_n, args.seed)
        write_jsonl(({"id": i} for i in sample), args.proxy_out)
    if args.groups:
        by_ds: dict[str, tuple[list, list]] = {}
        for ex, d in zip(examples, decisions):
            exs, cers = by_ds.setdefault(ex.dataset, ([], []))
            exs.append(ex)
            cers.append(d.cer)
        groups = {ds: {"mean_cer": mean_cer_by_language(exs, cers),
                       "groups": group_languages(mean_cer_by_language(exs, cers), args.group_size)}
                  for ds, (exs, cers) in sorted(by_ds.items())}
        Path(args.groups).write_text(json.dumps(groups, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    if args.plot:
        from .plotting import plot_cer_distribution

        plot_cer_distribution(decisions, args.plot)

    rows, summary = [], {}
    for d in decisions:
        s = summary.setdefault(d.dataset, {"k": d.k_percent, "n": 0, "discarded": 0})
        s["n"] += 1
        s["discarded"] += d.verdict == DISCARD
    for ds, s in sorted(summary.items()):
        rows.append([ds, s["n"], f"{s['k']:g}", s["discarded"], s["n"] - s["discarded"]])
    _emit(("dataset", "examples", "k%", "discarded", "kept"), rows, args.format,
          [{"dataset": r[0], "examples": r[1], "k_percent": float(r[2]), "discarded": r[3], "kept": r[4]}
           for r in rows])
    return EXIT_OK


# --- candidates / restore ----------------------------------------------------


def _client(args, registry):
    if args.endpoint == "mock":
        return mock_client(registry=registry)
    config = EndpointConfig.from_env(
        base_url=args.endpoint, model_name=args.model, timeout_sec=args.timeout,
        max_in_flight=args.max_in_flight, max_retries=args.retries,
    )
    return LLMClient(config)


def cmd_candidates(args):
    registry = PromptRegistry.from_file(args.prompts) if args.prompts else PromptRegistry()
    examples = list(read_manifest(args.manifest))
    with _client(args, registry) as client:
        records = generate_candidates(examples, client, registry)
    write_jsonl(records, args.out)
    failed = sum(r["status"] == LLM_FAILED for r in records)
    attempted = sum(r["status"] in (OK, LLM_FAILED) for r in records)
    print(f"candidates: {len(records)} written, {failed} llm_failed", file=sys.stderr)
    if attempted and failed == attempted:
        print("error: every request to the endpoint failed", file=sys.stderr)
        return EXIT_ENDPOINT
    return EXIT_OK


def cmd_restore(args):
    examples = list(read_manifest(args.manifest))
    restored, audit = restore_manifest(examples, read_records(args.candidates), args.threshold)
    write_manifest(restored, args.out)
    if args.audit:
        write_jsonl(audit, args.audit)
    counts: dict[str, int] = {}
    for a in audit:
        counts[a["status"]] = counts.get(a["status"], 0) + 1
    _emit(("status", "count"), sorted(counts.items()), args.format, counts)
    return EXIT_OK


# --- long form ---------------------------------------------------------------


def cmd_splice(args):
    spliced = []
    for tl in read_segments(args.segments):
        spliced.extend(splice(tl, args.max_dur, args.gap_tolerance))
    chosen = clean_subset(spliced) if args.clean_only else spliced
    write_manifest((e.to_example() for e in chosen), args.out)
    n_clean = sum(e.clean for e in spliced)
    rows = [[len(spliced), n_clean, len(spliced) - n_clean, sum(e.oversize for e in spliced), len(chosen)]]
    _emit(("examples", "clean", "unclean", "oversize", "written"), rows, args.format,
          dict(zip(("examples", "clean", "unclean", "oversize", "written"), rows[0])))
    return EXIT_OK


def cmd_deletions(args):
    examples = [LongFormExample.from_example(ex) for ex in read_manifest(args.manifest)]
    old, new = read_texts(args.hyp_old), read_texts(args.hyp_new)
    policy = policy_for_metric(args.metric)
    subsets = {"full": examples, "clean": clean_subset(examples)}
    rows = []
    for name, subset in subsets.items():
        for e in subset:
            if e.example.id not in old or e.example.id not in new:
                raise DataError(f"no hypothesis for {e.example.id!r} in both systems")
        rates = [
            corpus_error_rate(((e.example.y_tgt, h[e.example.id], e.example.language) for e in subset),
                              policy=policy)
            for h in (old, new)
        ]
        rows.append(DeletionRow.from_error_rates(name, *rates))
    _emit(("subset", "old (del)", "new (del)", "relative (del)"), [r.display() for r in rows], args.format,
          [r.as_dict() for r in rows])
    if args.plot:
        from .plotting import plot_deletion_report

        plot_deletion_report(rows, args.plot)
    return EXIT_OK


def cmd_perplexity(args):
    registry = PromptRegistry()
    if is_jsonl(args.input) and "audio" in next(iter(read_records(args.input).values()), {}):
        texts = {ex.id: getattr(ex, args.field) for ex in read_manifest(args.input)}
    else:
        texts = read_texts(args.input)
    per_text = {}
    with _client(args, registry) as client:
        for i, t in texts.items():
            if t.strip():
                per_text[i] = client.logprob(t)
    if args.per_example:
        write_jsonl(({"id": i, "tokens": len(v), "perplexity": perplexity(v)} for i, v in per_text.items()),
                    args.per_example)
    pooled = corpus_perplexity(per_text.values()) if per_text else float("nan")
    _emit(("texts", "tokens", "perplexity"),
          [[len(per_text), sum(len(v) for v in per_text.values()), f"{pooled:.2f}"]], args.format,
          {"texts": len(per_text), "tokens": sum(len(v) for v in per_text.values()), "perplexity": pooled})
    return EXIT_OK


# --- pipeline / toy ----------------------------------------------------------


def cmd_run(args):
    from .pipeline import load_config, run_pipeline

    config = load_config(args.config)
    out = args.out or Path(args.config).parent / "out"
    record = run_pipeline(config, Path(args.config).parent, out, seed=args.seed, jobs=args.jobs, plots=args.plots)
    rows = [[s["name"], json.dumps(s.get("counts", {})), f"{s['seconds']:.3f}"] for s in record["stages"]]
    _emit(("stage", "counts", "seconds"), rows, args.format, record)
    return EXIT_OK


def cmd_toy(args):
    from .toy import write_toy_corpus

    paths = write_toy_corpus(args.out, args.n, args.noise, args.seed)
    print(f"wrote toy corpus to {args.out} ({args.n} examples, {len(paths['noisy_ids'])} noisy)")
    return EXIT_OK


# --- parser ------------------------------------------------------------------


def _add_format(p, default="table"):
    p.add_argument("--format", choices=("table", "tsv", "json"), default=default)


def _add_endpoint(p):
    p.add_argument("--endpoint", default="mock", help="base URL of an OpenAI-compatible server, or 'mock'")
    p.add_argument("--model", default=None, help="model name (env S2TCURATE_LLM_MODEL)")
    p.add_argument("--timeout", type=float, default=None)
    p.add_argument("--max-in-flight", type=int, default=None)
    p.add_argument("--retries", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="s2tcurate", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--jobs", type=int, default=1, help="worker cap for parallel stages")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("stats", help="per-dataset volume and text-feature report")
    p.add_argument("--manifest", required=True)
    p.add_argument("--threshold", type=float, default=0.01, help="min fraction of examples for a feature")
    p.add_argument("--plot", help="write a volume bar chart (PNG/PDF/SVG by extension)")
    _add_format(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("score", help="CER/WER with sub/ins/del decomposition")
    p.add_argument("--ref", required=True, help="manifest JSONL or '<id> <text>' file")
    p.add_argument("--hyp", required=True, help="JSONL {id, text} or '<id> <text>' file")
    p.add_argument("--metric", choices=sorted(METRICS), default="auto")
    p.add_argument("--field", choices=("y_tgt", "y_src"), default="y_tgt")
    p.add_argument("--language", default=None, help="language for text-file references")
    p.add_argument("--average", action="store_true", help="mean of per-example rates instead of pooled")
    p.add_argument("--per-example", help="write per-example counts (JSONL)")
    _add_format(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("filter", help="discard the top-k%% highest-CER examples per dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--k", type=float, default=5.0)
    p.add_argument("--k-override", action="append", metavar="DATASET=K")
    p.add_argument("--no-default-overrides", action="store_true")
    p.add_argument("--by-duration", action="store_true", help="k%% of hours instead of example count")
    p.add_argument("--out", required=True)
    p.add_argument("--decisions")
    p.add_argument("--proxy-out", help="write a proxy-task sample of kept ids")
    p.add_argument("--proxy-n", type=int, default=50_000)
    p.add_argument("--groups", help="write per-dataset language groups by mean CER (JSON)")
    p.add_argument("--group-size", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--plot")
    _add_format(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("candidates", help="ask an LLM for punctuated, cased candidates")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--prompts", help="JSON/YAML with per-language prompt templates")
    _add_endpoint(p)
    p.set_defaults(func=cmd_candidates)

    p = sub.add_parser("restore", help="apply accepted case/punctuation edits from candidates")
    p.add_argument("--manifest", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--threshold", type=float, default=0.30)
    p.add_argument("--out", required=True)
    p.add_argument("--audit")
    _add_format(p)
    p.set_defaults(func=cmd_restore)

    p = sub.add_parser("splice", help="splice timed clips into long-form examples")
    p.add_argument("--segments", required=True)
    p.add_argument("--max-dur", type=float, default=30.0)
    p.add_argument("--gap-tolerance", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.add_argument("--clean-only", action="store_true")
    _add_format(p)
    p.set_defaults(func=cmd_splice)

    p = sub.add_parser("deletions", help="compare two systems on full vs clean long-form subsets")
    p.add_argument("--manifest", required=True, help="spliced manifest (with clean flags)")
    p.add_argument("--hyp-old", required=True)
    p.add_argument("--hyp-new", required=True)
    p.add_argument("--metric", choices=sorted(METRICS), default="auto")
    p.add_argument("--plot")
    _add_format(p)
    p.set_defaults(func=cmd_deletions)

    p = sub.add_parser("perplexity", help="LLM perplexity of texts via a log-prob endpoint")
    p.add_argument("--input", required=True, help="manifest or text file")
    p.add_argument("--field", choices=("y_tgt", "y_src"), default="y_tgt")
    p.add_argument("--per-example")
    _add_endpoint(p)
    _add_format(p)
    p.set_defaults(func=cmd_perplexity)

    p = sub.add_parser("run", help="run a declarative pipeline config")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--plots", action="store_true")
    _add_format(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("toy", help="write the synthetic toy corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--noise", type=float, default=0.10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_toy)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"s2tcurate: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (FeatureUnavailable, EndpointError) as e:
        print(f"s2tcurate: endpoint error: {e}", file=sys.stderr)
        return EXIT_ENDPOINT
    except (DataError, ConfigError, ValueError, FileNotFoundError, IsADirectoryError) as e:
        print(f"s2tcurate: data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
