import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from s2tcurate.textnorm import (
    IDENTITY,
    METRICS,
    PLAIN,
    NormalizationPolicy,
    Token,
    has_punctuation,
    is_punct,
    is_caseless,
    metric_unit_for,
    normalize,
    policy_for_metric,
    strip_punctuation,
    tokenize,
)

FOLD_STRIP = NormalizationPolicy(fold_case=True, strip_punctuation=True)

POLICIES = [
    IDENTITY,
    PLAIN,
    FOLD_STRIP,
    NormalizationPolicy(strip_punctuation=True),
    NormalizationPolicy(fold_case=True),
    NormalizationPolicy(collapse_whitespace=True),
    PLAIN.with_unit("char"),
    IDENTITY.with_unit("char"),
    NormalizationPolicy(strip_punctuation=True, extra_punctuation="$|"),
]

texts = st.text(
    alphabet=st.one_of(
        st.characters(blacklist_categories=("Cs",)),
        st.sampled_from(list("'-’ ,.!?\"«»¿¡、。abcXYZ ßİΣς́")),
    ),
    max_size=40,
)


def test_plain_policy_example():
    assert normalize("Hello, World!", PLAIN) == "hello world"


def test_identity_policy():
    assert normalize("hello world", IDENTITY) == "hello world"
    assert normalize("Hello,  World!", IDENTITY) == "Hello,  World!"


def test_fold_strip_on_literary_fragment():
    text = "What years of happiness have been mine, O Apollo,"
    assert normalize(text, FOLD_STRIP) == "what years of happiness have been mine o apollo"


def test_intra_word_apostrophe_and_hyphen_survive():
    assert strip_punctuation("don't well-known rock'n'roll") == "don't well-known rock'n'roll"
    assert strip_punctuation("'quoted' -dash- end-") == "quoted dash end"
    assert normalize("Don’t stop.", PLAIN) == "don’t stop"


def test_combining_mark_counts_as_letter():
    # "e" + combining acute, then an apostrophe, then a letter
    assert strip_punctuation("café's") == "café's"


def test_extra_punctuation():
    pol = NormalizationPolicy(strip_punctuation=True, extra_punctuation="$")
    assert normalize("cost $5", pol) == "cost 5"
    assert normalize("cost $5", NormalizationPolicy(strip_punctuation=True)) == "cost $5"


def test_char_unit_collapses_whitespace():
    assert normalize("a  b\tc", IDENTITY.with_unit("char")) == "a b c"


def test_has_punctuation():
    assert has_punctuation("Hello, world")
    assert not has_punctuation("don't stop")
    assert has_punctuation("你好。")


@pytest.mark.parametrize("policy", POLICIES)
@settings(max_examples=200, deadline=None)
@given(text=texts)
def test_normalize_idempotent(policy, text):
    once = normalize(text, policy)
    assert normalize(once, policy) == once


def test_token_examples():
    assert tokenize("mine,") == [Token(surface="mine,", core="mine", lead_punct="", trail_punct=",")]
    assert tokenize("") == []
    (tok,) = tokenize("'What")
    assert tok.core == "What" and tok.lead_punct == "'" and tok.trail_punct == ""


def test_punct_only_token():
    (tok,) = tokenize("--")
    assert tok.is_punct_only and tok.core == ""
    assert tok.lead_punct + tok.core + tok.trail_punct == "--"


def test_char_tokenize_skips_whitespace():
    assert [t.surface for t in tokenize("ab c", "char")] == ["a", "b", "c"]
    with pytest.raises(ValueError):
        tokenize("x", "syllable")


@settings(max_examples=300, deadline=None)
@given(text=texts)
def test_token_decomposition_lossless(text):
    for unit in ("word", "char"):
        for tok in tokenize(text, unit):
            assert tok.lead_punct + tok.core + tok.trail_punct == tok.surface
            if tok.core:
                assert not is_punct(tok.core[0]) and not is_punct(tok.core[-1])


@settings(max_examples=300, deadline=None)
@given(text=texts)
def test_word_tokens_rejoin_to_normalized(text):
    for policy in (PLAIN, NormalizationPolicy(collapse_whitespace=True)):
        norm = normalize(text, policy)
        assert " ".join(t.surface for t in tokenize(norm, "word")) == norm


def test_metric_unit_for():
    assert metric_unit_for("zho") == "char"
    assert metric_unit_for("eng") == "word"
    assert metric_unit_for("xxx") == "word"
    assert metric_unit_for(None) == "word"
    assert metric_unit_for("eng", char_languages={"eng"}) == "char"


def test_caseless():
    assert is_caseless("jpn") and not is_caseless("deu")


def test_metric_policies():
    assert policy_for_metric("pc-wer") == IDENTITY.with_unit("word")
    assert policy_for_metric("wer").fold_case
    assert set(METRICS) >= {"wer", "cer", "pc-wer", "pc-cer"}
    with pytest.raises(ValueError):
        policy_for_metric("bleu")
    with pytest.raises(ValueError):
        NormalizationPolicy(unit="phone")
