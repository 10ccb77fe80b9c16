import numpy as np
import pytest
from hypothesis import given, strategies as st

from spandrop.core import ConfigError, DropConfig, SequenceExample, derive_stream
from spandrop.sampler import augment
from spandrop.segmentation import (
    mark_ngram_overlap,
    parse_strategy,
    segment,
    segment_adaptive,
    segment_delimiter,
    segment_fixed,
)

words = st.lists(st.sampled_from(["the", "cat", "sat", "on", "mat", ".", "The", "dog", "?"]), max_size=30)


def flatten(spans):
    return [t for s in spans for t in s.content]


def brute_marks(context, reference, N, fold_case=True):
    norm = (lambda t: t.lower()) if fold_case else (lambda t: t)
    ctx = [norm(t) for t in context]
    ref = [norm(t) for t in reference]
    ref_windows = [ref[j:j + N] for j in range(len(ref) - N + 1)]
    out = []
    for i in range(len(ctx)):
        hit = False
        for start in range(i - N + 1, i + 1):
            if start >= 0 and start + N <= len(ctx) and ctx[start:start + N] in ref_windows:
                hit = True
        out.append(hit)
    return out


def test_fixed_lengths():
    toks = [str(i) for i in range(10)]
    assert [len(s.content) for s in segment_fixed(toks, 4)] == [4, 4, 2]
    assert [len(s.content) for s in segment_fixed(toks, 1)] == [1] * 10
    with pytest.raises(ValueError):
        segment_fixed(toks, 0)


@given(words, st.integers(1, 12))
def test_fixed_partition(toks, k):
    spans = segment_fixed(toks, k)
    assert flatten(spans) == toks
    assert [s.index for s in spans] == list(range(len(spans)))


def test_delimiter_examples():
    spans = segment_delimiter(["a", ".", "b", "c", ".", "d"], {"."})
    assert [list(s.content) for s in spans] == [["a", "."], ["b", "c", "."], ["d"]]
    assert [list(s.content) for s in segment_delimiter(["a", "b"], {"."})] == [["a", "b"]]
    assert segment_delimiter([], {"."}) == []


@given(words)
def test_delimiter_partition(toks):
    spans = segment_delimiter(toks, {".", "?"})
    assert flatten(spans) == toks
    for s in spans[:-1]:
        assert s.content[-1] in {".", "?"}


def test_mark_overlap_example():
    assert mark_ngram_overlap(["the", "cat", "sat"], ["where", "is", "the", "cat"], 2) == [True, True, False]


def test_mark_no_overlap():
    assert mark_ngram_overlap(["a", "b", "c"], ["c", "b", "a"], 2) == [False] * 3


@pytest.mark.parametrize("N", [2, 3, 5])
def test_mark_self_overlap(N):
    toks = ["w1", "w2", "w3", "w4", "w5"]
    assert all(mark_ngram_overlap(toks, toks, N))


def test_mark_case_folding():
    assert mark_ngram_overlap(["The", "Cat"], ["the", "cat"], 2, fold_case=True) == [True, True]
    assert mark_ngram_overlap(["The", "Cat"], ["the", "cat"], 2, fold_case=False) == [False, False]


def test_mark_rejects_unigrams():
    with pytest.raises(ValueError):
        mark_ngram_overlap(["a"], ["a"], 1)


@given(words, words, st.integers(2, 4), st.booleans())
def test_mark_matches_window_scan(context, reference, N, fold):
    assert mark_ngram_overlap(context, reference, N, fold) == brute_marks(context, reference, N, fold)


def test_adaptive_example():
    spans, sup = segment_adaptive(
        ["the", "cat", "sat", "on", "the", "mat"], ["where", "is", "the", "cat"], 2
    )
    assert [list(s.content) for s in spans] == [["the", "cat"], ["sat"], ["on"], ["the"], ["mat"]]
    assert sup == {0}


def test_adaptive_no_and_full_overlap():
    spans, sup = segment_adaptive(["a", "b", "c"], ["x", "y"], 2)
    assert [list(s.content) for s in spans] == [["a"], ["b"], ["c"]] and sup == set()
    spans, sup = segment_adaptive(["a", "b", "c"], ["a", "b", "c"], 2)
    assert [list(s.content) for s in spans] == [["a", "b", "c"]] and sup == {0}


@given(words, words, st.integers(2, 3))
def test_adaptive_partition_and_maximal_runs(context, reference, N):
    spans, sup = segment_adaptive(context, reference, N)
    assert flatten(spans) == context
    marks = brute_marks(context, reference, N)
    # supporting spans are exactly the maximal marked runs
    pos = 0
    for s in spans:
        run = marks[pos:pos + len(s.content)]
        if s.index in sup:
            assert all(run)
            assert pos + len(run) == len(marks) or not marks[pos + len(run)]
        else:
            assert len(s.content) == 1 and not run[0]
        pos += len(s.content)
    assert all(b - a > 1 for a, b in zip(sorted(sup), sorted(sup)[1:]))


def test_reference_marks_other_strategies():
    toks = ["the", "cat", "sat", ".", "a", "dog", "ran", "."]
    spans, sup = segment(toks, parse_strategy("sentence=."), reference=["the", "cat", "?"])
    assert [list(s.content) for s in spans] == [["the", "cat", "sat", "."], ["a", "dog", "ran", "."]]
    assert sup == {0}
    spans, sup = segment(toks, parse_strategy("fixed=3"), reference=["sat", ".", "a"])
    assert sup == {0, 1}
    spans, sup = segment(toks, parse_strategy("token"))
    assert len(spans) == 8 and sup == set()


def test_parse_strategy():
    assert parse_strategy("adaptive=3").ngram == 3
    assert parse_strategy("sentence=.,!").enders == {".", "!"}
    assert parse_strategy("fixed=16").k == 16
    for bad in ("fixed=0", "adaptive=1", "words", "fixed=x"):
        with pytest.raises(ConfigError):
            parse_strategy(bad)
    with pytest.raises(ConfigError):
        segment(["a"], parse_strategy("adaptive=2"))


def test_noise_free_augment_keeps_reference_ngrams():
    context = "when did the war end ? the war ended in 1945 after many years of fighting".split()
    question = "when did the war end".split()
    spans, sup = segment_adaptive(context, question, 2)
    ex = SequenceExample("q", tuple(spans), sup, label="1945")
    before = sum(mark_ngram_overlap(ex.tokens(), question, 2))
    cfg = DropConfig(mode="beta_bernoulli", p=0.5, gamma=1.0, noise_free_policy="rejection")
    rng = derive_stream(0, 0)
    for _ in range(300):
        out = augment(ex, cfg, rng).example
        marks = mark_ngram_overlap(out.tokens(), question, 2)
        assert sum(marks) >= before
        pos = np.cumsum([0] + [len(s.content) for s in out.spans])
        for i in out.supporting:
            assert all(marks[pos[i]:pos[i + 1]])
