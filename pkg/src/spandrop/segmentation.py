"""Cutting token lists into spans.

All strategies partition the input: concatenating the span contents gives the
original token list back.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .core import ConfigError, Span

SENTENCE_ENDERS = frozenset({".", "!", "?"})


@dataclass(frozen=True)
class SegmentationSpec:
    strategy: str = "per_token"
    k: int = 1
    enders: frozenset[str] = SENTENCE_ENDERS
    ngram: int = 2
    fold_case: bool = True

    def __post_init__(self):
        if self.strategy not in ("per_token", "fixed", "delimiter", "adaptive"):
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.strategy == "fixed" and self.k < 1:
            raise ConfigError("fixed span size must be >= 1")
        if self.strategy == "adaptive" and self.ngram < 2:
            raise ConfigError("adaptive n-gram order must be >= 2")


def parse_strategy(text: str, fold_case: bool = True) -> SegmentationSpec:
    """Parse ``token``, ``fixed=K``, ``sentence=.,!,?`` or ``adaptive=N``."""
    name, _, arg = text.partition("=")
    try:
        if name in ("token", "per_token"):
            return SegmentationSpec("per_token", fold_case=fold_case)
        if name == "fixed":
            return SegmentationSpec("fixed", k=int(arg), fold_case=fold_case)
        if name in ("sentence", "delimiter"):
            enders = frozenset(arg.split(",")) if arg else SENTENCE_ENDERS
            return SegmentationSpec("delimiter", enders=enders, fold_case=fold_case)
        if name == "adaptive":
            return SegmentationSpec("adaptive", ngram=int(arg) if arg else 2, fold_case=fold_case)
    except ValueError:
        raise ConfigError(f"bad segmentation strategy {text!r}") from None
    raise ConfigError(f"bad segmentation strategy {text!r}")


def _spans(chunks: Iterable[Sequence[str]]) -> list[Span]:
    return [Span(i, tuple(c)) for i, c in enumerate(chunks)]


def segment_fixed(tokens: Sequence[str], k: int) -> list[Span]:
    if k < 1:
        raise ValueError("k must be >= 1")
    return _spans(tokens[i:i + k] for i in range(0, len(tokens), k))


def segment_delimiter(tokens: Sequence[str], enders: Iterable[str]) -> list[Span]:
    enders = set(enders)
    chunks, current = [], []
    for tok in tokens:
        current.append(tok)
        if tok in enders:
            chunks.append(current)
            current = []
    if current:
        chunks.append(current)
    return _spans(chunks)


def _norm(tokens: Sequence[str], fold_case: bool) -> list[str]:
    return [t.casefold() for t in tokens] if fold_case else list(tokens)


def mark_ngram_overlap(
    context: Sequence[str],
    reference: Sequence[str],
    N: int = 2,
    fold_case: bool = True,
) -> list[bool]:
    """Flag context tokens covered by some length-N window also found in ``reference``.

    Longer shared n-grams are covered by their length-N windows, so matching at
    exactly order N is enough.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    ctx = _norm(context, fold_case)
    ref = _norm(reference, fold_case)
    grams = {tuple(ref[i:i + N]) for i in range(len(ref) - N + 1)}
    marks = [False] * len(ctx)
    for i in range(len(ctx) - N + 1):
        if tuple(ctx[i:i + N]) in grams:
            marks[i:i + N] = [True] * N
    return marks


def segment_adaptive(
    context: Sequence[str],
    reference: Sequence[str],
    N: int = 2,
    fold_case: bool = True,
) -> tuple[list[Span], frozenset[int]]:
    """Merge each maximal run of overlap-marked tokens into one supporting span.

    Unmarked tokens become singleton spans.
    """
    marks = mark_ngram_overlap(context, reference, N, fold_case)
    chunks: list[list[str]] = []
    supporting = set()
    prev = False
    for tok, marked in zip(context, marks):
        if marked and prev:
            chunks[-1].append(tok)
        else:
            if marked:
                supporting.add(len(chunks))
            chunks.append([tok])
        prev = marked
    return _spans(chunks), frozenset(supporting)


def supporting_from_marks(spans: Sequence[Span], marks: Sequence[bool]) -> frozenset[int]:
    """Indices of spans containing at least one marked token."""
    out, pos = set(), 0
    for span in spans:
        if any(marks[pos:pos + len(span.content)]):
            out.add(span.index)
        pos += len(span.content)
    return frozenset(out)


def segment(
    tokens: Sequence[str],
    spec: SegmentationSpec,
    reference: Sequence[str] | None = None,
) -> tuple[list[Span], frozenset[int]]:
    """Segment ``tokens`` and, given a reference, mark spans sharing its n-grams."""
    if spec.strategy == "adaptive":
        if reference is None:
            raise ConfigError("adaptive segmentation needs a reference token list")
        return segment_adaptive(tokens, reference, spec.ngram, spec.fold_case)
    if spec.strategy == "per_token":
        spans = segment_fixed(tokens, 1)
    elif spec.strategy == "fixed":
        spans = segment_fixed(tokens, spec.k)
    else:
        spans = segment_delimiter(tokens, spec.enders)
    if reference is None:
        return spans, frozenset()
    marks = mark_ngram_overlap(tokens, reference, spec.ngram, spec.fold_case)
    return spans, supporting_from_marks(spans, marks)
