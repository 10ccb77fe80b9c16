"""FindAnimals: is a short name hidden, in order, inside a random letter string?

Negatives are random strings that provably do not contain the needle as a
subsequence. Positives take a negative and overwrite ``len(needle)`` increasing
positions with the needle's characters; those positions are the supporting
spans. Every character is its own span.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .core import ConfigError, RandomStream, SequenceExample, Span, derive_stream

# stream ids 0..count-1 belong to examples
LABEL_STREAM = (1 << 64) - 1


@dataclass(frozen=True)
class TaskConfig:
    needle: str = "cat"
    n: int = 300
    alphabet: str = string.ascii_lowercase
    count: int = 10_000
    position_mode: str = "uniform"
    fixed_positions: tuple[int, ...] = ()
    first_k: int = 0
    seed: int = 0

    def __post_init__(self):
        m = len(self.needle)
        if m < 1:
            raise ConfigError("needle must be non-empty")
        if m > self.n:
            raise ConfigError(f"needle length {m} exceeds sequence length {self.n}")
        if len(set(self.alphabet)) != len(self.alphabet) or len(self.alphabet) < 2:
            raise ConfigError("alphabet needs at least 2 distinct characters")
        if self.count < 0:
            raise ConfigError("count must be >= 0")
        if self.position_mode == "fixed":
            pos = self.fixed_positions
            if len(pos) != m:
                raise ConfigError(f"fixed positions {pos} must have length {m}")
            if any(b <= a for a, b in zip(pos, pos[1:])) or pos[0] < 0:
                raise ConfigError(f"fixed positions {pos} must be strictly increasing and >= 0")
            if pos[-1] >= self.n:
                raise ConfigError(f"fixed position {pos[-1]} out of range for n={self.n}")
        elif self.position_mode == "first_k":
            if not (m <= self.first_k <= self.n):
                raise ConfigError(f"first_k={self.first_k} must satisfy {m} <= k <= {self.n}")
        elif self.position_mode != "uniform":
            raise ConfigError(f"unknown position mode {self.position_mode!r}")


def parse_position_mode(text: str) -> dict:
    """Parse ``uniform``, ``fixed=10,110,210`` or ``first=100`` into TaskConfig fields."""
    if text == "uniform":
        return {"position_mode": "uniform"}
    name, _, arg = text.partition("=")
    try:
        if name == "fixed":
            return {"position_mode": "fixed",
                    "fixed_positions": tuple(int(x) for x in arg.split(","))}
        if name in ("first", "first_k"):
            return {"position_mode": "first_k", "first_k": int(arg)}
    except ValueError:
        raise ConfigError(f"bad position mode {text!r}") from None
    raise ConfigError(f"bad position mode {text!r}")


def is_subsequence(needle: str, haystack: str) -> bool:
    it = iter(haystack)
    return all(c in it for c in needle)


def generate_negative(cfg: TaskConfig, rng: RandomStream) -> str:
    """Random string over the alphabet that does not contain the needle.

    Letters are drawn uniformly while tracking how much of the needle a greedy
    left-to-right match has consumed. Once all but the last needle character
    are matched, any draw of that last character is replaced by a uniform draw
    from the rest of the alphabet. The loop is vectorized: the greedy prefix
    completes at a single position, after which the guard applies everywhere.
    """
    alpha = cfg.alphabet
    codes = rng.integers(len(alpha), size=cfg.n)
    alt = rng.integers(len(alpha) - 1, size=cfg.n)
    needle = cfg.needle
    start = 0
    for ch in needle[:-1]:
        c = alpha.find(ch)
        hits = np.flatnonzero(codes[start:] == c) if c >= 0 else ()
        if len(hits) == 0:
            start = cfg.n
            break
        start += int(hits[0]) + 1
    last = alpha.find(needle[-1])
    if last >= 0 and start < cfg.n:
        tail = codes[start:]
        bad = tail == last
        repl = alt[start:][bad]
        tail[bad] = repl + (repl >= last)
    return "".join(alpha[c] for c in codes)


def sample_positions(cfg: TaskConfig, rng: RandomStream) -> tuple[int, ...]:
    m = len(cfg.needle)
    if cfg.position_mode == "fixed":
        return tuple(cfg.fixed_positions)
    limit = cfg.first_k if cfg.position_mode == "first_k" else cfg.n
    return tuple(int(i) for i in np.sort(rng.choice(limit, size=m, replace=False)))


def make_positive(base: str, cfg: TaskConfig, rng: RandomStream) -> tuple[str, tuple[int, ...]]:
    if len(base) != cfg.n:
        raise ConfigError(f"base length {len(base)} != n={cfg.n}")
    positions = sample_positions(cfg, rng)
    chars = list(base)
    for pos, ch in zip(positions, cfg.needle):
        chars[pos] = ch
    return "".join(chars), positions


def positive_indices(cfg: TaskConfig) -> np.ndarray:
    """Indices labelled positive: a uniform subset of size ``count // 2``."""
    rng = derive_stream(cfg.seed, LABEL_STREAM)
    chosen = rng.permutation(cfg.count)[: cfg.count // 2]
    flags = np.zeros(cfg.count, dtype=bool)
    flags[chosen] = True
    return flags


def iter_raw(cfg: TaskConfig) -> Iterator[tuple[int, str, tuple[int, ...], int]]:
    """Yield ``(index, text, supporting_positions, label)`` for each example."""
    flags = positive_indices(cfg)
    for i in range(cfg.count):
        rng = derive_stream(cfg.seed, i)
        text = generate_negative(cfg, rng)
        if flags[i]:
            text, positions = make_positive(text, cfg, rng)
            yield i, text, positions, 1
        else:
            yield i, text, (), 0


def to_example(index: int, text: str, positions, label: int) -> SequenceExample:
    return SequenceExample(
        id=f"fa-{index}",
        spans=tuple(Span(j, (ch,)) for j, ch in enumerate(text)),
        supporting=frozenset(positions),
        label=label,
    )


def iter_dataset(cfg: TaskConfig) -> Iterator[SequenceExample]:
    for row in iter_raw(cfg):
        yield to_example(*row)


def generate_dataset(cfg: TaskConfig) -> list[SequenceExample]:
    """``cfg.count`` examples, ``count // 2`` of them positive (odd counts add a negative)."""
    return list(iter_dataset(cfg))


def has_redundant_evidence(text: str, positions, needle: str) -> bool:
    """True if the needle survives deleting some single annotated position."""
    return any(
        is_subsequence(needle, text[:p] + text[p + 1:]) for p in positions
    )


def summarize(rows, needle: str) -> dict:
    """Counts, label balance and the redundant-evidence rate among positives."""
    total = positives = redundant = disagreements = 0
    for _, text, positions, label in rows:
        total += 1
        if int(is_subsequence(needle, text)) != label:
            disagreements += 1
        if label:
            positives += 1
            redundant += has_redundant_evidence(text, positions, needle)
    return {
        "count": total,
        "positives": positives,
        "negatives": total - positives,
        "label_oracle_disagreements": disagreements,
        "redundancy_rate": redundant / positives if positives else 0.0,
    }
