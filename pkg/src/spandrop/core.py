"""Domain types, validation and deterministic random streams."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

RandomStream = np.random.Generator

MODES = ("bernoulli", "beta_bernoulli", "mask_bernoulli", "mask_beta")
POLICIES = ("off", "force_keep", "rejection")

_U64 = (1 << 64) - 1


class ConfigError(ValueError):
    """Raised for invalid drop or task configurations."""


class ExampleValidationError(ValueError):
    """Raised when an example violates its invariants."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class Span(NamedTuple):
    index: int
    content: tuple[str, ...]


@dataclass(frozen=True)
class SequenceExample:
    id: str
    spans: tuple[Span, ...]
    supporting: frozenset[int] = frozenset()
    label: str | int | None = None
    source_id: str | None = None
    kept_indices: tuple[int, ...] | None = None
    pi: float | None = None

    @classmethod
    def from_tokens(
        cls,
        id: str,
        spans: Iterable[Sequence[str]],
        supporting: Iterable[int] = (),
        label: str | int | None = None,
        **provenance,
    ) -> "SequenceExample":
        """Build an example from plain token lists, numbering spans in order."""
        return cls(
            id=id,
            spans=tuple(Span(i, tuple(c)) for i, c in enumerate(spans)),
            supporting=frozenset(supporting),
            label=label,
            **provenance,
        )

    @property
    def n(self) -> int:
        return len(self.spans)

    @property
    def m(self) -> int:
        return len(self.supporting)

    def contents(self) -> list[tuple[str, ...]]:
        return [s.content for s in self.spans]

    def tokens(self) -> list[str]:
        return [tok for s in self.spans for tok in s.content]


@dataclass(frozen=True)
class DropConfig:
    """Augmentation settings.

    ``gamma`` may be ``math.inf``; beta modes then behave exactly like their
    Bernoulli counterparts.
    """

    mode: str = "bernoulli"
    p: float = 0.1
    gamma: float = 1.0
    noise_free_policy: str = "rejection"
    max_retries: int = 1000
    min_keep: int = 1
    mask_token: str = "[MASK]"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.noise_free_policy not in POLICIES:
            raise ConfigError(
                f"unknown noise-free policy {self.noise_free_policy!r}; expected one of {POLICIES}"
            )
        if not (0.0 <= self.p < 1.0) or math.isnan(self.p):
            raise ConfigError(f"drop ratio p must satisfy 0 <= p < 1, got {self.p}")
        if not self.gamma > 0:
            raise ConfigError(f"gamma must be > 0, got {self.gamma}")
        if self.max_retries < 1:
            raise ConfigError(f"max_retries must be >= 1, got {self.max_retries}")
        if self.min_keep < 0:
            raise ConfigError(f"min_keep must be >= 0, got {self.min_keep}")

    @property
    def is_beta(self) -> bool:
        """True when a sequence-level drop rate is drawn (finite gamma, p > 0)."""
        return self.mode in ("beta_bernoulli", "mask_beta") and math.isfinite(self.gamma) and self.p > 0

    @property
    def is_mask(self) -> bool:
        return self.mode.startswith("mask_")

    @property
    def alpha(self) -> float:
        return self.gamma

    @property
    def beta(self) -> float:
        if self.p == 0:
            raise ConfigError("beta parameter is undefined for p = 0")
        return self.gamma * (1.0 - self.p) / self.p


@dataclass(frozen=True)
class DropMask:
    keep: np.ndarray
    pi: float | None = None

    def __len__(self) -> int:
        return len(self.keep)


@dataclass
class ValidationResult:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def stream_id_for(example_id: str, epoch: int = 0) -> int:
    """Stable 64-bit stream id for an (example id, augmentation epoch) pair."""
    h = hashlib.blake2b(f"{example_id}\x1f{epoch}".encode("utf-8"), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def derive_stream(seed: int, stream_id: int) -> RandomStream:
    """Counter-based generator keyed by (seed, stream_id).

    Philox streams with different keys are independent, and the stream depends
    only on the key, so results do not change with worker count or call order.
    """
    key = ((seed & _U64) << 64) | (stream_id & _U64)
    return np.random.Generator(np.random.Philox(key=key))


def validate_example(ex: SequenceExample) -> ValidationResult:
    out = ValidationResult()
    n = len(ex.spans)
    seen = set()
    for pos, span in enumerate(ex.spans):
        if span.index in seen:
            out.violations.append(f"duplicate span index {span.index}")
        elif span.index != pos:
            out.violations.append(f"span index {span.index} at position {pos}")
        seen.add(span.index)
        if len(span.content) == 0:
            out.violations.append(f"empty span at index {span.index}")
    for i in sorted(ex.supporting):
        if not (0 <= i < n):
            out.violations.append(f"supporting index out of range: {i}")
    return out
