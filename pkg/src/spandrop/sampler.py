"""SpanDrop, Beta-SpanDrop and SpanMask augmentation."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from itertools import repeat
from typing import Iterable, Iterator

import numpy as np

from .core import (
    DropConfig,
    DropMask,
    ExampleValidationError,
    RandomStream,
    SequenceExample,
    Span,
    derive_stream,
    stream_id_for,
    validate_example,
)


class RetriesExhausted(RuntimeError):
    """No acceptable mask was found within ``max_retries`` attempts."""

    def __init__(self, message: str, last: "AugmentOutcome"):
        super().__init__(message)
        self.last = last


@dataclass(frozen=True)
class AugmentOutcome:
    example: SequenceExample
    mask: DropMask
    retries_used: int
    noise_free: bool


def _log_standard_gamma(shape: float, rng: RandomStream, size=None):
    # Small shapes underflow to exactly 0 in linear space, so stay in logs.
    # Shape < 1 uses the boost G(a) = G(a + 1) * U**(1/a).
    if shape >= 1.0:
        return np.log(rng.standard_gamma(shape, size))
    g = rng.standard_gamma(shape + 1.0, size)
    u = 1.0 - rng.random(size)
    return np.log(g) + np.log(u) / shape


def sample_pi(alpha: float, beta: float, rng: RandomStream, size=None):
    """Draw from Beta(alpha, beta) as the normalized ratio of two gamma variates."""
    la = _log_standard_gamma(alpha, rng, size)
    lb = _log_standard_gamma(beta, rng, size)
    return np.exp(la - np.logaddexp(la, lb))


def sample_bernoulli_mask(n: int, p: float, rng: RandomStream) -> DropMask:
    return DropMask(keep=rng.random(n) >= p)


def sample_beta_mask(n: int, p: float, gamma: float, rng: RandomStream) -> DropMask:
    pi = float(sample_pi(gamma, gamma * (1.0 - p) / p, rng))
    return DropMask(keep=rng.random(n) >= pi, pi=pi)


def sample_mask(n: int, cfg: DropConfig, rng: RandomStream) -> DropMask:
    if cfg.is_beta:
        return sample_beta_mask(n, cfg.p, cfg.gamma, rng)
    mask = sample_bernoulli_mask(n, cfg.p, rng)
    if cfg.mode in ("beta_bernoulli", "mask_beta") and cfg.p == 0:
        # Degenerate Beta(., inf): the sequence-level drop rate is exactly 0.
        return DropMask(keep=mask.keep, pi=0.0)
    return mask


def sample_keep_matrix(n: int, cfg: DropConfig, rng: RandomStream, size: int):
    """Vectorized masks for ``size`` independent sequences.

    Returns ``(keep, pi)`` where keep has shape (size, n) and pi is None for
    Bernoulli modes.
    """
    if cfg.is_beta:
        pi = sample_pi(cfg.alpha, cfg.beta, rng, size)
        return rng.random((size, n)) >= pi[:, None], pi
    return rng.random((size, n)) >= cfg.p, None


def apply_mask(
    ex: SequenceExample,
    mask: DropMask,
    mode: str = "drop",
    mask_token: str = "[MASK]",
) -> SequenceExample:
    """Drop (or mask) the spans whose keep flag is False.

    In ``drop`` mode the survivors keep their relative order and supporting
    indices are renumbered; dropped supporting spans disappear. In ``mask`` mode
    the length is unchanged and every dropped span becomes ``[mask_token]``.
    """
    keep = np.asarray(mask.keep, dtype=bool)
    if len(keep) != len(ex.spans):
        raise ValueError(f"mask length {len(keep)} != span count {len(ex.spans)}")
    kept = tuple(int(i) for i in np.flatnonzero(keep))
    if mode == "drop":
        new_pos = {old: new for new, old in enumerate(kept)}
        spans = tuple(Span(new, ex.spans[old].content) for new, old in enumerate(kept))
        supporting = frozenset(new_pos[i] for i in ex.supporting if i in new_pos)
    elif mode == "mask":
        masked = (mask_token,)
        spans = tuple(
            s if keep[s.index] else Span(s.index, masked) for s in ex.spans
        )
        supporting = frozenset(i for i in ex.supporting if keep[i])
    else:
        raise ValueError(f"unknown apply mode {mode!r}")
    return replace(
        ex,
        spans=spans,
        supporting=supporting,
        source_id=ex.id,
        kept_indices=kept,
        pi=mask.pi,
    )


def augment(ex: SequenceExample, cfg: DropConfig, rng: RandomStream) -> AugmentOutcome:
    """One augmented copy of ``ex`` under ``cfg``.

    ``rejection`` resamples the whole mask (including the sequence-level rate in
    beta modes) until every supporting span survives. Masks leaving fewer than
    ``min_keep`` unmasked spans are resampled under the same retry budget.
    """
    res = validate_example(ex)
    if not res.ok:
        raise ExampleValidationError(res.violations)
    n = len(ex.spans)
    sup = np.fromiter(sorted(ex.supporting), dtype=np.intp, count=len(ex.supporting))
    min_keep = min(cfg.min_keep, n)
    mode = "mask" if cfg.is_mask else "drop"

    for attempt in range(1, cfg.max_retries + 1):
        mask = sample_mask(n, cfg, rng)
        if cfg.noise_free_policy == "force_keep" and len(sup):
            keep = mask.keep.copy()
            keep[sup] = True
            mask = DropMask(keep=keep, pi=mask.pi)
        noise_free = bool(mask.keep[sup].all())
        ok = int(mask.keep.sum()) >= min_keep
        if cfg.noise_free_policy == "rejection" and not noise_free:
            ok = False
        if ok or attempt == cfg.max_retries:
            outcome = AugmentOutcome(
                example=apply_mask(ex, mask, mode, cfg.mask_token),
                mask=mask,
                retries_used=attempt - 1,
                noise_free=noise_free,
            )
            if ok:
                return outcome
    raise RetriesExhausted(
        f"example {ex.id!r}: no acceptable mask after {cfg.max_retries} attempts", outcome
    )


def augment_epoch(ex: SequenceExample, cfg: DropConfig, epoch: int) -> AugmentOutcome:
    """Augment with the stream keyed by (cfg.seed, example id, epoch)."""
    return augment(ex, cfg, derive_stream(cfg.seed, stream_id_for(ex.id, epoch)))


def _augment_all_epochs(ex: SequenceExample, cfg: DropConfig, epochs: int):
    out = []
    for epoch in range(epochs):
        try:
            out.append(augment_epoch(ex, cfg, epoch))
        except RetriesExhausted as e:
            out.append(e)
    return out


def augment_many(
    examples: Iterable[SequenceExample],
    cfg: DropConfig,
    epochs: int = 1,
    workers: int = 1,
) -> Iterator[AugmentOutcome | RetriesExhausted]:
    """Yield ``epochs`` outcomes per input example, in input order.

    Failures are yielded as RetriesExhausted instances rather than raised so the
    caller decides whether to skip or abort. Output does not depend on
    ``workers``.
    """
    if workers <= 1:
        for ex in examples:
            yield from _augment_all_epochs(ex, cfg, epochs)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = pool.map(
            _augment_all_epochs, examples, repeat(cfg), repeat(epochs), chunksize=64
        )
        for batch in results:
            yield from batch

