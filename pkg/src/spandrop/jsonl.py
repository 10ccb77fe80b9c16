"""JSONL serialization of examples.

One record per line::

    {"id": "...", "spans": [["tok", ...], ...], "supporting": [1, 4], "label": "..."}

Augmented records additionally carry ``source_id``, ``kept_indices`` and, for
beta modes, ``pi``.
"""

from __future__ import annotations

import json
from typing import IO, Callable, Iterator

from .core import ExampleValidationError, SequenceExample, validate_example


class RecordError(ValueError):
    def __init__(self, lineno: int, message: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


def to_record(ex: SequenceExample) -> dict:
    rec = {
        "id": ex.id,
        "spans": [list(s.content) for s in ex.spans],
        "supporting": sorted(ex.supporting),
        "label": ex.label,
    }
    if ex.source_id is not None:
        rec["source_id"] = ex.source_id
    if ex.kept_indices is not None:
        rec["kept_indices"] = list(ex.kept_indices)
    if ex.pi is not None:
        rec["pi"] = ex.pi
    return rec


def from_record(rec: dict) -> SequenceExample:
    try:
        spans = rec["spans"]
        ex_id = rec["id"]
    except KeyError as e:
        raise ValueError(f"missing field {e.args[0]!r}") from None
    if not isinstance(spans, list) or not all(isinstance(s, list) for s in spans):
        raise ValueError("'spans' must be a list of token lists")
    kept = rec.get("kept_indices")
    return SequenceExample.from_tokens(
        id=str(ex_id),
        spans=spans,
        supporting=[int(i) for i in rec.get("supporting", [])],
        label=rec.get("label"),
        source_id=rec.get("source_id"),
        kept_indices=None if kept is None else tuple(int(i) for i in kept),
        pi=rec.get("pi"),
    )


def dumps(ex: SequenceExample) -> str:
    return json.dumps(to_record(ex), ensure_ascii=False)


def loads(line: str) -> SequenceExample:
    return from_record(json.loads(line))


def read_examples(
    fh: IO[str],
    validate: bool = True,
    on_error: Callable[[RecordError], None] | None = None,
) -> Iterator[SequenceExample]:
    """Yield examples from a JSONL stream.

    Malformed or invalid lines raise RecordError, unless ``on_error`` is given,
    in which case it receives the error and the line is skipped.
    """
    for lineno, line in enumerate(fh, 1):
        if not line.strip():
            continue
        try:
            ex = loads(line)
            if validate:
                res = validate_example(ex)
                if not res.ok:
                    raise ExampleValidationError(res.violations)
        except (ValueError, TypeError) as e:
            err = RecordError(lineno, str(e))
            if on_error is None:
                raise err from None
            on_error(err)
            continue
        yield ex


def write_examples(fh: IO[str], examples) -> int:
    count = 0
    for ex in examples:
        fh.write(dumps(ex))
        fh.write("\n")
        count += 1
    return count
