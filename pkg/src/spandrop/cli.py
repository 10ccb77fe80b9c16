"""Command-line entry point: gen, segment, augment, analyze, verify.

Exit codes: 0 success, 1 invalid input or flags, 2 verification failure.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import math
import os
import sys
from pathlib import Path

from . import findanimals, harness, jsonl
from .core import ConfigError, DropConfig, MODES, POLICIES, SequenceExample
from .sampler import RetriesExhausted, augment_many
from .segmentation import parse_strategy, segment

SEED_ENV = "SPANDROP_SEED"

EXIT_OK, EXIT_INVALID, EXIT_VERIFY = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _gamma(text: str) -> float:
    if text.lower() in ("inf", "infinity", "∞"):
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid gamma {text!r}") from None


def _float_list(text: str) -> list[float]:
    return [_gamma(x) for x in text.split(",") if x]


def _int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        lo, _, hi = part.partition("-")
        try:
            out.extend(range(int(lo), int(hi) + 1) if hi else [int(lo)])
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid integer list {text!r}") from None
    return out


def _default_seed() -> int:
    try:
        return int(os.environ.get(SEED_ENV, "0"))
    except ValueError:
        return 0


@contextlib.contextmanager
def _open_out(path: str):
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


@contextlib.contextmanager
def _open_in(path: str):
    if path == "-":
        yield sys.stdin
    else:
        with open(path, encoding="utf-8") as fh:
            yield fh


def _report(summary: dict) -> None:
    print(json.dumps(summary, sort_keys=True), file=sys.stderr)


def cmd_gen(args) -> int:
    cfg = findanimals.TaskConfig(
        needle=args.needle,
        n=args.n,
        alphabet=args.alphabet,
        count=args.count,
        seed=args.seed,
        **findanimals.parse_position_mode(args.position_mode),
    )
    rows = []

    def tee():
        for row in findanimals.iter_raw(cfg):
            rows.append(row)
            yield findanimals.to_example(*row)

    with _open_out(args.out) as fh:
        jsonl.write_examples(fh, tee())
    _report(findanimals.summarize(rows, cfg.needle))
    return EXIT_OK


def _as_tokens(value) -> list[str]:
    if isinstance(value, str):
        return value.split()
    if isinstance(value, list):
        return [str(t) for t in value]
    raise ValueError("expected a token list or a whitespace-separated string")


def cmd_segment(args) -> int:
    spec = parse_strategy(args.strategy, fold_case=args.fold_case)
    if spec.strategy == "adaptive" and not args.reference_field:
        raise UsageError("adaptive segmentation requires --reference-field")
    written = supporting_total = 0
    with _open_in(args.input) as fin, _open_out(args.out) as fout:
        for lineno, line in enumerate(fin, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                tokens = _as_tokens(rec[args.tokens_field])
                reference = (
                    _as_tokens(rec[args.reference_field]) if args.reference_field else None
                )
            except (ValueError, KeyError, TypeError) as e:
                raise UsageError(f"line {lineno}: {e}") from None
            spans, supporting = segment(tokens, spec, reference)
            ex = SequenceExample(
                id=str(rec.get("id", lineno - 1)),
                spans=tuple(spans),
                supporting=supporting,
                label=rec.get("label"),
            )
            fout.write(jsonl.dumps(ex) + "\n")
            written += 1
            supporting_total += len(supporting)
    _report({"records": written, "mean_supporting": supporting_total / written if written else 0.0})
    return EXIT_OK


def _drop_config(args) -> DropConfig:
    return DropConfig(
        mode=args.mode,
        p=args.p,
        gamma=args.gamma,
        noise_free_policy=args.policy,
        max_retries=args.max_retries,
        min_keep=args.min_keep,
        mask_token=args.mask_token,
        seed=args.seed,
    )


def cmd_augment(args) -> int:
    cfg = _drop_config(args)
    skipped = []

    def on_error(err):
        if args.strict:
            raise err
        print(f"warning: skipping {err}", file=sys.stderr)
        skipped.append(err.lineno)

    lengths, kept, noise_free, retries = [], [], [], []
    failures = 0
    with _open_in(args.input) as fin, _open_out(args.out) as fout:
        examples = jsonl.read_examples(fin, on_error=on_error)
        for outcome in augment_many(examples, cfg, epochs=args.epochs, workers=args.workers):
            if isinstance(outcome, RetriesExhausted):
                if args.strict:
                    raise UsageError(str(outcome))
                print(f"warning: {outcome}", file=sys.stderr)
                failures += 1
                continue
            ex = outcome.example
            fout.write(jsonl.dumps(ex) + "\n")
            lengths.append(len(ex.spans))
            kept.append(len(ex.kept_indices))
            noise_free.append(outcome.noise_free)
            retries.append(outcome.retries_used)
    summary = harness.summarize_outcomes(lengths, noise_free, retries)
    summary["mean_kept_spans"] = sum(kept) / len(kept) if kept else 0.0
    summary["skipped_lines"] = skipped
    summary["retry_failures"] = failures
    _report(summary)
    return EXIT_OK


def cmd_analyze(args) -> int:
    panels = ["a", "b", "c"] if args.panel == "all" else [args.panel]
    if any(g <= 0 for g in args.gammas) or not args.gammas:
        raise UsageError("gamma grid must be non-empty and positive")
    if any(n < 1 for n in args.ns) or any(m < 0 for m in args.ms) or args.n < 0:
        raise UsageError("sequence lengths must be >= 1 and m >= 0")
    tables = {}
    for panel in panels:
        if panel == "a":
            tables[panel] = harness.panel_length(args.n, _p(args, 0.2), args.gamma)
        elif panel == "b":
            tables[panel] = harness.panel_noise_free(_p(args, 0.2), args.ms, args.gammas)
        else:
            tables[panel] = harness.panel_entropy(_p(args, 0.1), args.ns, args.gammas)
    if len(panels) == 1:
        with _open_out(args.out) as fh:
            harness.write_csv(fh, *tables[panels[0]])
    else:
        if args.out == "-":
            raise UsageError("--panel all needs --out DIR")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for panel, table in tables.items():
            with open(out / f"panel_{panel}.csv", "w", encoding="utf-8", newline="\n") as fh:
                harness.write_csv(fh, *table)
    return EXIT_OK


def _p(args, default: float) -> float:
    p = default if args.p is None else args.p
    if not 0 < p < 1:
        raise UsageError("p must lie in (0, 1) for analysis")
    return p


def cmd_verify(args) -> int:
    cfg = _drop_config(args)
    if args.m > args.n or args.n < 1:
        raise UsageError("need 1 <= n and m <= n")
    if args.exhaustive and args.n > 20:
        raise UsageError("--exhaustive is limited to n <= 20")
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    report = harness.run_verify(
        args.n,
        args.m,
        cfg,
        trials=args.trials,
        tolerances=harness.Tolerances(args.tv_tol, args.noise_free_tol, args.mean_keep_tol),
        exhaustive=args.exhaustive,
    )
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK if report.passed else EXIT_VERIFY


def _add_drop_flags(sp, mode_default="bernoulli"):
    sp.add_argument("--mode", choices=MODES, default=mode_default)
    sp.add_argument("--p", type=float, default=0.1, help="drop ratio in [0, 1)")
    sp.add_argument("--gamma", type=_gamma, default=1.0, help="beta concentration; 'inf' allowed")
    sp.add_argument("--policy", choices=POLICIES, default="rejection")
    sp.add_argument("--max-retries", type=int, default=1000)
    sp.add_argument("--min-keep", type=int, default=1)
    sp.add_argument("--mask-token", default="[MASK]")
    sp.add_argument("--seed", type=int, default=_default_seed())


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spandrop", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a FindAnimals dataset")
    g.add_argument("--needle", default="cat")
    g.add_argument("--n", type=int, default=300)
    g.add_argument("--count", type=int, default=10_000)
    g.add_argument("--position-mode", default="uniform",
                   help="uniform | fixed=10,110,210 | first=100")
    g.add_argument("--alphabet", default=findanimals.string.ascii_lowercase)
    g.add_argument("--seed", type=int, default=_default_seed())
    g.add_argument("--out", default="-")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("segment", help="cut raw token records into span examples")
    s.add_argument("--input", default="-")
    s.add_argument("--out", default="-")
    s.add_argument("--strategy", default="token",
                   help="token | fixed=K | sentence=.,!,? | adaptive=N")
    s.add_argument("--tokens-field", default="tokens")
    s.add_argument("--reference-field", default=None,
                   help="field holding the question; marks supporting spans")
    s.add_argument("--fold-case", action=argparse.BooleanOptionalAction, default=True)
    s.set_defaults(func=cmd_segment)

    a = sub.add_parser("augment", help="write augmented copies of a JSONL dataset")
    a.add_argument("--input", default="-")
    a.add_argument("--out", default="-")
    _add_drop_flags(a)
    a.add_argument("--epochs", type=int, default=1)
    a.add_argument("--workers", type=int, default=1)
    a.add_argument("--strict", action="store_true",
                   help="abort on malformed lines or exhausted retries instead of skipping")
    a.set_defaults(func=cmd_augment)

    z = sub.add_parser("analyze", help="emit closed-form curves as CSV")
    z.add_argument("--panel", choices=["a", "b", "c", "all"], default="all")
    z.add_argument("--out", default="-")
    z.add_argument("--p", type=float, default=None,
                   help="drop ratio (default 0.2 for panels a/b, 0.1 for c)")
    z.add_argument("--n", type=int, default=100, help="sequence length for panel a")
    z.add_argument("--gamma", type=_gamma, default=1.0, help="beta curve for panel a")
    z.add_argument("--gammas", type=_float_list, default=list(harness.DEFAULT_GAMMAS))
    z.add_argument("--ms", type=_int_list, default=list(harness.DEFAULT_MS))
    z.add_argument("--ns", type=_int_list, default=list(harness.DEFAULT_NS))
    z.set_defaults(func=cmd_analyze)

    v = sub.add_parser("verify", help="Monte Carlo or exhaustive check of the closed forms")
    v.add_argument("--n", type=int, default=100)
    v.add_argument("--m", type=int, default=10)
    _add_drop_flags(v)
    v.add_argument("--trials", type=int, default=1_000_000)
    v.add_argument("--exhaustive", action="store_true",
                   help="enumerate all 2^n masks (beta modes: quadrature) instead of sampling")
    v.add_argument("--tv-tol", type=float, default=0.01)
    v.add_argument("--noise-free-tol", type=float, default=0.002)
    v.add_argument("--mean-keep-tol", type=float, default=0.05)
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError, jsonl.RecordError) as e:
        print(f"spandrop {args.command}: error: {e}", file=sys.stderr)
        return EXIT_INVALID
