"""Verification reports and the analytic curve tables behind ``analyze``."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import IO, Sequence

import numpy as np

from . import analytics
from .core import DropConfig, derive_stream

DEFAULT_GAMMAS = (math.inf, 100.0, 10.0, 1.0, 0.1, 0.01)
DEFAULT_MS = tuple(range(1, 21))
DEFAULT_NS = (1, 10, 100, 1_000, 10_000, 100_000)

# stream id reserved for Monte Carlo verification runs
VERIFY_STREAM = 0x5EED


@dataclass
class Tolerances:
    tv: float = 0.01
    noise_free: float = 0.002
    mean_keep: float = 0.05


@dataclass
class VerifyReport:
    config: dict
    n: int
    m: int
    trials: int | None
    exhaustive: bool
    tv_distance: float
    noise_free_gap: float
    mean_keep_gap: float
    full_length_gap: float
    entropy_gap: float
    tolerances: Tolerances = field(default_factory=Tolerances)

    @property
    def passed(self) -> bool:
        # strict comparisons: a zero tolerance can never pass
        t = self.tolerances
        return (
            self.tv_distance < t.tv
            and self.noise_free_gap < t.noise_free
            and self.mean_keep_gap < t.mean_keep
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["pass"] = self.passed
        return out


def run_verify(
    n: int,
    m: int,
    cfg: DropConfig,
    trials: int = 1_000_000,
    tolerances: Tolerances | None = None,
    exhaustive: bool = False,
) -> VerifyReport:
    """Compare sampled (or exhaustively enumerated) statistics with the closed forms."""
    analytic = analytics.analytic_report(n, m, cfg)
    if exhaustive:
        observed = analytics.exhaustive_report(n, m, cfg)
        trials = None
    else:
        observed = analytics.monte_carlo_report(
            n, m, cfg, trials, derive_stream(cfg.seed, VERIFY_STREAM)
        )
    cfg_echo = asdict(cfg)
    if math.isinf(cfg.gamma):
        cfg_echo["gamma"] = "inf"
    return VerifyReport(
        config=cfg_echo,
        n=n,
        m=m,
        trials=trials,
        exhaustive=exhaustive,
        tv_distance=analytics.total_variation(observed.keep_pmf, analytic.keep_pmf),
        noise_free_gap=abs(observed.p_noise_free - analytic.p_noise_free),
        mean_keep_gap=abs(observed.mean_keep - analytic.mean_keep),
        full_length_gap=abs(observed.p_full_length - analytic.p_full_length),
        entropy_gap=abs(observed.entropy_per_span - analytic.entropy_per_span),
        tolerances=tolerances or Tolerances(),
    )


def _gamma_config(p: float, gamma: float) -> DropConfig:
    mode = "bernoulli" if math.isinf(gamma) else "beta_bernoulli"
    return DropConfig(mode=mode, p=p, gamma=gamma)


def gamma_column(gamma: float) -> str:
    return "gamma_inf" if math.isinf(gamma) else f"gamma_{gamma:g}"


def panel_length(n: int = 100, p: float = 0.2, gamma: float = 1.0):
    """Kept-count pmfs of both samplers: rows of (k, pmf_bernoulli, pmf_beta)."""
    bern = analytics.keep_count_distribution(n, DropConfig(mode="bernoulli", p=p))
    beta = analytics.keep_count_distribution(n, _gamma_config(p, gamma))
    header = ["k", "pmf_bernoulli", "pmf_beta"]
    rows = [[k, float(bern[k]), float(beta[k])] for k in range(n + 1)]
    return header, rows


def panel_noise_free(
    p: float = 0.2,
    ms: Sequence[int] = DEFAULT_MS,
    gammas: Sequence[float] = DEFAULT_GAMMAS,
):
    """Natural log of the noise-free probability, one column per gamma."""
    cfgs = [_gamma_config(p, g) for g in gammas]
    header = ["m"] + [gamma_column(g) for g in gammas]
    rows = [[m] + [math.log(analytics.prob_noise_free(m, c)) for c in cfgs] for m in ms]
    return header, rows


def panel_entropy(
    p: float = 0.1,
    ns: Sequence[int] = DEFAULT_NS,
    gammas: Sequence[float] = DEFAULT_GAMMAS,
):
    """Per-span pattern entropy in nats, one column per gamma."""
    cfgs = [_gamma_config(p, g) for g in gammas]
    header = ["n"] + [gamma_column(g) for g in gammas]
    rows = [[n] + [analytics.per_span_entropy(n, c) for c in cfgs] for n in ns]
    return header, rows


def write_csv(fh: IO[str], header, rows) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def summarize_outcomes(lengths: list[int], noise_free: list[bool], retries: list[int]) -> dict:
    return {
        "records": len(lengths),
        "mean_output_length": float(np.mean(lengths)) if lengths else 0.0,
        "noise_free_fraction": float(np.mean(noise_free)) if noise_free else 0.0,
        "mean_retries": float(np.mean(retries)) if retries else 0.0,
    }
