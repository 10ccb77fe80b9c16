"""Closed-form laws of the span-drop samplers and a Monte Carlo cross-check.

Conventions: ``k`` always counts KEPT spans, ``p`` is the drop ratio, and the
beta-binomial is parameterized so that ``beta`` pairs with the kept count:

    P(k | N, alpha, beta) = C(N, k) B(k + beta, N - k + alpha) / B(alpha, beta)

which is the kept-count law when the drop rate is Beta(alpha, beta).

Entropies are in nats. Divide by ``ln 2`` for bits; the typical set of a
length-n Bernoulli drop has roughly ``exp(n * H)`` members.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal, localcontext

import numpy as np

from .core import DropConfig, RandomStream

_LANCZOS_G = 607 / 128
_LANCZOS_COEF = np.array([
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
])
_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


def _lanczos_series(x: np.ndarray) -> np.ndarray:
    z = x - 1.0
    series = np.full_like(z, _LANCZOS_COEF[0])
    for i in range(len(_LANCZOS_COEF) - 1, 0, -1):
        series += _LANCZOS_COEF[i] / (z + i)
    return series


def _lanczos(x: np.ndarray) -> np.ndarray:
    # valid for x >= 0.5
    t = x + _LANCZOS_G - 0.5
    return _HALF_LOG_2PI + (x - 0.5) * np.log(t) - t + np.log(_lanczos_series(x))


def log_gamma(x):
    """Natural log of the gamma function for positive real ``x``.

    Accepts scalars or arrays. Arguments below 0.5 are shifted up by one,
    ``lnG(x) = lnG(x + 1) - ln x``, which keeps small arguments accurate.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError("log_gamma is defined only for x > 0")
    small = arr < 0.5
    out = np.where(small, _lanczos(np.where(small, arr + 1.0, arr)) - np.log(np.where(small, arr, 1.0)),
                   _lanczos(np.where(small, 1.0, arr)))
    if out.ndim == 0:
        return float(out)
    return out


def log_gamma_ratio(x, y):
    """``lnG(y) - lnG(x)`` without cancelling two large log-gammas.

    The Lanczos forms are subtracted term by term, so the leading terms reduce
    to a ``log1p``. This keeps pmfs with huge shape parameters normalized.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(~(x > 0)) or np.any(~(y > 0)):
        raise ValueError("log_gamma is defined only for x > 0")
    shift = np.zeros(np.broadcast(x, y).shape)
    small_x, small_y = x < 0.5, y < 0.5
    shift = shift + np.where(small_x, np.log(np.where(small_x, x, 1.0)), 0.0)
    shift = shift - np.where(small_y, np.log(np.where(small_y, y, 1.0)), 0.0)
    x = np.where(small_x, x + 1.0, x)
    y = np.where(small_y, y + 1.0, y)
    tx = x + _LANCZOS_G - 0.5
    d = y - x
    out = (
        (x - 0.5) * np.log1p(d / tx)
        + d * np.log(tx + d)
        - d
        + np.log(_lanczos_series(y) / _lanczos_series(x))
        + shift
    )
    return _scalar(out)


def log_comb(N, k):
    k = np.asarray(k, dtype=float)
    return log_gamma(N + 1.0) - log_gamma(k + 1.0) - log_gamma(N - k + 1.0)


def _check_k(k, N):
    k = np.asarray(k)
    if np.any((k < 0) | (k > N)):
        raise ValueError(f"k must lie in [0, {N}]")


def _scalar(out):
    return float(out) if np.ndim(out) == 0 else out


def binomial_logpmf(k, N: int, p: float):
    """Log-probability that exactly ``k`` of ``N`` spans are kept at drop ratio ``p``."""
    _check_k(k, N)
    k = np.asarray(k, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        lk = np.where(k > 0, k * math.log1p(-p), 0.0)
        ld = np.where(N - k > 0, (N - k) * (math.log(p) if p > 0 else -np.inf), 0.0)
    return _scalar(log_comb(N, k) + lk + ld)


def _binomial_pmf_exact(k: int, N: int, p: float) -> float:
    # 40-digit log space; float64 logs lose ~1e-11 relative by N = 1e4
    with localcontext() as ctx:
        ctx.prec = 40
        drop = Decimal(p)
        total = Decimal(math.comb(N, k)).ln()
        if k:
            total += k * (1 - drop).ln()
        if N - k:
            if drop == 0:
                return 0.0
            total += (N - k) * drop.ln()
        return float(total.exp())


def binomial_pmf(k, N: int, p: float):
    """Binomial pmf of the kept count; integer scalars are evaluated exactly."""
    if isinstance(k, (int, np.integer)) and isinstance(N, (int, np.integer)):
        _check_k(k, N)
        return _binomial_pmf_exact(int(k), int(N), float(p))
    return _scalar(np.exp(binomial_logpmf(k, N, p)))


def beta_binomial_logpmf(k, N: int, alpha: float, beta: float):
    _check_k(k, N)
    if not (alpha > 0 and beta > 0):
        raise ValueError("alpha and beta must be positive")
    k = np.asarray(k, dtype=float)
    out = (
        log_comb(N, k)
        + log_gamma_ratio(beta, k + beta)
        + log_gamma_ratio(alpha, N - k + alpha)
        - log_gamma_ratio(alpha + beta, N + alpha + beta)
    )
    return _scalar(out)


def beta_binomial_pmf(k, N: int, alpha: float, beta: float):
    return _scalar(np.exp(beta_binomial_logpmf(k, N, alpha, beta)))


def keep_count_distribution(n: int, cfg: DropConfig) -> np.ndarray:
    """pmf of the number of kept spans, indexed by k = 0..n."""
    if n == 0:
        return np.ones(1)
    k = np.arange(n + 1)
    if cfg.is_beta:
        return np.exp(beta_binomial_logpmf(k, n, cfg.alpha, cfg.beta))
    return np.exp(binomial_logpmf(k, n, cfg.p))


def conditional_keep_distribution(n: int, m: int, cfg: DropConfig) -> np.ndarray:
    """pmf of kept non-supporting spans given all ``m`` supporting spans were kept.

    Under the beta model, observing m kept spans updates the drop rate to
    Beta(alpha, beta + m).
    """
    k = np.arange(n - m + 1)
    if cfg.is_beta:
        return np.exp(beta_binomial_logpmf(k, n - m, cfg.alpha, cfg.beta + m))
    return np.exp(binomial_logpmf(k, n - m, cfg.p))


def prob_noise_free(m: int, cfg: DropConfig) -> float:
    if m < 0:
        raise ValueError("m must be >= 0")
    if m == 0:
        return 1.0
    if cfg.is_beta:
        return beta_binomial_pmf(m, m, cfg.alpha, cfg.beta)
    return (1.0 - cfg.p) ** m


def prob_full_length(n: int, cfg: DropConfig) -> float:
    """Probability that no span is dropped."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not cfg.is_beta:
        return (1.0 - cfg.p) ** n
    a, b = cfg.alpha, cfg.beta
    return math.exp(log_gamma_ratio(b, n + b) - log_gamma_ratio(a + b, n + a + b))


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log(p) - (1.0 - p) * math.log1p(-p)


def per_span_entropy(n: int, cfg: DropConfig) -> float:
    """Entropy of the full keep/drop pattern divided by ``n``, in nats.

    Patterns with the same kept count are equally likely, each with probability
    ``q_k = pmf(k) / C(n, k)``, so the pattern entropy is ``-sum_k pmf(k) ln q_k``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not cfg.is_beta:
        return binary_entropy(cfg.p)
    k = np.arange(n + 1)
    lc = log_comb(n, k)
    logpmf = beta_binomial_logpmf(k, n, cfg.alpha, cfg.beta)
    log_q = logpmf - lc
    return float(-np.sum(np.exp(logpmf) * log_q) / n)


def total_variation(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    size = max(len(p), len(q))
    p = np.pad(p, (0, size - len(p)))
    q = np.pad(q, (0, size - len(q)))
    return 0.5 * float(np.abs(p - q).sum())


@dataclass
class AnalyticReport:
    n: int
    m: int
    config: DropConfig
    keep_pmf: np.ndarray
    p_noise_free: float
    p_full_length: float
    entropy_per_span: float

    @property
    def mean_keep(self) -> float:
        return float(np.dot(np.arange(len(self.keep_pmf)), self.keep_pmf))


@dataclass
class EmpiricalReport(AnalyticReport):
    trials: int = 0
    analytic: AnalyticReport | None = field(default=None, repr=False)
    tv_distance: float = math.nan


def analytic_report(n: int, m: int, cfg: DropConfig) -> AnalyticReport:
    if m > n:
        raise ValueError("m must not exceed n")
    return AnalyticReport(
        n=n,
        m=m,
        config=cfg,
        keep_pmf=keep_count_distribution(n, cfg),
        p_noise_free=prob_noise_free(m, cfg),
        p_full_length=prob_full_length(n, cfg) if n >= 1 else 1.0,
        entropy_per_span=per_span_entropy(n, cfg) if n >= 1 else 0.0,
    )


def exchangeable_entropy(keep_pmf, n: int) -> float:
    """Per-span pattern entropy implied by a kept-count pmf (exchangeable masks)."""
    keep_pmf = np.asarray(keep_pmf, dtype=float)
    nz = keep_pmf > 0
    k = np.arange(len(keep_pmf))[nz]
    pk = keep_pmf[nz]
    return float(-np.sum(pk * (np.log(pk) - log_comb(n, k))) / n)


def monte_carlo_report(
    n: int,
    m: int,
    cfg: DropConfig,
    trials: int,
    rng: RandomStream,
    chunk: int = 100_000,
) -> EmpiricalReport:
    """Sample ``trials`` raw masks and summarize them next to the closed forms.

    The first ``m`` positions play the supporting spans (masks are exchangeable).
    The entropy estimate is the plug-in value from the kept-count histogram,
    spread uniformly over patterns of equal size.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    from .sampler import sample_keep_matrix

    counts = np.zeros(n + 1, dtype=np.int64)
    noise_free = 0
    left = trials
    while left:
        size = min(chunk, left)
        keep, _ = sample_keep_matrix(n, cfg, rng, size)
        counts += np.bincount(keep.sum(axis=1), minlength=n + 1)
        noise_free += int(keep[:, :m].all(axis=1).sum())
        left -= size
    pmf = counts / trials
    analytic = analytic_report(n, m, cfg)
    return EmpiricalReport(
        n=n,
        m=m,
        config=cfg,
        keep_pmf=pmf,
        p_noise_free=noise_free / trials,
        p_full_length=float(pmf[n]),
        entropy_per_span=exchangeable_entropy(pmf, n) if n >= 1 else 0.0,
        trials=trials,
        analytic=analytic,
        tv_distance=total_variation(pmf, analytic.keep_pmf),
    )


def _beta_log_density_grid(alpha: float, beta: float, points: int):
    # midpoint rule on (0, 1); normalized with the stdlib lgamma
    x = (np.arange(points) + 0.5) / points
    log_b = math.lgamma(alpha) + math.lgamma(beta) - math.lgamma(alpha + beta)
    logw = (alpha - 1) * np.log(x) + (beta - 1) * np.log1p(-x) - log_b - math.log(points)
    return np.log(x), np.log1p(-x), logw


def exhaustive_report(n: int, m: int, cfg: DropConfig, points: int = 1_000_000) -> AnalyticReport:
    """Brute-force counterpart of :func:`analytic_report`.

    Enumerates all ``2**n`` keep patterns. Each pattern's probability comes from
    a product of per-span Bernoulli factors, or in beta modes from midpoint
    quadrature of that product against the drop-rate density. No closed form
    for the counts is used.
    """
    if n > 20:
        raise ValueError("exhaustive enumeration is limited to n <= 20")
    patterns = ((np.arange(2**n)[:, None] >> np.arange(n)) & 1).astype(bool)
    kept = patterns.sum(axis=1)
    if cfg.is_beta:
        log_pi, log_keep, logw = _beta_log_density_grid(cfg.alpha, cfg.beta, points)
        by_count = np.empty(n + 1)
        for k in range(n + 1):
            by_count[k] = float(np.exp(k * log_keep + (n - k) * log_pi + logw).sum())
        prob = by_count[kept]
    else:
        prob = np.where(patterns, 1.0 - cfg.p, cfg.p).prod(axis=1)
    pmf = np.zeros(n + 1)
    np.add.at(pmf, kept, prob)
    nz = prob > 0
    entropy = float(-(prob[nz] * np.log(prob[nz])).sum() / n) if n else 0.0
    return AnalyticReport(
        n=n,
        m=m,
        config=cfg,
        keep_pmf=pmf,
        p_noise_free=float(prob[patterns[:, :m].all(axis=1)].sum()),
        p_full_length=float(pmf[n]),
        entropy_per_span=entropy,
    )
