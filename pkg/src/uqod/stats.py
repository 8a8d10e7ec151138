"""Nonparametric battery for comparing paired evaluation runs.

The workflow this module supports: a Friedman test gates the family of
comparisons; if it rejects, pairwise Wilcoxon signed-rank tests (with the
one-sided direction picked from a median +/- 2*MAD interval when it excludes
zero) are corrected with Holm-Bonferroni, and rank-biserial correlations
grade the effect sizes. Spearman rank correlation relates accuracy to the
uncertainty metrics.

Exactness conventions: the Wilcoxon p-value is computed by full enumeration
of the 2^n sign assignments whenever n <= 25 (as a rank-sum convolution,
which aggregates the same count), and the Spearman permutation p by full n!
enumeration whenever n <= 8; larger samples use the standard normal /
t approximations with tie corrections.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _sps

WILCOXON_EXACT_LIMIT = 25
SPEARMAN_EXACT_LIMIT = 8

_ALTERNATIVES = ("two-sided", "greater", "less")


@dataclass(frozen=True)
class TestOutcome:
    statistic: float
    p_value: float
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EffectSize:
    value: float
    magnitude: str
    degenerate: bool = False


@dataclass(frozen=True)
class PairedSampleMatrix:
    """n subjects x k treatments, no missing cells."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 2:
            raise ValueError("paired samples must form a 2-d matrix")
        if arr.shape[0] < 2:
            raise ValueError("need at least 2 subjects")
        if arr.shape[1] < 2:
            raise ValueError("need at least 2 treatments")
        if not np.isfinite(arr).all():
            raise ValueError("missing or non-finite cells are not allowed")
        object.__setattr__(self, "values", arr)


def _ranks(x: np.ndarray) -> np.ndarray:
    return _sps.rankdata(x, method="average")


def friedman(matrix) -> TestOutcome:
    """Friedman chi-square test over an n x k matrix of paired measurements.

    Ranks within each row, tie-corrected statistic, p from the chi-square
    distribution with k - 1 degrees of freedom. Requires k >= 3; for two
    treatments use :func:`wilcoxon_signed_rank`.
    """
    values = matrix.values if isinstance(matrix, PairedSampleMatrix) else None
    if values is None:
        values = PairedSampleMatrix(np.asarray(matrix, dtype=float)).values
    n, k = values.shape
    if k < 3:
        raise ValueError("friedman needs at least 3 treatments; use wilcoxon for 2")
    ranks = np.apply_along_axis(_ranks, 1, values)
    rank_sums = ranks.sum(axis=0)
    chi0 = 12.0 / (n * k * (k + 1)) * (rank_sums**2).sum() - 3.0 * n * (k + 1)
    tie_mass = 0.0
    for row in values:
        _, counts = np.unique(row, return_counts=True)
        tie_mass += float((counts**3 - counts).sum())
    correction = 1.0 - tie_mass / (n * k * (k * k - 1))
    if correction <= 0.0:
        # every row fully tied: no information, nothing to reject
        return TestOutcome(0.0, 1.0, {"n": n, "k": k, "tie_corrected": True})
    stat = chi0 / correction
    p = float(_sps.chi2.sf(stat, k - 1))
    return TestOutcome(float(stat), p, {"n": n, "k": k, "tie_corrected": tie_mass > 0})


def _signed_rank_parts(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be 1-d and of equal length")
    d = a - b
    d = d[d != 0.0]
    return d


def _exact_signed_rank_counts(ranks2: np.ndarray) -> np.ndarray:
    """Count of sign assignments per doubled positive-rank sum.

    ``ranks2`` holds ranks doubled to integers (average ranks are multiples
    of 0.5). Entry s of the result is the number of the 2^n assignments whose
    positive ranks sum to s/2. Counts stay below 2^53 for n <= 25, so float64
    arithmetic is exact.
    """
    total = int(ranks2.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in ranks2:
        r = int(r)
        counts[r:] = counts[r:] + counts[:-r]
    return counts


def wilcoxon_signed_rank(a, b, alternative: str = "two-sided", method: str = "auto") -> TestOutcome:
    """Wilcoxon signed-rank test for paired samples.

    Zero differences are dropped; ties among |d| take average ranks. The
    statistic is W = min(W+, W-). ``method`` may be "exact" (full 2^n sign
    enumeration), "normal" (approximation with continuity and tie
    correction), or "auto" (exact up to n = 25).

    ``alternative="greater"`` tests whether ``a`` tends to exceed ``b``.
    """
    if alternative not in _ALTERNATIVES:
        raise ValueError(f"alternative must be one of {_ALTERNATIVES}")
    if method not in ("auto", "exact", "normal"):
        raise ValueError("method must be auto, exact, or normal")
    d = _signed_rank_parts(a, b)
    n = len(d)
    if n == 0:
        return TestOutcome(
            0.0, 1.0, {"n": 0, "degenerate": True, "alternative": alternative, "method": "none"}
        )
    ranks = _ranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    statistic = min(w_plus, w_minus)
    if method == "auto":
        method = "exact" if n <= WILCOXON_EXACT_LIMIT else "normal"

    if method == "exact":
        ranks2 = np.rint(2.0 * ranks).astype(np.int64)
        counts = _exact_signed_rank_counts(ranks2)
        idx = int(round(2.0 * w_plus))
        total = 2.0**n
        cdf = counts[: idx + 1].sum() / total  # P(W+ <= observed)
        sf = counts[idx:].sum() / total  # P(W+ >= observed)
        if alternative == "greater":
            p = sf
        elif alternative == "less":
            p = cdf
        else:
            p = min(1.0, 2.0 * min(cdf, sf))
    else:
        mean = n * (n + 1) / 4.0
        var = n * (n + 1) * (2 * n + 1) / 24.0
        _, tie_counts = np.unique(np.abs(d), return_counts=True)
        var -= float((tie_counts**3 - tie_counts).sum()) / 48.0
        if var <= 0.0:
            return TestOutcome(
                statistic,
                1.0,
                {"n": n, "degenerate": True, "alternative": alternative, "method": "normal"},
            )
        sd = math.sqrt(var)
        sf = float(_sps.norm.sf((w_plus - 0.5 - mean) / sd))
        cdf = float(_sps.norm.cdf((w_plus + 0.5 - mean) / sd))
        if alternative == "greater":
            p = sf
        elif alternative == "less":
            p = cdf
        else:
            p = min(1.0, 2.0 * min(cdf, sf))
    return TestOutcome(
        statistic,
        float(p),
        {
            "n": n,
            "w_plus": w_plus,
            "w_minus": w_minus,
            "alternative": alternative,
            "method": method,
        },
    )


def rank_biserial(a, b) -> EffectSize:
    """Matched-pairs rank-biserial correlation, r = (W+ - W-) / (W+ + W-).

    Positive values mean ``a`` tends to exceed ``b``. Magnitude bands on |r|:
    negligible below 0.1, small below 0.3, medium below 0.5, large at or
    above 0.5.
    """
    d = _signed_rank_parts(a, b)
    if len(d) == 0:
        return EffectSize(0.0, "negligible", degenerate=True)
    ranks = _ranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    r = (w_plus - w_minus) / (w_plus + w_minus)
    return EffectSize(r, effect_magnitude(r))


def effect_magnitude(r: float) -> str:
    mag = abs(r)
    if mag < 0.1:
        return "negligible"
    if mag < 0.3:
        return "small"
    if mag < 0.5:
        return "medium"
    return "large"


def median_mad_interval(x) -> tuple[float, float]:
    """median(x) +/- 2 * median(|x - median(x)|)."""
    arr = np.asarray(x, dtype=float)
    if arr.size == 0:
        raise ValueError("empty sample")
    med = float(np.median(arr))
    mad = float(np.median(np.abs(arr - med)))
    return (med - 2.0 * mad, med + 2.0 * mad)


def directional_compare(a, b, method: str = "auto") -> TestOutcome:
    """Signed-rank test with the alternative chosen from the difference spread.

    When the median +/- 2*MAD interval of d = a - b lies entirely above zero
    the test is one-sided "greater"; entirely below zero, "less"; otherwise
    two-sided. The chosen alternative and interval ride along in ``extra``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    lo, hi = median_mad_interval(a - b)
    if lo > 0.0:
        alternative = "greater"
    elif hi < 0.0:
        alternative = "less"
    else:
        alternative = "two-sided"
    outcome = wilcoxon_signed_rank(a, b, alternative=alternative, method=method)
    extra = dict(outcome.extra)
    extra["interval"] = (lo, hi)
    return TestOutcome(outcome.statistic, outcome.p_value, extra)


@dataclass(frozen=True)
class HolmResult:
    reject: bool
    adjusted_p: float


def holm_bonferroni(p_values, alpha: float = 0.05) -> list[HolmResult]:
    """Holm-Bonferroni step-down correction, results in input order.

    Adjusted p-values are the running maximum of (m - i) * p_(i) over the
    ascending order, capped at 1; a hypothesis is rejected when its adjusted
    p-value is at most alpha, which reproduces the step-down rule (the first
    non-rejection blocks everything after it).
    """
    ps = np.asarray(list(p_values), dtype=float)
    m = len(ps)
    if m == 0:
        return []
    if np.any((ps < 0) | (ps > 1) | ~np.isfinite(ps)):
        raise ValueError("p-values must lie in [0, 1]")
    order = np.argsort(ps, kind="stable")
    adjusted = np.empty(m)
    running = 0.0
    for i, idx in enumerate(order):
        running = max(running, (m - i) * ps[idx])
        adjusted[idx] = min(1.0, running)
    return [HolmResult(reject=bool(adjusted[i] <= alpha), adjusted_p=float(adjusted[i])) for i in range(m)]


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    return float((xc * yc).sum() / math.sqrt((xc * xc).sum() * (yc * yc).sum()))


def spearman(x, y, method: str = "auto") -> TestOutcome:
    """Spearman rank correlation with a two-sided p-value.

    rho is the Pearson correlation of the average ranks. The p-value is exact
    (full n! permutation enumeration) for n <= 8, otherwise from the
    t-approximation with n - 2 degrees of freedom. Constant input on either
    side has no defined rank correlation; the outcome is flagged
    ``undefined`` with NaN statistic and p.
    """
    if method not in ("auto", "exact", "approx"):
        raise ValueError("method must be auto, exact, or approx")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("samples must be 1-d and of equal length")
    n = len(x)
    if n < 3:
        raise ValueError("need at least 3 pairs")
    rx = _ranks(x)
    ry = _ranks(y)
    if np.all(rx == rx[0]) or np.all(ry == ry[0]):
        return TestOutcome(float("nan"), float("nan"), {"n": n, "undefined": True})
    rho = _pearson(rx, ry)
    if method == "auto":
        method = "exact" if n <= SPEARMAN_EXACT_LIMIT else "approx"
    if method == "exact":
        # |rho| ranks permutations identically to |4*sum(rx*ry[perm]) - n(n+1)^2|,
        # which is integer-valued: the tail count is exact.
        perms = np.array(list(itertools.permutations(range(n))), dtype=int)
        t4 = np.rint(4.0 * (ry[perms] * rx).sum(axis=1)).astype(np.int64)
        centre = n * (n + 1) * (n + 1)
        t4_obs = int(np.rint(4.0 * (rx * ry).sum()))
        count = int((np.abs(t4 - centre) >= abs(t4_obs - centre)).sum())
        p = count / math.factorial(n)
    else:
        if abs(rho) >= 1.0:
            p = 0.0
        else:
            t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
            p = float(2.0 * _sps.t.sf(abs(t), n - 2))
    return TestOutcome(float(rho), float(p), {"n": n, "method": method})
