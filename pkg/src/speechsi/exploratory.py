"""Chi-square screening of acoustic features and scaled-F-score lexical association."""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import EmptyAfterStopwords, OutOfRangeP
from .stopwords import STOPWORDS
from .text import tokenize

_FPMIN = 1e-300


def _gamma_series(a: float, x: float, eps: float, max_iter: int) -> float:
    """Regularised lower incomplete gamma P(a, x) by its power series (x < a + 1)."""
    term = total = 1.0 / a
    ap = a
    for _ in range(max_iter):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * eps:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cfrac(a: float, x: float, eps: float, max_iter: int) -> float:
    """Regularised upper incomplete gamma Q(a, x) by modified Lentz continued fraction (x >= a + 1)."""
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, max_iter + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gammaincc(a: float, x: float, eps: float = 1e-14, max_iter: int = 500) -> float:
    """Regularised upper incomplete gamma function Q(a, x) = Γ(a, x) / Γ(a)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x, eps, max_iter)
    return _gamma_cfrac(a, x, eps, max_iter)


def chi2_sf(stat: float, df: int) -> float:
    """Survival function of the chi-square distribution."""
    if df <= 0:
        return 1.0
    if stat <= 0:
        return 1.0
    return min(1.0, max(0.0, gammaincc(df / 2.0, stat / 2.0)))


def chi_square_table(table) -> tuple[float, int, float]:
    """Pearson chi-square test of independence on an r x c table of counts.

    Rows or columns with zero total are dropped before computing degrees of
    freedom. Returns ``(statistic, df, p)``.
    """
    t = np.asarray(table, dtype=float)
    t = t[t.sum(axis=1) > 0][:, t.sum(axis=0) > 0]
    if t.ndim != 2 or min(t.shape) < 2:
        return 0.0, 0, 1.0
    expected = np.outer(t.sum(axis=1), t.sum(axis=0)) / t.sum()
    if np.any(expected < 5):
        warnings.warn("chi-square expected counts below 5; p-value is approximate", RuntimeWarning)
    stat = float(((t - expected) ** 2 / expected).sum())
    df = (t.shape[0] - 1) * (t.shape[1] - 1)
    return stat, df, chi2_sf(stat, df)


@dataclass(frozen=True)
class FeatureTest:
    feature: str
    chi2: float
    df: int
    p_row: float
    p_adj: float = 1.0
    significant: bool = False
    degenerate: bool = False


def quantile_bins(values, bins: int = 4) -> np.ndarray:
    """Bin index per value using the pooled-sample quantile edges."""
    values = np.asarray(values, dtype=float)
    edges = np.quantile(values, np.linspace(0, 1, bins + 1)[1:-1])
    return np.searchsorted(edges, values, side="right")


def chi_square_feature_test(values, labels, bins: int = 4, name: str = "") -> FeatureTest:
    """Discretise a continuous feature into quantile bins and test class x bin independence."""
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels).astype(int)
    if np.all(values == values[0]):
        return FeatureTest(name, 0.0, 0, 1.0, degenerate=True)
    b = quantile_bins(values, bins)
    table = np.zeros((2, bins))
    np.add.at(table, (labels, b), 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        stat, df, p = chi_square_table(table)
    return FeatureTest(name, stat, df, p)


def bonferroni(p_rows) -> np.ndarray:
    """p_adj = min(1, p * n) with n the number of tests."""
    p = np.asarray(p_rows, dtype=float)
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise OutOfRangeP("p-values must lie in [0, 1]")
    return np.minimum(1.0, p * p.size)


def significance_report(X, labels, names, bins: int = 4, alpha: float = 0.05) -> list[FeatureTest]:
    X = np.asarray(X, dtype=float)
    raw = [chi_square_feature_test(X[:, j], labels, bins, names[j]) for j in range(X.shape[1])]
    adj = bonferroni([t.p_row for t in raw])
    return [FeatureTest(t.feature, t.chi2, t.df, t.p_row, float(a), bool(a < alpha), t.degenerate)
            for t, a in zip(raw, adj)]


def significance_csv(tests: list[FeatureTest]) -> str:
    lines = ["feature,chi2,df,p_row,p_adj,significant"]
    for t in tests:
        lines.append(f"{t.feature},{t.chi2!r},{t.df},{t.p_row!r},{t.p_adj!r},{int(t.significant)}")
    return "\n".join(lines) + "\n"


# -------------------------------------------------------------- lexical

@dataclass(frozen=True)
class TermScore:
    term: str
    freq_a: int
    freq_b: int
    score_a: float
    score_b: float
    association: float
    freq_pct_a: float
    freq_pct_b: float


def _percentile(x: np.ndarray) -> np.ndarray:
    """Average-rank percentile in (0, 1]."""
    return rankdata(x, method="average") / len(x)


def _harmonic(a, b):
    s = a + b
    return np.divide(2 * a * b, s, out=np.zeros_like(s), where=s > 0)


def scaled_f_scores(corpus_a: list[str], corpus_b: list[str], stopwords=STOPWORDS) -> list[TermScore]:
    """Rank terms by how characteristic they are of corpus A versus corpus B.

    For each class a term's precision (share of its occurrences in that
    class) and frequency (share of that class's tokens) are turned into
    percentile ranks over all terms and combined by harmonic mean. The
    association is ``score_A - score_B``; results are sorted by it,
    descending.
    """
    stop = set(stopwords)
    counts_a = Counter(t for doc in corpus_a for t in tokenize(doc) if t not in stop)
    counts_b = Counter(t for doc in corpus_b for t in tokenize(doc) if t not in stop)
    total_a, total_b = sum(counts_a.values()), sum(counts_b.values())
    if total_a == 0 or total_b == 0:
        raise EmptyAfterStopwords("a corpus has no tokens once stopwords are removed")
    terms = sorted(set(counts_a) | set(counts_b))
    fa = np.array([counts_a[t] for t in terms], dtype=float)
    fb = np.array([counts_b[t] for t in terms], dtype=float)
    both = fa + fb
    pct_freq_a, pct_freq_b = _percentile(fa / total_a), _percentile(fb / total_b)
    score_a = _harmonic(_percentile(fa / both), pct_freq_a)
    score_b = _harmonic(_percentile(fb / both), pct_freq_b)
    assoc = score_a - score_b
    out = [TermScore(t, int(a), int(b), float(sa), float(sb), float(d), float(pa), float(pb))
           for t, a, b, sa, sb, d, pa, pb in zip(terms, fa, fb, score_a, score_b, assoc, pct_freq_a, pct_freq_b)]
    out.sort(key=lambda s: (-s.association, s.term))
    return out


def term_scores_csv(scores: list[TermScore]) -> str:
    lines = ["term,freq_a,freq_b,score_a,score_b,association"]
    for s in scores:
        lines.append(f"{s.term},{s.freq_a},{s.freq_b},{s.score_a!r},{s.score_b!r},{s.association!r}")
    return "\n".join(lines) + "\n"
