"""Agreement metrics, descriptive statistics, and comparison arithmetic."""

import math

import numpy as np

from .errors import (
    ConstantTruthError,
    EmptyInputError,
    LengthMismatchError,
    NonFiniteInputError,
    TooFewSamplesError,
    ZeroBaselineError,
    ZeroMeanError,
    ZeroVarianceError,
)


def _paired(y, m):
    y = np.asarray(y, dtype=np.float64).ravel()
    m = np.asarray(m, dtype=np.float64).ravel()
    if y.size != m.size:
        raise LengthMismatchError(f"series lengths differ: {y.size} vs {m.size}")
    if y.size == 0:
        raise EmptyInputError("series are empty")
    if not (np.isfinite(y).all() and np.isfinite(m).all()):
        raise NonFiniteInputError("series contain non-finite values")
    return y, m


def rmse(y, m):
    """Root mean square error with a 1/n denominator."""
    y, m = _paired(y, m)
    return float(np.sqrt(np.mean((y - m) ** 2)))


def bias(y, m):
    """Mean of measured minus predicted."""
    y, m = _paired(y, m)
    return float(np.mean(y - m))


def concordance(y, m):
    """Concordance correlation coefficient with population (1/n) moments.

    Penalizes both dispersion and location shifts; 0 when either series
    is constant.
    """
    y, m = _paired(y, m)
    if y.size < 2:
        raise TooFewSamplesError("concordance needs at least 2 pairs")
    mu_y, mu_m = np.mean(y), np.mean(m)
    var_y = np.mean((y - mu_y) ** 2)
    var_m = np.mean((m - mu_m) ** 2)
    if var_y == 0.0 or var_m == 0.0:
        return 0.0
    cov = np.mean((y - mu_y) * (m - mu_m))
    return float(2.0 * cov / (var_y + var_m + (mu_y - mu_m) ** 2))


def r_squared(y, m):
    """1 - SSres/SStot; may be negative for worse-than-mean predictors."""
    y, m = _paired(y, m)
    if y.size < 2:
        raise TooFewSamplesError("r_squared needs at least 2 pairs")
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot == 0.0:
        raise ConstantTruthError("measured series is constant")
    ss_res = float(np.sum((y - m) ** 2))
    return 1.0 - ss_res / ss_tot


def pearson(y, m):
    """Pearson correlation coefficient."""
    y, m = _paired(y, m)
    if y.size < 2:
        raise TooFewSamplesError("correlation needs at least 2 pairs")
    sd_y = np.std(y)
    sd_m = np.std(m)
    if sd_y == 0.0 or sd_m == 0.0:
        raise ZeroVarianceError("correlation undefined for a constant series")
    return float(np.mean((y - np.mean(y)) * (m - np.mean(m))) / (sd_y * sd_m))


def residual_correlation(residuals, reference):
    """Pearson correlation between model residuals and a reference series."""
    return pearson(residuals, reference)


def relative_change(candidate, baseline):
    """Percent change of a metric against a baseline value."""
    if baseline == 0:
        raise ZeroBaselineError("relative change undefined for zero baseline")
    return 100.0 * (candidate - baseline) / baseline


def descriptive_stats(values):
    """Summary dict: min, max, mean, sd, skewness, kurtosis (excess), cv.

    Uses the sample SD (n-1), the adjusted Fisher-Pearson skewness, the
    bias-corrected excess kurtosis, and CV = 100 * sd / mean.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    n = x.size
    if n < 4:
        raise TooFewSamplesError("descriptive statistics need at least 4 values")
    if not np.isfinite(x).all():
        raise NonFiniteInputError("values contain non-finite entries")
    mean = float(np.mean(x))
    sd = float(np.std(x, ddof=1))
    if sd == 0.0:
        raise ZeroVarianceError("shape statistics undefined for constant values")
    if mean == 0.0:
        raise ZeroMeanError("coefficient of variation undefined for zero mean")

    d = x - mean
    m2 = float(np.mean(d**2))
    m3 = float(np.mean(d**3))
    m4 = float(np.mean(d**4))
    g1 = m3 / m2**1.5
    skewness = g1 * math.sqrt(n * (n - 1)) / (n - 2)
    g2 = m4 / m2**2 - 3.0
    kurtosis = ((n + 1) * g2 + 6.0) * (n - 1) / ((n - 2) * (n - 3))

    return {
        "min": float(np.min(x)),
        "max": float(np.max(x)),
        "mean": mean,
        "sd": sd,
        "skewness": float(skewness),
        "kurtosis": float(kurtosis),
        "cv": 100.0 * sd / mean,
    }
