"""
Statistics helpers for Monte Carlo output.

Integrated autocorrelation time (initial positive sequence), standard errors
from the effective sample size, and weighted least-squares power-law fits.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import List, Sequence

import numpy as np

from src.errors import InsufficientData

MIN_AUTOCORR_SAMPLES = 100
TOLERANCES_FILE = Path(__file__).resolve().parent.parent / "resources" / "tolerances.json"


@dataclass(frozen=True)
class AutocorrEstimate:
    """tau is NaN and flagged is True for a zero-variance observable."""
    tau: float
    std_err: float
    window: int
    flagged: bool


@dataclass(frozen=True)
class MeanEstimate:
    mean: float
    std_err: float
    n_samples: int
    tau: float


@dataclass
class PowerLawFit:
    """log(y) = intercept + slope * log(x)."""
    slope: float
    intercept: float
    slope_err: float
    used: List[float] = field(default_factory=list)
    excluded: List[float] = field(default_factory=list)


def autocovariance(values: np.ndarray) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    n = x.size
    x = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    spectrum = np.fft.rfft(x, size)
    acov = np.fft.irfft(spectrum * np.conj(spectrum), size)[:n]
    return acov / n


def integrated_autocorr(values: Sequence[float]) -> AutocorrEstimate:
    x = np.asarray(values, dtype=float)
    n = x.size
    if n < MIN_AUTOCORR_SAMPLES:
        raise InsufficientData(f"autocorrelation needs at least {MIN_AUTOCORR_SAMPLES} samples, got {n}")
    acov = autocovariance(x)
    if acov[0] <= 1e-300:
        return AutocorrEstimate(tau=float("nan"), std_err=float("nan"), window=0, flagged=True)
    rho = acov / acov[0]

    # initial positive (and monotone) sequence of pair sums
    total = 0.0
    previous = math.inf
    m = 0
    while 2 * m + 1 < n:
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0.0:
            break
        pair = min(pair, previous)
        total += pair
        previous = pair
        m += 1
    tau = -0.5 + total if m > 0 else 0.5
    window = 2 * m + 1
    std_err = tau * math.sqrt(2.0 * (2 * window + 1) / n)
    return AutocorrEstimate(tau=float(tau), std_err=float(std_err), window=window, flagged=False)


def mean_with_error(values: Sequence[float]) -> MeanEstimate:
    """Mean and autocorrelation-corrected standard error.

    Short series fall back to the independent-sample error.
    """
    x = np.asarray(values, dtype=float)
    n = int(x.size)
    if n == 0:
        return MeanEstimate(mean=float("nan"), std_err=float("nan"), n_samples=0, tau=float("nan"))
    mean = float(x.mean())
    var = float(x.var(ddof=1)) if n > 1 else 0.0
    tau = 0.5
    if n >= MIN_AUTOCORR_SAMPLES and var > 0.0:
        est = integrated_autocorr(x)
        if not est.flagged:
            tau = est.tau
    n_eff = n / (2.0 * tau)
    std_err = math.sqrt(var / n_eff) if var > 0.0 else 0.0
    return MeanEstimate(mean=mean, std_err=std_err, n_samples=n, tau=tau)


def fit_power_law(x: Sequence[float], y: Sequence[float], y_err: Sequence[float]) -> PowerLawFit:
    """Weighted least squares on log-log points.

    Zero (or negative) y values are excluded. Log-scale errors come from the
    delta method, sigma_log = y_err / y.
    """
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    es = np.asarray(y_err, dtype=float)
    keep = ys > 0.0
    used = [float(v) for v in xs[keep]]
    excluded = [float(v) for v in xs[~keep]]
    if keep.sum() < 2:
        return PowerLawFit(slope=float("nan"), intercept=float("nan"), slope_err=float("nan"),
                           used=used, excluded=excluded)
    lx = np.log(xs[keep])
    ly = np.log(ys[keep])
    sig = es[keep] / ys[keep]
    positive = sig[sig > 0]
    floor = float(positive.min()) if positive.size else 1.0
    sig = np.where(sig > 0, sig, floor)
    w = 1.0 / sig**2

    design = np.column_stack([np.ones_like(lx), lx])
    normal = design.T @ (design * w[:, None])
    rhs = design.T @ (w * ly)
    coef = np.linalg.solve(normal, rhs)
    cov = np.linalg.inv(normal)
    return PowerLawFit(slope=float(coef[1]), intercept=float(coef[0]),
                       slope_err=float(math.sqrt(max(cov[1, 1], 0.0))),
                       used=used, excluded=excluded)


@lru_cache(maxsize=1)
def tolerances() -> dict:
    """Acceptance tolerances shipped in src/resources/tolerances.json."""
    return json.loads(TOLERANCES_FILE.read_text(encoding="utf-8"))
