"""Birkhoff sums, the two variance estimators, and normality testing.

Window sums start from every sample point with orbit-index wraparound, so
windows of any length stay exactly on the sampled support.  The smoothed
autocovariance estimator uses Bartlett (triangular) weights, which makes
it a nonnegative quadratic form; on an exactly invariant sample it equals
the batch estimator at window N+1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .henon import EscapeError, HenonMap, Point
from .observables import Observable
from .sampler import MeasureSample
from .util import fsum

DEGENERATE_SIGMA2 = 1e-8

_erf = np.frompyfunc(math.erf, 1, 1)


@dataclass(frozen=True)
class CltReport:
    sigma2_green_kubo: float
    sigma2_batch: float
    truncation: int
    ks_distance: float
    window: int
    segments: int  # distinct orbits contributing start points
    degenerate: bool
    max_abs_normalized: float
    sample_size: int


def birkhoff_sum(
    f: HenonMap, u: Observable, n: int, x: Point, escape_radius: float = 1e100
) -> float:
    """u(x) + u(f x) + ... + u(f^{n-1} x) by direct iteration."""
    if n < 1:
        raise ValueError("window must be >= 1")
    vals = []
    cur = x
    for i in range(n):
        if max(abs(cur.z), abs(cur.w)) > escape_radius:
            raise EscapeError(f"orbit escaped at step {i} of the Birkhoff window")
        vals.append(u(cur))
        cur = f.apply(cur)
    return math.fsum(vals)


def birkhoff_values(s: MeasureSample, values: np.ndarray, n: int) -> np.ndarray:
    """S_n over every sample start point via index wraparound.

    Neumaier-compensated accumulation keeps the summation error independent
    of the window length.
    """
    if n < 1:
        raise ValueError("window must be >= 1")
    acc = np.zeros(s.n_points)
    comp = np.zeros(s.n_points)
    for t in range(n):
        x = values[s.advance_indices(t)]
        new = acc + x
        comp += np.where(
            np.abs(acc) >= np.abs(x), (acc - new) + x, (x - new) + acc
        )
        acc = new
    return acc + comp


def centered_values(s: MeasureSample, u: Observable) -> np.ndarray:
    vals = u.eval_batch(s.z, s.w)
    return vals - fsum(vals) / s.n_points


def sigma2_green_kubo(
    s: MeasureSample, f: HenonMap, u: Observable, N: int
) -> float:
    """Bartlett-smoothed two-sided autocovariance sum, truncated at lag N.

    <u~^2> + 2 sum_{m=1..N} (1 - m/(N+1)) <u~ (u~ o f^m)>; the sample's
    exact time symmetry folds the negative lags, and the triangular
    weights keep the value nonnegative.
    """
    if N < 0:
        raise ValueError("truncation must be >= 0")
    uc = centered_values(s, u)
    n = s.n_points
    total = fsum(uc * uc) / n
    for m in range(1, N + 1):
        rho = fsum(uc * s.shifted_values(uc, m)) / n
        total += 2.0 * (1.0 - m / (N + 1.0)) * rho
    return total


def sigma2_batch(s: MeasureSample, f: HenonMap, u: Observable, n: int) -> float:
    """(1/n) <S_n(u~)^2> with window sums over the wrapped support."""
    if n < 1:
        raise ValueError("window must be >= 1")
    uc = centered_values(s, u)
    S = birkhoff_values(s, uc, n)
    return fsum(S * S) / (s.n_points * n)


def ks_distance_to_normal(data: np.ndarray, sigma: float) -> float:
    """Kolmogorov-Smirnov distance of data to N(0, sigma^2)."""
    xs = np.sort(np.asarray(data, dtype=np.float64))
    n = xs.shape[0]
    F = 0.5 * (1.0 + _erf(xs / (sigma * math.sqrt(2.0))).astype(np.float64))
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def clt_test(
    s: MeasureSample,
    f: HenonMap,
    u: Observable,
    n: int,
    truncation: int = 32,
) -> CltReport:
    """Distribution of S_n(u~)/sqrt(n) against the fitted centered Gaussian.

    The comparison Gaussian takes its variance from the batch estimator at
    the same window n, the scale actually carried by the tested sums.  A
    batch variance at or below 1e-8 routes to the degenerate branch, which
    checks concentration at 0 instead of a continuous fit.
    """
    if s.period < 2:
        raise ValueError("sample period must be >= 2")
    if n < 8:
        raise ValueError("window must be >= 8")
    uc = centered_values(s, u)
    S = birkhoff_values(s, uc, n)
    data = S / math.sqrt(n)
    s2_batch = fsum(S * S) / (s.n_points * n)
    s2_gk = sigma2_green_kubo(s, f, u, truncation)
    max_abs = float(np.max(np.abs(data)))
    if s2_batch <= DEGENERATE_SIGMA2:
        degenerate = True
        delta = 1e-6
        ks = float(
            max(np.mean(data <= -delta), np.mean(data >= delta))
        )
    else:
        degenerate = False
        ks = ks_distance_to_normal(data, math.sqrt(s2_batch))
    return CltReport(
        sigma2_green_kubo=float(s2_gk),
        sigma2_batch=float(s2_batch),
        truncation=truncation,
        ks_distance=ks,
        window=n,
        segments=s.n_orbits,
        degenerate=degenerate,
        max_abs_normalized=max_abs,
        sample_size=s.n_points,
    )


def normalized_sums(s: MeasureSample, u: Observable, n: int) -> np.ndarray:
    """S_n(u~)/sqrt(n) over all start points, for export and histograms."""
    uc = centered_values(s, u)
    return birkhoff_values(s, uc, n) / math.sqrt(n)


def histogram_csv(data: np.ndarray, sigma2: float, bins: int = 40) -> str:
    """bin_left,bin_right,count,gaussian_density (at midpoints)."""
    from .util import format_float as ff

    data = np.asarray(data, dtype=np.float64)
    lo, hi = float(np.min(data)), float(np.max(data))
    if lo == hi:
        lo, hi = lo - 1.0, hi + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(data, bins=edges)
    mids = (edges[:-1] + edges[1:]) / 2.0
    if sigma2 > 0:
        dens = np.exp(-(mids**2) / (2.0 * sigma2)) / math.sqrt(
            2.0 * math.pi * sigma2
        )
    else:
        dens = np.zeros_like(mids)
    lines = ["bin_left,bin_right,count,gaussian_density"]
    for i in range(bins):
        lines.append(
            f"{ff(edges[i])},{ff(edges[i + 1])},{int(counts[i])},{ff(dens[i])}"
        )
    return "\n".join(lines) + "\n"
