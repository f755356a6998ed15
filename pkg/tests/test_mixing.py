import math

import numpy as np
import pytest

from henonmix import mixing
from henonmix import observables as obs
from henonmix.henon import Point
from henonmix.util import rng_stream


def _bump(zc, wc, r, h=1.0):
    return obs.make_bump(Point(zc, wc), r, h)


def test_constants_give_exact_zero(horseshoe, s8):
    q = mixing.CorrelationQuery(
        observables=(obs.constant(2.0), obs.constant(-1.0)), times=(0, 7)
    )
    rep = mixing.multi_correlation(s8, horseshoe, q)
    assert rep.estimate == 0.0


def test_kappa_zero_is_exactly_zero(horseshoe, s8):
    q = mixing.CorrelationQuery(observables=(_bump(2.0, 2.0, 1.5),), times=(0,))
    rep = mixing.multi_correlation(s8, horseshoe, q)
    assert rep.estimate == 0.0
    assert rep.kappa == 0


def test_query_validation(horseshoe):
    g = obs.constant(1.0)
    with pytest.raises(ValueError):
        mixing.CorrelationQuery(observables=(g, g), times=(1, 2))  # n0 != 0
    with pytest.raises(ValueError):
        mixing.CorrelationQuery(observables=(g, g), times=(0, 3, 5))
    with pytest.raises(ValueError):
        mixing.CorrelationQuery(observables=(g, g, g), times=(0, 5, 3))
    with pytest.raises(ValueError):
        mixing.CorrelationQuery(observables=(g, g), times=(0, 3), gamma=3.0)


def test_time_cap(horseshoe, s8):
    q = mixing.CorrelationQuery(
        observables=(obs.constant(1.0), obs.constant(1.0)),
        times=(0, 4 * s8.period + 1),
    )
    with pytest.raises(ValueError):
        mixing.multi_correlation(s8, horseshoe, q)


def test_theoretical_rate_values():
    assert mixing.theoretical_rate(1, 2.0, 2) == pytest.approx(2 ** -0.5, abs=1e-12)
    assert mixing.theoretical_rate(5, 2.0, 2) == pytest.approx(2 ** -0.5, abs=1e-12)
    assert mixing.theoretical_rate(1, 1.0, 2) == pytest.approx(2 ** -0.125, abs=1e-12)


def test_theoretical_rate_monotonicity():
    # gamma < 2: rate increases toward 1 with kappa; gamma = 2: constant
    prev = 0.0
    for k in range(1, 8):
        r = mixing.theoretical_rate(k, 1.0, 3)
        assert r > prev
        prev = r
    vals = {mixing.theoretical_rate(k, 2.0, 3) for k in range(1, 8)}
    assert len(vals) == 1
    for k in (1, 3):
        for g in (0.3, 1.0, 2.0):
            for d in (2, 5):
                assert 0 < mixing.theoretical_rate(k, g, d) < 1


def test_scale_equivariance(horseshoe, s8):
    g0 = _bump(2.0, 2.0, 1.5)
    g1 = _bump(-2.0, 2.0, 1.5)
    q1 = mixing.CorrelationQuery(observables=(g0, g1), times=(0, 3))
    q2 = mixing.CorrelationQuery(observables=(obs.scale(g0, 2.0), g1), times=(0, 3))
    r1 = mixing.multi_correlation(s8, horseshoe, q1)
    r2 = mixing.multi_correlation(s8, horseshoe, q2)
    assert r2.estimate == pytest.approx(2.0 * r1.estimate, rel=1e-12)


def test_permutation_symmetry_equal_times(horseshoe, s8):
    g0 = _bump(2.0, 2.0, 1.5)
    g1 = _bump(-2.0, 2.0, 1.5)
    g2 = _bump(2.0, -2.0, 1.5)
    qa = mixing.CorrelationQuery(observables=(g0, g1, g2), times=(0, 4, 4))
    qb = mixing.CorrelationQuery(observables=(g0, g2, g1), times=(0, 4, 4))
    ra = mixing.multi_correlation(s8, horseshoe, qa)
    rb = mixing.multi_correlation(s8, horseshoe, qb)
    assert ra.estimate == pytest.approx(rb.estimate, abs=1e-14)


def test_min_gap_field(horseshoe, s8):
    q = mixing.CorrelationQuery(
        observables=(obs.constant(1.0),) * 3, times=(0, 3, 8)
    )
    rep = mixing.multi_correlation(s8, horseshoe, q)
    assert rep.min_gap == 3


def test_shift_consistency_exact(horseshoe, s10, mixing_observables):
    g0, g1 = mixing_observables["k1"]
    for n1 in (1, 3, 7, 12):
        q = mixing.CorrelationQuery(observables=(g0, g1), times=(0, n1))
        assert mixing.shift_consistency(s10, horseshoe, q) <= 1e-9


def test_shift_consistency_random_queries(horseshoe, s10):
    rng = rng_stream(17, "queries")
    worst = 0.0
    for _ in range(20):
        c = rng.uniform(-2.5, 2.5, 6)
        kappa = int(rng.integers(1, 3))
        gs = tuple(
            _bump(c[2 * j], c[2 * j + 1], rng.uniform(1.0, 2.0))
            for j in range(kappa + 1)
        )
        times = (0,) + tuple(
            sorted(int(t) for t in rng.integers(1, 2 * s10.period, kappa))
        )
        q = mixing.CorrelationQuery(observables=gs, times=times)
        worst = max(worst, mixing.shift_consistency(s10, horseshoe, q))
    assert worst <= 1e-9


def test_shift_consistency_rejects_zero_times(horseshoe, s8):
    g = obs.constant(1.0)
    q = mixing.CorrelationQuery(observables=(g, g), times=(0, 0))
    with pytest.raises(ValueError):
        mixing.shift_consistency(s8, horseshoe, q)


def test_decay_curve_constants_below_noise(horseshoe, s8):
    fit = mixing.decay_curve(
        s8, horseshoe, [obs.constant(1.0), obs.constant(2.0)], 1, [2, 4, 6]
    )
    assert fit.all_below_noise
    assert math.isnan(fit.slope)


def test_decay_curve_gap_validation(horseshoe, s8):
    g = obs.constant(1.0)
    with pytest.raises(ValueError):
        mixing.decay_curve(s8, horseshoe, [g, g], 1, [])
    with pytest.raises(ValueError):
        mixing.decay_curve(s8, horseshoe, [g, g], 1, [4, 2])
    with pytest.raises(ValueError):
        mixing.decay_curve(s8, horseshoe, [g], 1, [2, 4])


def test_effective_min_gap():
    # on a period-10 sample, times (0, 9) realize separation 1, not 9
    assert mixing.effective_min_gap((0, 9), 10) == 1
    assert mixing.effective_min_gap((0, 3), 10) == 3
    assert mixing.effective_min_gap((0, 5, 10), 10) == 0
    assert mixing.effective_min_gap((0, 3, 6), 10) == 3
    assert mixing.effective_min_gap((0, 4, 8), 10) == 2


def test_decay_curve_alias_structure(horseshoe, s10, mixing_observables):
    g0, g1 = mixing_observables["k1"]
    fit = mixing.decay_curve(s10, horseshoe, [g0, g1], 1, list(range(2, 21)))
    by_gap = dict(zip(fit.gaps, fit.estimates))
    # wrapped gaps alias small gaps bit for bit
    assert by_gap[12] == by_gap[2]
    assert by_gap[15] == by_gap[5]
    aliased = dict(zip(fit.gaps, fit.aliased))
    assert not aliased[2] and not aliased[5]
    assert aliased[6] and aliased[10] and aliased[12] and aliased[20]


def test_decay_curve_slope_negative(horseshoe, s10, mixing_observables):
    g0, g1 = mixing_observables["k1"]
    fit = mixing.decay_curve(s10, horseshoe, [g0, g1], 1, list(range(2, 21)))
    assert not fit.all_below_noise
    assert fit.slope < 0


def test_long_gap_decorrelation(horseshoe, s12, mixing_observables):
    """On the period-12 sample, gap 20 lands at circular separation 4."""
    g0, g1 = mixing_observables["k1"]
    q0 = mixing.CorrelationQuery(observables=(g0, g1), times=(0, 2))
    q20 = mixing.CorrelationQuery(observables=(g0, g1), times=(0, 20))
    r0 = mixing.multi_correlation(s12, horseshoe, q0)
    r20 = mixing.multi_correlation(s12, horseshoe, q20)
    assert abs(r20.estimate) < abs(r0.estimate)
    assert abs(r20.estimate) <= 3.0 * r20.stderr


def test_jackknife_stderr_shrinks_with_period(horseshoe, s10):
    from henonmix.sampler import sample_mu

    s6 = sample_mu(horseshoe, 6, budget=3000, rng_seed=11)
    g0 = _bump(2.39, 2.39, 1.2)
    g1 = _bump(-2.39, 2.39, 1.2)
    q = mixing.CorrelationQuery(observables=(g0, g1), times=(0, 2))
    r6 = mixing.multi_correlation(s6, horseshoe, q)
    r10 = mixing.multi_correlation(s10, horseshoe, q)
    assert r10.stderr / r6.stderr <= 1.0


def test_correlation_csv_format(horseshoe, s8):
    g0 = _bump(2.0, 2.0, 1.5)
    g1 = _bump(-2.0, 2.0, 1.5)
    reports = [
        mixing.multi_correlation(
            s8,
            horseshoe,
            mixing.CorrelationQuery(observables=(g0, g1), times=(0, gap)),
        )
        for gap in (2, 4)
    ]
    csv = mixing.correlation_csv(reports, [2, 4])
    lines = csv.strip().splitlines()
    assert lines[0] == "kappa,gaps,n_times,estimate,stderr,sample_size,theoretical_rate"
    assert len(lines) == 3
    assert lines[1].startswith("1,2,0;2,")
