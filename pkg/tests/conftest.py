import numpy as np
import pytest

from henonmix import observables as obs
from henonmix.henon import HORSESHOE, Point, henon_quadratic
from henonmix.sampler import sample_mu


@pytest.fixture(scope="session")
def horseshoe():
    return HORSESHOE


@pytest.fixture(scope="session")
def square_map():
    # p(z) = z^2, a = 1: fixed points (0,0) and (2,2)
    return henon_quadratic(0.0, 1.0)


@pytest.fixture(scope="session")
def s8(horseshoe):
    return sample_mu(horseshoe, 8, budget=4000, rng_seed=11)


@pytest.fixture(scope="session")
def s10(horseshoe):
    return sample_mu(horseshoe, 10, budget=6000, rng_seed=11)


@pytest.fixture(scope="session")
def s12(horseshoe):
    return sample_mu(horseshoe, 12, budget=9000, rng_seed=11)


def _bump(zc, wc, r, h=1.0):
    return obs.make_bump(Point(zc, wc), r, h)


# Sub-band geometry of the horseshoe Cantor set (measured once from the
# sampled support): the positive z band [1.643, 3.060] splits at the gap
# (2.118, 2.739); sub-band centers 1.88 / 2.90, midpoint 2.39.  The outer
# sub-band splits again at (2.96, 3.024): centers 2.85 / 3.04.
W_CENTERS = (1.88, 2.90, -1.88, -2.90)


def subband_detector(weight_depth2: float):
    """Signed detector of the first (and second) z sub-band splits.

    Mean ~ 0 by the balanced signs; correlates with w-band catchers at
    small positive gaps through the shared deeper symbols.
    """
    terms, weights = [], []
    for wc in W_CENTERS:
        terms += [_bump(2.90, wc, 0.9), _bump(1.88, wc, 0.9)]
        weights += [1.0, -1.0]
    for wc in W_CENTERS:
        terms += [_bump(3.04, wc, 0.4), _bump(2.85, wc, 0.4)]
        weights += [weight_depth2, -weight_depth2]
    return obs.combine(terms, weights)


def w_plateau(sign: float = 1.0):
    """Broad plateau over one w band (both z bands, all z sub-bands)."""
    terms = [
        _bump(zc, sign * wc, 1.0)
        for zc in (1.88, 2.90, -1.88, -2.90)
        for wc in (1.88, 2.90)
    ]
    return obs.combine(terms, [1.0] * len(terms))


@pytest.fixture(scope="session")
def mixing_observables():
    return {
        "k1": [subband_detector(1.5), w_plateau(+1.0)],
        "k2": [subband_detector(2.0), w_plateau(+1.0), w_plateau(-1.0)],
    }


@pytest.fixture(scope="session")
def clt_observable():
    # antisymmetric bump pair: symmetrizes the window-sum distribution
    return obs.combine([_bump(2.39, 2.39, 1.2), _bump(-2.39, 2.39, 1.2)], [1.0, -1.0])


@pytest.fixture(scope="session")
def coboundary_pair(horseshoe):
    v = _bump(2.39, 2.39, 1.5)
    u = obs.combine([v, obs.pullback(v, horseshoe, 1)], [1.0, -1.0])
    return v, u
