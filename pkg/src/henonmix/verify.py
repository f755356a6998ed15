"""Cross-module invariant suite behind the `verify` subcommand.

Each check returns (name, passed, detail); the CLI prints one line per
check and exits nonzero when any fails.  These are the fast structural
invariants; the statistical acceptance experiments live in the test suite.
"""

from __future__ import annotations

import math

import numpy as np

from . import clt, green, mixing, observables as obs, sampler
from .config import ExperimentConfig
from .henon import Point
from .util import rng_stream


def _check(name, ok, detail=""):
    return (name, bool(ok), detail)


def check_roundtrip(cfg) -> tuple:
    f = cfg.map
    rng = rng_stream(0, "audit")
    raw = rng.uniform(-1e3, 1e3, (2000, 4))
    z = raw[:, 0] + 1j * raw[:, 1]
    w = raw[:, 2] + 1j * raw[:, 3]
    zf, wf = f.apply_batch(z, w, 1)
    zb, wb = f.apply_batch(zf, wf, -1)
    scale = 1.0 + np.maximum(np.abs(z), np.abs(w))
    dev = np.max(np.maximum(np.abs(zb - z), np.abs(wb - w)) / scale)
    return _check("henon.roundtrip", dev <= 1e-10, f"max rel dev {dev:.2e}")


def check_jacobian_det(cfg) -> tuple:
    f = cfg.map
    rng = rng_stream(1, "audit")
    raw = rng.uniform(-10, 10, (1000, 4))
    z = raw[:, 0] + 1j * raw[:, 1]
    w = raw[:, 2] + 1j * raw[:, 3]
    j11, j12, j21, j22 = f.jacobian_batch(z, w)
    det = j11 * j22 - j12 * j21
    var = float(np.var(np.abs(det - f.det_jacobian)))
    return _check("henon.jacobian_det_constant", var <= 1e-20, f"variance {var:.2e}")


def check_green_functional_equation(cfg) -> tuple:
    f = cfg.map
    d = f.degree
    rng = rng_stream(2, "audit")
    raw = rng.uniform(-10, 10, (4000, 4))
    z = raw[:, 0] + 1j * raw[:, 1]
    w = raw[:, 2] + 1j * raw[:, 3]
    worst = 0.0
    for fn, sign in ((green.green_plus_batch, 1), (green.green_minus_batch, -1)):
        v1, e1, _, esc1 = fn(f, z, w, 100)
        zf, wf = f.apply_batch(z, w, sign)
        v2, e2, _, esc2 = fn(f, zf, wf, 100)
        m = esc1 & esc2
        if m.any():
            worst = max(worst, float(np.max(np.abs(v2[m] - d * v1[m]))))
    return _check("green.functional_equation", worst <= 1e-6, f"max dev {worst:.2e}")


def check_green_nonnegative(cfg) -> tuple:
    f = cfg.map
    rng = rng_stream(3, "audit")
    raw = rng.uniform(-5, 5, (3000, 4))
    v, _, _, _ = green.green_plus_batch(
        f, raw[:, 0] + 1j * raw[:, 1], raw[:, 2] + 1j * raw[:, 3], 60
    )
    return _check("green.nonnegative", float(np.min(v)) >= 0.0, f"min {np.min(v):.2e}")


def check_classification_monotone(cfg) -> tuple:
    f = cfg.map
    rng = rng_stream(4, "audit")
    raw = rng.uniform(-6, 6, (200, 4))
    z = raw[:, 0] + 1j * raw[:, 1]
    w = raw[:, 2] + 1j * raw[:, 3]
    short = green.classify_batch(f, z, w, 20)
    long = green.classify_batch(f, z, w, 40)
    ok = all(
        (s.forward_escape_index < 0 or l.forward_escape_index >= 0)
        and (s.backward_escape_index < 0 or l.backward_escape_index >= 0)
        for s, l in zip(short, long)
    )
    return _check("green.classification_monotone", ok)


def _default_sample(cfg):
    s = cfg.sampler
    period = min(int(s.get("period", 8)), 8)
    budget = min(int(s.get("budget", 3000)), 3000)
    return sampler.sample_mu(
        cfg.map,
        period,
        budget,
        int(s.get("rng_seed", 0)),
        box=s.get("box"),
        tol=float(s.get("tol", 1e-11)),
    )


def check_sample_invariance(cfg, sample=None) -> tuple:
    s = sample or _default_sample(cfg)
    dev = sampler.support_invariance_deviation(s, cfg.map)
    return _check("sampler.support_invariance", dev <= 1e-9, f"max dev {dev:.2e}")


def check_multiplier_consistency(cfg, sample=None) -> tuple:
    s = sample or _default_sample(cfg)
    det = cfg.map.det_jacobian
    worst = max(
        abs(o.multipliers[0] * o.multipliers[1] - det**o.period)
        / abs(det**o.period)
        for o in s.orbits
    )
    return _check("sampler.multiplier_consistency", worst <= 1e-6, f"max rel {worst:.2e}")


def check_orbit_count_bound(cfg, sample=None) -> tuple:
    s = sample or _default_sample(cfg)
    ok = s.n_points <= cfg.map.degree**s.period
    return _check(
        "sampler.orbit_count_bound",
        ok,
        f"{s.n_points} <= {cfg.map.degree}^{s.period}",
    )


def check_green_zero_on_saddles(cfg, sample=None) -> tuple:
    s = sample or _default_sample(cfg)
    v, _, _, _ = green.green_plus_batch(cfg.map, s.z, s.w, 100)
    worst = float(np.max(v))
    # double-precision saddles drift off the orbit after ~log(R/eps)/log l1
    # steps, so the escape-rate value floor is ~d^-drift, not exactly 0
    return _check("green.zero_on_saddles", worst <= 1e-5, f"max {worst:.2e}")


def check_invariance_identity(cfg, sample=None) -> tuple:
    s = sample or _default_sample(cfg)
    g0 = obs.make_bump(Point(1.0, 1.0), 2.0, 1.0)
    h = obs.make_bump(Point(-1.0, 0.5), 2.0, 1.0)
    worst = max(
        sampler.invariance_identity_check(s, cfg.map, g0, h, n)
        for n in range(0, s.period + 1, 2)
    )
    return _check("sampler.invariance_identity", worst <= 1e-9, f"max dev {worst:.2e}")


def check_shift_consistency(cfg, sample=None) -> tuple:
    s = sample or _default_sample(cfg)
    rng = rng_stream(5, "queries")
    worst = 0.0
    for _ in range(20):
        c = rng.uniform(-2.5, 2.5, 4)
        q = mixing.CorrelationQuery(
            observables=(
                obs.make_bump(Point(c[0], c[1]), rng.uniform(1.0, 2.0)),
                obs.make_bump(Point(c[2], c[3]), rng.uniform(1.0, 2.0)),
            ),
            times=(0, int(rng.integers(1, 2 * s.period))),
        )
        worst = max(worst, mixing.shift_consistency(s, cfg.map, q))
    return _check("mixing.shift_consistency", worst <= 1e-9, f"max dev {worst:.2e}")


def check_theoretical_rate(cfg) -> tuple:
    vals = [
        abs(mixing.theoretical_rate(1, 2.0, 2) - 2 ** -0.5) < 1e-12,
        abs(mixing.theoretical_rate(1, 1.0, 2) - 2 ** -0.125) < 1e-12,
    ]
    inside = all(
        0 < mixing.theoretical_rate(k, g, d) < 1
        for k in (1, 2, 5)
        for g in (0.5, 1.0, 2.0)
        for d in (2, 3, 7)
    )
    return _check("mixing.theoretical_rate", all(vals) and inside)


def check_positivity_brackets(cfg) -> tuple:
    ok = abs(obs.positivity_bracket(1, 10.0) - 7.0) < 1e-12
    ok &= abs(obs.positivity_bracket(2, 20.0) - 298.0) < 1e-9
    ok &= all(obs.positivity_bracket(k, 10.0 * k) > 0 for k in range(1, 21))
    k = np.arange(1, 1_000_001, dtype=np.float64)
    ok &= bool(np.all((1.0 + 1.0 / k) ** k < 3.0))
    return _check("observables.positivity_brackets", ok)


def check_decomposition(cfg) -> tuple:
    g = obs.make_bump(Point(0.3, -0.2), 0.8, 0.7)
    dec = obs.c2_decompose(g, 1.5, 2.5)
    rng = rng_stream(6, "audit")
    pts = rng.normal(size=(2000, 4))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    r = 1.5 * rng.uniform(0, 1, 2000) ** 0.25
    z = (pts[:, 0] + 1j * pts[:, 1]) * r
    w = (pts[:, 2] + 1j * pts[:, 3]) * r
    recon = float(
        np.max(
            np.abs(
                dec.A * (dec.g_plus.eval_batch(z, w) - dec.g_minus.eval_batch(z, w))
                - g.eval_batch(z, w)
            )
        )
    )
    margins = []
    for piece in (dec.g_plus, dec.g_minus):
        h11, h12, h22 = piece.hessian_batch(z, w)
        gz, gw = piece.gradient_batch(z, w)
        a = h11 - np.abs(gz) ** 2
        b = h12 - gz * np.conj(gw)
        c = h22 - np.abs(gw) ** 2
        margins.append(float(np.min((a + c) / 2 - np.sqrt(((a - c) / 2) ** 2 + np.abs(b) ** 2))))
    ok = recon <= 1e-12 and min(margins) >= -1e-9
    return _check(
        "observables.c2_decomposition",
        ok,
        f"recon {recon:.2e}, loewner margin {min(margins):.2e}",
    )


def check_mollify_constants(cfg) -> tuple:
    c = obs.constant(2.5)
    m = obs.mollify(c, 0.125, measure_box=1.0)
    rng = rng_stream(7, "audit")
    raw = rng.uniform(-1, 1, (50, 4))
    dev = float(
        np.max(np.abs(m.eval_batch(raw[:, 0] + 1j * raw[:, 1],
                                   raw[:, 2] + 1j * raw[:, 3]) - 2.5))
    )
    return _check("observables.mollify_constants", dev <= 1e-12, f"max dev {dev:.2e}")


def check_clt_degenerate(cfg, sample=None) -> tuple:
    s = sample or _default_sample(cfg)
    f = cfg.map
    const_rep = clt.clt_test(s, f, obs.constant(1.3), max(8, s.period))
    v = obs.make_bump(Point(1.5, 1.5), 2.0, 1.0)
    cob = obs.combine([v, obs.pullback(v, f, 1)], [1.0, -1.0])
    n = int(math.ceil(16 / s.period)) * s.period  # multiple of the period
    cob_rep = clt.clt_test(s, f, cob, n)
    ok = const_rep.degenerate and cob_rep.degenerate
    ok &= cob_rep.max_abs_normalized <= 2.0 / math.sqrt(n) + 1e-12
    return _check(
        "clt.degenerate_branch",
        ok,
        f"const deg={const_rep.degenerate}, coboundary deg={cob_rep.degenerate}",
    )


def check_clt_estimator_identity(cfg, sample=None) -> tuple:
    s = sample or _default_sample(cfg)
    u = obs.make_bump(Point(2.0, 2.0), 1.5, 1.0)
    b = clt.sigma2_batch(s, cfg.map, u, 16)
    g = clt.sigma2_green_kubo(s, cfg.map, u, 15)
    rel = abs(b - g) / max(abs(b), 1e-300)
    return _check("clt.bartlett_identity", rel <= 1e-10, f"rel dev {rel:.2e}")


def check_determinism(cfg) -> tuple:
    s = cfg.sampler
    period = min(int(s.get("period", 6)), 6)
    budget = min(int(s.get("budget", 2000)), 2000)
    seed = int(s.get("rng_seed", 0))
    s1 = sampler.sample_mu(cfg.map, period, budget, seed, box=s.get("box"))
    s2 = sampler.sample_mu(cfg.map, period, budget, seed, box=s.get("box"))
    ok = sampler.sample_to_csv(s1) == sampler.sample_to_csv(s2)
    return _check("cli.sampler_determinism", ok)


ALL_CHECKS = [
    check_roundtrip,
    check_jacobian_det,
    check_green_functional_equation,
    check_green_nonnegative,
    check_classification_monotone,
    check_sample_invariance,
    check_multiplier_consistency,
    check_orbit_count_bound,
    check_green_zero_on_saddles,
    check_invariance_identity,
    check_shift_consistency,
    check_theoretical_rate,
    check_positivity_brackets,
    check_decomposition,
    check_mollify_constants,
    check_clt_degenerate,
    check_clt_estimator_identity,
    check_determinism,
]


def run_all(cfg: ExperimentConfig):
    """Run the invariant suite; returns (results, all_passed)."""
    sample = _default_sample(cfg)
    results = []
    for fn in ALL_CHECKS:
        try:
            if "sample" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                results.append(fn(cfg, sample=sample))
            else:
                results.append(fn(cfg))
        except Exception as exc:  # a crashed check is a failed check
            results.append((fn.__name__, False, f"raised {type(exc).__name__}: {exc}"))
    return results, all(ok for _, ok, _ in results)
