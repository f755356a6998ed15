"""Sampling the maximal-entropy measure by saddle periodic orbits.

The sampler approximates mu by the uniform measure on all distinct fixed
points of f^n it can find: damped Newton from random seeds, orbit-level
deduplication, then a multiple-shooting polish of each whole orbit.  The
polish step matters: refining only one point and iterating it around the
orbit amplifies the root error by the unstable multiplier to the n-th
power, which would break the exact-permutation invariance the estimators
rely on.  Polished orbits close up to ~1e-12, so the sample is invariant
under f as a permuted point set to that accuracy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .green import escape_radius, escape_radius_backward
from .henon import HenonMap, Point
from .util import fsum, rng_stream


@dataclass(frozen=True)
class PeriodicOrbit:
    """One periodic orbit, stored at its minimal period."""

    period: int
    points_z: np.ndarray
    points_w: np.ndarray
    multipliers: tuple[complex, complex]  # |lambda1| >= |lambda2|
    residual: float  # max_i ||f(x_i) - x_{i+1 mod n}||_inf after polish
    degenerate: bool = False

    @property
    def is_saddle(self) -> bool:
        l1, l2 = self.multipliers
        return abs(l1) > 1.0 > abs(l2)

    @property
    def points(self) -> tuple[Point, ...]:
        return tuple(
            Point(complex(z), complex(w))
            for z, w in zip(self.points_z, self.points_w)
        )

    def representative(self) -> tuple[float, float, float, float]:
        """Lexicographically smallest point, the dedup key."""
        keys = sorted(
            (z.real, z.imag, w.real, w.imag)
            for z, w in zip(self.points_z, self.points_w)
        )
        return keys[0]


@dataclass(frozen=True)
class MeasureSample:
    """Uniform weights on the distinct fixed points of f^period found.

    The support is exactly f-invariant as a point set (up to orbit closure
    residual), which is what makes shift identities testable at 1e-9
    instead of Monte Carlo noise.
    """

    orbits: tuple[PeriodicOrbit, ...]
    period: int  # the requested n; orbit minimal periods divide it
    map_fingerprint: str
    rng_seed: int
    budget: int
    stats: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.orbits:
            raise ValueError("a MeasureSample needs at least one orbit")

    @cached_property
    def _flat(self):
        zs, ws, orbit_id, pos, length, start = [], [], [], [], [], []
        offset = 0
        for k, orb in enumerate(self.orbits):
            m = orb.period
            zs.append(orb.points_z)
            ws.append(orb.points_w)
            orbit_id.append(np.full(m, k))
            pos.append(np.arange(m))
            length.append(np.full(m, m))
            start.append(np.full(m, offset))
            offset += m
        return (
            np.concatenate(zs).astype(np.complex128),
            np.concatenate(ws).astype(np.complex128),
            np.concatenate(orbit_id).astype(np.int64),
            np.concatenate(pos).astype(np.int64),
            np.concatenate(length).astype(np.int64),
            np.concatenate(start).astype(np.int64),
        )

    @property
    def z(self) -> np.ndarray:
        return self._flat[0]

    @property
    def w(self) -> np.ndarray:
        return self._flat[1]

    @property
    def orbit_id(self) -> np.ndarray:
        return self._flat[2]

    @property
    def n_points(self) -> int:
        return int(self._flat[0].shape[0])

    @property
    def n_orbits(self) -> int:
        return len(self.orbits)

    @property
    def weights(self) -> np.ndarray:
        n = self.n_points
        return np.full(n, 1.0 / n)

    def advance_indices(self, m: int) -> np.ndarray:
        """Global index permutation realizing f^m on the sample support."""
        _, _, _, pos, length, start = self._flat
        return start + (pos + m) % length

    def shifted_values(self, values: np.ndarray, m: int) -> np.ndarray:
        """values of (g o f^m) on the sample given values of g on it."""
        return values[self.advance_indices(m)]


# ---------------------------------------------------------------------------
# periodic-orbit search
# ---------------------------------------------------------------------------


def find_periodic(
    f: HenonMap,
    n: int,
    seeds: int,
    box: float,
    tol: float = 1e-11,
    rng_seed: int = 0,
    max_iter: int = 200,
    max_halvings: int = 30,
) -> tuple[list[PeriodicOrbit], dict]:
    """All period-n orbits reachable within the seed budget.

    Candidate orbits come from two routes, both finished by the same damped
    multiple-shooting Newton and orbit-level dedup:

    * single-shooting damped Newton on x -> f^n(x) - x from ``seeds`` random
      starts in the box.  Its attraction basins shrink like the unstable
      multiplier to the -n, so alone it stops saturating around n ~ 6;
    * for maps whose factors are all quadratic, backbone loops: periodic
      itineraries of the decoupled (a = 0) polynomial dynamics, computed by
      inverse-branch iteration and carried to the full map by the orbit
      Newton.  All d^n itineraries are enumerated when d^n <= seeds,
      otherwise ``seeds`` random itineraries are drawn.

    Returns orbits of minimal period dividing n, recorded at their minimal
    period, plus a statistics dict; divergent seeds are a statistic, not an
    error.
    """
    if n < 1:
        raise ValueError("period must be >= 1")
    if seeds < 1:
        raise ValueError("need at least one seed")
    if tol <= 0:
        raise ValueError("tol must be positive")
    coeffs, degs, avals = f.packed()
    rng = rng_stream(rng_seed, "sampler")
    raw = rng.uniform(-box, box, size=(seeds, 4))
    z0 = raw[:, 0] + 1j * raw[:, 1]
    w0 = raw[:, 2] + 1j * raw[:, 3]
    if _is_real_map(f):
        # real maximal-entropy maps carry their saddles in the real plane;
        # keep a complex share as a hedge
        nreal = (3 * seeds) // 4
        z0[:nreal] = z0[:nreal].real + 0.0j
        w0[:nreal] = w0[:nreal].real + 0.0j
    abort = 4.0 * max(escape_radius(f), box)
    zr, wr, _, status, _ = kernels.newton_batch(
        coeffs, degs, avals, z0, w0, n, tol, max_iter, max_halvings, abort
    )
    conv = status == kernels.STATUS_CONVERGED
    stats = {
        "seeds": int(seeds),
        "converged": int(conv.sum()),
        "diverged": int((status == kernels.STATUS_DIVERGED).sum()),
        "iteration_capped": int((status == kernels.STATUS_MAXITER).sum()),
    }
    roots = _dedup_points(zr[conv], wr[conv], 10.0 * tol)
    stats["unique_roots"] = len(roots)

    loops_z, loops_w = _orbit_guesses_from_roots(f, roots, n)
    if f.all_factors_quadratic:
        bz, bw = _backbone_loops(f, n, seeds, rng)
        stats["backbone_loops"] = int(bz.shape[0])
        loops_z = np.concatenate([loops_z, bz])
        loops_w = np.concatenate([loops_w, bw])

    oz, ow, res = _polish_loops(f, loops_z, loops_w)
    good = np.isfinite(res) & (res <= tol)
    stats["polish_failures"] = int((~good).sum())

    orbits: list[PeriodicOrbit] = []
    reps: list[tuple[float, float, float, float]] = []
    for i in np.flatnonzero(good):
        m = _minimal_period(oz[i], ow[i], n)
        pz, pw = oz[i][:m].copy(), ow[i][:m].copy()
        mult = _multipliers(f, pz, pw)
        orb = PeriodicOrbit(
            period=m,
            points_z=pz,
            points_w=pw,
            multipliers=mult,
            residual=float(res[i]),
            # eigenvalue 1 of Df^m marks a non-simple fixed point of f^m
            degenerate=bool(min(abs(mult[0] - 1), abs(mult[1] - 1)) < 1e-6),
        )
        rep = orb.representative()
        if _is_new_rep(reps, rep, 10.0 * tol):
            reps.append(rep)
            orbits.append(orb)
    orbits.sort(key=lambda o: (o.period, o.representative()))
    stats["orbits"] = len(orbits)
    stats["points"] = sum(o.period for o in orbits)
    return orbits, stats


def _is_real_map(f: HenonMap) -> bool:
    return all(
        fac.a.imag == 0 and all(c.imag == 0 for c in fac.coeffs)
        for fac in f.factors
    )


def _orbit_guesses_from_roots(f: HenonMap, roots, n: int):
    """Expand single-shooting roots into orbit loops by iteration."""
    loops_z = np.zeros((len(roots), n), dtype=np.complex128)
    loops_w = np.zeros((len(roots), n), dtype=np.complex128)
    for k, (z, w) in enumerate(roots):
        x = Point(z, w)
        for i in range(n):
            loops_z[k, i] = x.z
            loops_w[k, i] = x.w
            x = f.apply(x)
    return loops_z, loops_w


def _backbone_loops(f: HenonMap, n: int, budget: int, rng):
    """Periodic loops of the a = 0 backbone, one per itinerary.

    The backbone of an all-quadratic factor chain iterates the composed
    polynomial P = p_m o ... o p_1; its period-n orbits are fixed points of
    cyclic inverse-branch iteration, one choice of quadratic branch per
    factor per step.  Enumerates all d^n itineraries when they fit the
    budget, otherwise draws ``budget`` random ones.
    """
    m = len(f.factors)
    d = f.degree
    total = d**n  # = 2^(m*n) branch choices
    nbits = m * n
    if total <= budget:
        codes = np.arange(total, dtype=np.int64)
    else:
        codes = rng.integers(0, total, size=budget, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(nbits)[None, :]) & 1
    signs = np.where(bits == 1, 1.0, -1.0).reshape(-1, n, m)
    B = signs.shape[0]
    z = np.zeros((B, n), dtype=np.complex128)
    for _ in range(90):
        y = np.roll(z, -1, axis=1)
        for j in range(m - 1, -1, -1):
            c = f.factors[j].coeffs
            # p(z) = z^2 + c1 z + c0 = y  =>  z = -c1/2 + s sqrt(y - c0 + c1^2/4)
            y = -c[1] / 2.0 + signs[:, :, j] * np.sqrt(y - c[0] + c[1] * c[1] / 4.0)
        z = y
    w = _backbone_w_guess(f, np.roll(z, 1, axis=1))
    return z, w


def _backbone_w_guess(f: HenonMap, zprev):
    """w component of the a = 0 map output given the previous z."""
    u = zprev
    for fac in f.factors[:-1]:
        pu = np.full_like(u, fac.coeffs[-1])
        for i in range(fac.degree - 1, -1, -1):
            pu = pu * u + fac.coeffs[i]
        u = pu
    return u


def _polish_loops(f: HenonMap, loops_z, loops_w, iters: int = 20,
                  max_halvings: int = 30, chunk: int = 4096):
    """Damped multiple-shooting Newton on whole orbit loops, batched.

    Solves f(x_i) = x_{i+1 mod n} for all points of each loop at once; its
    convergence basin does not degrade with n, and the closure residual of
    an accepted orbit lands at ~1e-14 where iterating a single refined root
    around the loop would amplify the error by the unstable multiplier to
    the n-th power.
    """
    B, n = loops_z.shape
    oz = loops_z.astype(np.complex128).copy()
    ow = loops_w.astype(np.complex128).copy()
    res = np.full(B, np.inf)
    for lo in range(0, B, chunk):
        hi = min(lo + chunk, B)
        oz[lo:hi], ow[lo:hi], res[lo:hi] = _polish_chunk(
            f, oz[lo:hi], ow[lo:hi], iters, max_halvings
        )
    return oz, ow, res


def _loop_residual(f: HenonMap, oz, ow, nxt):
    zf, wf = f.apply_batch(oz, ow, 1)
    rz = zf - oz[:, nxt]
    rw = wf - ow[:, nxt]
    return rz, rw, np.maximum(np.abs(rz), np.abs(rw)).max(axis=1)


def _polish_chunk(f: HenonMap, oz, ow, iters, max_halvings):
    B, n = oz.shape
    nxt = np.roll(np.arange(n), -1)
    ar = np.arange(n)
    rz, rw, rn = _loop_residual(f, oz, ow, nxt)
    active = np.isfinite(rn)
    for _ in range(iters):
        work = active & (rn > 1e-14)
        idx = np.flatnonzero(work)
        if idx.size == 0:
            break
        zc, wc = oz[idx], ow[idx]
        j11, j12, j21, j22 = f.jacobian_batch(zc.ravel(), wc.ravel())
        j11 = j11.reshape(idx.size, n)
        j12 = j12.reshape(idx.size, n)
        j21 = j21.reshape(idx.size, n)
        j22 = j22.reshape(idx.size, n)
        J = np.zeros((idx.size, 2 * n, 2 * n), dtype=np.complex128)
        J[:, 2 * ar, 2 * ar] = j11
        J[:, 2 * ar, 2 * ar + 1] = j12
        J[:, 2 * ar + 1, 2 * ar] = j21
        J[:, 2 * ar + 1, 2 * ar + 1] = j22
        J[:, 2 * ar, 2 * nxt] += -1.0
        J[:, 2 * ar + 1, 2 * nxt + 1] += -1.0
        rzc, rwc, _ = _loop_residual(f, zc, wc, nxt)
        F = np.zeros((idx.size, 2 * n), dtype=np.complex128)
        F[:, 0::2] = rzc
        F[:, 1::2] = rwc
        try:
            delta = np.linalg.solve(J, -F[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            # singular blocks poison the whole chunk solve; fall back to
            # per-loop solves, dropping the singular ones
            delta = np.zeros_like(F)
            for b in range(idx.size):
                try:
                    delta[b] = np.linalg.solve(J[b], -F[b])
                except np.linalg.LinAlgError:
                    active[idx[b]] = False
        bad = ~np.isfinite(delta).all(axis=1)
        active[idx[bad]] = False
        dz = delta[:, 0::2]
        dw = delta[:, 1::2]
        damp = np.ones(idx.size)
        pending = np.ones(idx.size, dtype=bool) & active[idx]
        for _ in range(max_halvings + 1):
            p = np.flatnonzero(pending)
            if p.size == 0:
                break
            g = idx[p]
            zt = oz[g] + damp[p, None] * dz[p]
            wt = ow[g] + damp[p, None] * dw[p]
            _, _, tn = _loop_residual(f, zt, wt, nxt)
            better = tn < rn[g]
            acc = g[better]
            oz[acc] = zt[better]
            ow[acc] = wt[better]
            rn[acc] = tn[better]
            pending[p[better]] = False
            damp[p[~better]] *= 0.5
        active[idx[pending]] = False  # no achievable decrease
    _, _, rn = _loop_residual(f, oz, ow, nxt)
    rn[~active & (rn > 1e-10)] = np.inf
    return oz, ow, rn


def sample_mu(
    f: HenonMap,
    n: int,
    budget: int,
    rng_seed: int,
    box: float | None = None,
    tol: float = 1e-11,
) -> MeasureSample:
    """MeasureSample over all saddle orbits of minimal period dividing n."""
    if box is None:
        box = max(escape_radius(f), escape_radius_backward(f))
    orbits, stats = find_periodic(f, n, budget, box, tol=tol, rng_seed=rng_seed)
    saddles = tuple(o for o in orbits if o.is_saddle and not o.degenerate)
    stats["non_saddle"] = len(orbits) - len(saddles)
    if not saddles:
        raise RuntimeError(
            f"no saddle orbits of period dividing {n} found with {budget} seeds; "
            "raise the budget or check the map parameters"
        )
    return MeasureSample(
        orbits=saddles,
        period=n,
        map_fingerprint=f.fingerprint(),
        rng_seed=rng_seed,
        budget=budget,
        stats=stats,
    )


def _dedup_points(z: np.ndarray, w: np.ndarray, radius: float):
    """Distinct points among (z, w) at the given sup-norm radius."""
    if z.shape[0] == 0:
        return []
    order = np.lexsort((w.imag, w.real, z.imag, z.real))
    z, w = z[order], w[order]
    kept_z: list[complex] = []
    kept_w: list[complex] = []
    for zi, wi in zip(z, w):
        new = True
        # lexsort on Re z makes earlier candidates with close Re z adjacent
        for j in range(len(kept_z) - 1, -1, -1):
            if zi.real - kept_z[j].real > radius:
                break
            if (
                max(abs(zi - kept_z[j]), abs(wi - kept_w[j])) <= radius
            ):
                new = False
                break
        if new:
            kept_z.append(complex(zi))
            kept_w.append(complex(wi))
    return list(zip(kept_z, kept_w))


def _is_new_rep(reps, rep, radius: float) -> bool:
    for r in reps:
        if max(abs(rep[0] - r[0]), abs(rep[1] - r[1]),
               abs(rep[2] - r[2]), abs(rep[3] - r[3])) <= radius:
            return False
    return True


def _minimal_period(oz, ow, n: int) -> int:
    """Smallest divisor m of n with f^m = identity on the orbit points."""
    for m in range(1, n):
        if n % m:
            continue
        shift = np.roll(np.arange(n), -m)
        dev = max(
            float(np.max(np.abs(oz[shift] - oz))),
            float(np.max(np.abs(ow[shift] - ow))),
        )
        if dev <= 1e-6:
            return m
    return n


def _large_eig(m11, m12, m21, m22) -> complex:
    """Large-modulus eigenvalue of a 2x2 matrix, cancellation-safe."""
    tr = m11 + m22
    det = m11 * m22 - m12 * m21
    disc = np.sqrt(complex(tr * tr - 4.0 * det))
    if (tr.conjugate() * disc).real < 0.0:
        disc = -disc
    lam = (tr + disc) / 2.0
    if lam == 0:  # tr == 0 and det == 0
        return complex(0.0)
    return complex(lam)


def _multipliers(f: HenonMap, oz, ow) -> tuple[complex, complex]:
    """(lambda1, lambda2) of Df^m at the orbit, |lambda1| >= |lambda2|.

    lambda1 comes from the forward Jacobian product; lambda2 from the
    inverse-map product (1 over its large eigenvalue), because the small
    eigenvalue of the forward product is lost to cancellation in its
    determinant.  The pair supplies an honest two-route consistency check
    against det(Df)^m.
    """
    m = oz.shape[0]
    Jf = np.eye(2, dtype=np.complex128)
    for i in range(m):
        Jf = f.jacobian(Point(oz[i], ow[i])) @ Jf
    l1 = _large_eig(Jf[0, 0], Jf[0, 1], Jf[1, 0], Jf[1, 1])
    Jb = np.eye(2, dtype=np.complex128)
    for k in range(m):
        i = (-k) % m
        Jb = f.jacobian_inverse(Point(oz[i], ow[i])) @ Jb
    nu = _large_eig(Jb[0, 0], Jb[0, 1], Jb[1, 0], Jb[1, 1])
    l2 = 1.0 / nu if nu != 0 else complex(np.inf)
    if abs(l1) < abs(l2):
        l1, l2 = l2, l1
    return (complex(l1), complex(l2))


# ---------------------------------------------------------------------------
# integration against the sample
# ---------------------------------------------------------------------------


def empirical_integral(s: MeasureSample, values_or_obs) -> float:
    """<mu_hat, g> by compensated summation of uniform-weight values."""
    vals = _values_on(s, values_or_obs)
    return fsum(vals) / s.n_points


def _values_on(s: MeasureSample, values_or_obs) -> np.ndarray:
    if isinstance(values_or_obs, np.ndarray):
        if values_or_obs.shape[0] != s.n_points:
            raise ValueError("value array does not match the sample size")
        return values_or_obs
    return values_or_obs.eval_batch(s.z, s.w)


def invariance_identity_check(
    s: MeasureSample, f: HenonMap, g0, h, n: int
) -> float:
    """| <g0 (h o f^n)> - <(g0 o f^-n/2)(h o f^n/2)> | on the sample.

    Exact permutation invariance of the support makes this vanish to float
    rounding for even n; odd n is rejected.
    """
    if n % 2:
        raise ValueError("the identity requires an even time shift")
    if n > s.period:
        raise ValueError("time shift exceeds the sample period")
    g0v = _values_on(s, g0)
    hv = _values_on(s, h)
    lhs = fsum(g0v * s.shifted_values(hv, n)) / s.n_points
    rhs = fsum(
        s.shifted_values(g0v, -(n // 2)) * s.shifted_values(hv, n // 2)
    ) / s.n_points
    return abs(lhs - rhs)


def support_invariance_deviation(s: MeasureSample, f: HenonMap) -> float:
    """max_i ||f(x_i) - x_{sigma(i)}||_inf: Hausdorff bound for f(support)."""
    zf, wf = f.apply_batch(s.z, s.w, 1)
    idx = s.advance_indices(1)
    return float(
        np.max(np.maximum(np.abs(zf - s.z[idx]), np.abs(wf - s.w[idx])))
    )


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

CSV_HEADER = (
    "period,orbit_index,point_index,re_z,im_z,re_w,im_w,abs_l1,abs_l2,residual"
)


def sample_to_csv(s: MeasureSample) -> str:
    from .util import format_float as ff

    lines = [CSV_HEADER]
    for k, orb in enumerate(s.orbits):
        l1, l2 = orb.multipliers
        for i in range(orb.period):
            z = orb.points_z[i]
            w = orb.points_w[i]
            lines.append(
                f"{orb.period},{k},{i},{ff(z.real)},{ff(z.imag)},"
                f"{ff(w.real)},{ff(w.imag)},{ff(abs(l1))},{ff(abs(l2))},"
                f"{ff(orb.residual)}"
            )
    return "\n".join(lines) + "\n"


def sample_header_json(s: MeasureSample) -> str:
    payload = {
        "map_fingerprint": s.map_fingerprint,
        "period": s.period,
        "rng_seed": s.rng_seed,
        "budget": s.budget,
        "n_orbits": s.n_orbits,
        "n_points": s.n_points,
        "orbits": [
            {
                "period": o.period,
                "multipliers": [
                    [o.multipliers[0].real, o.multipliers[0].imag],
                    [o.multipliers[1].real, o.multipliers[1].imag],
                ],
                "residual": o.residual,
                "degenerate": o.degenerate,
            }
            for o in s.orbits
        ],
        "stats": s.stats,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def load_sample(csv_text: str, header_json: str) -> MeasureSample:
    """Rebuild a MeasureSample from its CSV rows and JSON header."""
    head = json.loads(header_json)
    rows = csv_text.strip().splitlines()
    if rows[0] != CSV_HEADER:
        raise ValueError("unrecognized sample CSV header")
    by_orbit: dict[int, list] = {}
    for row in rows[1:]:
        parts = row.split(",")
        k = int(parts[1])
        by_orbit.setdefault(k, []).append(parts)
    orbits = []
    for k in sorted(by_orbit):
        parts_list = sorted(by_orbit[k], key=lambda p: int(p[2]))
        meta = head["orbits"][k]
        oz = np.array(
            [float(p[3]) + 1j * float(p[4]) for p in parts_list],
            dtype=np.complex128,
        )
        ow = np.array(
            [float(p[5]) + 1j * float(p[6]) for p in parts_list],
            dtype=np.complex128,
        )
        (l1r, l1i), (l2r, l2i) = meta["multipliers"]
        orbits.append(
            PeriodicOrbit(
                period=int(parts_list[0][0]),
                points_z=oz,
                points_w=ow,
                multipliers=(complex(l1r, l1i), complex(l2r, l2i)),
                residual=float(parts_list[0][9]),
                degenerate=bool(meta["degenerate"]),
            )
        )
    return MeasureSample(
        orbits=tuple(orbits),
        period=int(head["period"]),
        map_fingerprint=head["map_fingerprint"],
        rng_seed=int(head["rng_seed"]),
        budget=int(head["budget"]),
        stats=dict(head.get("stats", {})),
    )
