"""numba-compiled hot loops.

All kernels take the packed map representation produced by
``HenonMap.packed()``:

    coeffs : complex128[m, kmax+1]   rows are c0..ck then zero padding
    degs   : int64[m]                polynomial degree of each factor
    avals  : complex128[m]           Jacobian coefficient of each factor

Semantics must stay in lockstep with ``_kernels_numpy``; the benchmark
script asserts agreement between the two backends.
"""

import numpy as np
from numba import njit

STATUS_CONVERGED = 0
STATUS_MAXITER = 1
STATUS_DIVERGED = 2


@njit(cache=True)
def _poly(c, deg, z):
    acc = c[deg]
    for i in range(deg - 1, -1, -1):
        acc = acc * z + c[i]
    return acc


@njit(cache=True)
def _dpoly(c, deg, z):
    acc = deg * c[deg]
    for i in range(deg - 1, 0, -1):
        acc = acc * z + i * c[i]
    return acc


@njit(cache=True)
def _step_fwd(coeffs, degs, avals, z, w):
    for j in range(degs.shape[0]):
        z, w = _poly(coeffs[j], degs[j], z) - avals[j] * w, z
    return z, w


@njit(cache=True)
def _step_bwd(coeffs, degs, avals, z, w):
    for j in range(degs.shape[0] - 1, -1, -1):
        z, w = w, (_poly(coeffs[j], degs[j], w) - z) / avals[j]
    return z, w


@njit(cache=True)
def iterate_batch(coeffs, degs, avals, z, w, nsteps, forward):
    """Apply f (or f^-1) ``nsteps`` times to each point of (z, w)."""
    zo = np.empty_like(z)
    wo = np.empty_like(w)
    for i in range(z.shape[0]):
        zi = z[i]
        wi = w[i]
        if forward:
            for _ in range(nsteps):
                zi, wi = _step_fwd(coeffs, degs, avals, zi, wi)
        else:
            for _ in range(nsteps):
                zi, wi = _step_bwd(coeffs, degs, avals, zi, wi)
        zo[i] = zi
        wo[i] = wi
    return zo, wo


@njit(cache=True)
def first_escape_batch(coeffs, degs, avals, z, w, horizon, forward, radius):
    """Index of the first certified escape within ``horizon`` steps, else -1.

    Forward escape is certified in {|z| >= radius, |z| >= |w|}; backward in
    the mirror region with w dominant.  Index 0 means the point itself.
    """
    out = np.full(z.shape[0], -1, dtype=np.int64)
    for i in range(z.shape[0]):
        zi = z[i]
        wi = w[i]
        for n in range(horizon + 1):
            az = abs(zi)
            aw = abs(wi)
            if forward:
                if az >= radius and az >= aw:
                    out[i] = n
                    break
            else:
                if aw >= radius and aw >= az:
                    out[i] = n
                    break
            if n == horizon:
                break
            if az > 1e140 or aw > 1e140:
                break
            if forward:
                zi, wi = _step_fwd(coeffs, degs, avals, zi, wi)
            else:
                zi, wi = _step_bwd(coeffs, degs, avals, zi, wi)
    return out


@njit(cache=True)
def green_batch(coeffs, degs, avals, z, w, max_iter, forward, radius,
                stop_mag, d, tail_coef, cf_const, log_corr):
    """Escape-rate Green potential with certified error bound, per point.

    Returns (value, err, iters, escaped).  value = d^-n (log max(|z|,|w|)
    + log_corr) once escape is certified, 0 otherwise; err bounds the
    distance to the n -> infinity limit (geometric tail once the orbit
    doubles).  log_corr folds in the constant slip of the log-magnitude
    recursion: backward steps divide by the factor coefficients a_i, so
    log m gains a fixed -log|a_i| per application on top of the *degree
    multiplication; summing that geometric series analytically keeps the
    truncation unbiased (it vanishes for the forward direction, where the
    factor polynomials are monic).
    """
    npts = z.shape[0]
    value = np.zeros(npts)
    err = np.zeros(npts)
    iters = np.zeros(npts, dtype=np.int64)
    escaped = np.zeros(npts, dtype=np.bool_)
    for i in range(npts):
        zi = z[i]
        wi = w[i]
        esc = False
        n = 0
        while n < max_iter:
            az = abs(zi)
            aw = abs(wi)
            if forward:
                if az >= radius and az >= aw:
                    esc = True
            else:
                if aw >= radius and aw >= az:
                    esc = True
            m = az if az > aw else aw
            if esc and m >= stop_mag:
                break
            if not esc and m >= 1e100:
                break
            if forward:
                zi, wi = _step_fwd(coeffs, degs, avals, zi, wi)
            else:
                zi, wi = _step_bwd(coeffs, degs, avals, zi, wi)
            n += 1
        az = abs(zi)
        aw = abs(wi)
        # escape test on the final state too, so a cap-hitting orbit that
        # certifies on its very last point is still counted
        if forward:
            if az >= radius and az >= aw:
                esc = True
        else:
            if aw >= radius and aw >= az:
                esc = True
        m = az if az > aw else aw
        scale = d ** (-float(n))
        iters[i] = n
        escaped[i] = esc
        if esc:
            value[i] = scale * (np.log(m) + log_corr)
            err[i] = scale * tail_coef / m
        else:
            value[i] = 0.0
            big = radius
            if m > big:
                big = m
            if cf_const > big:
                big = cf_const
            err[i] = scale * (
                np.log(big) + 1.0 + tail_coef / radius + abs(log_corr)
            )
    return value, err, iters, escaped


@njit(cache=True)
def _map_and_jacobian(coeffs, degs, avals, z, w, period):
    """f^period(z, w) and the chain-rule product D f^period, entrywise."""
    j11 = 1.0 + 0.0j
    j12 = 0.0 + 0.0j
    j21 = 0.0 + 0.0j
    j22 = 1.0 + 0.0j
    for _ in range(period):
        for k in range(degs.shape[0]):
            dp = _dpoly(coeffs[k], degs[k], z)
            a = avals[k]
            # factor Jacobian [[p'(z), -a], [1, 0]]
            t11 = dp * j11 - a * j21
            t12 = dp * j12 - a * j22
            j21, j22 = j11, j12
            j11, j12 = t11, t12
            z, w = _poly(coeffs[k], degs[k], z) - a * w, z
    return z, w, j11, j12, j21, j22


@njit(cache=True)
def _residual_norm(coeffs, degs, avals, z, w, period):
    zi = z
    wi = w
    for _ in range(period):
        zi, wi = _step_fwd(coeffs, degs, avals, zi, wi)
    r1 = zi - z
    r2 = wi - w
    n1 = abs(r1)
    n2 = abs(r2)
    return r1, r2, n1 if n1 > n2 else n2


@njit(cache=True)
def newton_batch(coeffs, degs, avals, z0, w0, period, tol, max_iter,
                 max_halvings, abort_radius):
    """Damped Newton for fixed points of f^period from each seed.

    Step damping halves on residual increase, up to ``max_halvings``; a seed
    with no achievable decrease, an escape beyond ``abort_radius`` or a
    singular linearization is marked diverged.
    """
    nseeds = z0.shape[0]
    zr = np.empty(nseeds, dtype=np.complex128)
    wr = np.empty(nseeds, dtype=np.complex128)
    resid = np.empty(nseeds)
    status = np.empty(nseeds, dtype=np.int8)
    iters = np.zeros(nseeds, dtype=np.int64)
    for i in range(nseeds):
        z = z0[i]
        w = w0[i]
        r1, r2, rn = _residual_norm(coeffs, degs, avals, z, w, period)
        st = STATUS_MAXITER
        it = 0
        while it < max_iter:
            if rn <= tol:
                st = STATUS_CONVERGED
                break
            az = abs(z)
            aw = abs(w)
            if (az if az > aw else aw) > abort_radius or not (
                np.isfinite(rn)
            ):
                st = STATUS_DIVERGED
                break
            fz, fw, j11, j12, j21, j22 = _map_and_jacobian(
                coeffs, degs, avals, z, w, period
            )
            # A = Df^n - I; solve A delta = -(f^n(x) - x)
            a11 = j11 - 1.0
            a12 = j12
            a21 = j21
            a22 = j22 - 1.0
            det = a11 * a22 - a12 * a21
            if abs(det) < 1e-300:
                st = STATUS_DIVERGED
                break
            g1 = fz - z
            g2 = fw - w
            dz = -(g1 * a22 - g2 * a12) / det
            dw = -(a11 * g2 - a21 * g1) / det
            damp = 1.0
            accepted = False
            for _ in range(max_halvings + 1):
                zt = z + damp * dz
                wt = w + damp * dw
                t1, t2, tn = _residual_norm(coeffs, degs, avals, zt, wt, period)
                if tn < rn:
                    z = zt
                    w = wt
                    rn = tn
                    accepted = True
                    break
                damp *= 0.5
            it += 1
            if not accepted:
                st = STATUS_DIVERGED
                break
        if st == STATUS_MAXITER and rn <= tol:
            st = STATUS_CONVERGED
        zr[i] = z
        wr[i] = w
        resid[i] = rn
        status[i] = st
        iters[i] = it
    return zr, wr, resid, status, iters
