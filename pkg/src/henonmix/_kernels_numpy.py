"""Pure-numpy fallback kernels.

Same signatures and stopping rules as ``_kernels_numba``; loops run over
iteration count with point masks instead of per-point python loops, so the
per-point arithmetic (and hence the results) matches the compiled backend.
"""

import numpy as np

STATUS_CONVERGED = 0
STATUS_MAXITER = 1
STATUS_DIVERGED = 2


def _quiet(fn):
    """Expected inf/nan from escaping orbits; keep numpy warnings silent."""
    import functools

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        with np.errstate(over="ignore", invalid="ignore"):
            return fn(*args, **kwargs)

    return wrapper



def _poly(c, deg, z):
    acc = np.full_like(z, c[deg])
    for i in range(deg - 1, -1, -1):
        acc = acc * z + c[i]
    return acc


def _dpoly(c, deg, z):
    acc = np.full_like(z, deg * c[deg])
    for i in range(deg - 1, 0, -1):
        acc = acc * z + i * c[i]
    return acc


def _step_fwd(coeffs, degs, avals, z, w):
    for j in range(degs.shape[0]):
        z, w = _poly(coeffs[j], degs[j], z) - avals[j] * w, z
    return z, w


def _step_bwd(coeffs, degs, avals, z, w):
    for j in range(degs.shape[0] - 1, -1, -1):
        z, w = w, (_poly(coeffs[j], degs[j], w) - z) / avals[j]
    return z, w


def iterate_batch(coeffs, degs, avals, z, w, nsteps, forward):
    """Apply f (or f^-1) ``nsteps`` times to each point of (z, w).

    Escaping orbits are allowed to overflow to inf (the caller applies
    escape cutoffs where they matter), so overflow warnings are silenced.
    """
    z = z.copy()
    w = w.copy()
    step = _step_fwd if forward else _step_bwd
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(nsteps):
            z, w = step(coeffs, degs, avals, z, w)
    return z, w


@_quiet
def first_escape_batch(coeffs, degs, avals, z, w, horizon, forward, radius):
    """Index of the first certified escape within ``horizon`` steps, else -1."""
    z = z.copy()
    w = w.copy()
    npts = z.shape[0]
    out = np.full(npts, -1, dtype=np.int64)
    active = np.ones(npts, dtype=bool)
    step = _step_fwd if forward else _step_bwd
    for n in range(horizon + 1):
        az = np.abs(z)
        aw = np.abs(w)
        if forward:
            hit = active & (az >= radius) & (az >= aw)
        else:
            hit = active & (aw >= radius) & (aw >= az)
        out[hit] = n
        active &= ~hit
        if n == horizon or not active.any():
            break
        blown = active & ((az > 1e140) | (aw > 1e140))
        active &= ~blown
        zs, ws = step(coeffs, degs, avals, z[active], w[active])
        z[active] = zs
        w[active] = ws
    return out


@_quiet
def green_batch(coeffs, degs, avals, z, w, max_iter, forward, radius,
                stop_mag, d, tail_coef, cf_const, log_corr):
    """Escape-rate Green potential with certified error bound, per point.

    See the numba twin for the role of log_corr (unbiased truncation of
    the backward escape rate)."""
    z = z.copy()
    w = w.copy()
    npts = z.shape[0]
    esc = np.zeros(npts, dtype=bool)
    n = np.zeros(npts, dtype=np.int64)
    active = np.ones(npts, dtype=bool)
    step = _step_fwd if forward else _step_bwd
    for _ in range(max_iter):
        if not active.any():
            break
        az = np.abs(z)
        aw = np.abs(w)
        if forward:
            esc |= active & (az >= radius) & (az >= aw)
        else:
            esc |= active & (aw >= radius) & (aw >= az)
        m = np.maximum(az, aw)
        done = active & ((esc & (m >= stop_mag)) | (~esc & (m >= 1e100)))
        active &= ~done
        if not active.any():
            break
        zs, ws = step(coeffs, degs, avals, z[active], w[active])
        z[active] = zs
        w[active] = ws
        n[active] += 1
    # points still active at the cap get one last escape test, as in the
    # compiled kernel where the test runs at the top of the loop
    if active.any():
        az = np.abs(z)
        aw = np.abs(w)
        if forward:
            esc |= active & (az >= radius) & (az >= aw)
        else:
            esc |= active & (aw >= radius) & (aw >= az)
    m = np.maximum(np.abs(z), np.abs(w))
    scale = float(d) ** (-n.astype(np.float64))
    value = np.where(esc, scale * (np.log(np.maximum(m, 1.0)) + log_corr), 0.0)
    big = np.maximum(np.maximum(m, radius), cf_const)
    err = np.where(
        esc,
        scale * tail_coef / m,
        scale * (np.log(big) + 1.0 + tail_coef / radius + abs(log_corr)),
    )
    return value, err, n, esc


def _map_and_jacobian(coeffs, degs, avals, z, w, period):
    """f^period and entrywise chain-rule Jacobian product for point arrays."""
    one = np.ones_like(z)
    zero = np.zeros_like(z)
    j11, j12, j21, j22 = one.copy(), zero.copy(), zero.copy(), one.copy()
    for _ in range(period):
        for k in range(degs.shape[0]):
            dp = _dpoly(coeffs[k], degs[k], z)
            a = avals[k]
            t11 = dp * j11 - a * j21
            t12 = dp * j12 - a * j22
            j21, j22 = j11, j12
            j11, j12 = t11, t12
            z, w = _poly(coeffs[k], degs[k], z) - a * w, z
    return z, w, j11, j12, j21, j22


def _residual(coeffs, degs, avals, z, w, period):
    zi, wi = iterate_batch(coeffs, degs, avals, z, w, period, True)
    r1 = zi - z
    r2 = wi - w
    return r1, r2, np.maximum(np.abs(r1), np.abs(r2))


@_quiet
def newton_batch(coeffs, degs, avals, z0, w0, period, tol, max_iter,
                 max_halvings, abort_radius):
    """Damped Newton for fixed points of f^period from each seed."""
    z = z0.copy()
    w = w0.copy()
    nseeds = z.shape[0]
    _, _, rn = _residual(coeffs, degs, avals, z, w, period)
    status = np.full(nseeds, STATUS_MAXITER, dtype=np.int8)
    iters = np.zeros(nseeds, dtype=np.int64)
    active = np.ones(nseeds, dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        conv = active & (rn <= tol)
        status[conv] = STATUS_CONVERGED
        active &= ~conv
        m = np.maximum(np.abs(z), np.abs(w))
        div = active & ((m > abort_radius) | ~np.isfinite(rn))
        status[div] = STATUS_DIVERGED
        active &= ~div
        if not active.any():
            break
        idx = np.flatnonzero(active)
        fz, fw, j11, j12, j21, j22 = _map_and_jacobian(
            coeffs, degs, avals, z[idx], w[idx], period
        )
        a11 = j11 - 1.0
        a12 = j12
        a21 = j21
        a22 = j22 - 1.0
        det = a11 * a22 - a12 * a21
        sing = np.abs(det) < 1e-300
        status[idx[sing]] = STATUS_DIVERGED
        active[idx[sing]] = False
        ok = ~sing
        idx = idx[ok]
        if idx.size == 0:
            continue
        g1 = fz[ok] - z[idx]
        g2 = fw[ok] - w[idx]
        det = det[ok]
        dz = -(g1 * (a22[ok]) - g2 * (a12[ok])) / det
        dw = -((a11[ok]) * g2 - (a21[ok]) * g1) / det
        damp = np.ones(idx.size)
        pending = np.ones(idx.size, dtype=bool)
        for _ in range(max_halvings + 1):
            if not pending.any():
                break
            p = np.flatnonzero(pending)
            gids = idx[p]
            zt = z[gids] + damp[p] * dz[p]
            wt = w[gids] + damp[p] * dw[p]
            _, _, tn = _residual(coeffs, degs, avals, zt, wt, period)
            better = tn < rn[gids]
            acc = gids[better]
            z[acc] = zt[better]
            w[acc] = wt[better]
            rn[acc] = tn[better]
            pending[p[better]] = False
            damp[p[~better]] *= 0.5
        iters[idx] += 1
        stuck = idx[pending]
        status[stuck] = STATUS_DIVERGED
        active[stuck] = False
    final_conv = (status == STATUS_MAXITER) & (rn <= tol)
    status[final_conv] = STATUS_CONVERGED
    return z, w, rn, status, iters
