"""Escape-rate Green potentials G+ / G-, filtration classification, slices.

G+(x) = lim d^-n log+ ||f^n(x)||_inf, computed with a certified geometric
tail bound once the orbit enters the doubling region {|z| >= R, |z| >= |w|}
(mirror region for G-).  Points with no witnessed escape report value 0 and
an explicit unresolved error bound d^-N * (log R + c) rather than a silent
exact zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .henon import HenonMap, Point

#: certified tail factor: in the doubling region one factor application
#: multiplies log|z| by k with additive slip |delta| <= C * s / |z|,
#: s = |a| + sum of non-leading |c_i|; the geometric tail is folded into a
#: single conservative constant (validated by the error-honesty tests).
_TAIL_SAFETY = 8.0


def escape_radius(f: HenonMap) -> float:
    """R with: ||x||_inf >= R and |z| >= |w|  =>  |p(z) - a w| >= 2 |z|.

    Conservative coefficient bound, per factor: R = 2 + |a| + sum |c_i|
    over the non-leading coefficients (p monic).  The maximum over factors
    makes the bound valid for every stage of the composition.
    """
    return max(2.0 + abs(f.a) + _coef_sum(f) for f in f.factors)


def escape_radius_backward(f: HenonMap) -> float:
    """Mirror bound certifying backward doubling in {|w| >= max(R, |z|)}."""
    return max(1.0 + 2.0 * abs(f.a) + _coef_sum(f) for f in f.factors)


def _coef_sum(factor) -> float:
    return float(sum(abs(c) for c in factor.coeffs[:-1]))


def _tail_params(f: HenonMap, forward: bool) -> tuple[float, float, float, float]:
    """(radius, tail_coef, cf_const, log_corr) for the green kernel.

    log_corr removes the truncation bias of the backward escape rate: one
    backward map application sends log m to d log m + c_a + O(1/m) with
    the fixed constant c_a = -sum_i (prod_{j<i} k_j) log|a_i| (the inverse
    factors divide by a_i), so the distance of d^-n log m_n to its limit
    contains the geometric series c_a d^-n / (d - 1), which is folded into
    the reported value.  Forward factors are monic: c_a = 0.
    """
    r_fwd = escape_radius(f)
    r_bwd = escape_radius_backward(f)
    radius = r_fwd if forward else max(r_bwd, r_fwd)
    s = max(abs(fac.a) + _coef_sum(fac) for fac in f.factors)
    log_corr = 0.0
    if not forward:
        s = max(s, max((1.0 + _coef_sum(fac)) / abs(fac.a) for fac in f.factors))
        c_a = 0.0
        deg_before = 1.0
        for fac in f.factors:  # factor i is preceded (in backward order) by j < i
            c_a -= deg_before * math.log(abs(fac.a))
            deg_before *= fac.degree
        log_corr = c_a / (f.degree - 1) if f.degree > 1 else 0.0
    u0 = min(s / radius, 0.9)
    c_r = -math.log1p(-u0) / u0 if u0 > 0 else 1.0
    tail_coef = _TAIL_SAFETY * c_r * max(s, 1.0)
    cf_const = max(1.0 + abs(fac.a) + _coef_sum(fac) + 1.0 for fac in f.factors)
    return radius, tail_coef, cf_const, log_corr


@dataclass(frozen=True)
class GreenValue:
    """One Green-potential evaluation with its certified error bound."""

    value: float
    error_bound: float
    iterations_used: int
    escaped: bool


@dataclass(frozen=True)
class FiltrationClass:
    """Bounded-orbit classification at a finite horizon."""

    tag: str  # "K" | "K_plus_only" | "K_minus_only" | "escapes_both"
    horizon: int
    forward_escape_index: int  # -1 when no forward escape witnessed
    backward_escape_index: int


def green_plus_batch(
    f: HenonMap, z: np.ndarray, w: np.ndarray, max_iter: int = 100
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vector G+ evaluation; returns (value, error_bound, iters, escaped)."""
    return _green_batch(f, z, w, max_iter, forward=True)


def green_minus_batch(
    f: HenonMap, z: np.ndarray, w: np.ndarray, max_iter: int = 100
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vector G- evaluation (escape rate of f^-1)."""
    return _green_batch(f, z, w, max_iter, forward=False)


def _green_batch(f, z, w, max_iter, forward):
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    coeffs, degs, avals = f.packed()
    d = f.degree
    radius, tail_coef, cf_const, log_corr = _tail_params(f, forward)
    stop_mag = 10.0 ** min(30.0, 280.0 / d)
    zf = np.ascontiguousarray(z, dtype=np.complex128).ravel()
    wf = np.ascontiguousarray(w, dtype=np.complex128).ravel()
    value, err, iters, esc = kernels.green_batch(
        coeffs, degs, avals, zf, wf, max_iter, forward,
        radius, stop_mag, float(d), tail_coef, cf_const, log_corr,
    )
    shape = np.shape(z)
    return (
        value.reshape(shape),
        err.reshape(shape),
        iters.reshape(shape),
        esc.reshape(shape),
    )


def green_plus(f: HenonMap, x: Point, max_iter: int = 100) -> GreenValue:
    """G+(x) approximated at escape-certified truncation or at max_iter."""
    v, e, n, esc = green_plus_batch(
        f, np.array([x.z], dtype=np.complex128), np.array([x.w], dtype=np.complex128),
        max_iter,
    )
    return GreenValue(float(v[0]), float(e[0]), int(n[0]), bool(esc[0]))


def green_minus(f: HenonMap, x: Point, max_iter: int = 100) -> GreenValue:
    """G-(x); same contract as green_plus with f replaced by f^-1."""
    v, e, n, esc = green_minus_batch(
        f, np.array([x.z], dtype=np.complex128), np.array([x.w], dtype=np.complex128),
        max_iter,
    )
    return GreenValue(float(v[0]), float(e[0]), int(n[0]), bool(esc[0]))


def classify(f: HenonMap, x: Point, horizon: int) -> FiltrationClass:
    """Forward/backward boundedness tag at the given horizon.

    Tag K means neither direction witnessed a certified escape within the
    horizon; escapes are monotone in the horizon by construction.
    """
    tags = classify_batch(
        f,
        np.array([x.z], dtype=np.complex128),
        np.array([x.w], dtype=np.complex128),
        horizon,
    )
    return tags[0]


def classify_batch(f: HenonMap, z, w, horizon: int) -> list[FiltrationClass]:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    coeffs, degs, avals = f.packed()
    radius = max(escape_radius(f), escape_radius_backward(f))
    zf = np.ascontiguousarray(z, dtype=np.complex128).ravel()
    wf = np.ascontiguousarray(w, dtype=np.complex128).ravel()
    fwd = kernels.first_escape_batch(coeffs, degs, avals, zf, wf, horizon, True, radius)
    bwd = kernels.first_escape_batch(coeffs, degs, avals, zf, wf, horizon, False, radius)
    out = []
    for fe, be in zip(fwd, bwd):
        if fe < 0 and be < 0:
            tag = "K"
        elif fe >= 0 and be < 0:
            tag = "K_minus_only"  # bounded backward only: escapes forward
        elif fe < 0 and be >= 0:
            tag = "K_plus_only"  # bounded forward only: escapes backward
        else:
            tag = "escapes_both"
        out.append(FiltrationClass(tag, horizon, int(fe), int(be)))
    return out


def render_green_slice(
    f: HenonMap,
    window: tuple[float, float, float, float],
    resolution: tuple[int, int],
    which: str = "plus",
    max_iter: int = 100,
    threads: int = 1,
) -> dict:
    """Grid of G+/- over the real slice Im z = Im w = 0.

    ``window`` is (re_z_min, re_z_max, re_w_min, re_w_max); the returned
    grid is row-major with top-left origin (row 0 holds the largest Re w).
    """
    nx, ny = resolution
    if nx < 2 or ny < 2:
        raise ValueError("resolution components must be >= 2")
    if which not in ("plus", "minus"):
        raise ValueError("which must be 'plus' or 'minus'")
    x0, x1, y0, y1 = window
    xs = np.linspace(x0, x1, nx)
    ys = np.linspace(y1, y0, ny)  # top row = largest Re w
    grid = np.empty((ny, nx))
    fn = green_plus_batch if which == "plus" else green_minus_batch

    def _row(j):
        z = xs.astype(np.complex128)
        w = np.full(nx, ys[j], dtype=np.complex128)
        v, _, _, _ = fn(f, z, w, max_iter)
        return j, v

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as ex:
            for j, v in ex.map(_row, range(ny)):
                grid[j] = v
    else:
        for j in range(ny):
            grid[j] = _row(j)[1]
    return {
        "grid": grid,
        "xs": xs,
        "ys": ys,
        "which": which,
        "window": window,
        "max_iter": max_iter,
    }


def slice_ppm_bytes(render: dict) -> bytes:
    """Binary PPM (P6, row-major, top-left origin), linear gray ramp."""
    grid = render["grid"]
    lo = float(np.min(grid))
    hi = float(np.max(grid))
    span = hi - lo if hi > lo else 1.0
    bytes8 = np.clip((grid - lo) / span * 255.0, 0, 255).astype(np.uint8)
    ny, nx = grid.shape
    header = f"P6\n{nx} {ny}\n255\n".encode("ascii")
    rgb = np.repeat(bytes8[:, :, None], 3, axis=2)
    return header + rgb.tobytes()


def slice_sidecar_text(render: dict) -> str:
    """Color-ramp sidecar: how pixel values map back to potential values."""
    grid = render["grid"]
    x0, x1, y0, y1 = render["window"]
    return (
        f"green_{render['which']} slice, Im z = Im w = 0\n"
        f"window_re_z = [{x0!r}, {x1!r}]\n"
        f"window_re_w = [{y0!r}, {y1!r}]\n"
        f"rows = {grid.shape[0]} (top row = Re w {y1!r})\n"
        f"cols = {grid.shape[1]} (left col = Re z {x0!r})\n"
        f"value_min = {float(np.min(grid))!r} -> gray 0\n"
        f"value_max = {float(np.max(grid))!r} -> gray 255\n"
        f"ramp = linear grayscale\n"
        f"max_iter = {render['max_iter']}\n"
    )


def slice_csv(render: dict) -> str:
    """x, y, value rows in row-major order (top-left origin)."""
    from .util import format_float as ff

    lines = ["re_z,re_w,value"]
    xs, ys, grid = render["xs"], render["ys"], render["grid"]
    for j in range(grid.shape[0]):
        for i in range(grid.shape[1]):
            lines.append(f"{ff(xs[i])},{ff(ys[j])},{ff(grid[j, i])}")
    return "\n".join(lines) + "\n"
