"""Test-function calculus: Hölder/C2 observables, Hermitian-form checks,
the C2 decomposition, mollification, and the product test functions.

Complex-Hessian objects are represented by their 2x2 Hermitian coefficient
matrices against the coordinates (z, w):

    complex_hessian(g)  ~  [ d2g / dzeta_i dzetabar_j ]
    gradient_form(g)    ~  [ dg/dzeta_i * conj(dg/dzeta_j) ]

and form inequalities become Loewner (eigenvalue) checks.  Observables are
real-valued; evaluation is vectorized over complex arrays (z, w).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .henon import HenonMap, Point, ProductPoint

FD_STEP = 1e-5


# ---------------------------------------------------------------------------
# smooth profile functions with closed-form derivatives
# ---------------------------------------------------------------------------


def _bump_profile(t):
    """beta(t) = exp(1 - 1/(1-t)) on [0, 1), 0 beyond; beta(0) = 1."""
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    m = t < 1.0 - 1e-8
    tm = t[m]
    out[m] = np.exp(1.0 - 1.0 / (1.0 - tm))
    return out


def _bump_profile_d1(t):
    """beta'(t) = -beta(t) / (1-t)^2."""
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    m = t < 1.0 - 1e-8
    tm = t[m]
    out[m] = -np.exp(1.0 - 1.0 / (1.0 - tm)) / (1.0 - tm) ** 2
    return out


def _bump_profile_d2(t):
    """beta''(t) = beta(t) [ (1-t)^-4 - 2 (1-t)^-3 ]."""
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    m = t < 1.0 - 1e-8
    tm = t[m]
    s = 1.0 - tm
    out[m] = np.exp(1.0 - 1.0 / s) * (s**-4 - 2.0 * s**-3)
    return out


def _profile_maxima():
    """sup of |beta'| sqrt(t) and of |beta''| t + |beta'| over [0, 1)."""
    t = np.linspace(0.0, 1.0, 40001)[:-1]
    c1 = float(np.max(np.abs(_bump_profile_d1(t)) * np.sqrt(t)))
    c2 = float(np.max(np.abs(_bump_profile_d2(t)) * t + np.abs(_bump_profile_d1(t))))
    return c1, c2


_BUMP_C1, _BUMP_C2 = _profile_maxima()


def _smoothstep(s):
    """psi(s): 1 for s <= 0, 0 for s >= 1, smooth monotone in between."""
    s = np.asarray(s, dtype=np.float64)
    out = np.zeros_like(s)
    out[s <= 0.0] = 1.0
    m = (s > 0.0) & (s < 1.0)
    sm = np.clip(s[m], 1e-3, 1.0 - 1e-3)
    b1 = np.exp(-1.0 / (1.0 - sm))
    b2 = np.exp(-1.0 / sm)
    out[m] = b1 / (b1 + b2)
    return out


def _smoothstep_d(s):
    """(psi'(s), psi''(s)); zero outside (0, 1)."""
    s = np.asarray(s, dtype=np.float64)
    d1 = np.zeros_like(s)
    d2 = np.zeros_like(s)
    m = (s > 0.0) & (s < 1.0)
    sm = np.clip(s[m], 1e-3, 1.0 - 1e-3)
    u = 1.0 - sm
    b1 = np.exp(-1.0 / u)
    b2 = np.exp(-1.0 / sm)
    db1 = b1 / u**2            # B'(1-s) evaluated at u
    db2 = b2 / sm**2
    dd1 = b1 * (u**-4 - 2.0 * u**-3)
    dd2 = b2 * (sm**-4 - 2.0 * sm**-3)
    D = b1 + b2
    N = -(db1 * b2 + b1 * db2)
    d1[m] = N / D**2
    Nprime = dd1 * b2 - b1 * dd2
    Dprime = -db1 + db2
    d2[m] = (Nprime * D - 2.0 * N * Dprime) / D**3
    return d1, d2


# ---------------------------------------------------------------------------
# the observable type
# ---------------------------------------------------------------------------


@dataclass
class Observable:
    """A real-valued test function on C^2 with norm metadata.

    ``grad`` and ``hess`` are optional exact Wirtinger evaluators; when
    absent, finite differences at scale 1e-5 stand in.  grad returns
    (dg/dz, dg/dw); hess returns (h11, h12, h22) where h11 = d2g/dz dzbar,
    h12 = d2g/dz dwbar, h22 = d2g/dw dwbar (h21 is conj(h12) since g is
    real).
    """

    ev: Callable
    gamma: float = 2.0
    norm_bound: float = 1.0
    support_center: Point | None = None
    support_radius: float | None = None
    grad: Callable | None = None
    hess: Callable | None = None
    name: str = ""

    def eval_batch(self, z, w) -> np.ndarray:
        z = np.asarray(z, dtype=np.complex128)
        w = np.asarray(w, dtype=np.complex128)
        return np.asarray(self.ev(z, w), dtype=np.float64)

    def __call__(self, x: Point) -> float:
        return float(self.eval_batch(np.array([x.z]), np.array([x.w]))[0])

    @property
    def has_exact_derivatives(self) -> bool:
        return self.grad is not None and self.hess is not None

    def gradient_batch(self, z, w):
        z = np.asarray(z, dtype=np.complex128)
        w = np.asarray(w, dtype=np.complex128)
        if self.grad is not None:
            gz, gw = self.grad(z, w)
            return np.asarray(gz, dtype=np.complex128), np.asarray(gw, dtype=np.complex128)
        return _fd_gradient(self.ev, z, w)

    def hessian_batch(self, z, w):
        z = np.asarray(z, dtype=np.complex128)
        w = np.asarray(w, dtype=np.complex128)
        if self.hess is not None:
            h11, h12, h22 = self.hess(z, w)
            return (
                np.asarray(h11, dtype=np.float64),
                np.asarray(h12, dtype=np.complex128),
                np.asarray(h22, dtype=np.float64),
            )
        return _fd_hessian(self.ev, z, w)

    # -- algebra ------------------------------------------------------------

    def __mul__(self, other):
        if isinstance(other, Observable):
            return product(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __add__(self, other):
        if isinstance(other, Observable):
            return combine([self, other], [1.0, 1.0])
        return shift_by_constant(self, float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Observable):
            return combine([self, other], [1.0, -1.0])
        return shift_by_constant(self, -float(other))

    def __neg__(self):
        return scale(self, -1.0)


def _fd_gradient(ev, z, w, h: float = FD_STEP):
    """Wirtinger gradient from central differences of the real partials."""
    gx = (ev(z + h, w) - ev(z - h, w)) / (2 * h)
    gy = (ev(z + 1j * h, w) - ev(z - 1j * h, w)) / (2 * h)
    gu = (ev(z, w + h) - ev(z, w - h)) / (2 * h)
    gv = (ev(z, w + 1j * h) - ev(z, w - 1j * h)) / (2 * h)
    return (gx - 1j * gy) / 2.0, (gu - 1j * gv) / 2.0


def _fd_hessian(ev, z, w, h: float = FD_STEP):
    """Mixed complex Hessian from central second differences."""
    g0 = ev(z, w)

    def cross(dz, dw):
        return (
            ev(z + dz, w + dw)
            - ev(z + dz, w - dw)
            - ev(z - dz, w + dw)
            + ev(z - dz, w - dw)
        ) / (4 * h * h)

    gxx = (ev(z + h, w) - 2 * g0 + ev(z - h, w)) / (h * h)
    gyy = (ev(z + 1j * h, w) - 2 * g0 + ev(z - 1j * h, w)) / (h * h)
    guu = (ev(z, w + h) - 2 * g0 + ev(z, w - h)) / (h * h)
    gvv = (ev(z, w + 1j * h) - 2 * g0 + ev(z, w + -1j * h)) / (h * h)
    h11 = (gxx + gyy) / 4.0
    h22 = (guu + gvv) / 4.0
    gxu = cross(h, h)
    gyv = cross(1j * h, 1j * h)
    gxv = cross(h, 1j * h)
    gyu = cross(1j * h, h)
    h12 = ((gxu + gyv) + 1j * (gxv - gyu)) / 4.0
    return h11, h12, h22


# ---------------------------------------------------------------------------
# factories
# ---------------------------------------------------------------------------


def make_bump(center: Point, radius: float, height: float = 1.0) -> Observable:
    """Smooth compactly supported bump with exact derivative evaluators."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    z0, w0 = complex(center[0]), complex(center[1])
    R2 = radius * radius

    def ev(z, w):
        t = (np.abs(z - z0) ** 2 + np.abs(w - w0) ** 2) / R2
        return height * _bump_profile(t)

    def grad(z, w):
        dz = z - z0
        dw = w - w0
        t = (np.abs(dz) ** 2 + np.abs(dw) ** 2) / R2
        b1 = height * _bump_profile_d1(t) / R2
        return b1 * np.conj(dz), b1 * np.conj(dw)

    def hess(z, w):
        dz = z - z0
        dw = w - w0
        t = (np.abs(dz) ** 2 + np.abs(dw) ** 2) / R2
        b1 = height * _bump_profile_d1(t) / R2
        b2 = height * _bump_profile_d2(t) / (R2 * R2)
        h11 = b2 * np.abs(dz) ** 2 + b1
        h22 = b2 * np.abs(dw) ** 2 + b1
        h12 = b2 * np.conj(dz) * dw
        return h11.real, h12, h22.real

    nb = abs(height) * max(
        1.0, 2.0 * _BUMP_C1 / radius, 4.0 * _BUMP_C2 / R2
    )
    return Observable(
        ev=ev,
        gamma=2.0,
        norm_bound=nb,
        support_center=Point(z0, w0),
        support_radius=radius,
        grad=grad,
        hess=hess,
        name=f"bump(r={radius})",
    )


def radial_cutoff(r_one: float, r_zero: float) -> Observable:
    """Smooth cutoff: 1 on the r_one ball, 0 outside the r_zero ball."""
    if not 0 < r_one < r_zero:
        raise ValueError("need 0 < r_one < r_zero")
    a = r_one * r_one
    L = r_zero * r_zero - a

    def s_of(z, w):
        return (np.abs(z) ** 2 + np.abs(w) ** 2 - a) / L

    def ev(z, w):
        return _smoothstep(s_of(z, w))

    def grad(z, w):
        d1, _ = _smoothstep_d(s_of(z, w))
        return d1 / L * np.conj(z), d1 / L * np.conj(w)

    def hess(z, w):
        d1, d2 = _smoothstep_d(s_of(z, w))
        h11 = d2 * np.abs(z) ** 2 / L**2 + d1 / L
        h22 = d2 * np.abs(w) ** 2 / L**2 + d1 / L
        h12 = d2 * np.conj(z) * w / L**2
        return h11, h12, h22

    return Observable(
        ev=ev,
        gamma=2.0,
        norm_bound=_measure_c2_proxy(ev, r_zero),
        support_center=Point(0.0, 0.0),
        support_radius=r_zero,
        grad=grad,
        hess=hess,
        name=f"cutoff({r_one},{r_zero})",
    )


def squared_norm() -> Observable:
    """||x||^2 = |z|^2 + |w|^2; its complex Hessian is the identity."""

    def ev(z, w):
        return np.abs(z) ** 2 + np.abs(w) ** 2

    def grad(z, w):
        return np.conj(z), np.conj(w)

    def hess(z, w):
        one = np.ones(np.shape(z), dtype=np.float64)
        return one, np.zeros(np.shape(z), dtype=np.complex128), one.copy()

    return Observable(
        ev=ev, gamma=2.0, norm_bound=math.inf, grad=grad, hess=hess,
        name="|x|^2",
    )


_COORD_PARTS = {
    "re_z": (0, 0.5 + 0.0j),
    "im_z": (0, -0.5j),
    "re_w": (1, 0.5 + 0.0j),
    "im_w": (1, -0.5j),
}


def coordinate(which: str, cutoff_radius: float | None = None) -> Observable:
    """A real coordinate (Re z, Im z, Re w, Im w), optionally cut off."""
    if which not in _COORD_PARTS:
        raise ValueError(f"unknown coordinate {which!r}")
    slot, dval = _COORD_PARTS[which]

    def ev(z, w):
        v = z if slot == 0 else w
        return v.real if dval.imag == 0 else v.imag

    def grad(z, w):
        gz = np.full(np.shape(z), dval if slot == 0 else 0.0, dtype=np.complex128)
        gw = np.full(np.shape(z), dval if slot == 1 else 0.0, dtype=np.complex128)
        return gz, gw

    def hess(z, w):
        zero = np.zeros(np.shape(z), dtype=np.float64)
        return zero, zero.astype(np.complex128), zero.copy()

    base = Observable(
        ev=ev, gamma=2.0, norm_bound=math.inf, grad=grad, hess=hess,
        name=which,
    )
    if cutoff_radius is None:
        return base
    cut = radial_cutoff(cutoff_radius, 1.5 * cutoff_radius)
    out = product(base, cut)
    out.norm_bound = 1.5 * cutoff_radius * cut.norm_bound
    out.name = f"{which}*cutoff"
    return out


def holder_cusp(center: Point, gamma: float) -> Observable:
    """min(1, distance to center)^gamma: a genuine C^gamma cusp, capped at 1."""
    if not 0 < gamma <= 2:
        raise ValueError("gamma must lie in (0, 2]")
    z0, w0 = complex(center[0]), complex(center[1])

    def ev(z, w):
        d = np.sqrt(np.abs(z - z0) ** 2 + np.abs(w - w0) ** 2)
        return np.minimum(1.0, d) ** gamma

    return Observable(
        ev=ev, gamma=gamma, norm_bound=2.0, name=f"cusp(gamma={gamma})",
    )


def constant(c: float) -> Observable:
    def ev(z, w):
        return np.full(np.shape(z), float(c))

    def grad(z, w):
        zero = np.zeros(np.shape(z), dtype=np.complex128)
        return zero, zero.copy()

    def hess(z, w):
        zero = np.zeros(np.shape(z), dtype=np.float64)
        return zero, zero.astype(np.complex128), zero.copy()

    return Observable(ev=ev, gamma=2.0, norm_bound=abs(c), grad=grad,
                      hess=hess, name=f"const({c})")


# ---------------------------------------------------------------------------
# combinators with exact derivative propagation
# ---------------------------------------------------------------------------


def scale(g: Observable, c: float) -> Observable:
    def ev(z, w):
        return c * g.eval_batch(z, w)

    grad = hess = None
    if g.has_exact_derivatives:
        def grad(z, w):
            gz, gw = g.gradient_batch(z, w)
            return c * gz, c * gw

        def hess(z, w):
            h11, h12, h22 = g.hessian_batch(z, w)
            return c * h11, c * h12, c * h22

    return Observable(
        ev=ev, gamma=g.gamma, norm_bound=abs(c) * g.norm_bound,
        support_center=g.support_center, support_radius=g.support_radius,
        grad=grad, hess=hess, name=f"{c}*{g.name}",
    )


def shift_by_constant(g: Observable, c: float) -> Observable:
    def ev(z, w):
        return g.eval_batch(z, w) + c

    grad = g.grad
    hess = g.hess
    return Observable(
        ev=ev, gamma=g.gamma, norm_bound=g.norm_bound + abs(c),
        grad=grad, hess=hess, name=f"{g.name}+{c}",
    )


def combine(gs: Sequence[Observable], weights: Sequence[float]) -> Observable:
    gs = list(gs)
    weights = [float(c) for c in weights]

    def ev(z, w):
        acc = weights[0] * gs[0].eval_batch(z, w)
        for g, c in zip(gs[1:], weights[1:]):
            acc = acc + c * g.eval_batch(z, w)
        return acc

    grad = hess = None
    if all(g.has_exact_derivatives for g in gs):
        def grad(z, w):
            gz, gw = gs[0].gradient_batch(z, w)
            gz, gw = weights[0] * gz, weights[0] * gw
            for g, c in zip(gs[1:], weights[1:]):
                az, aw = g.gradient_batch(z, w)
                gz = gz + c * az
                gw = gw + c * aw
            return gz, gw

        def hess(z, w):
            h11, h12, h22 = gs[0].hessian_batch(z, w)
            h11, h12, h22 = weights[0] * h11, weights[0] * h12, weights[0] * h22
            for g, c in zip(gs[1:], weights[1:]):
                a11, a12, a22 = g.hessian_batch(z, w)
                h11 = h11 + c * a11
                h12 = h12 + c * a12
                h22 = h22 + c * a22
            return h11, h12, h22

    radius = None
    if all(g.support_radius is not None for g in gs):
        radius = max(
            abs(complex(g.support_center.z)) + abs(complex(g.support_center.w))
            + g.support_radius
            for g in gs
        )
    return Observable(
        ev=ev, gamma=min(g.gamma for g in gs),
        norm_bound=sum(abs(c) * g.norm_bound for g, c in zip(gs, weights)),
        support_radius=radius,
        support_center=Point(0.0, 0.0) if radius is not None else None,
        grad=grad, hess=hess,
        name="+".join(f"{c}*{g.name}" for g, c in zip(gs, weights)),
    )


def product(f: Observable, g: Observable) -> Observable:
    def ev(z, w):
        return f.eval_batch(z, w) * g.eval_batch(z, w)

    grad = hess = None
    if f.has_exact_derivatives and g.has_exact_derivatives:
        def grad(z, w):
            fv = f.eval_batch(z, w)
            gv = g.eval_batch(z, w)
            fz, fw = f.gradient_batch(z, w)
            gz, gw = g.gradient_batch(z, w)
            return fz * gv + fv * gz, fw * gv + fv * gw

        def hess(z, w):
            fv = f.eval_batch(z, w)
            gv = g.eval_batch(z, w)
            fz, fw = f.gradient_batch(z, w)
            gz, gw = g.gradient_batch(z, w)
            f11, f12, f22 = f.hessian_batch(z, w)
            g11, g12, g22 = g.hessian_batch(z, w)
            h11 = f11 * gv + 2.0 * (fz * np.conj(gz)).real + fv * g11
            h22 = f22 * gv + 2.0 * (fw * np.conj(gw)).real + fv * g22
            h12 = (
                f12 * gv + fz * np.conj(gw) + np.conj(fw) * gz + fv * g12
            )
            return h11, h12, h22

    # support: product supported in the smaller support when one is bounded
    radius, center = None, None
    for a in (f, g):
        if a.support_radius is not None and (
            radius is None or a.support_radius < radius
        ):
            radius, center = a.support_radius, a.support_center
    return Observable(
        ev=ev, gamma=min(f.gamma, g.gamma),
        norm_bound=f.norm_bound * g.norm_bound,
        support_center=center, support_radius=radius,
        grad=grad, hess=hess, name=f"({f.name})*({g.name})",
    )


def pullback(g: Observable, f: HenonMap, steps: int) -> Observable:
    """g o f^steps with exact chain-rule derivatives (f holomorphic)."""
    if steps == 0:
        return g

    def push(z, w):
        return f.apply_batch(z, w, steps)

    def ev(z, w):
        zf, wf = push(z, w)
        return g.eval_batch(zf, wf)

    grad = hess = None
    if g.has_exact_derivatives:
        def _jac(z, w):
            # chain D(f^steps) entrywise; forward only (steps > 0) uses
            # jacobian_batch per map application
            j11 = np.ones(np.shape(z), dtype=np.complex128)
            j12 = np.zeros(np.shape(z), dtype=np.complex128)
            j21 = j12.copy()
            j22 = j11.copy()
            zc = np.asarray(z, dtype=np.complex128)
            wc = np.asarray(w, dtype=np.complex128)
            for _ in range(abs(steps)):
                if steps > 0:
                    a11, a12, a21, a22 = f.jacobian_batch(zc, wc)
                    zc, wc = f.apply_batch(zc, wc, 1)
                else:
                    a11, a12, a21, a22 = _inverse_jacobian_batch(f, zc, wc)
                    zc, wc = f.apply_batch(zc, wc, -1)
                j11, j12, j21, j22 = (
                    a11 * j11 + a12 * j21,
                    a11 * j12 + a12 * j22,
                    a21 * j11 + a22 * j21,
                    a21 * j12 + a22 * j22,
                )
            return zc, wc, j11, j12, j21, j22

        def grad(z, w):
            zf, wf, j11, j12, j21, j22 = _jac(z, w)
            gz, gw = g.gradient_batch(zf, wf)
            return gz * j11 + gw * j21, gz * j12 + gw * j22

        def hess(z, w):
            zf, wf, j11, j12, j21, j22 = _jac(z, w)
            h11, h12, h22 = g.hessian_batch(zf, wf)
            # H' = J^H H J entrywise, J columns c1 = (j11, j21), c2 = (j12, j22)
            hc1_1 = h11 * j11 + h12 * j21
            hc1_2 = np.conj(h12) * j11 + h22 * j21
            hc2_1 = h11 * j12 + h12 * j22
            hc2_2 = np.conj(h12) * j12 + h22 * j22
            p11 = np.conj(j11) * hc1_1 + np.conj(j21) * hc1_2
            p22 = np.conj(j12) * hc2_1 + np.conj(j22) * hc2_2
            p12 = np.conj(j11) * hc2_1 + np.conj(j21) * hc2_2
            return p11.real, p12, p22.real

    return Observable(
        ev=ev, gamma=g.gamma, norm_bound=math.inf,
        grad=grad, hess=hess, name=f"({g.name})of^{steps}",
    )


def _inverse_jacobian_batch(f: HenonMap, z, w):
    j11 = np.ones(np.shape(z), dtype=np.complex128)
    j12 = np.zeros(np.shape(z), dtype=np.complex128)
    j21 = j12.copy()
    j22 = j11.copy()
    zc, wc = np.asarray(z, np.complex128), np.asarray(w, np.complex128)
    for fac in reversed(f.factors):
        k = fac.degree
        dp = np.full_like(zc, k * fac.coeffs[-1])
        for i in range(k - 1, 0, -1):
            dp = dp * wc + i * fac.coeffs[i]
        a11, a12 = np.zeros_like(zc), np.ones_like(zc)
        a21 = np.full_like(zc, -1.0 / fac.a)
        a22 = dp / fac.a
        j11, j12, j21, j22 = (
            a11 * j11 + a12 * j21,
            a11 * j12 + a12 * j22,
            a21 * j11 + a22 * j21,
            a21 * j12 + a22 * j22,
        )
        pz = np.full_like(wc, fac.coeffs[-1])
        for i in range(k - 1, -1, -1):
            pz = pz * wc + fac.coeffs[i]
        zc, wc = wc, (pz - zc) / fac.a
    return j11, j12, j21, j22


# ---------------------------------------------------------------------------
# Hermitian forms and Loewner checks
# ---------------------------------------------------------------------------


def complex_hessian(g: Observable, x: Point) -> np.ndarray:
    """2x2 Hermitian coefficient matrix of the mixed complex Hessian at x."""
    h11, h12, h22 = g.hessian_batch(np.array([x.z]), np.array([x.w]))
    H = np.array(
        [[complex(h11[0]), complex(h12[0])],
         [complex(np.conj(h12[0])), complex(h22[0])]]
    )
    return (H + H.conj().T) / 2.0


def gradient_form(g: Observable, x: Point) -> np.ndarray:
    """Rank-one PSD matrix [dg_i conj(dg_j)] at x."""
    gz, gw = g.gradient_batch(np.array([x.z]), np.array([x.w]))
    v = np.array([gz[0], gw[0]], dtype=np.complex128)
    return np.outer(v, v.conj())


def loewner_leq(A: np.ndarray, B: np.ndarray, slack: float = 0.0) -> bool:
    """A <= B in the Loewner order up to slack: min eig(B - A) >= -slack."""
    diff = B - A
    diff = (diff + diff.conj().T) / 2.0
    return bool(np.linalg.eigvalsh(diff)[0] >= -slack)


def hermitian_min_eig(H: np.ndarray) -> float:
    H = (H + H.conj().T) / 2.0
    return float(np.linalg.eigvalsh(H)[0])


# ---------------------------------------------------------------------------
# the C2 decomposition
# ---------------------------------------------------------------------------


@dataclass
class DecompositionResult:
    A: float
    g_plus: Observable
    g_minus: Observable
    rho: Observable
    A1: float


def _verification_cloud(radius: float, count: int = 4096, seed: int = 12345):
    """Deterministic point cloud in the radius ball of C^2."""
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(count, 4))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    r = radius * rng.uniform(0.0, 1.0, size=count) ** 0.25
    pts *= r[:, None]
    return pts[:, 0] + 1j * pts[:, 1], pts[:, 2] + 1j * pts[:, 3]


def _hermitian_norms(g: Observable, z, w):
    h11, h12, h22 = g.hessian_batch(z, w)
    half = (h11 - h22) / 2.0
    mid = (h11 + h22) / 2.0
    r = np.sqrt(half * half + np.abs(h12) ** 2)
    return np.maximum(np.abs(mid + r), np.abs(mid - r))


def c2_decompose(
    g: Observable, D_radius: float, Dprime_radius: float
) -> DecompositionResult:
    """Split g = A (g+ - g-) with both pieces obeying the gradient-Hessian
    domination on the inner ball.

    g+ = rho (g + 2 A1 ||x||^2) / A and g- = 2 A1 rho ||x||^2 / A, with rho
    a smooth cutoff that is 1 on a neighborhood of the D ball and supported
    in the D' ball.  A1 dominates the complex Hessian of g on a
    verification cloud (doubling search); A is then sized so that
    i dg+- wedge dbar g+- <= dd^c g+- holds on D.
    """
    if not (0 < D_radius < Dprime_radius):
        raise ValueError("need 0 < D_radius < Dprime_radius")
    if g.support_radius is None or _support_extent(g) > D_radius:
        raise ValueError("g must be declared supported inside the D ball")
    z, w = _verification_cloud(Dprime_radius)
    hnorm = _hermitian_norms(g, z, w)
    target = float(np.max(hnorm))
    A1 = 1.0
    while A1 < target and A1 < 2**10:
        A1 *= 2.0
    if A1 < target:
        raise ValueError(
            "declared C2 bound violated: complex Hessian exceeds the A1 cap"
        )
    r_one = D_radius + 0.25 * (Dprime_radius - D_radius)
    rho = radial_cutoff(r_one, Dprime_radius)
    gz, gw = g.gradient_batch(z, w)
    grad_sup = float(np.max(np.sqrt(np.abs(gz) ** 2 + np.abs(gw) ** 2)))
    A = max(
        (grad_sup + 2.0 * A1 * D_radius) ** 2 / A1,
        2.0 * A1 * D_radius * D_radius,
        1.0,
    )
    sq = squared_norm()
    inner = combine([g, sq], [1.0, 2.0 * A1])
    g_plus = scale(product(rho, inner), 1.0 / A)
    g_plus.name = "g_plus"
    g_minus = scale(product(rho, sq), 2.0 * A1 / A)
    g_minus.name = "g_minus"
    for piece in (g_plus, g_minus):
        piece.support_center = Point(0.0, 0.0)
        piece.support_radius = Dprime_radius
    return DecompositionResult(A=A, g_plus=g_plus, g_minus=g_minus, rho=rho, A1=A1)


def _support_extent(g: Observable) -> float:
    c = g.support_center or Point(0.0, 0.0)
    return abs(complex(c.z)) + abs(complex(c.w)) + (g.support_radius or 0.0)


# ---------------------------------------------------------------------------
# mollification
# ---------------------------------------------------------------------------


def mollify(g: Observable, epsilon: float, measure_box: float | None = None) -> Observable:
    """Convolution with a width-epsilon product bump kernel.

    Fixed 5-node Gauss-Legendre tensor quadrature per real axis; the kernel
    weights are normalized by their own quadrature mass, so constants pass
    through exactly and the sup norm never grows.  The returned observable
    carries a measured sup distance to g and a measured C2 bound.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    nodes, weights = np.polynomial.legendre.leggauss(5)
    kvals = np.exp(-1.0 / (1.0 - nodes**2))
    kw = weights * kvals
    kw = kw / kw.sum()
    offs = epsilon * nodes

    def ev(z, w):
        z = np.asarray(z, dtype=np.complex128)
        w = np.asarray(w, dtype=np.complex128)
        acc = np.zeros(np.shape(z), dtype=np.float64)
        for i in range(5):
            for j in range(5):
                dz = offs[i] + 1j * offs[j]
                cij = kw[i] * kw[j]
                for k in range(5):
                    for l in range(5):
                        dw = offs[k] + 1j * offs[l]
                        acc += (cij * kw[k] * kw[l]) * g.eval_batch(z - dz, w - dw)
        return acc

    box = measure_box
    if box is None:
        box = _support_extent(g) + 1.0 if g.support_radius is not None else 2.0
    gm = np.linspace(-box, box, 9)
    zz, ww = [a.ravel() for a in np.meshgrid(gm, gm)]
    z = zz + 0.0j
    w = ww + 0.0j
    sup_err = float(np.max(np.abs(ev(z, w) - g.eval_batch(z, w))))
    vals = np.abs(ev(z, w))
    # measure derivatives at the mollification scale: the tensor quadrature
    # approximates the convolution by 625 shifted copies, so probing below
    # the node spacing reads quadrature discreteness, not the function
    h_meas = max(FD_STEP, epsilon / 8.0)
    gz, gw = _fd_gradient(ev, z, w, h_meas)
    h11, h12, h22 = _fd_hessian(ev, z, w, h_meas)
    c2 = max(
        float(np.max(vals)),
        float(np.max(2.0 * np.sqrt(np.abs(gz) ** 2 + np.abs(gw) ** 2))),
        float(np.max(np.abs(h11))),
        float(np.max(np.abs(h22))),
        float(np.max(np.abs(h12))),
    )
    out = Observable(
        ev=ev,
        gamma=2.0,
        norm_bound=g.norm_bound,
        support_center=g.support_center,
        support_radius=(g.support_radius + epsilon)
        if g.support_radius is not None
        else None,
        name=f"mollify({g.name},{epsilon})",
    )
    out.measured_sup_error = sup_err
    out.measured_c2 = c2
    return out


def _measure_c2_proxy(ev, box: float) -> float:
    gm = np.linspace(-box, box, 9)
    zz, ww = [a.ravel() for a in np.meshgrid(gm, gm)]
    z = zz + 0.0j
    w = ww + 0.0j
    gz, gw = _fd_gradient(ev, z, w)
    h11, h12, h22 = _fd_hessian(ev, z, w)
    return max(
        float(np.max(np.abs(ev(z, w)))),
        float(np.max(2.0 * np.sqrt(np.abs(gz) ** 2 + np.abs(gw) ** 2))),
        float(np.max(np.abs(h11))),
        float(np.max(np.abs(h22))),
        float(np.max(np.abs(h12))),
    )


# ---------------------------------------------------------------------------
# the product-map test functions
# ---------------------------------------------------------------------------


def build_h(
    gs: Sequence[Observable], f: HenonMap, ns: Sequence[int]
) -> Observable:
    """h = g_1 (g_2 o f^{n_2 - n_1}) ... with offsets applied at eval time."""
    gs = list(gs)
    ns = list(ns)
    if len(gs) != len(ns):
        raise ValueError("need one time per observable")
    if any(b < a for a, b in zip(ns, ns[1:])):
        raise ValueError("times must be nondecreasing")
    h = gs[0]
    for g, n in zip(gs[1:], ns[1:]):
        h = product(h, pullback(g, f, n - ns[0]))
    return h


@dataclass
class PhiConstruction:
    """The paired test functions phi+- = g0+-(w-copy) * h+-(z-copy)."""

    kappa: int
    M: float
    chi: Observable
    g0_plus: Observable
    g0_minus: Observable
    h_plus: Observable
    h_minus: Observable
    offsets: tuple[int, ...]
    tilde_gs: tuple[Observable, ...] = field(repr=False, default=())

    def phi_plus(self, q: ProductPoint) -> float:
        return self.h_plus(q.x) * self.g0_plus(q.y)

    def phi_minus(self, q: ProductPoint) -> float:
        return self.h_minus(q.x) * self.g0_minus(q.y)


def build_phi(
    g0: Observable,
    gs: Sequence[Observable],
    f: HenonMap,
    ns: Sequence[int],
    B_radius: float,
) -> PhiConstruction:
    """The four functions g0+-, h+- with M = 10 kappa.

    chi is 1 on the 2 B_radius ball; h+ multiplies the shifted (g_j + M),
    h- subtracts 2 (M+1)^kappa so that h+ - h- is constant on {chi = 1}.
    """
    gs = list(gs)
    ns = list(ns)
    if len(gs) != len(ns):
        raise ValueError("need one time per observable")
    kappa = len(gs)
    if kappa < 1:
        raise ValueError("need at least one shifted observable")
    M = 10.0 * kappa
    chi = radial_cutoff(2.0 * B_radius, 3.0 * B_radius)
    offsets = tuple(n - ns[0] for n in ns)
    tilde = tuple(pullback(g, f, off) for g, off in zip(gs, offsets))
    prod_term = shift_by_constant(tilde[0], M)
    for tg in tilde[1:]:
        prod_term = product(prod_term, shift_by_constant(tg, M))
    h_plus = product(chi, prod_term)
    h_plus.name = "h_plus"
    h_minus = product(
        chi, shift_by_constant(prod_term, -2.0 * (M + 1.0) ** kappa)
    )
    h_minus.name = "h_minus"
    g0_plus = product(chi, shift_by_constant(g0, M))
    g0_plus.name = "g0_plus"
    g0_minus = product(chi, shift_by_constant(scale(g0, -1.0), M))
    g0_minus.name = "g0_minus"
    return PhiConstruction(
        kappa=kappa,
        M=M,
        chi=chi,
        g0_plus=g0_plus,
        g0_minus=g0_minus,
        h_plus=h_plus,
        h_minus=h_minus,
        offsets=offsets,
        tilde_gs=(g0,) + tilde,
    )


def positivity_bracket(kappa: int, M: float) -> float:
    """(M-1)^k [1 - (k+1)/(M+1) (1 + 2/(M-1))^k]; positive at M = 10 kappa."""
    if M <= 1:
        raise ValueError("M must exceed 1")
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    return (M - 1.0) ** kappa * (
        1.0 - (kappa + 1.0) / (M + 1.0) * (1.0 + 2.0 / (M - 1.0)) ** kappa
    )


@dataclass
class PhiHessianReport:
    n_points: int
    n_checked: int
    precondition_violations: list
    bracket: float
    min_eig_phi_plus: float
    min_eig_phi_minus: float
    min_eig_gap_plus: float
    min_eig_gap_minus: float


def _phi_hessian_4x4(h_obs: Observable, g0_obs: Observable, zx, wx, zy, wy):
    """4x4 complex Hessian of phi(x, y) = h(x) g0(y) at one product point."""
    hv = h_obs.eval_batch(np.array([zx]), np.array([wx]))[0]
    gv = g0_obs.eval_batch(np.array([zy]), np.array([wy]))[0]
    hz, hw = h_obs.gradient_batch(np.array([zx]), np.array([wx]))
    gz, gw = g0_obs.gradient_batch(np.array([zy]), np.array([wy]))
    hh = h_obs.hessian_batch(np.array([zx]), np.array([wx]))
    gh = g0_obs.hessian_batch(np.array([zy]), np.array([wy]))
    Hh = np.array(
        [[hh[0][0], hh[1][0]], [np.conj(hh[1][0]), hh[2][0]]],
        dtype=np.complex128,
    )
    Hg = np.array(
        [[gh[0][0], gh[1][0]], [np.conj(gh[1][0]), gh[2][0]]],
        dtype=np.complex128,
    )
    dh = np.array([hz[0], hw[0]], dtype=np.complex128)
    dg = np.array([gz[0], gw[0]], dtype=np.complex128)
    H = np.zeros((4, 4), dtype=np.complex128)
    H[:2, :2] = gv * Hh
    H[2:, 2:] = hv * Hg
    H[:2, 2:] = np.outer(dh, dg.conj())
    H[2:, :2] = H[:2, 2:].conj().T
    return (H + H.conj().T) / 2.0


def phi_hessian_check(
    phi: PhiConstruction,
    f: HenonMap,
    sample,
    slack: float = 1e-9,
    n_pairs: int = 64,
    rng_seed: int = 0,
    perturbation: float = 1e-3,
) -> PhiHessianReport:
    """Pointwise check of the positivity mechanism behind phi+-.

    At product points (x, y) with x, y near the sampled support, verifies
    the chain:  each dd^c g~_j dominates its gradient form (precondition,
    violations reported, not fatal), and then

        dd^c phi+-  >=  bracket * sum_j dd^c g~_j   (4x4 Loewner)

    with bracket = positivity_bracket(kappa, M) > 0, so dd^c phi+- is PSD
    at the checked points.
    """
    from .util import rng_stream

    rng = rng_stream(rng_seed, "perturb")
    zs, ws = sample.z, sample.w
    n = zs.shape[0]
    ix = rng.integers(0, n, size=n_pairs)
    iy = rng.integers(0, n, size=n_pairs)
    jitter = rng.normal(scale=perturbation, size=(n_pairs, 8))
    g0 = phi.tilde_gs[0]
    tilde_z = phi.tilde_gs[1:]
    bracket = positivity_bracket(phi.kappa, phi.M)
    violations = []
    min_plus = math.inf
    min_minus = math.inf
    gap_plus = math.inf
    gap_minus = math.inf
    checked = 0
    for k in range(n_pairs):
        zx = zs[ix[k]] + jitter[k, 0] + 1j * jitter[k, 1]
        wx = ws[ix[k]] + jitter[k, 2] + 1j * jitter[k, 3]
        zy = zs[iy[k]] + jitter[k, 4] + 1j * jitter[k, 5]
        wy = ws[iy[k]] + jitter[k, 6] + 1j * jitter[k, 7]
        ok = True
        S = np.zeros((4, 4), dtype=np.complex128)
        Hg0 = complex_hessian(g0, Point(zy, wy))
        if not loewner_leq(gradient_form(g0, Point(zy, wy)), Hg0, slack):
            ok = False
            violations.append((k, 0))
        S[2:, 2:] += Hg0
        for j, tg in enumerate(tilde_z, start=1):
            Hj = complex_hessian(tg, Point(zx, wx))
            if not loewner_leq(gradient_form(tg, Point(zx, wx)), Hj, slack):
                ok = False
                violations.append((k, j))
            S[:2, :2] += Hj
        if not ok:
            continue
        checked += 1
        Hp = _phi_hessian_4x4(phi.h_plus, phi.g0_plus, zx, wx, zy, wy)
        Hm = _phi_hessian_4x4(phi.h_minus, phi.g0_minus, zx, wx, zy, wy)
        min_plus = min(min_plus, hermitian_min_eig(Hp))
        min_minus = min(min_minus, hermitian_min_eig(Hm))
        gap_plus = min(gap_plus, hermitian_min_eig(Hp - bracket * S))
        gap_minus = min(gap_minus, hermitian_min_eig(Hm - bracket * S))
    return PhiHessianReport(
        n_points=n_pairs,
        n_checked=checked,
        precondition_violations=violations,
        bracket=bracket,
        min_eig_phi_plus=min_plus,
        min_eig_phi_minus=min_minus,
        min_eig_gap_plus=gap_plus,
        min_eig_gap_minus=gap_minus,
    )
