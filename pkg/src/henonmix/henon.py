"""Generalized Henon maps on C^2 and the product map (f, f^-1) on C^4.

A map is stored as its list of elementary factors

    (z, w) |-> (p(z) - a*w, z),   deg p >= 2, p monic, a != 0,

never as expanded coefficients of the composition: the factor list keeps
inverses exact and avoids coefficient blowup.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels


class Point(NamedTuple):
    """A point of C^2."""

    z: complex
    w: complex


class ProductPoint(NamedTuple):
    """A point of C^4 = C^2 x C^2, written (x, y)."""

    x: Point
    y: Point


class EscapeError(RuntimeError):
    """Raised when an iteration overflows without a requested escape cutoff."""


@dataclass(frozen=True)
class ElementaryFactor:
    """One Henon factor (z, w) |-> (p(z) - a*w, z).

    ``coeffs`` lists p as c0..ck with the leading coefficient last and equal
    to one.  The factor is invertible with explicit inverse
    (z, w) |-> (w, (p(w) - z) / a).
    """

    coeffs: tuple[complex, ...]
    a: complex

    def __post_init__(self):
        coeffs = tuple(complex(c) for c in self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "a", complex(self.a))
        if len(coeffs) < 3:
            raise ValueError(
                f"factor polynomial must have degree >= 2, got degree {len(coeffs) - 1}; "
                "lower degrees give an elementary (dynamically trivial) automorphism"
            )
        if coeffs[-1] != 1:
            raise ValueError(
                f"factor polynomial must be monic (leading coefficient 1), got {coeffs[-1]!r}"
            )
        if self.a == 0:
            raise ValueError(
                "factor coefficient a must be nonzero; a == 0 degenerates "
                "to a non-invertible elementary map"
            )

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def p(self, z: complex) -> complex:
        acc = self.coeffs[-1]
        for c in reversed(self.coeffs[:-1]):
            acc = acc * z + c
        return acc

    def dp(self, z: complex) -> complex:
        k = self.degree
        acc = k * self.coeffs[-1]
        for i in range(k - 1, 0, -1):
            acc = acc * z + i * self.coeffs[i]
        return acc

    def apply(self, x: Point) -> Point:
        return Point(self.p(x.z) - self.a * x.w, x.z)

    def apply_inverse(self, x: Point) -> Point:
        return Point(x.w, (self.p(x.w) - x.z) / self.a)


@dataclass(frozen=True)
class OrbitSegment:
    """A finite run of the orbit; truncated (and flagged) on escape."""

    start: Point
    points: tuple[Point, ...]
    direction: str  # "forward" | "backward"
    escaped: bool = False
    escape_index: int | None = None


@dataclass(frozen=True)
class HenonMap:
    """Composition of elementary Henon factors, applied in list order."""

    factors: tuple[ElementaryFactor, ...]
    _packed: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        factors = tuple(self.factors)
        if not factors:
            raise ValueError("a Henon map needs at least one factor")
        object.__setattr__(self, "factors", factors)
        kmax = max(f.degree for f in factors)
        coeffs = np.zeros((len(factors), kmax + 1), dtype=np.complex128)
        degs = np.zeros(len(factors), dtype=np.int64)
        avals = np.zeros(len(factors), dtype=np.complex128)
        for i, f in enumerate(factors):
            coeffs[i, : f.degree + 1] = f.coeffs
            degs[i] = f.degree
            avals[i] = f.a
        coeffs.setflags(write=False)
        degs.setflags(write=False)
        avals.setflags(write=False)
        object.__setattr__(self, "_packed", (coeffs, degs, avals))

    @property
    def degree(self) -> int:
        """Algebraic degree d: the product of the factor degrees."""
        d = 1
        for f in self.factors:
            d *= f.degree
        return d

    @property
    def det_jacobian(self) -> complex:
        """Constant Jacobian determinant, the product of the factor a's."""
        det = complex(1)
        for f in self.factors:
            det *= f.a
        return det

    def packed(self):
        """(coeffs, degs, avals) arrays consumed by the kernels."""
        return self._packed

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for f in self.factors:
            h.update(repr((f.coeffs, f.a)).encode())
        return h.hexdigest()[:16]

    # -- point operations ---------------------------------------------------

    def apply(self, x: Point) -> Point:
        for f in self.factors:
            x = f.apply(x)
        return x

    def apply_inverse(self, x: Point) -> Point:
        for f in reversed(self.factors):
            x = f.apply_inverse(x)
        return x

    def apply_n(self, x: Point, n: int) -> Point:
        """f^n with n of either sign."""
        for _ in range(abs(n)):
            x = self.apply(x) if n > 0 else self.apply_inverse(x)
        return x

    def jacobian(self, x: Point) -> np.ndarray:
        """D f at x: chain-rule product of factor Jacobians [[p'(z), -a], [1, 0]]."""
        J = np.eye(2, dtype=np.complex128)
        for f in self.factors:
            Jf = np.array([[f.dp(x.z), -f.a], [1.0, 0.0]], dtype=np.complex128)
            J = Jf @ J
            x = f.apply(x)
        return J

    def jacobian_inverse(self, x: Point) -> np.ndarray:
        """D f^-1 at x, via factor inverses applied in reverse order."""
        J = np.eye(2, dtype=np.complex128)
        for f in reversed(self.factors):
            Jf = np.array(
                [[0.0, 1.0], [-1.0 / f.a, f.dp(x.w) / f.a]], dtype=np.complex128
            )
            J = Jf @ J
            x = f.apply_inverse(x)
        return J

    def iterate(self, n: int, x: Point, escape_radius: float) -> OrbitSegment:
        """Orbit segment x, f(x), ..., f^n(x) (or f^-1 for n < 0).

        Truncates once the sup-norm exceeds ``escape_radius``; the escape
        index marks the first offending point.
        """
        if escape_radius <= 0:
            raise ValueError("escape_radius must be positive")
        direction = "backward" if n < 0 else "forward"
        pts = [x]
        escaped = False
        esc_idx = None
        cur = x
        if max(abs(cur.z), abs(cur.w)) > escape_radius:
            escaped, esc_idx = True, 0
        else:
            for i in range(abs(n)):
                cur = self.apply(cur) if n > 0 else self.apply_inverse(cur)
                pts.append(cur)
                if max(abs(cur.z), abs(cur.w)) > escape_radius:
                    escaped, esc_idx = True, i + 1
                    break
                if not (math.isfinite(abs(cur.z)) and math.isfinite(abs(cur.w))):
                    raise EscapeError(
                        f"overflow at step {i + 1} below escape radius {escape_radius}"
                    )
        return OrbitSegment(
            start=x,
            points=tuple(pts),
            direction=direction,
            escaped=escaped,
            escape_index=esc_idx,
        )

    def product_apply(self, q: ProductPoint, n: int) -> ProductPoint:
        """F^n for the product map F = (f, f^-1) on C^4."""
        return ProductPoint(self.apply_n(q.x, n), self.apply_n(q.y, -n))

    # -- batch operations (kernel-backed) ------------------------------------

    def apply_batch(
        self, z: np.ndarray, w: np.ndarray, n: int = 1, forward: bool | None = None
    ) -> tuple[np.ndarray, np.ndarray]:
        """f^n on arrays of points; n < 0 (or forward=False) iterates f^-1."""
        if forward is None:
            forward = n >= 0
        coeffs, degs, avals = self._packed
        zf = np.ascontiguousarray(z, dtype=np.complex128).ravel()
        wf = np.ascontiguousarray(w, dtype=np.complex128).ravel()
        zo, wo = kernels.iterate_batch(coeffs, degs, avals, zf, wf, abs(n), forward)
        return zo.reshape(np.shape(z)), wo.reshape(np.shape(w))

    def jacobian_orbit_product(self, points: Sequence[Point]) -> np.ndarray:
        """D f^n along an orbit: J(x_{n-1}) ... J(x_0) without re-iterating."""
        J = np.eye(2, dtype=np.complex128)
        for x in points:
            J = self.jacobian(x) @ J
        return J

    def jacobian_batch(
        self, z: np.ndarray, w: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Entrywise D f over point arrays: (j11, j12, j21, j22)."""
        z = np.asarray(z, dtype=np.complex128)
        w = np.asarray(w, dtype=np.complex128)
        j11 = np.ones_like(z)
        j12 = np.zeros_like(z)
        j21 = np.zeros_like(z)
        j22 = np.ones_like(z)
        for f in self.factors:
            k = f.degree
            dp = np.full_like(z, k * f.coeffs[-1])
            for i in range(k - 1, 0, -1):
                dp = dp * z + i * f.coeffs[i]
            t11 = dp * j11 - f.a * j21
            t12 = dp * j12 - f.a * j22
            j21, j22 = j11, j12
            j11, j12 = t11, t12
            pz = np.full_like(z, f.coeffs[-1])
            for i in range(k - 1, -1, -1):
                pz = pz * z + f.coeffs[i]
            z, w = pz - f.a * w, z
        return j11, j12, j21, j22

    @property
    def all_factors_quadratic(self) -> bool:
        return all(f.degree == 2 for f in self.factors)


def henon_quadratic(c: complex, a: complex) -> HenonMap:
    """Single-factor map with p(z) = z^2 + c."""
    return HenonMap((ElementaryFactor((c, 0.0, 1.0), a),))


HORSESHOE = henon_quadratic(-6.0, 0.1)
