"""Möbius automorphisms of the unit disk.

The map ``M_a(x) = (x - a) / (conj(a) x - 1)`` is an involution of the closed
unit disk. For a ball ``B(C, R)`` strictly inside the disk there is a unique
``a`` sending it to a concentric ball ``B(0, r)``; the functions here compute
that pairing together with the induced map on boundary angles and its
Jacobian.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Ball",
    "MobiusParams",
    "mobius_apply",
    "ball_to_concentric",
    "concentric_to_ball",
    "boundary_angle_map",
    "boundary_jacobian",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Ball:
    """Open disk with complex ``center`` and positive ``radius``."""

    center: complex
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")
        if abs(self.center) + self.radius > 1.0 + 1e-12:
            raise ValueError(
                f"ball B({self.center}, {self.radius}) is not contained in the unit disk"
            )

    @property
    def c(self) -> float:
        return abs(self.center)

    @property
    def zeta(self) -> float:
        return cmath.phase(self.center) if self.center != 0 else 0.0

    @property
    def strictly_inside(self) -> bool:
        return abs(self.center) + self.radius < 1.0

    def contains(self, points) -> np.ndarray:
        """Membership of complex ``points`` in the open ball."""
        return np.abs(np.asarray(points) - self.center) < self.radius

    def rotated(self, angle: float) -> "Ball":
        return Ball(self.center * cmath.exp(1j * angle), self.radius)


@dataclass(frozen=True)
class MobiusParams:
    """Transformation parameter ``a`` and the concentric radius ``r``."""

    a: complex
    r: float

    def __post_init__(self):
        object.__setattr__(self, "a", complex(self.a))
        object.__setattr__(self, "r", float(self.r))
        if not abs(self.a) < 1:
            raise ValueError(f"|a| must be < 1, got {abs(self.a)}")
        if not 0 < self.r < 1:
            raise ValueError(f"concentric radius must lie in (0, 1), got {self.r}")

    @property
    def rho(self) -> float:
        return abs(self.a)

    @property
    def zeta(self) -> float:
        return cmath.phase(self.a) if self.a != 0 else 0.0


def _check_parameter(a: complex) -> complex:
    a = complex(a)
    if not abs(a) < 1:
        raise ValueError(f"Möbius parameter must satisfy |a| < 1, got |a| = {abs(a)}")
    return a


def mobius_apply(a: complex, x):
    """Evaluate ``M_a(x) = (x - a) / (conj(a) x - 1)``; ``x`` may be an array."""
    a = _check_parameter(a)
    x = np.asarray(x, dtype=complex) if np.ndim(x) else complex(x)
    return (x - a) / (a.conjugate() * x - 1.0)


def ball_to_concentric(ball: Ball) -> MobiusParams:
    """Find ``(a, r)`` with ``M_a(ball) = B(0, r)``.

    The radius is computed from the rationalized root
    ``r = 2R / (X + sqrt(X^2 - 4R^2))`` with ``X = 1 + R^2 - c^2``, which
    avoids cancellation for small balls.
    """
    c, R = ball.c, ball.radius
    if not R < 1.0 - c:
        raise ValueError(
            f"ball B({ball.center}, {R}) must lie strictly inside the unit disk"
        )
    X = 1.0 + R * R - c * c
    # X^2 - 4R^2 factored as ((1-R)^2 - c^2)((1+R)^2 - c^2) to keep it non-negative
    disc = ((1.0 - R) ** 2 - c * c) * ((1.0 + R) ** 2 - c * c)
    r = 2.0 * R / (X + math.sqrt(disc))
    a = ball.center / (1.0 - R * r)
    return MobiusParams(a, r)


def concentric_to_ball(a: complex, r: float) -> Ball:
    """Image ``M_a(B(0, r))`` as a :class:`Ball`."""
    params = MobiusParams(a, r)
    rho = params.rho
    denom = rho * rho * r * r - 1.0
    c = rho * (r * r - 1.0) / denom
    R = r * (rho * rho - 1.0) / denom
    return Ball(c * cmath.exp(1j * params.zeta), R)


def boundary_angle_map(a: complex, theta):
    """Angle ``psi_a(theta)`` with ``exp(i psi_a) = M_a(exp(i theta))``, in [0, 2pi).

    ``2 arctan(k tan(t/2))`` is evaluated as ``2 atan2(k sin(t/2), cos(t/2))``
    with ``t`` reduced to (-pi, pi], so the tangent pole at ``t = pi`` takes its
    limit value.
    """
    a = _check_parameter(a)
    rho = abs(a)
    zeta = cmath.phase(a) if a != 0 else 0.0
    k = (1.0 + rho) / (1.0 - rho)
    t = np.asarray(theta, dtype=float) - zeta
    t = np.pi - np.mod(np.pi - t, TWO_PI)
    half = 0.5 * t
    psi = np.pi + zeta + 2.0 * np.arctan2(k * np.sin(half), np.cos(half))
    psi = np.mod(psi, TWO_PI)
    # mod of a tiny negative number rounds up to 2 pi
    psi = np.where(psi >= TWO_PI, 0.0, psi)
    return float(psi) if np.ndim(psi) == 0 else psi


def boundary_jacobian(a: complex, theta):
    """Boundary Jacobian ``(1 - rho^2) / |conj(a) e^{i theta} - 1|^2``."""
    a = _check_parameter(a)
    z = np.exp(1j * np.asarray(theta, dtype=float))
    out = (1.0 - abs(a) ** 2) / np.abs(a.conjugate() * z - 1.0) ** 2
    return float(out) if np.ndim(out) == 0 else out
