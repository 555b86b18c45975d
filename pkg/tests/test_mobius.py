import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ndmono.mobius import (
    Ball,
    MobiusParams,
    ball_to_concentric,
    boundary_angle_map,
    boundary_jacobian,
    concentric_to_ball,
    mobius_apply,
)

radius = st.floats(0.0, 0.95)
angle = st.floats(-math.pi, math.pi)


@st.composite
def params(draw):
    return draw(radius) * cmath.exp(1j * draw(angle))


@st.composite
def inner_balls(draw):
    c = draw(st.floats(0.0, 0.9))
    R = draw(st.floats(0.01, 0.99)) * (1 - c) * 0.98
    return Ball(c * cmath.exp(1j * draw(angle)), R)


def test_map_examples():
    assert mobius_apply(0, 0.3 + 0.1j) == pytest.approx(-0.3 - 0.1j, abs=1e-15)
    assert mobius_apply(0.5, -1) == pytest.approx(1, abs=1e-15)
    assert mobius_apply(0.5, mobius_apply(0.5, 0.7j)) == pytest.approx(0.7j, abs=1e-15)


def test_map_rejects_outside_parameter():
    with pytest.raises(ValueError):
        mobius_apply(1.0, 0.1)
    with pytest.raises(ValueError):
        MobiusParams(0.5, 1.0)


def test_concentric_pairing_examples():
    p = ball_to_concentric(Ball(0, 0.3))
    assert abs(p.a) < 1e-15 and p.r == pytest.approx(0.3, abs=1e-15)
    p = ball_to_concentric(Ball(0.4, 0.4))
    assert p.a == pytest.approx(0.5, abs=1e-14) and p.r == pytest.approx(0.5, abs=1e-14)
    w = cmath.exp(1j * math.pi / 3)
    p = ball_to_concentric(Ball(0.4 * w, 0.4))
    assert p.a == pytest.approx(0.5 * w, abs=1e-14) and p.r == pytest.approx(0.5, abs=1e-14)


def test_inverse_pairing_examples():
    b = concentric_to_ball(0, 0.3)
    assert abs(b.center) < 1e-15 and b.radius == pytest.approx(0.3)
    b = concentric_to_ball(0.5, 0.5)
    assert b.center == pytest.approx(0.4, abs=1e-14) and b.radius == pytest.approx(0.4, abs=1e-14)
    B = Ball(0.2 + 0.3j, 0.15)
    p = ball_to_concentric(B)
    back = concentric_to_ball(p.a, p.r)
    assert abs(back.center - B.center) < 1e-12 and abs(back.radius - B.radius) < 1e-12


def test_pairing_rejects_boundary_ball():
    with pytest.raises(ValueError):
        ball_to_concentric(Ball(0.5, 0.5))
    with pytest.raises(ValueError):
        Ball(0.3, 0.0)


def test_angle_map_examples():
    assert boundary_angle_map(0, 0.0) == pytest.approx(math.pi)
    assert math.cos(boundary_angle_map(0.5, math.pi)) == pytest.approx(1.0, abs=1e-14)
    a = 0.6 * cmath.exp(0.4j)
    assert boundary_angle_map(a, 0.4) == pytest.approx(math.pi + 0.4)


def test_jacobian_examples():
    assert boundary_jacobian(0, 1.234) == pytest.approx(1.0)
    assert boundary_jacobian(0.5, 0.0) == pytest.approx(3.0)
    assert boundary_jacobian(0.5, math.pi) == pytest.approx(1 / 3)


@settings(max_examples=200, deadline=None)
@given(params(), radius, angle)
def test_involution(a, s, t):
    x = s * cmath.exp(1j * t)
    assert abs(mobius_apply(a, mobius_apply(a, x)) - x) < 1e-12


@settings(max_examples=200, deadline=None)
@given(params(), angle)
def test_circle_preserved(a, t):
    assert abs(abs(mobius_apply(a, cmath.exp(1j * t))) - 1) < 1e-12


@settings(max_examples=100, deadline=None)
@given(inner_balls())
def test_ball_maps_onto_concentric_ball(B):
    p = ball_to_concentric(B)
    z = B.center + B.radius * np.exp(2j * np.pi * np.arange(100) / 100)
    assert np.max(np.abs(np.abs(mobius_apply(p.a, z)) - p.r)) < 1e-10
    back = concentric_to_ball(p.a, p.r)
    assert abs(back.center - B.center) < 1e-12 and abs(back.radius - B.radius) < 1e-12


@settings(max_examples=100, deadline=None)
@given(params())
def test_angle_map_matches_boundary_action(a):
    zeta = cmath.phase(a) if a else 0.0
    theta = np.r_[np.linspace(0, 2 * np.pi, 360, endpoint=False), zeta + np.pi, zeta - np.pi]
    psi = boundary_angle_map(a, theta)
    assert np.all((psi >= 0) & (psi < 2 * np.pi))
    assert np.max(np.abs(np.exp(1j * psi) - mobius_apply(a, np.exp(1j * theta)))) < 1e-12


@settings(max_examples=50, deadline=None)
@given(params())
def test_jacobian_is_derivative_of_angle_map(a):
    # oracle: the Jacobian is the speed |d psi / d theta| of the boundary map
    theta = np.linspace(0.1, 6.0, 25)
    h = 1e-6
    d = np.angle(np.exp(1j * (boundary_angle_map(a, theta + h) - boundary_angle_map(a, theta - h)))) / (2 * h)
    assert np.allclose(d, boundary_jacobian(a, theta), rtol=1e-6)


@pytest.mark.parametrize("a", [0, 0.3, 0.7j, 0.9 * cmath.exp(2j)])
def test_jacobian_mean_is_one(a):
    # trapezoid rule is spectrally accurate on periodic integrands
    theta = 2 * np.pi * np.arange(4000) / 4000
    assert np.mean(boundary_jacobian(a, theta)) == pytest.approx(1.0, abs=1e-10)
