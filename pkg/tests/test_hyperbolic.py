import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import grid_lca_depth
from interhyp.errors import NumericDomain
from interhyp.hyperbolic import (EPS_BALL, distance, distance_batch, geodesic_point, lca_depth,
                                 lca_depth_batch, mobius_add, origin_distance, project, riemannian_grad)


def ball_points(rng, n, dim, max_radius=0.95):
    d = rng.standard_normal((n, dim))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * (max_radius * rng.random(n) ** (1 / dim))[:, None]


def test_known_distances():
    o = np.zeros(2)
    assert distance(o, o) == 0.0
    assert distance(o, [0.5, 0.0]) == pytest.approx(2 * math.atanh(0.5), abs=1e-15)
    # |x - y|^2 = 0.25, conformal terms 0.75 * 1 -> arcosh(1 + 2/3)
    assert distance([0.5, 0.0], o) == pytest.approx(math.acosh(1 + 2 * 0.25 / 0.75), abs=1e-14)


def test_outside_ball_raises():
    with pytest.raises(NumericDomain):
        distance([1.0, 0.0], [0.0, 0.0])
    with pytest.raises(NumericDomain):
        lca_depth([0.3, 0.0], [0.8, 0.8])


def test_radial_identity(rng):
    x = ball_points(rng, 1000, 5, 0.999)
    for p in x:
        assert abs(distance(np.zeros(5), p) - 2 * math.atanh(np.linalg.norm(p))) <= 1e-10
    assert np.allclose(origin_distance(x), 2 * np.arctanh(np.linalg.norm(x, axis=1)), atol=1e-12)


def test_geodesic_endpoints_and_additivity(rng):
    for x, y in zip(ball_points(rng, 200, 3), ball_points(rng, 200, 3)):
        assert np.allclose(geodesic_point(x, y, 0.0), x, atol=1e-12)
        assert np.allclose(geodesic_point(x, y, 1.0), y, atol=1e-9)
        t = rng.random()
        z = geodesic_point(x, y, t)
        assert abs(distance(x, z) + distance(z, y) - distance(x, y)) <= 1e-9
        assert abs(distance(x, z) - t * distance(x, y)) <= 1e-9


def test_mobius_identities(rng):
    x = ball_points(rng, 50, 4)
    assert np.allclose(mobius_add(x, np.zeros_like(x)), x)
    assert np.allclose(mobius_add(-x, x), 0, atol=1e-12)


def test_triangle_inequality(rng):
    a, b, c = (ball_points(rng, 10_000, 3, 0.99) for _ in range(3))
    ab, bc, ac = distance_batch(a, b), distance_batch(b, c), distance_batch(a, c)
    assert np.all(ac <= ab + bc + 1e-9)


def test_lca_depth_matches_grid(rng):
    xs, ys = ball_points(rng, 20, 3), ball_points(rng, 20, 3)
    for x, y in zip(xs, ys):
        assert abs(lca_depth(x, y) - grid_lca_depth(x, y)) <= 1e-4


def test_lca_depth_special_cases():
    x = np.array([0.5, 0.0])
    assert lca_depth(x, -x) == pytest.approx(0.0, abs=1e-9)  # geodesic through the origin
    assert lca_depth(x, x) == pytest.approx(origin_distance(x))
    inner = np.array([0.2, 0.0])
    assert lca_depth(x, inner) == pytest.approx(origin_distance(inner), abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-0.68, 0.68), min_size=4, max_size=4))
def test_lca_depth_bounds_and_symmetry(coords):
    x, y = np.array(coords[:2]), np.array(coords[2:])
    d = lca_depth(x, y)
    assert d <= min(origin_distance(x), origin_distance(y)) + 1e-9
    assert d >= 0.0
    assert abs(d - lca_depth(y, x)) <= 1e-9


def test_closed_form_agrees_with_golden_section(rng):
    x, y = ball_points(rng, 500, 4, 0.99), ball_points(rng, 500, 4, 0.99)
    closed = lca_depth_batch(x, y)
    golden = np.array([lca_depth(a, b) for a, b in zip(x, y)])
    assert np.max(np.abs(closed - golden)) <= 1e-8


def test_closed_form_gradient(rng):
    x, y = ball_points(rng, 30, 3, 0.9), ball_points(rng, 30, 3, 0.9)
    _, gx, gy = lca_depth_batch(x, y, return_grad=True)
    h = 1e-6
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        num_x = (lca_depth_batch(x + e, y) - lca_depth_batch(x - e, y)) / (2 * h)
        num_y = (lca_depth_batch(x, y + e) - lca_depth_batch(x, y - e)) / (2 * h)
        assert np.allclose(gx[:, k], num_x, atol=1e-6)
        assert np.allclose(gy[:, k], num_y, atol=1e-6)


def test_project_and_riemannian_grad():
    x = np.array([0.3, 0.4])
    assert np.array_equal(project(x), x)
    far = project(np.array([2.0, 0.0]))
    assert np.linalg.norm(far) == pytest.approx(1 - EPS_BALL, abs=1e-15)
    g = np.array([1.0, -2.0])
    assert np.allclose(riemannian_grad(g, np.zeros(2)), g * 0.25)
    assert np.allclose(riemannian_grad(g, x), g * ((1 - 0.25) / 2) ** 2)
