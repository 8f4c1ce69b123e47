"""Geometry of the Poincaré ball with curvature -1.

Single-point functions take 1-D arrays. The ``*_batch`` helpers broadcast
over leading axes and are what the optimizer uses.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NumericDomain

EPS_BALL = 1e-5
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _sqnorm(x):
    return np.sum(x * x, axis=-1)


def _check_inside(*points):
    for p in points:
        if np.any(_sqnorm(np.asarray(p)) >= 1.0):
            raise NumericDomain("point not strictly inside the unit ball")


def _arcosh1p(z):
    # arcosh(1 + z), accurate for small z
    return np.log1p(z + np.sqrt(z * (z + 2.0)))


def distance(x, y) -> float:
    """Hyperbolic distance arcosh(1 + 2|x-y|^2 / ((1-|x|^2)(1-|y|^2)))."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_inside(x, y)
    z = 2.0 * _sqnorm(x - y) / ((1.0 - _sqnorm(x)) * (1.0 - _sqnorm(y)))
    return float(_arcosh1p(z))


def distance_batch(x, y):
    z = 2.0 * _sqnorm(x - y) / ((1.0 - _sqnorm(x)) * (1.0 - _sqnorm(y)))
    return _arcosh1p(z)


def origin_distance(x):
    """d(o, x) = 2 artanh |x|; works on single points and batches."""
    return 2.0 * np.arctanh(np.sqrt(_sqnorm(np.asarray(x, dtype=np.float64))))


def mobius_add(x, y):
    xy = np.sum(x * y, axis=-1, keepdims=True)
    x2 = np.sum(x * x, axis=-1, keepdims=True)
    y2 = np.sum(y * y, axis=-1, keepdims=True)
    num = (1.0 + 2.0 * xy + y2) * x + (1.0 - x2) * y
    return num / (1.0 + 2.0 * xy + x2 * y2)


def geodesic_point(x, y, t: float) -> np.ndarray:
    """Point at fraction ``t`` of the hyperbolic distance from x to y."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must be in [0, 1], got {t}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_inside(x, y)
    v = mobius_add(-x, y)
    nv = math.sqrt(float(_sqnorm(v)))
    if nv == 0.0:
        return x.copy()
    step = math.tanh(t * math.atanh(min(nv, 1.0 - 1e-16))) / nv
    return mobius_add(x, step * v)


def lca_depth(x, y, tol: float = 1e-10) -> float:
    """Smallest origin distance reached on the geodesic segment [x, y].

    Golden-section search over the geodesic parameter; the origin distance
    along a geodesic is unimodal so the endpoints are compared at the end.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_inside(x, y)

    def f(t):
        return float(origin_distance(geodesic_point(x, y, t)))

    lo, hi = 0.0, 1.0
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLDEN * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLDEN * (hi - lo)
            fd = f(d)
    return min(f(0.5 * (lo + hi)), f(0.0), f(1.0))


def lca_depth_batch(x, y, return_grad: bool = False, tiny: float = 1e-15):
    """Closed-form LCA depth for batches of point pairs, optionally with gradients.

    The geodesic through x and y lies in span(x, y) on the circle orthogonal
    to the unit sphere. With a=|x|^2, b=|y|^2, s=<x, y> and det=ab-s^2 its
    closest approach to the origin sits at hyperbolic depth D with

        sinh(D)^2 = 4 det / ((a+b)(1+ab) - 2s(1+a)(1+b) + 4s^2),

    provided that point falls between x and y, i.e. (1+a)b >= s(1+b) and
    a(1+b) >= s(1+a). Otherwise the segment minimum is the endpoint with the
    smaller norm. Collinear pairs on opposite sides of the origin have depth 0.

    Returns ``depth`` or ``(depth, grad_x, grad_y)``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    a = _sqnorm(x)
    b = _sqnorm(y)
    s = np.sum(x * y, axis=-1)
    # |y_perp|^2 |x|^2 avoids the ab - s^2 cancellation for nearby directions
    safe_a = np.where(a > tiny, a, 1.0)
    y_perp = y - (s / safe_a)[..., None] * x
    det = np.where(a > tiny, a * _sqnorm(y_perp), 0.0)
    p_coef = (1.0 + a) * b - s * (1.0 + b)
    q_coef = a * (1.0 + b) - s * (1.0 + a)
    collinear = det <= tiny * np.maximum(a * b, tiny)
    interior = (~collinear) & (p_coef >= 0.0) & (q_coef >= 0.0)
    through_origin = collinear & (s < 0.0)

    nrm = (a + b) * (1.0 + a * b) - 2.0 * s * (1.0 + a) * (1.0 + b) + 4.0 * s * s
    nrm_safe = np.where(interior, nrm, 1.0)
    g = np.where(interior, 4.0 * det / nrm_safe, 0.0)
    g = np.maximum(g, 0.0)
    d_interior = np.arcsinh(np.sqrt(g))

    x_is_min = a <= b
    m = np.where(x_is_min, a, b)
    d_endpoint = 2.0 * np.arctanh(np.sqrt(m))

    depth = np.where(interior, d_interior, np.where(through_origin, 0.0, d_endpoint))
    if not return_grad:
        return depth

    # interior branch: chain rule through g(a, b, s)
    sg = np.sqrt(np.where(interior & (g > 0), g, 1.0))
    dD_dg = np.where(interior & (g > 0), 1.0 / (2.0 * sg * np.sqrt(1.0 + g)), 0.0)
    n2 = nrm_safe * nrm_safe
    n_a = (1.0 + a * b) + (a + b) * b - 2.0 * s * (1.0 + b)
    n_b = (1.0 + a * b) + (a + b) * a - 2.0 * s * (1.0 + a)
    n_s = -2.0 * (1.0 + a) * (1.0 + b) + 8.0 * s
    g_a = 4.0 * (b * nrm - det * n_a) / n2
    g_b = 4.0 * (a * nrm - det * n_b) / n2
    g_s = 4.0 * (-2.0 * s * nrm - det * n_s) / n2
    ca = (dD_dg * g_a)[..., None]
    cb = (dD_dg * g_b)[..., None]
    cs = (dD_dg * g_s)[..., None]
    gx_int = 2.0 * ca * x + cs * y
    gy_int = 2.0 * cb * y + cs * x

    # endpoint branch: d/dz 2 artanh|z| = 2 z / (|z| (1 - |z|^2))
    rm = np.sqrt(m)
    coef = np.where((rm > tiny) & ~interior & ~through_origin, 2.0 / (np.where(rm > tiny, rm, 1.0) * (1.0 - m)), 0.0)
    gx_end = np.where(x_is_min[..., None], coef[..., None] * x, 0.0)
    gy_end = np.where(x_is_min[..., None], 0.0, coef[..., None] * y)

    sel = interior[..., None]
    gx = np.where(sel, gx_int, gx_end)
    gy = np.where(sel, gy_int, gy_end)
    return depth, gx, gy


def project(x, eps_ball: float = EPS_BALL):
    """Rescale points so their norm is at most 1 - eps_ball."""
    if not 0.0 < eps_ball < 1.0:
        raise ValueError("eps_ball must be in (0, 1)")
    x = np.asarray(x, dtype=np.float64)
    norm = np.sqrt(_sqnorm(x))
    max_norm = 1.0 - eps_ball
    scale = np.where(norm > max_norm, max_norm / np.where(norm > 0, norm, 1.0), 1.0)
    return x * scale[..., None] if x.ndim > 1 else x * float(scale)


def riemannian_grad(euclidean_grad, x):
    """Scale a Euclidean gradient by the inverse metric ((1 - |x|^2) / 2)^2."""
    x = np.asarray(x, dtype=np.float64)
    factor = ((1.0 - _sqnorm(x)) / 2.0) ** 2
    g = np.asarray(euclidean_grad, dtype=np.float64)
    return g * factor[..., None] if g.ndim > 1 else g * float(factor)
