"""Ball and sphere quadrature on Cartesian grids.

Two integration routes coexist deliberately:

* cut-cell nodal quadrature (ball_integral): each node owns a cell of
  volume spacing^n; cells crossed by the sphere get a fractional weight
  estimated by 4^n sub-sampling.  First-order accurate, used for nodal
  integrands such as E(u, r).
* radial-shell quadrature (ball_integral_radial): Gauss-Legendre in the
  radius times equi-distributed directions, with the integrand evaluated
  through the field sampling protocol.  Used by the radius-indexed energy
  functionals where smoothness in the radius matters.

Sphere integrals always use direction sampling; the sphere never aligns
with the grid.
"""

import numpy as np

from .core import AnalysisPreconditionError
from .grid import BallSpec, GridField, sample_field

DEFAULT_N_ANG = {2: 512, 3: 2048}
DEFAULT_N_RAD = 48
SUBSAMPLES = 4


def cell_weights(grid: GridField, ball: BallSpec, subs=SUBSAMPLES):
    """Per-node quadrature weights (fractions of cell volume inside the ball)."""
    ball.check_inside(grid)
    h = grid.spacing
    mesh = grid.meshgrid()
    r2 = np.zeros(grid.dims)
    for d in range(grid.n):
        r2 += (mesh[d] - ball.center[d]) ** 2
    dist = np.sqrt(r2)
    half_diag = 0.5 * h * np.sqrt(grid.n)
    w = np.zeros(grid.dims)
    w[dist <= ball.radius - half_diag] = 1.0
    cut = np.abs(dist - ball.radius) <= half_diag
    if np.any(cut):
        idx = np.where(cut)
        offs = (np.arange(subs) + 0.5) / subs - 0.5
        frac = np.zeros(len(idx[0]))
        grids = np.meshgrid(*([offs] * grid.n), indexing="ij")
        for corner in zip(*[g.ravel() for g in grids]):
            rr = np.zeros(len(idx[0]))
            for d in range(grid.n):
                rr += (mesh[d][idx] + corner[d] * h - ball.center[d]) ** 2
            frac += rr < ball.radius ** 2
        w[idx] = frac / subs ** grid.n
    return w


def ball_integral(expr, grid: GridField, ball: BallSpec, subs=SUBSAMPLES):
    """Integral over the ball of a node-wise scalar field expr (shape dims)."""
    w = cell_weights(grid, ball, subs)
    return float(np.sum(w * expr) * grid.spacing ** grid.n)


def sphere_directions(n, n_ang):
    """Equi-distributed unit directions: uniform angles (n=2), Fibonacci (n=3)."""
    if n == 2:
        th = 2.0 * np.pi * (np.arange(n_ang) + 0.5) / n_ang
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    i = np.arange(n_ang)
    golden = (1.0 + np.sqrt(5.0)) / 2.0
    z = 1.0 - (2.0 * i + 1.0) / n_ang
    phi = 2.0 * np.pi * i / golden
    rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def sphere_area(n, r):
    return 2.0 * np.pi * r if n == 2 else 4.0 * np.pi * r * r


def ball_volume(n, r):
    return np.pi * r * r if n == 2 else 4.0 / 3.0 * np.pi * r ** 3


def sphere_points(ball: BallSpec, n, n_ang=None):
    """Quadrature points and the (uniform) weight on the sphere."""
    n_ang = n_ang or DEFAULT_N_ANG[n]
    dirs = sphere_directions(n, n_ang)
    pts = ball.center[None, :] + ball.radius * dirs
    return pts, dirs, sphere_area(n, ball.radius) / n_ang


def sphere_integral(expr, grid: GridField, ball: BallSpec, n_ang=None, order=1):
    """Integral over the sphere of a nodal scalar field (interpolated) or callable."""
    ball.check_inside(grid)
    pts, _, w = sphere_points(ball, grid.n, n_ang)
    if callable(expr):
        vals = np.asarray(expr(pts), float).reshape(len(pts))
    else:
        carrier = GridField(grid.origin, grid.spacing, np.asarray(expr, float)[..., None])
        vals = carrier.sample(pts, order=order)[:, 0]
    return float(np.sum(vals) * w)


def radial_nodes(radius, n_rad=DEFAULT_N_RAD):
    gs, gw = np.polynomial.legendre.leggauss(n_rad)
    return 0.5 * radius * (gs + 1.0), 0.5 * radius * gw


def ball_integral_radial(point_func, ball: BallSpec, n, n_ang=None, n_rad=DEFAULT_N_RAD):
    """Integral over the ball of point_func(points)->values via radial shells."""
    n_ang = n_ang or DEFAULT_N_ANG[n]
    dirs = sphere_directions(n, n_ang)
    ss, ws = radial_nodes(ball.radius, n_rad)
    total = 0.0
    for s, w in zip(ss, ws):
        pts = ball.center[None, :] + s * dirs
        vals = np.asarray(point_func(pts), float).reshape(n_ang)
        total += w * np.sum(vals) * sphere_area(n, s) / n_ang
    return float(total)


def energy_E(u: GridField, ball: BallSpec, q, subs=SUBSAMPLES):
    """E(u, r) = integral over the ball of |grad u|^2 + |u|^{q+1}.

    Centered-difference gradient, cut-cell weights.
    """
    g = u.gradient_arrays()
    gsq = np.sum(g * g, axis=(-2, -1))
    mag = np.linalg.norm(u.values, axis=-1)
    return ball_integral(gsq + mag ** (q + 1.0), u, ball, subs)


def quad_error_estimate(grid: GridField, ball: BallSpec, subs=SUBSAMPLES):
    """Relative cut-cell quadrature error calibrated on the constant-1 field.

    The exact ball volume is known, so the measured defect is an honest
    scale for quadrature noise at this (grid, radius) pair.
    """
    approx = ball_integral(np.ones(grid.dims), grid, ball, subs)
    exact = ball_volume(grid.n, ball.radius)
    err = abs(approx - exact) / exact
    return max(err, 1e-12)


def sphere_quad_error_estimate(grid: GridField, ball: BallSpec, n_ang=None):
    """Relative sphere quadrature error on the constant-1 field plus a
    linear-interpolation floor at this radius."""
    approx = sphere_integral(np.ones(grid.dims), grid, ball, n_ang)
    exact = sphere_area(grid.n, ball.radius)
    err = abs(approx - exact) / exact
    interp_floor = (grid.spacing / ball.radius) ** 2
    return max(err, interp_floor, 1e-12)
