"""Uniform Cartesian grids, vector-valued nodal fields, interpolation.

Fields store one m-vector per node in row-major node order.  Sampling off
the nodes uses separable multilinear interpolation (order=1, the default)
or Catmull-Rom cubic (order=3) for analysis paths that need the extra
accuracy.  Gradients are centered differences in the interior and one-sided
on the outermost node layer.
"""

from dataclasses import dataclass

import numpy as np

from .core import AnalysisPreconditionError, ConfigError


@dataclass
class GridField:
    origin: np.ndarray      # lower corner, shape (n,)
    spacing: float
    values: np.ndarray      # shape dims + (m,)

    def __post_init__(self):
        self.origin = np.asarray(self.origin, float)
        self.values = np.asarray(self.values, float)
        if self.values.ndim != len(self.origin) + 1:
            raise ConfigError("values must have shape dims + (m,)")
        if self.spacing <= 0:
            raise ConfigError("spacing must be positive")
        self._grad = None

    @property
    def n(self):
        return len(self.origin)

    @property
    def m(self):
        return self.values.shape[-1]

    @property
    def dims(self):
        return self.values.shape[:-1]

    @property
    def upper(self):
        return self.origin + self.spacing * (np.array(self.dims) - 1)

    def axes(self):
        return [self.origin[d] + self.spacing * np.arange(self.dims[d]) for d in range(self.n)]

    def meshgrid(self):
        return np.meshgrid(*self.axes(), indexing="ij")

    def node_points(self):
        """All node coordinates, shape (prod(dims), n)."""
        mesh = self.meshgrid()
        return np.stack([g.ravel() for g in mesh], axis=1)

    def copy(self):
        return GridField(self.origin.copy(), self.spacing, self.values.copy())

    def component(self, k=0):
        return self.values[..., k]

    def max_abs(self):
        return float(np.max(np.linalg.norm(self.values, axis=-1)))

    def assert_finite(self):
        if not np.all(np.isfinite(self.values)):
            raise ConfigError("field contains non-finite values")

    def contains_ball(self, center, radius, margin=0.0):
        center = np.asarray(center, float)
        return bool(np.all(center - radius >= self.origin - margin)
                    and np.all(center + radius <= self.upper + margin))

    # -- sampling -------------------------------------------------------
    def sample(self, points, order=1):
        """Interpolated values at points, shape (npts, m)."""
        pts = np.asarray(points, float)
        return _interpolate(self.values, self.origin, self.spacing, pts, order)

    def gradient_arrays(self):
        """Centered-difference gradient, shape dims + (n, m); cached."""
        if self._grad is None:
            self._grad = _gradient_arrays(self.values, self.spacing)
        return self._grad

    def sample_grad(self, points, order=1):
        """Interpolated gradient at points, shape (npts, n, m)."""
        g = self.gradient_arrays()
        pts = np.asarray(points, float)
        flat = g.reshape(g.shape[: self.n] + (self.n * self.m,))
        out = _interpolate(flat, self.origin, self.spacing, pts, order)
        return out.reshape(len(pts), self.n, self.m)

    def invalidate_cache(self):
        self._grad = None


def grid_on_box(center, half_width, nodes_per_axis, n, m=1):
    """Fresh zero field on the cube [center - hw, center + hw]^n."""
    center = np.asarray(center, float) if np.ndim(center) else np.full(n, float(center))
    spacing = 2.0 * half_width / (nodes_per_axis - 1)
    origin = center - half_width
    values = np.zeros((nodes_per_axis,) * n + (m,))
    return GridField(origin, spacing, values)


def field_from_function(grid: GridField, func):
    """New field on grid's raster with values func(points) of shape (npts, m)."""
    pts = grid.node_points()
    vals = np.asarray(func(pts), float)
    if vals.ndim == 1:
        vals = vals[:, None]
    out = grid.copy()
    out.values = vals.reshape(grid.dims + (vals.shape[-1],))
    out.invalidate_cache()
    return out


@dataclass(frozen=True)
class BallSpec:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, float))
        if self.radius <= 0:
            raise ConfigError("ball radius must be positive")

    def check_inside(self, grid: GridField, min_cells=4):
        if not grid.contains_ball(self.center, self.radius):
            raise AnalysisPreconditionError(
                f"ball B_{self.radius:g}({self.center}) is not inside the grid box")
        if self.radius < min_cells * grid.spacing:
            raise AnalysisPreconditionError(
                f"ball radius {self.radius:g} spans fewer than {min_cells} cells "
                f"(spacing {grid.spacing:g})")


# -- interpolation kernels ----------------------------------------------

def _interpolate(values, origin, spacing, pts, order):
    if order == 1:
        return _interp_linear(values, origin, spacing, pts)
    if order == 3:
        return _interp_cubic(values, origin, spacing, pts)
    raise ConfigError(f"unsupported interpolation order {order}")


def _frac_coords(values, origin, spacing, pts):
    n = len(origin)
    f = (pts - origin[None, :]) / spacing
    dims = values.shape[:n]
    eps = 1e-9
    for d in range(n):
        if np.any(f[:, d] < -eps) or np.any(f[:, d] > dims[d] - 1 + eps):
            raise AnalysisPreconditionError("interpolation point outside grid box")
    return np.clip(f, 0.0, np.array(dims, float) - 1.0 - 1e-12)


def _interp_linear(values, origin, spacing, pts):
    n = len(origin)
    f = _frac_coords(values, origin, spacing, pts)
    i0 = np.floor(f).astype(int)
    dims = values.shape[:n]
    for d in range(n):
        i0[:, d] = np.clip(i0[:, d], 0, dims[d] - 2)
    t = f - i0
    m = values.shape[-1]
    out = np.zeros((len(pts), m))
    for corner in range(2 ** n):
        w = np.ones(len(pts))
        idx = []
        for d in range(n):
            bit = (corner >> d) & 1
            w = w * (t[:, d] if bit else (1.0 - t[:, d]))
            idx.append(i0[:, d] + bit)
        out += w[:, None] * values[tuple(idx)]
    return out


def _catmull_rom_weights(t):
    t2 = t * t
    t3 = t2 * t
    return (
        -0.5 * t3 + t2 - 0.5 * t,
        1.5 * t3 - 2.5 * t2 + 1.0,
        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
        0.5 * t3 - 0.5 * t2,
    )


def _interp_cubic(values, origin, spacing, pts):
    n = len(origin)
    f = _frac_coords(values, origin, spacing, pts)
    dims = values.shape[:n]
    i0 = np.floor(f).astype(int)
    for d in range(n):
        i0[:, d] = np.clip(i0[:, d], 1, dims[d] - 3)
    t = f - i0
    wts = [_catmull_rom_weights(t[:, d]) for d in range(n)]
    m = values.shape[-1]
    out = np.zeros((len(pts), m))
    for corner in range(4 ** n):
        w = np.ones(len(pts))
        idx = []
        c = corner
        for d in range(n):
            o = c % 4
            c //= 4
            w = w * wts[d][o]
            idx.append(i0[:, d] + o - 1)
        out += w[:, None] * values[tuple(idx)]
    return out


def _gradient_arrays(values, spacing):
    n = values.ndim - 1
    dims = values.shape[:-1]
    m = values.shape[-1]
    out = np.zeros(dims + (n, m))
    for d in range(n):
        sl_all = [slice(None)] * n
        def at(sl):
            return values[tuple(sl) + (slice(None),)]
        mid, lo, hi = sl_all.copy(), sl_all.copy(), sl_all.copy()
        mid[d] = slice(1, -1)
        lo[d] = slice(0, -2)
        hi[d] = slice(2, None)
        tgt = sl_all.copy()
        tgt[d] = slice(1, -1)
        out[tuple(tgt) + (d, slice(None))] = (at(hi) - at(lo)) / (2.0 * spacing)
        first, second = sl_all.copy(), sl_all.copy()
        first[d] = 0
        second[d] = 1
        out[tuple(first) + (d, slice(None))] = (at(second) - at(first)) / spacing
        last, prev = sl_all.copy(), sl_all.copy()
        last[d] = dims[d] - 1
        prev[d] = dims[d] - 2
        out[tuple(last) + (d, slice(None))] = (at(last) - at(prev)) / spacing
    return out


def sample_field(field, points, what="values"):
    """Uniform access for grid fields and analytic fields (duck-typed).

    Analytic fields expose exact sample/sample_grad; grid fields interpolate
    with cubic order on these analysis paths.
    """
    if isinstance(field, GridField):
        if what == "values":
            return field.sample(points, order=3 if min(field.dims) >= 4 else 1)
        return field.sample_grad(points, order=3 if min(field.dims) >= 4 else 1)
    if what == "values":
        return field.sample(np.asarray(points, float))
    return field.sample_grad(np.asarray(points, float))
