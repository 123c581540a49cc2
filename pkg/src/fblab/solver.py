"""Discrete energy minimization, harmonic replacement, drift systems.

The minimizer pipeline runs three phases on the same convex objective:

1. accelerated gradient descent in the inverse-Laplacian metric, with
   backtracking line search, monotone (MFISTA-style) acceptance and
   adaptive restart;
2. a guarded semismooth Newton polish (the energy is convex but its
   gradient is only Hoelder near {u = 0}, so Newton is safe only close to
   the minimizer, with a line search on the energy);
3. damped Jacobi sweeps of exact nodal solves, which settle the tiny
   values adjacent to the dead core that gradient steps cannot resolve.

Every accepted step is non-increasing in energy.  Convergence is declared
on the natural (coordinate-minimization) residual, which is meaningful
even where the nonlinearity has infinite slope.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .core import ProblemParams, SolverError, coefficient_values
from .grid import BallSpec, GridField
from .quadrature import cell_weights
from .fitting import FitResult, fit_loglog


@dataclass
class SolveConfig:
    tol_energy: float = 1e-13      # relative energy decrease per phase cycle
    tol_grad: float = 1e-9         # natural residual, relative to field scale
    max_iters: int = 20000
    backtrack: float = 0.5         # line-search shrink factor
    damping: float = 0.7           # Picard damping for drift solves
    seed: int = 0
    init: str = "harmonic"         # harmonic | random | copy
    agd_block: int = 160
    newton_steps: int = 8
    jacobi_sweeps: int = 12
    polish_cycles: int = 2

    def __post_init__(self):
        if self.tol_energy <= 0 or self.tol_grad <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0.0 < self.backtrack < 1.0:
            raise ValueError("backtrack factor must lie in (0,1)")


@dataclass
class GaugeFit:
    radii: np.ndarray
    omega_meas: np.ndarray
    constant: float
    exponent: float
    residual: float
    largest_fit_radius: float
    skipped: list = field(default_factory=list)


class Region:
    """Unknown/fixed node split for the box interior or a ball."""

    def __init__(self, grid: GridField, ball: BallSpec = None):
        self.grid = grid
        n = grid.n
        if ball is None:
            mask = np.ones(grid.dims, dtype=bool)
            for d in range(n):
                sl = [slice(None)] * n
                sl[d] = 0
                mask[tuple(sl)] = False
                sl[d] = -1
                mask[tuple(sl)] = False
        else:
            ball.check_inside(grid)
            mesh = grid.meshgrid()
            r2 = np.zeros(grid.dims)
            for d in range(n):
                r2 += (mesh[d] - ball.center[d]) ** 2
            mask = r2 < ball.radius ** 2
            # nodes on the outermost layer can never be unknowns
            for d in range(n):
                sl = [slice(None)] * n
                sl[d] = 0
                mask[tuple(sl)] = False
                sl[d] = -1
                mask[tuple(sl)] = False
        self.mask = mask
        self.index = -np.ones(grid.dims, dtype=np.int64)
        self.index[mask] = np.arange(int(mask.sum()))
        self.n_unknown = int(mask.sum())
        self._neg_lap = None
        self._neg_lap_lu = None

    def pack(self, arr):
        return arr[self.mask]

    def scatter(self, vec, out=None):
        if out is None:
            out = np.zeros(self.grid.dims)
        out[self.mask] = vec
        return out

    def neg_lap(self):
        if self._neg_lap is None:
            self._neg_lap = _assemble(self.grid, self.mask)[0]
        return self._neg_lap

    def neg_lap_solve(self, vec):
        if self._neg_lap_lu is None:
            self._neg_lap_lu = spla.splu(self.neg_lap().tocsc())
        return self._neg_lap_lu.solve(vec)


def _assemble(grid: GridField, mask, bfield=None):
    """Matrix of -lap (minus b . grad, upwinded) on unknown nodes.

    Returns (A, couple) where couple(values_full) gives the right-hand-side
    contribution of fixed neighbors, so A x = couple(vals) + g solves the
    Dirichlet problem with interior source g.
    """
    n = grid.values.ndim - 1
    h = grid.spacing
    idx = -np.ones(grid.dims, dtype=np.int64)
    idx[mask] = np.arange(int(mask.sum()))
    nunk = int(mask.sum())
    I = np.where(mask.ravel())[0]
    multi = np.unravel_index(I, grid.dims)
    rows, cols, vals = [], [], []
    couple_rows, couple_flat, couple_coef = [], [], []
    diag = np.full(nunk, 2.0 * n / h ** 2)
    strides = np.array([int(np.prod(grid.dims[d + 1:])) for d in range(n)])
    for d in range(n):
        if bfield is not None:
            b_d = bfield[..., d][mask]
            bp = np.clip(b_d, 0.0, None)
            bm = np.clip(-b_d, 0.0, None)
            diag += (bp + bm) / h
        else:
            bp = bm = None
        for sgn in (+1, -1):
            nb = list(multi)
            nb[d] = multi[d] + sgn
            valid = (nb[d] >= 0) & (nb[d] < grid.dims[d])
            if not np.all(valid):
                raise SolverError("unknown node touches the grid edge")
            nb_flat = np.ravel_multi_index(tuple(nb), grid.dims)
            coef = np.full(nunk, -1.0 / h ** 2)
            if bfield is not None:
                coef = coef - (bp if sgn > 0 else bm) / h
            nb_idx = idx.ravel()[nb_flat]
            interior = nb_idx >= 0
            rows.append(np.arange(nunk)[interior])
            cols.append(nb_idx[interior])
            vals.append(-coef[interior])  # move to LHS with positive sign below
            ext = ~interior
            couple_rows.append(np.arange(nunk)[ext])
            couple_flat.append(nb_flat[ext])
            couple_coef.append(-coef[ext])
    A = sp.coo_matrix(
        (np.concatenate([-v for v in vals]), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nunk, nunk),
    ).tocsr() + sp.diags(diag)
    c_rows = np.concatenate(couple_rows)
    c_flat = np.concatenate(couple_flat)
    c_coef = np.concatenate(couple_coef)

    def couple(values_full):
        flat = values_full.reshape(-1, values_full.shape[-1])
        out = np.zeros((nunk, values_full.shape[-1]))
        np.add.at(out, c_rows, c_coef[:, None] * flat[c_flat])
        return out

    return A, couple


def _lambda_arrays(grid: GridField, params: ProblemParams):
    pts = grid.node_points()
    lp = coefficient_values(params.lambda_plus, pts).reshape(grid.dims)
    lm = coefficient_values(params.lambda_minus, pts).reshape(grid.dims)
    return lp, lm


def _natural_residual(v, lamp, lamm, q, h, mask):
    """Distance from nodal optimality: max |w - argmin_w J_node| on unknowns."""
    probe = v.copy()
    kernels.jacobi_sweep(probe, lamp, lamm, q, h, omega=1.0)
    return float(np.max(np.abs((probe - v)[mask])))


def minimize_energy(boundary: GridField, params: ProblemParams, cfg: SolveConfig = None,
                    region: BallSpec = None, return_info=False):
    """Minimize the discrete energy with Dirichlet data from `boundary`.

    `boundary` is a full field; values at fixed nodes (grid-box edge, or
    everything outside the ball when `region` is given) are the Dirichlet
    data, values at unknown nodes only seed the init.  The integrand is
    convex, so the minimizer is unique and independent of the init.
    """
    cfg = cfg or SolveConfig()
    boundary.assert_finite()
    grid = boundary
    reg = Region(grid, region)
    lamp, lamm = _lambda_arrays(grid, params)
    q, h, m = params.q, grid.spacing, grid.m
    scale = max(grid.max_abs(), 1e-30)

    u = grid.values.copy()
    if cfg.init == "harmonic":
        _, couple = _assemble(grid, reg.mask)
        rhs = couple(u)
        for k in range(m):
            u[..., k][reg.mask] = reg.neg_lap_solve(rhs[:, k])
    elif cfg.init == "random":
        rng = np.random.default_rng(cfg.seed)
        u[reg.mask] = rng.normal(0.0, scale, (reg.n_unknown, m))
    elif cfg.init != "copy":
        raise ValueError(f"unknown init '{cfg.init}'")

    energies = [kernels.energy(u, lamp, lamm, q, h)]
    if not np.isfinite(energies[0]):
        raise SolverError("non-finite energy at initialization")

    def resid(v):
        return kernels.residual(v, lamp, lamm, q, h) * reg.mask[..., None]

    def precond(r):
        out = np.zeros_like(r)
        for k in range(r.shape[-1]):
            out[..., k][reg.mask] = reg.neg_lap_solve(r[..., k][reg.mask])
        return out

    total_agd = 0

    def agd_phase(u, iters):
        nonlocal total_agd
        y = u.copy()
        tmom = 1.0
        Eu = kernels.energy(u, lamp, lamm, q, h)
        step = 0.45
        for _ in range(iters):
            if total_agd >= cfg.max_iters:
                break
            total_agd += 1
            r = resid(y)
            d = precond(r)
            Ey = kernels.energy(y, lamp, lamm, q, h)
            slope = 2.0 * h ** grid.n * float(np.sum(r * d))
            while True:
                cand = y - step * d
                Ec = kernels.energy(cand, lamp, lamm, q, h)
                if Ec <= Ey - 0.25 * step * slope or step < 1e-10:
                    break
                step *= cfg.backtrack
            if not np.isfinite(Ec):
                raise SolverError("non-finite energy during descent")
            # monotone acceptance: keep the better of candidate and iterate
            if Ec <= Eu:
                unew, Eun = cand, Ec
            else:
                unew, Eun = u, Eu
            tnew = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tmom ** 2))
            y = cand + ((tmom - 1.0) / tnew) * (cand - u)
            if Ec > Eu:  # restart momentum when the step failed to improve
                y = unew.copy()
                tnew = 1.0
            u, Eu, tmom = unew, Eun, tnew
            energies.append(Eu)
            step = min(step / cfg.backtrack, 1.0)
        return u

    def newton_phase(u, steps):
        E = kernels.energy(u, lamp, lamm, q, h)
        A = reg.neg_lap()
        cap = 1e14
        for _ in range(steps):
            r = resid(u)
            mag = np.linalg.norm(u, axis=-1)
            lam_eff = np.where(np.sum(u, axis=-1) >= 0, lamp, lamm)
            D = np.where(mag > 0.0,
                         q * lam_eff * np.where(mag > 0.0, mag, 1.0) ** (q - 1.0),
                         cap)
            D = np.minimum(D, cap)[reg.mask]
            J = A + sp.diags(D)
            lu = spla.splu(J.tocsc())
            delta = np.zeros_like(u)
            for k in range(m):
                delta[..., k][reg.mask] = lu.solve(-r[..., k][reg.mask])
            t = 1.0
            for _ in range(50):
                cand = u + t * delta
                Ec = kernels.energy(cand, lamp, lamm, q, h)
                if Ec <= E * (1.0 + 1e-15) + 1e-300:
                    break
                t *= 0.5
            else:
                break
            u, E = cand, Ec
            energies.append(E)
        return u

    def jacobi_phase(u, sweeps):
        if m != 1:
            return u
        E = kernels.energy(u, lamp, lamm, q, h)
        omega = 0.85
        for _ in range(sweeps):
            cand = u.copy()
            kernels.jacobi_sweep(cand, lamp, lamm, q, h, omega)
            cand[~reg.mask] = u[~reg.mask]
            Ec = kernels.energy(cand, lamp, lamm, q, h)
            if Ec > E * (1.0 + 1e-15) + 1e-300:
                omega *= 0.5
                if omega < 0.05:
                    break
                continue
            u, E = cand, Ec
            energies.append(E)
        return u

    u = agd_phase(u, cfg.agd_block)
    nat = None
    for cycle in range(cfg.polish_cycles):
        u = newton_phase(u, cfg.newton_steps)
        u = jacobi_phase(u, cfg.jacobi_sweeps)
        if m == 1:
            nat = _natural_residual(u, lamp, lamm, q, h, reg.mask)
            if nat <= cfg.tol_grad * scale:
                break
        E_before = energies[-1]
        u = agd_phase(u, cfg.agd_block // 2)
        if abs(energies[-1] - E_before) <= cfg.tol_energy * max(abs(E_before), 1e-300):
            if m != 1:
                break
    if m == 1 and nat is not None and nat > cfg.tol_grad * scale:
        u = newton_phase(u, cfg.newton_steps)
        u = jacobi_phase(u, cfg.jacobi_sweeps)
        nat = _natural_residual(u, lamp, lamm, q, h, reg.mask)
        if nat > 100.0 * cfg.tol_grad * scale:
            raise SolverError(
                f"minimize_energy did not reach tol_grad: natural residual "
                f"{nat:.3e} vs {cfg.tol_grad * scale:.3e} after {total_agd} AGD iters")

    out = GridField(grid.origin.copy(), grid.spacing, u)
    if return_info:
        info = {
            "energies": np.array(energies),
            "agd_iterations": total_agd,
            "natural_residual": nat,
            "residual_inf": float(np.max(np.abs(resid(u)))),
            "scale": scale,
        }
        return out, info
    return out


def harmonic_replacement(u: GridField, ball: BallSpec):
    """Field equal to u outside the ball, discretely harmonic inside."""
    reg = Region(u, ball)
    _, couple = _assemble(u, reg.mask)
    rhs = couple(u.values)
    out = u.copy()
    for k in range(u.m):
        out.values[..., k][reg.mask] = reg.neg_lap_solve(rhs[:, k])
    out.invalidate_cache()
    return out


def drift_solve(boundary: GridField, b_field, params: ProblemParams, cfg: SolveConfig = None):
    """Solve lap u + b . grad u = f(x, u) with Dirichlet data.

    The drift is discretized with first-order upwinding so every linear
    solve is an M-matrix system.  The outer iteration freezes the
    nonlinearity slope and re-solves (a shifted Picard step, equivalently a
    guarded semismooth Newton step); the plain update u <- solve(f(u_k))
    oscillates with period two here because the sublinear slope is
    unbounded near the zero set.  Residuals are measured with the same
    discrete operator.
    """
    cfg = cfg or SolveConfig()
    boundary.assert_finite()
    grid = boundary
    b_arr = np.asarray(b_field, float)
    if b_arr.shape == (grid.n,):
        b_arr = np.broadcast_to(b_arr, grid.dims + (grid.n,)).copy()
    if not np.all(np.isfinite(b_arr)):
        raise SolverError("drift field contains non-finite values")
    reg = Region(grid, None)
    A, couple = _assemble(grid, reg.mask, bfield=b_arr)
    lu = spla.splu(A.tocsc())
    lamp, lamm = _lambda_arrays(grid, params)
    q, m = params.q, grid.m
    scale = max(grid.max_abs(), 1e-30)
    cap = 1e14

    u = grid.values.copy()
    rhs0 = couple(u)
    for k in range(m):
        u[..., k][reg.mask] = lu.solve(rhs0[:, k])

    def residual(v):
        fv = kernels.f_nodal(v, lamp, lamm, q)
        cpl = couple(v)
        r = np.zeros((reg.n_unknown, m))
        for k in range(m):
            r[:, k] = -(A @ v[..., k][reg.mask] - cpl[:, k]) - fv[..., k][reg.mask]
        return r  # lap u + b.grad u - f(u) at unknowns

    r = residual(u)
    res = float(np.max(np.abs(r)))
    best = np.inf
    grow = 0
    for it in range(cfg.max_iters):
        if res <= cfg.tol_grad * scale * 10.0:
            break
        mag = np.linalg.norm(u, axis=-1)
        lam_eff = np.where(np.sum(u, axis=-1) >= 0, lamp, lamm)
        D = np.where(mag > 0.0,
                     q * lam_eff * np.where(mag > 0.0, mag, 1.0) ** (q - 1.0), cap)
        D = np.minimum(D, cap)[reg.mask]
        J = A + sp.diags(D)
        lu_j = spla.splu(J.tocsc())
        delta = np.stack([lu_j.solve(r[:, k]) for k in range(m)], axis=1)
        t = cfg.damping
        rn2 = float(np.sum(r * r))
        accepted = False
        for _ in range(30):
            cand = u.copy()
            for k in range(m):
                cand[..., k][reg.mask] = u[..., k][reg.mask] + t * delta[:, k]
            rc = residual(cand)
            if np.all(np.isfinite(rc)) and float(np.sum(rc * rc)) < rn2:
                accepted = True
                break
            t *= cfg.backtrack
        if not accepted:
            raise SolverError(
                f"drift solve stalled: residual {res:.3e} not reducible by line search")
        u, r = cand, rc
        res = float(np.max(np.abs(r)))
        if res < best:
            best = res
            grow = 0
        else:
            grow += 1
            if grow >= 10:
                raise SolverError(
                    f"drift residual non-decreasing for 10 iterations (at {res:.3e})")
    else:
        raise SolverError(f"drift solve did not converge: residual {res:.3e}")
    out = GridField(grid.origin.copy(), grid.spacing, u)
    return out


def _subgrid_around(u: GridField, ball: BallSpec, pad=3):
    lo_idx = np.floor((ball.center - ball.radius - u.origin) / u.spacing).astype(int) - pad
    hi_idx = np.ceil((ball.center + ball.radius - u.origin) / u.spacing).astype(int) + pad
    lo_idx = np.maximum(lo_idx, 0)
    hi_idx = np.minimum(hi_idx, np.array(u.dims) - 1)
    sl = tuple(slice(lo, hi + 1) for lo, hi in zip(lo_idx, hi_idx))
    sub = GridField(u.origin + lo_idx * u.spacing, u.spacing, u.values[sl + (slice(None),)].copy())
    return sub


def energy_density_arrays(field: GridField, params: ProblemParams, x_freeze=None):
    """Nodal |grad u|^2 + 2F(., u); coefficients frozen at x_freeze if given."""
    g = field.gradient_arrays()
    gsq = np.sum(g * g, axis=(-2, -1))
    if x_freeze is None:
        lamp, lamm = _lambda_arrays(field, params)
    else:
        lamp = np.full(field.dims, params.lam_plus_at(x_freeze))
        lamm = np.full(field.dims, params.lam_minus_at(x_freeze))
    vp = np.linalg.norm(np.clip(field.values, 0, None), axis=-1)
    vm = np.linalg.norm(np.clip(-field.values, 0, None), axis=-1)
    twoF = 2.0 / (1.0 + params.q) * (lamp * vp ** (params.q + 1) + lamm * vm ** (params.q + 1))
    return gsq + twoF


def verify_almost_min(u: GridField, balls, params: ProblemParams, cfg: SolveConfig = None):
    """Measure the almost-minimality gauge against the optimal competitor.

    For each ball the competitor is the discrete minimizer with u's trace;
    omega(r) = J(u)/J(v*) - 1 is evaluated as a difference of energy
    densities on shared cut-cell weights, so common-mode quadrature error
    cancels.  Returns a GaugeFit of log omega against log r.
    """
    cfg = cfg or SolveConfig()
    radii, omegas, skipped = [], [], []
    for ball in balls:
        ball.check_inside(u)
        sub = _subgrid_around(u, ball)
        vstar = minimize_energy(sub, params, cfg, region=ball)
        w = cell_weights(sub, ball)
        e_u = energy_density_arrays(sub, params)
        e_v = energy_density_arrays(vstar, params)
        J_v = float(np.sum(w * e_v) * sub.spacing ** sub.n)
        J_diff = float(np.sum(w * (e_u - e_v)) * sub.spacing ** sub.n)
        if J_v < 1e-14:
            skipped.append((ball.radius, "competitor energy below floor"))
            continue
        radii.append(ball.radius)
        omegas.append(J_diff / J_v)
    radii = np.array(radii)
    omegas = np.array(omegas)
    pos = omegas > 0
    if pos.sum() >= 2:
        fit = fit_loglog(radii[pos], omegas[pos])
        const, expo, resid = fit.constant, fit.exponent, fit.residual
        largest = float(radii[pos].max())
    else:
        const, expo, resid, largest = 0.0, 0.0, 0.0, 0.0
    return GaugeFit(radii, omegas, const, expo, resid, largest, skipped)
