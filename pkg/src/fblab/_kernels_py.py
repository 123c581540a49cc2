"""Pure-numpy kernels for the solver hot loop.

Array conventions: nodal values shaped dims + (m,), coefficient fields
shaped dims, all float64.  The discrete energy is the edge-based Dirichlet
sum plus the nodal absorption term,

    J(v) = h^n [ sum_edges |v_j - v_i|^2 / h^2 + sum_nodes 2 F(x_i, v_i) ],

whose gradient at interior nodes is h^n (-2 lap v + 2 f(x, v)) with the
standard 5/7-point Laplacian.
"""

import numpy as np


def _parts(v):
    return np.clip(v, 0.0, None), np.clip(-v, 0.0, None)


def f_nodal(v, lamp, lamm, q):
    """Nonlinearity f(x, v) nodewise; shapes dims+(m,), dims, dims."""
    vp, vm = _parts(v)
    npn = np.linalg.norm(vp, axis=-1, keepdims=True)
    nmn = np.linalg.norm(vm, axis=-1, keepdims=True)
    sp = np.where(npn > 0.0, np.where(npn > 0.0, npn, 1.0) ** (q - 1.0), 0.0)
    sm = np.where(nmn > 0.0, np.where(nmn > 0.0, nmn, 1.0) ** (q - 1.0), 0.0)
    return lamp[..., None] * sp * vp - lamm[..., None] * sm * vm


def F_total(v, lamp, lamm, q):
    """Sum over nodes of F(x_i, v_i)."""
    vp, vm = _parts(v)
    npn = np.linalg.norm(vp, axis=-1)
    nmn = np.linalg.norm(vm, axis=-1)
    return float(np.sum(lamp * npn ** (q + 1.0) + lamm * nmn ** (q + 1.0)) / (1.0 + q))


def energy(v, lamp, lamm, q, h):
    """Discrete energy J(v); see module docstring."""
    n = v.ndim - 1
    dirich = 0.0
    for d in range(n):
        dv = np.diff(v, axis=d)
        dirich += np.sum(dv * dv)
    dirich /= h * h
    return (dirich + 2.0 * F_total(v, lamp, lamm, q)) * h ** n


def laplacian(v, h):
    """5/7-point Laplacian at interior nodes, zero on the boundary layer."""
    n = v.ndim - 1
    out = np.zeros_like(v)
    core = tuple(slice(1, -1) for _ in range(n))
    acc = -2.0 * n * v[core]
    for d in range(n):
        lo = tuple(slice(1, -1) if k != d else slice(0, -2) for k in range(n))
        hi = tuple(slice(1, -1) if k != d else slice(2, None) for k in range(n))
        acc = acc + v[lo] + v[hi]
    out[core] = acc / (h * h)
    return out


def residual(v, lamp, lamm, q, h):
    """-lap v + f(x, v) at interior nodes, zero on the boundary layer."""
    out = -laplacian(v, h)
    fv = f_nodal(v, lamp, lamm, q)
    n = v.ndim - 1
    core = tuple(slice(1, -1) for _ in range(n))
    out[core] += fv[core]
    return out


def jacobi_sweep(v, lamp, lamm, q, h, omega, newton_iters=50):
    """One damped Jacobi sweep of exact nodal solves (scalar fields only).

    Each interior node solves 2n w + h^2 f(w) = s (s = neighbor sum) by
    safeguarded Newton; in-place update with relaxation omega.
    """
    n = v.ndim - 1
    if v.shape[-1] != 1:
        raise ValueError("jacobi_sweep requires m == 1")
    u = v[..., 0]
    core = tuple(slice(1, -1) for _ in range(n))
    s = np.zeros_like(u[core])
    for d in range(n):
        lo = tuple(slice(1, -1) if k != d else slice(0, -2) for k in range(n))
        hi = tuple(slice(1, -1) if k != d else slice(2, None) for k in range(n))
        s += u[lo] + u[hi]
    lp = lamp[core]
    lm = lamm[core]
    h2 = h * h
    two_n = 2.0 * n
    w = u[core].copy()
    lo_b = -np.abs(s) / two_n - 1.0
    hi_b = np.abs(s) / two_n + 1.0
    for _ in range(newton_iters):
        wp = np.clip(w, 0.0, None)
        wm = np.clip(-w, 0.0, None)
        fw = lp * wp ** q - lm * wm ** q
        phi = two_n * w + h2 * fw - s
        hi_b = np.where(phi > 0, np.minimum(hi_b, w), hi_b)
        lo_b = np.where(phi < 0, np.maximum(lo_b, w), lo_b)
        mag = np.maximum(np.abs(w), 1e-300)
        dphi = two_n + h2 * q * np.where(w >= 0, lp, lm) * mag ** (q - 1.0)
        wn = w - phi / dphi
        bad = (wn <= lo_b) | (wn >= hi_b) | ~np.isfinite(wn)
        wn = np.where(bad, 0.5 * (lo_b + hi_b), wn)
        if np.allclose(wn, w, rtol=0.0, atol=1e-300):
            w = wn
            break
        w = wn
    u[core] = (1.0 - omega) * u[core] + omega * w
    return v
