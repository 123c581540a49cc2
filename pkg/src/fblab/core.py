"""Domain types and pointwise nonlinearity for the sublinear energy.

The energy density is |grad u|^2 + 2 F(x, u) with

    F(x, v) = (1/(1+q)) * (lam_plus(x) |v^+|^{q+1} + lam_minus(x) |v^-|^{q+1})

for an exponent 0 < q < 1 and coefficient fields lam_pm bounded between
lambda0 and lambda1.  The associated Euler-Lagrange system is
Delta u = f(x, u) with f = grad_v F (up to the factor 2 that cancels).
The critical homogeneity is kappa = 2/(1-q) > 2, and the exact one-sided
profile beta * max(x.nu, 0)^kappa * e solves the system when
beta^(1-q) * kappa * (kappa-1) = lam_plus.
"""

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

Coefficient = Union[float, Callable[[np.ndarray], float]]


class FBLabError(Exception):
    """Base class for package errors."""


class ConfigError(FBLabError):
    """Invalid configuration or input data (CLI exit code 2)."""


class SolverError(FBLabError):
    """Solver failed to converge or produced non-finite values (exit code 3)."""


class AnalysisPreconditionError(FBLabError):
    """An analysis operation was called outside its validity range (exit code 4)."""


@dataclass(frozen=True)
class ProblemParams:
    """Problem data: dimensions, sublinear exponent, coefficients, constants.

    lambda_plus / lambda_minus may be positive constants or callables
    mapping a point in R^n to a positive value.  M is the master constant
    bounding 1/lambda0, lambda1 and the gauge prefactor; it must exceed 2.
    """

    n: int = 2
    m: int = 1
    q: float = 0.5
    alpha: float = 1.0
    lambda_plus: Coefficient = 1.0
    lambda_minus: Coefficient = 1.0
    lambda0: float = None
    lambda1: float = None
    M: float = None

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ConfigError(f"spatial dimension must be 2 or 3, got {self.n}")
        if self.m < 1:
            raise ConfigError(f"target dimension must be >= 1, got {self.m}")
        if not 0.0 < self.q < 1.0:
            raise ConfigError(f"q must lie in (0,1), got {self.q}")
        if not 0.0 < self.alpha < 2.0:
            raise ConfigError(f"alpha must lie in (0,2), got {self.alpha}")
        lam0, lam1 = self.lambda0, self.lambda1
        if lam0 is None or lam1 is None:
            if callable(self.lambda_plus) or callable(self.lambda_minus):
                raise ConfigError("lambda0/lambda1 bounds required for callable coefficients")
            lo = min(float(self.lambda_plus), float(self.lambda_minus))
            hi = max(float(self.lambda_plus), float(self.lambda_minus))
            lam0 = lo if lam0 is None else lam0
            lam1 = hi if lam1 is None else lam1
            object.__setattr__(self, "lambda0", lam0)
            object.__setattr__(self, "lambda1", lam1)
        if not 0.0 < self.lambda0 <= self.lambda1:
            raise ConfigError("need 0 < lambda0 <= lambda1")
        if self.M is None:
            object.__setattr__(self, "M", max(2.5, 1.0 / self.lambda0, self.lambda1))
        if not (self.M > 2 and self.M >= 1.0 / self.lambda0 and self.M >= self.lambda1):
            raise ConfigError("M must satisfy M > 2, M >= 1/lambda0, M >= lambda1")

    @property
    def kappa(self) -> float:
        return 2.0 / (1.0 - self.q)

    def lam_plus_at(self, x) -> float:
        return float(self.lambda_plus(np.asarray(x, float))) if callable(self.lambda_plus) else float(self.lambda_plus)

    def lam_minus_at(self, x) -> float:
        return float(self.lambda_minus(np.asarray(x, float))) if callable(self.lambda_minus) else float(self.lambda_minus)

    def check_coefficient_bounds(self, points: np.ndarray):
        """Verify lambda0 <= lam_pm(x) <= lambda1 at the given points."""
        for lam in (self.lambda_plus, self.lambda_minus):
            vals = coefficient_values(lam, points)
            if vals.min() < self.lambda0 - 1e-12 or vals.max() > self.lambda1 + 1e-12:
                raise ConfigError("coefficient field violates its declared bounds")


def coefficient_values(lam: Coefficient, points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, float)
    if callable(lam):
        return np.array([lam(p) for p in pts.reshape(-1, pts.shape[-1])]).reshape(pts.shape[:-1])
    return np.full(pts.shape[:-1], float(lam))


def positive_part(v: np.ndarray) -> np.ndarray:
    """Componentwise max(0, v)."""
    return np.clip(np.asarray(v, float), 0.0, None)


def negative_part(v: np.ndarray) -> np.ndarray:
    """Componentwise max(0, -v); v = positive_part(v) - negative_part(v)."""
    return np.clip(-np.asarray(v, float), 0.0, None)


def eval_F(x0, v, params: ProblemParams):
    """F(x0, v) with coefficients frozen at x0; v has shape (..., m)."""
    v = np.atleast_1d(np.asarray(v, float))
    vp = np.linalg.norm(positive_part(v), axis=-1)
    vm = np.linalg.norm(negative_part(v), axis=-1)
    lp = params.lam_plus_at(x0)
    lm = params.lam_minus_at(x0)
    return (lp * vp ** (params.q + 1.0) + lm * vm ** (params.q + 1.0)) / (1.0 + params.q)


def eval_f(x0, v, params: ProblemParams):
    """f(x0, v) = lam+ |v^+|^{q-1} v^+ - lam- |v^-|^{q-1} v^-.

    Each term extends continuously by 0 where the corresponding part
    vanishes (valid because q > 0).
    """
    v = np.atleast_1d(np.asarray(v, float))
    vp = positive_part(v)
    vm = negative_part(v)
    np_norm = np.linalg.norm(vp, axis=-1, keepdims=True)
    nm_norm = np.linalg.norm(vm, axis=-1, keepdims=True)
    sp = np.where(np_norm > 0.0, np.where(np_norm > 0.0, np_norm, 1.0) ** (params.q - 1.0), 0.0)
    sm = np.where(nm_norm > 0.0, np.where(nm_norm > 0.0, nm_norm, 1.0) ** (params.q - 1.0), 0.0)
    return params.lam_plus_at(x0) * sp * vp - params.lam_minus_at(x0) * sm * vm


def beta_coefficient(x0, params: ProblemParams) -> float:
    """The half-space amplitude lam+(x0)^(kappa/2) (kappa(kappa-1))^(-kappa/2)."""
    k = params.kappa
    return params.lam_plus_at(x0) ** (k / 2.0) * (k * (k - 1.0)) ** (-k / 2.0)


@dataclass(frozen=True)
class HalfSpaceSolution:
    """One-sided profile x -> beta * max((x-x0).nu, 0)^kappa * e."""

    x0: np.ndarray
    nu: np.ndarray
    e: np.ndarray
    beta: float
    kappa: float

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, float))
        object.__setattr__(self, "nu", np.asarray(self.nu, float))
        object.__setattr__(self, "e", np.asarray(self.e, float))
        if abs(np.linalg.norm(self.nu) - 1.0) > 1e-12:
            raise ConfigError("nu must be a unit vector")
        if abs(np.linalg.norm(self.e) - 1.0) > 1e-12:
            raise ConfigError("e must be a unit vector")
        if self.beta <= 0:
            raise ConfigError("beta must be positive")

    # -- field protocol -------------------------------------------------
    @property
    def n(self):
        return len(self.nu)

    @property
    def m(self):
        return len(self.e)

    def sample(self, points: np.ndarray) -> np.ndarray:
        """Values at points, shape (npts, m)."""
        pts = np.asarray(points, float)
        s = np.clip((pts - self.x0) @ self.nu, 0.0, None)
        return (self.beta * s ** self.kappa)[:, None] * self.e[None, :]

    def sample_grad(self, points: np.ndarray) -> np.ndarray:
        """Gradients at points, shape (npts, n, m)."""
        pts = np.asarray(points, float)
        s = np.clip((pts - self.x0) @ self.nu, 0.0, None)
        radial = self.beta * self.kappa * s ** (self.kappa - 1.0)
        return radial[:, None, None] * self.nu[None, :, None] * self.e[None, None, :]


def halfspace_solution(x0, nu, params: ProblemParams, e=None) -> HalfSpaceSolution:
    """Member of the half-space class at x0 with normal nu and direction e."""
    nu = np.asarray(nu, float)
    nu = nu / np.linalg.norm(nu)
    if e is None:
        e = np.zeros(params.m)
        e[0] = 1.0
    else:
        e = np.asarray(e, float)
        e = e / np.linalg.norm(e)
    return HalfSpaceSolution(np.asarray(x0, float), nu, e, beta_coefficient(x0, params), params.kappa)


def halfspace_eval(hs: HalfSpaceSolution, x) -> np.ndarray:
    """Value of the half-space profile at a single point x."""
    return hs.sample(np.asarray(x, float)[None, :])[0]
