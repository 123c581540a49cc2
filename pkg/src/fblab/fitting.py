"""Log-log exponent fits shared by the analysis modules."""

from dataclasses import dataclass

import numpy as np


@dataclass
class FitResult:
    exponent: float
    constant: float
    residual: float          # max deviation in log-log space
    radii: np.ndarray
    values: np.ndarray
    status: str = "ok"       # ok | degenerate | rejected

    def as_dict(self):
        return {
            "exponent": self.exponent,
            "constant": self.constant,
            "residual": self.residual,
            "status": self.status,
        }


def fit_loglog(radii, values, floor=0.0):
    """Least-squares fit values ~ C * r^p; residual is the max log deviation.

    Values at or below `floor` are excluded; with fewer than two usable
    points the fit is degenerate.
    """
    radii = np.asarray(radii, float)
    values = np.asarray(values, float)
    keep = values > floor
    r, v = radii[keep], values[keep]
    order = np.argsort(r)
    r, v = r[order], v[order]
    if len(r) < 2:
        return FitResult(0.0, 0.0, 0.0, r, v, status="degenerate")
    lx, ly = np.log(r), np.log(v)
    p, logc = np.polyfit(lx, ly, 1)
    resid = float(np.max(np.abs(ly - (p * lx + logc))))
    return FitResult(float(p), float(np.exp(logc)), resid, r, v)
