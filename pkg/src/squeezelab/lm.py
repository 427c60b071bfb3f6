"""Damped Gauss-Newton (Levenberg-Marquardt) minimizer for small problems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    jacobian: np.ndarray
    iterations: int
    converged: bool
    message: str


def numeric_jacobian(fun, x, r0=None):
    """Central-difference Jacobian of a vector function."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        h = 1e-6 * max(abs(x[i]), 1e-3)
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        rp, rm = fun(xp), fun(xm)
        if not (np.all(np.isfinite(rp)) and np.all(np.isfinite(rm))):
            # one-sided fallback near a domain edge
            if r0 is None:
                r0 = fun(x)
            if np.all(np.isfinite(rp)):
                cols.append((rp - r0) / h)
            else:
                cols.append((r0 - rm) / h)
            continue
        cols.append((rp - rm) / (2 * h))
    return np.column_stack(cols)


def levenberg_marquardt(
    residuals,
    x0,
    jacobian=None,
    max_iter: int = 200,
    xtol: float = 1e-8,
    lam0: float = 1e-3,
) -> LMResult:
    """Minimize ``sum(residuals(x)**2)``.

    Uses Marquardt's diagonal scaling of ``J^T J``. Trial points whose
    residuals are not finite are treated as rejected steps, which is how
    callers encode parameter-domain limits. Convergence is declared once
    every component of an accepted step is below
    ``xtol * (|x_i| + xtol)``.
    """
    jac = jacobian or (lambda x: numeric_jacobian(residuals, x))
    x = np.array(x0, dtype=float)
    r = np.asarray(residuals(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("residuals are not finite at the starting point")
    cost = float(r @ r)
    lam = lam0
    J = jac(x)
    for it in range(1, max_iter + 1):
        A = J.T @ J
        g = J.T @ r
        d = np.maximum(np.diag(A), 1e-12 * max(np.max(np.diag(A)), 1e-300))
        accepted = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(A + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            x_new = x + step
            r_new = np.asarray(residuals(x_new), dtype=float)
            if np.all(np.isfinite(r_new)):
                cost_new = float(r_new @ r_new)
                if cost_new <= cost:
                    accepted = True
                    break
            tiny = np.all(np.abs(step) <= xtol * (np.abs(x) + xtol))
            if tiny:
                return LMResult(x, cost, J, it, True, "no further decrease; step below tolerance")
            lam *= 10
        if not accepted:
            return LMResult(x, cost, J, it, False, "damping exhausted without decrease")
        x, r, cost = x_new, r_new, cost_new
        lam = max(lam / 10, 1e-12)
        J = jac(x)
        if np.all(np.abs(step) <= xtol * (np.abs(x) + xtol)):
            return LMResult(x, cost, J, it, True, "relative step below tolerance")
    return LMResult(x, cost, J, max_iter, False, "iteration cap reached")


def parameter_covariance(result: LMResult, n_data: int) -> np.ndarray:
    """``(J^T J)^-1`` scaled by the reduced chi-square."""
    J = result.jacobian
    dof = max(n_data - J.shape[1], 1)
    cov = np.linalg.pinv(J.T @ J)
    return cov * (result.cost / dof)
