"""Small log-barrier solver for smooth inequality-constrained problems.

Minimizes ``f(z)`` subject to ``c(z) <= 0`` starting from a strictly feasible
point. The centering steps use dense BFGS with a backtracking line search that
never leaves the strict interior.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class BarrierResult:
    z: np.ndarray
    f: float
    iterations: int      # total inner iterations
    converged: bool
    max_violation: float


def _initial_inverse(jc, c, n):
    """Inverse of the Gauss-Newton part of the barrier Hessian, ``J^T diag(1/c^2) J``."""
    h = (jc / c[:, None]).T @ (jc / c[:, None])
    h += 1e-10 * max(np.trace(h) / n, 1e-300) * np.eye(n)
    try:
        return np.linalg.inv(h)
    except np.linalg.LinAlgError:
        return np.eye(n)


def _barrier(f_val, c_val, t):
    return t * f_val - np.sum(np.log(-c_val))


def minimize_barrier(
    objective: Callable[[np.ndarray], tuple[float, np.ndarray]],
    constraints: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
    z0: np.ndarray,
    tol: float = 1e-8,
    max_inner: int = 5000,
    t0: float = 1.0,
    growth: float = 20.0,
    center_tol: float = 1e-9,
) -> BarrierResult:
    """Log-barrier path following.

    Parameters
    ----------
    objective : callable returning ``(f, grad)``
    constraints : callable returning ``(c, jac)`` with ``c`` of shape ``(m,)``
        and ``jac`` of shape ``(m, n)``
    z0 : strictly feasible start (``c(z0) < 0``)
    tol : duality-gap target ``m / t``
    center_tol : centering stops once the quasi-Newton decrement falls below this
    """
    z = np.array(z0, dtype=float)
    c, _ = constraints(z)
    if np.any(c >= 0):
        raise ValueError("barrier start point is not strictly feasible")
    m = max(len(c), 1)
    t = t0
    total = 0
    n = z.size
    while True:
        f, gf = objective(z)
        c, jc = constraints(z)
        hess_inv = _initial_inverse(jc, c, n)
        phi = _barrier(f, c, t)
        grad = t * gf + jc.T @ (1.0 / -c)
        last_step = 1.0
        while total < max_inner:
            total += 1
            gnorm = np.linalg.norm(grad)
            if gnorm < 1e-10:
                break
            d = -hess_inv @ grad
            slope = grad @ d
            if 0.0 < -slope < 2.0 * center_tol:
                break
            if slope >= 0:
                hess_inv = _initial_inverse(jc, c, n)
                d = -hess_inv @ grad
                slope = grad @ d
            if slope >= 0:
                d = -grad
                slope = -gnorm ** 2
            step = min(1.0, 4.0 * last_step)
            accepted = False
            for _ in range(60):
                z_new = z + step * d
                c_new, jc_new = constraints(z_new)
                if np.all(c_new < 0):
                    f_new, gf_new = objective(z_new)
                    phi_new = _barrier(f_new, c_new, t)
                    if np.isfinite(phi_new) and phi_new <= phi + 1e-4 * step * slope:
                        accepted = True
                        break
                step *= 0.5
            if not accepted:
                break
            last_step = step
            grad_new = t * gf_new + jc_new.T @ (1.0 / -c_new)
            s = z_new - z
            y = grad_new - grad
            sy = s @ y
            if sy > 1e-14 * np.linalg.norm(s) * np.linalg.norm(y):
                rho = 1.0 / sy
                v = np.eye(n) - rho * np.outer(s, y)
                hess_inv = v @ hess_inv @ v.T + rho * np.outer(s, s)
            decrease = phi - phi_new
            z, f, c, jc, phi, grad = z_new, f_new, c_new, jc_new, phi_new, grad_new
            if decrease <= 1e-12 * max(1.0, abs(phi)):
                break
        if m / t < tol or total >= max_inner:
            break
        t *= growth
    return BarrierResult(z, float(f), total, m / t < tol, float(np.max(c)) if c.size else 0.0)
