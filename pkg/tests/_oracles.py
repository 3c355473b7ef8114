"""Independent test oracles.

Kept deliberately naive: correctness over speed, no shared code with the
package beyond problem containers.
"""

from __future__ import annotations

import itertools

import numpy as np


def enumerate_qp(H, c, A_ineq=None, b_ineq=None, A_eq=None, b_eq=None, tol=1e-9):
    """Brute-force KKT point of a convex QP by active-set enumeration.

    Solves the equality-constrained subproblem for every subset of the
    inequality constraints (plus all equalities) and returns the feasible
    KKT point with the smallest objective value, as (y, lam, value), or
    None if no subset yields one.  Exponential in the number of
    inequalities; use only on small problems.
    """
    H = np.asarray(H, dtype=float)
    c = np.asarray(c, dtype=float)
    n = H.shape[0]
    A_ineq = np.zeros((0, n)) if A_ineq is None else np.asarray(A_ineq, dtype=float)
    b_ineq = np.zeros(0) if b_ineq is None else np.asarray(b_ineq, dtype=float)
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    r, m_eq = A_ineq.shape[0], A_eq.shape[0]

    best = None
    for size in range(r + 1):
        for subset in itertools.combinations(range(r), size):
            rows = np.vstack([A_ineq[list(subset)], A_eq]) if subset or m_eq else np.zeros((0, n))
            k = rows.shape[0]
            kkt = np.zeros((n + k, n + k))
            kkt[:n, :n] = H
            if k:
                kkt[:n, n:] = rows.T
                kkt[n:, :n] = rows
            rhs = np.concatenate([-c, -np.concatenate([b_ineq[list(subset)], b_eq])])
            sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
            if np.abs(kkt @ sol - rhs).max(initial=0.0) > tol * (1.0 + np.abs(rhs).max(initial=0.0)):
                continue  # singular and inconsistent: no KKT point with this active set
            y = sol[:n]
            mults = sol[n:]
            lam_ineq = np.zeros(r)
            for j, i in enumerate(subset):
                lam_ineq[i] = mults[j]
            if lam_ineq.min(initial=0.0) < -tol:
                continue
            if r and (A_ineq @ y + b_ineq).max(initial=-np.inf) > tol:
                continue
            if m_eq and np.abs(A_eq @ y + b_eq).max(initial=0.0) > tol:
                continue
            value = float(0.5 * y @ H @ y + c @ y)
            if best is None or value < best[2] - 1e-12:
                best = (y, np.concatenate([lam_ineq, mults[size:]]), value)
    return best


def fd_solution_derivative(solve, x, dx, h=1e-5):
    """One-sided finite-difference derivative of a solution map.

    `solve` maps a data vector to the primal solution vector.
    """
    x = np.asarray(x, dtype=float)
    dx = np.asarray(dx, dtype=float)
    return (solve(x + h * dx) - solve(x)) / h
