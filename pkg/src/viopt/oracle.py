"""Brute-force reference solvers used to cross-check the fast paths.

Everything here trades speed for independence: the proximal-gradient
solve only needs convexity, the enumeration solve tries every sign
pattern, and the finite-difference/golden-section helpers are textbook.
"""

from __future__ import annotations

import itertools
from typing import Callable

import numpy as np
from scipy import sparse

from .core import ViProblem
from .errors import MaxIterationsError, NoPatternAcceptedError

_RETRY_TOL = 1e-10


def soft_threshold(v: np.ndarray, level: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - level, 0.0)


def _lambda_max(a: sparse.csr_array, iters: int = 200, seed: int = 7) -> float:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(a.shape[0])
    v /= np.linalg.norm(v)
    lam = 1.0
    for _ in range(iters):
        w = a @ v
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            break
        v = w / lam
    return lam


def prox_oracle_solve(problem: ViProblem, tol: float = 1e-10, max_iters: int = 500_000) -> np.ndarray:
    """Proximal-gradient solve of min 0.5 y'Ay - u'y + g|y|_1 (symmetric A).

    Iterates soft-thresholded gradient steps with step 1/L until the
    successive-iterate max-norm drops below ``tol * 1e-2``.
    """
    if not problem.symmetric_hint:
        raise ValueError("proximal oracle requires a symmetric matrix")
    a, u, g = problem.a, problem.u, problem.g
    step = 1.0 / (1.05 * _lambda_max(a))
    y = np.zeros(problem.n)
    for _ in range(max_iters):
        y_next = soft_threshold(y - step * (a @ y - u), step * g)
        if np.abs(y_next - y).max() <= tol * 1e-2:
            return y_next
        y = y_next
    raise MaxIterationsError("proximal oracle did not converge")


def enumerate_oracle_solve(problem: ViProblem, tol: float = 0.0) -> np.ndarray:
    """Enumerate all 3^n sign patterns and return the unique accepted solution.

    A pattern sigma fixes the support (sigma_i != 0) and signs; the candidate
    solves A_ss y_s = u_s - g*sigma_s with y = 0 off the support and is
    accepted iff the support signs come out right and |q| <= g holds off the
    support.  If no pattern is accepted at the given tolerance, the scan is
    retried once with tolerance 1e-10 before raising.
    """
    n = problem.n
    if n > 10:
        raise ValueError("pattern enumeration is limited to n <= 10")
    a = problem.a.toarray()
    u = problem.u
    g = problem.g

    def scan(slack: float) -> np.ndarray | None:
        for sigma in itertools.product((0, 1, -1), repeat=n):
            sig = np.asarray(sigma, dtype=float)
            support = np.flatnonzero(sig)
            y = np.zeros(n)
            if support.size:
                sub = a[np.ix_(support, support)]
                try:
                    y[support] = np.linalg.solve(sub, u[support] - g * sig[support])
                except np.linalg.LinAlgError:
                    continue
                if np.any(y[support] * sig[support] <= -slack):
                    continue
            q = u - a @ y
            off = np.flatnonzero(sig == 0.0)
            if np.any(np.abs(q[off]) > g + slack):
                continue
            return y
        return None

    y = scan(tol)
    if y is None and tol < _RETRY_TOL:
        y = scan(_RETRY_TOL)
    if y is None:
        raise NoPatternAcceptedError("no sign pattern produced a consistent solution")
    return y


def fd_gradient(cost: Callable[[np.ndarray], float], u: np.ndarray, step: float) -> np.ndarray:
    """Central-difference gradient with per-component step scaled by 1+|u_i|."""
    u = np.asarray(u, dtype=float)
    grad = np.zeros_like(u)
    for i in range(u.size):
        e = step * (1.0 + abs(u[i]))
        up = u.copy()
        dn = u.copy()
        up[i] += e
        dn[i] -= e
        grad[i] = (cost(up) - cost(dn)) / (2.0 * e)
    return grad


def golden_section_1d(
    cost: Callable[[float], float], a: float, b: float, tol: float = 1e-10
) -> float:
    """Golden-section search for a minimizer of ``cost`` on [a, b]."""
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = b - inv_phi * (b - a)
    x2 = a + inv_phi * (b - a)
    f1, f2 = cost(x1), cost(x2)
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - inv_phi * (b - a)
            f1 = cost(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + inv_phi * (b - a)
            f2 = cost(x2)
    return 0.5 * (a + b)


def make_random_problem(
    n: int, rng: np.random.Generator, symmetric: bool = True, g: float = 1.0
) -> ViProblem:
    """Well-conditioned random instance: A = M'M + n*I (plus a skew part
    when nonsymmetric), u standard normal scaled by n."""
    m = rng.standard_normal((n, n))
    a = m.T @ m + n * np.eye(n)
    if not symmetric:
        k = rng.standard_normal((n, n))
        a = a + (k - k.T)
    u = rng.standard_normal(n) * n
    return ViProblem(sparse.csr_array(a), g, u)
