"""Directional derivatives of the VI solution map.

With an empty biactive set the solution map is differentiable and the
derivative solves a linear system on the inactive block.  In general the
derivative solves a VI of the first kind over the cone

    K(y) = { v : v_i = 0 where |q_i| < g,  v_i q_i >= 0 where y_i = 0, |q_i| = g },

which reduces, per biactive index, to the complementarity pair

    eta_i * qhat_i >= 0,   lambda_i * qhat_i <= 0,   eta_i * lambda_i = 0,

with lambda = h - A eta and qhat = q / g.  The solver pins or frees each
biactive index by a semismooth Newton iteration on min(qhat*eta, -qhat*lambda)
and certifies against exhaustive sign-pattern enumeration when the
iteration cycles.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .core import IndexSets, ViProblem, ViSolution
from .errors import BiactiveNonemptyError, NoConvergenceError
from .linalg import Factorized
from .ssn import HuberParams, solve_vi, tightened

_MAX_ENUM_BIACTIVE = 12
_PATTERN_MAX_ITERS = 40


@dataclass(frozen=True)
class DerivativePair:
    """Directional derivative eta and the induced slack rate lambda = h - A eta."""

    eta: np.ndarray
    lam: np.ndarray
    method: str
    kkt_residual: float


class ConeViSolver:
    """Reusable derivative solver for one solved VI instance.

    Factorizes the inactive principal block once, so many directions can
    be differentiated cheaply (used by the stationarity checks).
    """

    def __init__(self, problem: ViProblem, sol: ViSolution, sets: IndexSets):
        self.problem = problem
        self.sets = sets
        self.n = problem.n
        self.inactive = sets.inactive
        self.biactive = sets.biactive
        self.qhat = np.sign(sol.q[self.biactive]) if self.biactive.size else np.zeros(0)
        a = problem.a
        self._lu = None
        self._w = np.zeros((self.inactive.size, self.biactive.size))
        if self.inactive.size:
            a_ii = a[self.inactive][:, self.inactive]
            self._lu = Factorized(a_ii)
            if self.biactive.size:
                a_ib = a[self.inactive][:, self.biactive].toarray()
                self._w = np.column_stack(
                    [self._lu.solve(a_ib[:, j]) for j in range(self.biactive.size)]
                )
        if self.biactive.size:
            a_bb = a[self.biactive][:, self.biactive].toarray()
            a_bi = a[self.biactive][:, self.inactive].toarray()
            self._schur = a_bb - a_bi @ self._w
            self._a_bi = a_bi
        else:
            self._schur = np.zeros((0, 0))
            self._a_bi = np.zeros((0, self.inactive.size))

    def _solve_inactive(self, h: np.ndarray) -> np.ndarray:
        if not self.inactive.size:
            return np.zeros(0)
        return self._lu.solve(h[self.inactive])

    def _candidate(self, v0: np.ndarray, rhs_b: np.ndarray, free: np.ndarray) -> np.ndarray:
        """Solve with biactive indices in ``free`` unpinned; returns full eta."""
        eta = np.zeros(self.n)
        eta_b = np.zeros(self.biactive.size)
        idx = np.flatnonzero(free)
        if idx.size:
            eta_b[idx] = np.linalg.solve(self._schur[np.ix_(idx, idx)], rhs_b[idx])
        if self.inactive.size:
            eta[self.inactive] = v0 - self._w @ eta_b
        if self.biactive.size:
            eta[self.biactive] = eta_b
        return eta

    def _branch_values(self, eta: np.ndarray, lam: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a = self.qhat * eta[self.biactive]
        b = -self.qhat * lam[self.biactive]
        return a, b

    def solve(self, h: np.ndarray, start_free: np.ndarray | None = None) -> DerivativePair:
        h = np.asarray(h, dtype=float).ravel()
        if h.size != self.n:
            raise ValueError("direction length does not match the problem dimension")
        v0 = self._solve_inactive(h)
        rhs_b = h[self.biactive] - self._a_bi @ v0 if self.biactive.size else np.zeros(0)

        nb = self.biactive.size
        free = np.ones(nb, dtype=bool) if start_free is None else start_free.copy()
        seen: set[bytes] = set()
        for _ in range(_PATTERN_MAX_ITERS):
            key = free.tobytes()
            if key in seen:
                break
            seen.add(key)
            eta = self._candidate(v0, rhs_b, free)
            lam = h - self.problem.a @ eta
            a, b = self._branch_values(eta, lam)
            new_free = a > b
            if np.array_equal(new_free, free):
                return DerivativePair(eta, lam, "cone_vi", self._kkt_residual(eta, lam))
            free = new_free
        return self._enumerate(h, v0, rhs_b)

    def _enumerate(self, h: np.ndarray, v0: np.ndarray, rhs_b: np.ndarray) -> DerivativePair:
        nb = self.biactive.size
        if nb > _MAX_ENUM_BIACTIVE:
            raise NoConvergenceError(
                f"cone-VI pattern iteration cycled with {nb} biactive indices "
                f"(enumeration limit is {_MAX_ENUM_BIACTIVE})"
            )
        best: tuple[float, DerivativePair] | None = None
        for bits in itertools.product((False, True), repeat=nb):
            free = np.asarray(bits, dtype=bool)
            eta = self._candidate(v0, rhs_b, free)
            lam = h - self.problem.a @ eta
            res = self._kkt_residual(eta, lam)
            if best is None or res < best[0]:
                best = (res, DerivativePair(eta, lam, "cone_vi", res))
        return best[1]

    def subspace_coordinate_responses(self, weights: np.ndarray, chunk: int = 512) -> np.ndarray:
        """<weights, eta(e_i)> for every coordinate direction e_i at once.

        Only valid with an empty biactive set, where the derivative map is
        linear; the responses vanish off the inactive block.  Columns of the
        inactive inverse are produced by chunked forward solves.
        """
        if self.biactive.size:
            raise NoConvergenceError("coordinate batching requires an empty biactive set")
        weights = np.asarray(weights, dtype=float).ravel()
        out = np.zeros(self.n)
        ni = self.inactive.size
        for lo in range(0, ni, chunk):
            hi = min(lo + chunk, ni)
            rhs = np.zeros((ni, hi - lo))
            rhs[np.arange(lo, hi), np.arange(hi - lo)] = 1.0
            cols = self._lu.solve(rhs)
            out[self.inactive[lo:hi]] = cols.T @ weights[self.inactive]
        return out

    def _kkt_residual(self, eta: np.ndarray, lam: np.ndarray) -> float:
        checks = [0.0]
        if self.sets.strongly_active.size:
            checks.append(float(np.abs(eta[self.sets.strongly_active]).max()))
        if self.inactive.size:
            checks.append(float(np.abs(lam[self.inactive]).max()))
        if self.biactive.size:
            a, b = self._branch_values(eta, lam)
            checks.append(float(np.abs(np.minimum(a, b)).max()))
        return max(checks)


def derivative_gateaux(problem: ViProblem, sets: IndexSets, h: np.ndarray) -> DerivativePair:
    """Linear-system derivative; only valid when the biactive set is empty."""
    if sets.biactive.size:
        raise BiactiveNonemptyError(
            f"biactive set has {sets.biactive.size} indices; use derivative_cone_vi"
        )
    h = np.asarray(h, dtype=float).ravel()
    if h.size != problem.n:
        raise ValueError("direction length does not match the problem dimension")
    eta = np.zeros(problem.n)
    if sets.inactive.size:
        a_ii = problem.a[sets.inactive][:, sets.inactive]
        eta[sets.inactive] = Factorized(a_ii).solve(h[sets.inactive])
    lam = h - problem.a @ eta
    checks = [0.0]
    if sets.inactive.size:
        checks.append(float(np.abs(lam[sets.inactive]).max()))
    if sets.strongly_active.size:
        checks.append(float(np.abs(eta[sets.strongly_active]).max()))
    return DerivativePair(eta, lam, "linear_system", max(checks))


def derivative_cone_vi(
    problem: ViProblem, sol: ViSolution, sets: IndexSets, h: np.ndarray
) -> DerivativePair:
    """Directional derivative as the solution of the cone-restricted VI."""
    return ConeViSolver(problem, sol, sets).solve(h)


@dataclass(frozen=True)
class DerivativeSystemReport:
    """Max violations of the limit system satisfied by (eta, lambda)."""

    linear_eq: float
    lambda_on_inactive: float
    eta_on_strongly_active: float
    eta_sign_on_biactive: float
    lambda_sign_on_biactive: float
    complementarity_on_biactive: float
    limit_relation: float

    @property
    def max_violation(self) -> float:
        return max(
            self.linear_eq,
            self.lambda_on_inactive,
            self.eta_on_strongly_active,
            self.eta_sign_on_biactive,
            self.lambda_sign_on_biactive,
            self.complementarity_on_biactive,
            self.limit_relation,
        )

    def to_json_dict(self) -> dict:
        return {
            "linear_eq": self.linear_eq,
            "lambda_on_inactive": self.lambda_on_inactive,
            "eta_on_strongly_active": self.eta_on_strongly_active,
            "eta_sign_on_biactive": self.eta_sign_on_biactive,
            "lambda_sign_on_biactive": self.lambda_sign_on_biactive,
            "complementarity_on_biactive": self.complementarity_on_biactive,
            "limit_relation": self.limit_relation,
            "max_violation": self.max_violation,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def verify_derivative_system(
    problem: ViProblem,
    sol: ViSolution,
    sets: IndexSets,
    h: np.ndarray,
    pair: DerivativePair,
) -> DerivativeSystemReport:
    """Check a derivative pair against every relation it must satisfy."""
    h = np.asarray(h, dtype=float).ravel()
    eta, lam = pair.eta, pair.lam
    g = problem.g

    linear_eq = float(np.abs(problem.a @ eta + lam - h).max())
    lam_inact = float(np.abs(lam[sets.inactive]).max()) if sets.inactive.size else 0.0
    eta_sa = (
        float(np.abs(eta[sets.strongly_active]).max()) if sets.strongly_active.size else 0.0
    )
    if sets.biactive.size:
        qhat = np.sign(sol.q[sets.biactive])
        eta_b = eta[sets.biactive]
        lam_b = lam[sets.biactive]
        eta_sign = float(np.maximum(0.0, -eta_b * qhat).max())
        lam_sign = float(np.maximum(0.0, lam_b * qhat).max())
        compl = float(np.abs(eta_b * lam_b).max())
    else:
        eta_sign = lam_sign = compl = 0.0

    # Raw limit relation: lambda*y + q*eta = g * f(eta) with the branch of f
    # picked by whether y_i vanishes.
    f = np.where(np.abs(sol.y) > sets.tol_y, np.sign(sol.y) * eta, np.abs(eta))
    limit = float(np.abs(lam * sol.y + sol.q * eta - g * f).max())

    return DerivativeSystemReport(
        linear_eq=linear_eq,
        lambda_on_inactive=lam_inact,
        eta_on_strongly_active=eta_sa,
        eta_sign_on_biactive=eta_sign,
        lambda_sign_on_biactive=lam_sign,
        complementarity_on_biactive=compl,
        limit_relation=limit,
    )


def finite_difference_quotient(
    problem: ViProblem, params: HuberParams, h: np.ndarray, t: float
) -> np.ndarray:
    """One-sided difference quotient of the solution map, (S(u+t h) - S(u)) / t.

    Both solves run at tightened tolerances since the quotient amplifies
    solver error by 1/t.
    """
    if t <= 0.0:
        raise ValueError("step t must be positive")
    h = np.asarray(h, dtype=float).ravel()
    tight = tightened(params)
    base, _ = solve_vi(problem, tight)
    shifted, _ = solve_vi(problem.with_rhs(problem.u + t * h), tight, y0=base.y, q0=base.q)
    return (shifted.y - base.y) / t
