"""Certificates for the first-order optimality concepts.

Three layers, from primal to dual:

 * B-stationarity: the directional derivative of the reduced cost is
   nonnegative in every tested direction.
 * Strong stationarity: with unconstrained controls the adjoint pair is
   pinned explicitly (p = -alpha*u, mu = (y - z) - A'p); what remains to
   check are support and sign conditions relative to the index sets.
 * C-stationarity: the weaker pairings <mu, p> >= 0 and <mu, y> = 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .adjoint import ControlProblem, directional_cost_derivative
from .core import IndexSets, ViSolution, classify_sets, complementarity_residual
from .sensitivity import ConeViSolver
from .ssn import HuberParams, solve_vi


@dataclass(frozen=True)
class StationarityReport:
    """Residuals and verdicts for the stationarity systems at one point."""

    strong: dict
    c_stat: dict
    verdicts: dict
    tol: float
    b_min_directional: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "strong": self.strong,
            "c_stat": self.c_stat,
            "verdicts": self.verdicts,
            "tol": self.tol,
            "b_min_directional": self.b_min_directional,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def stationarity_multipliers(
    cp: ControlProblem, u: np.ndarray, sol: ViSolution
) -> tuple[np.ndarray, np.ndarray]:
    """Adjoint/multiplier pair pinned by the unconstrained-control system:
    p = -alpha*u and mu = (y - z) - A'p."""
    u = np.asarray(u, dtype=float).ravel()
    p = -cp.alpha * u
    mu = (sol.y - cp.z) - cp.vi.a.T @ p
    return p, mu


def check_c_stationarity(
    mu: np.ndarray, p: np.ndarray, y: np.ndarray
) -> tuple[float, float]:
    """Return (<mu, p>, <mu, y>); the first must be >= -tol, the second ~ 0."""
    mu = np.asarray(mu, dtype=float).ravel()
    return float(mu @ np.asarray(p, dtype=float)), float(mu @ np.asarray(y, dtype=float))


def check_strong_stationarity(
    cp: ControlProblem,
    u: np.ndarray,
    sol: ViSolution,
    sets: IndexSets,
    tol: float = 1e-6,
) -> StationarityReport:
    """Evaluate the strong-stationarity system at a solved point.

    The gradient and adjoint equations hold by construction of the
    multiplier pair; the reported content is in the support/sign conditions
    of p and mu relative to the cone at y, plus the state system residuals.
    """
    u = np.asarray(u, dtype=float).ravel()
    p, mu = stationarity_multipliers(cp, u, sol)
    g = cp.vi.g

    gradient_eq = float(np.abs(p + cp.alpha * u).max(initial=0.0))
    adjoint_eq = float(np.abs(cp.vi.a.T @ p - (sol.y - cp.z) + mu).max(initial=0.0))

    qhat = np.sign(sol.q[sets.biactive]) if sets.biactive.size else np.zeros(0)
    p_cone = 0.0
    if sets.strongly_active.size:
        p_cone = float(np.abs(p[sets.strongly_active]).max())
    if sets.biactive.size:
        p_cone = max(p_cone, float(np.maximum(0.0, -p[sets.biactive] * qhat).max()))
    mu_inactive = float(np.abs(mu[sets.inactive]).max()) if sets.inactive.size else 0.0
    mu_biactive = (
        float(np.maximum(0.0, -mu[sets.biactive] * qhat).max()) if sets.biactive.size else 0.0
    )

    r1, r2, r3 = complementarity_residual(cp.problem_at(u), sol.y, sol.q)
    state = {
        "linear": float(np.abs(r1).max()),
        "slack": float(np.abs(r2).max()),
        "bound": float(np.abs(r3).max()),
    }

    mu_dot_p, mu_dot_y = check_c_stationarity(mu, p, sol.y)
    # Inner products aggregate n terms, so their verdicts use a magnitude-
    # aware tolerance rather than the raw entrywise one.
    c_scale = max(
        1.0,
        float(np.abs(mu).max(initial=0.0))
        * max(float(np.abs(p).max(initial=0.0)), float(np.abs(sol.y).max(initial=0.0)))
        * mu.size,
    )

    strong = {
        "adjoint_eq": adjoint_eq,
        "p_in_cone": p_cone,
        "mu_sign_inactive": mu_inactive,
        "mu_sign_biactive": mu_biactive,
        "gradient_eq": gradient_eq,
        "state_linear": state["linear"],
        "state_slack": state["slack"],
        "state_bound": state["bound"],
    }
    verdict_strong = all(v <= tol for v in strong.values())
    verdict_c = mu_dot_p >= -tol * c_scale and abs(mu_dot_y) <= tol * c_scale
    return StationarityReport(
        strong=strong,
        c_stat={"mu_dot_p": mu_dot_p, "mu_dot_y": mu_dot_y},
        verdicts={"strong": verdict_strong, "c": verdict_c},
        tol=tol,
    )


def check_b_stationarity(
    cp: ControlProblem,
    u: np.ndarray,
    params: HuberParams,
    *,
    n_random: int = 32,
    seed: int = 0,
    include_coordinates: bool = True,
    sol: ViSolution | None = None,
    sets: IndexSets | None = None,
) -> float:
    """Minimum of j'(u; d) over +-coordinate directions and random unit ones.

    Each directional derivative goes through the cone-VI path, so the check
    stays valid (and meaningful) with a nonempty biactive set.  A
    B-stationary point yields a minimum bounded below by -tolerance.
    """
    u = np.asarray(u, dtype=float).ravel()
    if sol is None:
        sol, _ = solve_vi(cp.problem_at(u), params)
    if sets is None:
        sets = classify_sets(sol.y, sol.q, cp.vi.g)
    solver = ConeViSolver(cp.problem_at(u), sol, sets)

    best = np.inf
    if include_coordinates:
        if sets.biactive_count == 0 and sets.inactive.size:
            # Subspace case: the derivative is linear in the direction, so
            # both signs of every axis come from batched forward solves.
            values = cp.alpha * u + solver.subspace_coordinate_responses(sol.y - cp.z)
            best = min(best, float(-np.abs(values).max()))
        else:
            for i in range(cp.n):
                for sign in (1.0, -1.0):
                    d = np.zeros(cp.n)
                    d[i] = sign
                    pair = solver.solve(d)
                    best = min(best, directional_cost_derivative(cp, u, sol, d, pair))
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        d = rng.standard_normal(cp.n)
        d /= np.linalg.norm(d)
        pair = solver.solve(d)
        best = min(best, directional_cost_derivative(cp, u, sol, d, pair))
    return float(best)
