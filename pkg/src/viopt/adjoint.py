"""Reduced cost, adjoint state and reduced gradient for tracking control.

The control problem is

    min  j(u) = 0.5*||S(u) - z||^2 + (alpha/2)*||u||^2

with S the VI solution map.  The adjoint state solves a block system with
the identity on active rows and the transposed inactive block elsewhere;
the reduced gradient is alpha*u plus the adjoint on inactive entries.
With a nonempty biactive set the same formula only yields an inexact
descent direction and is flagged accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import IndexSets, ViProblem, ViSolution
from .linalg import Factorized
from .sensitivity import DerivativePair
from .ssn import HuberParams, solve_vi


@dataclass(frozen=True)
class ControlProblem:
    """VI-governed tracking problem: matrix/weight from ``vi``, cost weight
    ``alpha`` and desired state ``z``.  The rhs inside ``vi`` is a placeholder;
    the control is supplied per call."""

    vi: ViProblem
    alpha: float
    z: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float).ravel()
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "alpha", float(self.alpha))
        if self.alpha <= 0.0:
            raise ValueError("control cost weight alpha must be positive")
        if z.size != self.vi.n:
            raise ValueError(f"desired state has length {z.size}, expected {self.vi.n}")

    @property
    def n(self) -> int:
        return self.vi.n

    def problem_at(self, u: np.ndarray) -> ViProblem:
        return self.vi.with_rhs(u)

    def cost_of(self, y: np.ndarray, u: np.ndarray) -> float:
        return 0.5 * float(np.sum((y - self.z) ** 2)) + 0.5 * self.alpha * float(
            np.sum(np.asarray(u, dtype=float) ** 2)
        )


def reduced_cost_and_solution(
    cp: ControlProblem,
    u: np.ndarray,
    params: HuberParams,
    y0: np.ndarray | None = None,
    q0: np.ndarray | None = None,
) -> tuple[float, ViSolution]:
    sol, _ = solve_vi(cp.problem_at(u), params, y0=y0, q0=q0)
    return cp.cost_of(sol.y, u), sol


def reduced_cost(cp: ControlProblem, u: np.ndarray, params: HuberParams) -> float:
    """j(u) with the state obtained from a fresh VI solve."""
    value, _ = reduced_cost_and_solution(cp, u, params)
    return value


def adjoint_state(cp: ControlProblem, sol: ViSolution, sets: IndexSets) -> np.ndarray:
    """Adjoint vector: p_i = y_i - z_i on active rows, A_II' p_I = (y - z)_I."""
    p = sol.y - cp.z
    if sets.inactive.size:
        a_ii = cp.vi.a[sets.inactive][:, sets.inactive]
        p = p.copy()
        p[sets.inactive] = Factorized(a_ii).solve((sol.y - cp.z)[sets.inactive], transpose=True)
    return p


def reduced_gradient(
    cp: ControlProblem, u: np.ndarray, sol: ViSolution, sets: IndexSets
) -> tuple[np.ndarray, bool]:
    """Gradient surrogate (alpha*u, plus the adjoint on inactive entries).

    Returns ``(gradient, exact)``; ``exact`` is False when biactive indices
    make this only an inexact descent direction.
    """
    u = np.asarray(u, dtype=float).ravel()
    grad = cp.alpha * u
    if sets.inactive.size:
        p = adjoint_state(cp, sol, sets)
        grad = grad.copy()
        grad[sets.inactive] += p[sets.inactive]
    return grad, sets.biactive_count == 0


def directional_cost_derivative(
    cp: ControlProblem,
    u: np.ndarray,
    sol: ViSolution,
    h: np.ndarray,
    pair: DerivativePair,
) -> float:
    """j'(u; h) = <S(u) - z, eta> + alpha * <u, h> from a derivative pair."""
    u = np.asarray(u, dtype=float).ravel()
    h = np.asarray(h, dtype=float).ravel()
    return float(np.dot(sol.y - cp.z, pair.eta) + cp.alpha * np.dot(u, h))
