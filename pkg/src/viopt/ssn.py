"""Forward VI solver: Huber continuation plus semismooth Newton.

The l1 term is smoothed by the map ``h_gamma`` with sharpness ``gamma``;
at each continuation level the regularized system

    A y + q = u,      q - h_gamma(y) = 0

is solved by a semismooth Newton method whose iteration matrix carries
dual information (the slack ratio q/max(g, |q|) replaces sign(y) in the
generalized derivative).  A final active-set polish recovers exact zeros
in y and exact bound slacks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import sparse

from .core import ViProblem, ViSolution, residual_norm
from .errors import LinearSolveError
from .linalg import Factorized, solve_sparse

_EPS = float(np.finfo(float).eps)
_POLISH_MAX_SWEEPS = 10


@dataclass(frozen=True)
class HuberParams:
    """Continuation schedule and Newton controls for the forward solve."""

    gamma: float = 1e2
    gamma_max: float = 1e8
    gamma_growth: float = 10.0
    newton_tol: float = 1e-10
    max_newton_iters: int = 50

    def __post_init__(self):
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")
        if self.gamma_growth <= 1.0:
            raise ValueError("gamma_growth must exceed 1")
        if self.newton_tol <= 0.0:
            raise ValueError("newton_tol must be positive")
        if self.gamma_max < self.gamma:
            raise ValueError("gamma_max must be at least gamma")


@dataclass(frozen=True)
class SsnIteration:
    gamma: float
    residual_norm: float
    step_norm: float
    linear_solver_iters: int


@dataclass
class SsnLog:
    """Per-iteration trace of the Newton/continuation loop."""

    records: list[SsnIteration] = field(default_factory=list)

    @property
    def total_newton_iterations(self) -> int:
        return len(self.records)

    def append(self, gamma: float, residual: float, step_norm: float, lin_iters: int) -> None:
        self.records.append(SsnIteration(gamma, residual, step_norm, lin_iters))

    def to_json_lines(self) -> str:
        return "\n".join(
            json.dumps(
                {
                    "gamma": r.gamma,
                    "residual_norm": r.residual_norm,
                    "step_norm": r.step_norm,
                    "linear_solver_iters": r.linear_solver_iters,
                }
            )
            for r in self.records
        )

    def write_jsonl(self, path: str | Path) -> None:
        text = self.to_json_lines()
        Path(path).write_text(text + ("\n" if text else ""))


def huber_map(y: np.ndarray, g: float, gamma: float) -> np.ndarray:
    """Smoothed scaled-sign map: g*gamma*y_i / max(g, gamma*|y_i|)."""
    y = np.asarray(y, dtype=float)
    denom = np.maximum(g, gamma * np.abs(y))
    return g * gamma * y / denom


def _dual_row_coefficients(y: np.ndarray, q: np.ndarray, g: float, gamma: float) -> np.ndarray:
    """Diagonal coefficient on delta_y in the second Newton block row.

    Generalized derivative of ``q - h_gamma(y)`` with the saturated-branch
    sign replaced by the dual ratio q/max(g, |q|).
    """
    absy = np.abs(y)
    m = np.maximum(g, gamma * absy)
    chi = (gamma * absy >= g).astype(float)
    qhat = q / np.maximum(g, np.abs(q))
    return -g * gamma / m + chi * g * gamma**2 * y * qhat / m**2


def ssn_newton_system(
    problem: ViProblem, y: np.ndarray, q: np.ndarray, gamma: float
) -> tuple[sparse.csr_array, np.ndarray]:
    """Assemble the 2n x 2n Newton system for (delta_y, delta_q).

    Block rows:  A dy + dq = u - A y - q   and   D dy + dq = h_gamma(y) - q
    with D the dual-weighted diagonal from ``_dual_row_coefficients``.
    """
    y = np.asarray(y, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    n = problem.n
    if y.size != n or q.size != n:
        raise ValueError("iterate length does not match the problem dimension")
    g = problem.g
    d = _dual_row_coefficients(y, q, g, gamma)
    eye = sparse.identity(n, format="csr")
    system = sparse.bmat(
        [[problem.a, eye], [sparse.diags(d, format="csr"), eye]], format="csr"
    )
    rhs = np.concatenate([problem.u - problem.a @ y - q, huber_map(y, g, gamma) - q])
    return sparse.csr_array(system), rhs


def _regularized_residual(problem: ViProblem, y, q, gamma: float) -> float:
    r1 = problem.a @ y + q - problem.u
    r2 = q - huber_map(y, problem.g, gamma)
    return float(max(np.abs(r1).max(), np.abs(r2).max()))


def _gamma_schedule(params: HuberParams) -> list[float]:
    levels = [params.gamma]
    while levels[-1] < params.gamma_max:
        levels.append(min(levels[-1] * params.gamma_growth, params.gamma_max))
    return levels


def _newton_at_level(
    problem: ViProblem,
    y: np.ndarray,
    q: np.ndarray,
    gamma: float,
    tol: float,
    max_iters: int,
    log: SsnLog,
) -> tuple[np.ndarray, np.ndarray, bool]:
    g = problem.g
    res = _regularized_residual(problem, y, q, gamma)
    for _ in range(max_iters):
        if res <= tol:
            return y, q, True
        b1 = problem.u - problem.a @ y - q
        b2 = huber_map(y, g, gamma) - q
        d = _dual_row_coefficients(y, q, g, gamma)
        # Eliminate dq: (A - diag(d)) dy = b1 - b2, then dq = b1 - A dy.
        m = problem.a - sparse.diags(d, format="csr")
        dy, lin_iters = solve_sparse(sparse.csr_array(m), b1 - b2)
        dq = b1 - problem.a @ dy
        y = y + dy
        q = q + dq
        res = _regularized_residual(problem, y, q, gamma)
        step = float(max(np.abs(dy).max(initial=0.0), np.abs(dq).max(initial=0.0)))
        log.append(gamma, res, step, lin_iters)
    return y, q, res <= tol


def _support_pattern(q: np.ndarray, y: np.ndarray, g: float) -> np.ndarray:
    """Sign pattern from the merit vector q + y: +-1 on the support, 0 off it."""
    v = q + y
    sigma = np.sign(v).astype(int)
    sigma[np.abs(v) <= g] = 0
    return sigma


def _polish(
    problem: ViProblem, y: np.ndarray, q: np.ndarray, gamma_final: float
) -> tuple[np.ndarray, np.ndarray]:
    """Active-set refinement: re-solve on the detected support.

    Starting from the continuation endpoint, solve A_ss y_s = u_s - g*sigma_s
    on the current support, recompute q = u - A y, and re-threshold until the
    pattern is a fixed point.  Exact zeros off the support and slacks clipped
    to [-g, g] come out of this step.  Returns the best iterate seen (by
    complementarity residual) if no fixed point is reached.
    """
    g = problem.g
    u = problem.u
    sigma = np.sign(y).astype(int)
    sigma[gamma_final * np.abs(y) < g] = 0

    unpolished = (residual_norm(problem, y, q), y, q)
    best: tuple[float, np.ndarray, np.ndarray] | None = None
    seen: set[bytes] = set()
    for _ in range(_POLISH_MAX_SWEEPS):
        key = sigma.tobytes()
        if key in seen:
            break
        seen.add(key)
        support = np.flatnonzero(sigma)
        y_new = np.zeros_like(u)
        if support.size:
            a_ss = problem.a[support][:, support]
            rhs = u[support] - g * sigma[support]
            try:
                y_new[support] = Factorized(a_ss).solve(rhs)
            except LinearSolveError:
                break
        q_new = np.clip(u - problem.a @ y_new, -g, g)
        res = residual_norm(problem, y_new, q_new)
        if best is None or res < best[0]:
            best = (res, y_new, q_new)
        sigma_next = _support_pattern(u - problem.a @ y_new, y_new, g)
        if np.array_equal(sigma_next, sigma):
            break
        sigma = sigma_next
    # Polished iterates carry exact zeros and consistent slacks, so prefer
    # them whenever they do not lose accuracy against the raw endpoint.
    if best is not None and best[0] <= max(unpolished[0], 1e-14):
        return best[1], best[2]
    return unpolished[1], unpolished[2]


def solve_vi(
    problem: ViProblem,
    params: HuberParams | None = None,
    y0: np.ndarray | None = None,
    q0: np.ndarray | None = None,
) -> tuple[ViSolution, SsnLog]:
    """Solve the VI by Huber continuation with semismooth Newton steps.

    Runs the gamma schedule (warm-starting each level from the previous
    one), then polishes the endpoint to an exact-support solution.  The
    returned solution is flagged converged when its complementarity
    residual passes a roundoff-aware gate built from ``newton_tol``.
    """
    if params is None:
        params = HuberParams()
    g = problem.g
    u = problem.u
    warm = y0 is not None or q0 is not None
    y = np.zeros(problem.n) if y0 is None else np.asarray(y0, dtype=float).copy()
    q = np.clip(u, -g, g) if q0 is None else np.asarray(q0, dtype=float).copy()
    if y.size != problem.n or q.size != problem.n:
        raise ValueError("warm-start vectors do not match the problem dimension")

    scale = 1.0 + float(np.abs(u).max()) + g
    level_tol = max(params.newton_tol, 100.0 * _EPS * scale)
    schedule = _gamma_schedule(params)
    gamma_final = schedule[-1]

    log = SsnLog()
    done = False
    if warm:
        # A good warm start usually converges directly at the final
        # sharpness; fall back to the full schedule from cold otherwise.
        y_try, q_try, ok = _newton_at_level(
            problem, y, q, gamma_final, level_tol, min(12, params.max_newton_iters), log
        )
        if ok:
            y, q = y_try, q_try
            done = True
        else:
            y = np.zeros(problem.n)
            q = np.clip(u, -g, g)
    if not done:
        for gamma in schedule:
            y, q, _ = _newton_at_level(
                problem, y, q, gamma, level_tol, params.max_newton_iters, log
            )

    y, q = _polish(problem, y, q, gamma_final)

    res = residual_norm(problem, y, q)
    row_scale = float(np.abs(problem.a).sum(axis=1).max())
    gate = max(
        params.newton_tol,
        100.0 * _EPS * (scale + row_scale * float(np.abs(y).max(initial=0.0))),
    )
    solution = ViSolution(
        y=y,
        q=q,
        residual_norm=res,
        iterations=log.total_newton_iterations,
        converged=bool(res <= gate),
    )
    return solution, log


def tightened(params: HuberParams, newton_tol: float = 1e-12, gamma_max: float = 1e10) -> HuberParams:
    """Params with at least the given Newton tolerance and sharpness cap."""
    return replace(
        params,
        newton_tol=min(params.newton_tol, newton_tol),
        gamma_max=max(params.gamma_max, gamma_max),
    )
