"""Dogleg-type trust-region optimizer with a BFGS quadratic model.

Each iteration solves the VI at the current control, builds the (possibly
inexact) reduced gradient, and picks either the full quasi-Newton step or
the Cauchy step via a fraction-of-Cauchy-decrease test.  Radius updates
resolve the textbook intervals to fixed endpoints so runs are reproducible.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adjoint import ControlProblem, reduced_gradient
from .core import ViSolution, classify_sets
from .errors import SingularModelError, ZeroGradientError
from .ssn import HuberParams, solve_vi

_CURVATURE_SKIP = 1e-10
_NEWTON_REL_RESIDUAL = 1e-10
_ZERO_GRADIENT_REL = 1e-12


@dataclass(frozen=True)
class TrustRegionConfig:
    """Acceptance thresholds, radius factors and stopping controls."""

    eta1: float = 0.25
    eta2: float = 0.75
    gamma0: float = 0.25
    gamma1: float = 0.5
    gamma2: float = 1.5
    delta_min: float = 0.0
    delta0: float = 1.0
    beta: float = 1.0
    delta_fcd: float = 0.8
    stop_tol: float = 1e-4
    max_iters: int = 150

    def __post_init__(self):
        if not (0.0 < self.eta1 < self.eta2 < 1.0):
            raise ValueError("need 0 < eta1 < eta2 < 1")
        if not (0.0 < self.gamma0 < self.gamma1 < 1.0 < self.gamma2):
            raise ValueError("need 0 < gamma0 < gamma1 < 1 < gamma2")
        if self.delta_min < 0.0 or self.delta0 < self.delta_min or self.delta0 <= 0.0:
            raise ValueError("need delta0 > 0 and delta0 >= delta_min >= 0")
        if self.beta < 1.0:
            raise ValueError("step cap factor beta must be at least 1")
        if not (0.0 < self.delta_fcd <= 1.0):
            raise ValueError("delta_fcd must lie in (0, 1]")


class BfgsModel:
    """Full-history BFGS matrix kept as update pairs.

    Stores the curvature pairs instead of a dense matrix; products with the
    model matrix unroll the rank-two updates, and quasi-Newton solves use the
    inverse two-loop recursion.  Both agree with the dense update formula to
    roundoff while needing only O(k n) memory.
    """

    def __init__(self, n: int, h0_scale: float):
        if h0_scale <= 0.0:
            raise ValueError("initial model scale must be positive")
        self.n = n
        self.h0 = float(h0_scale)
        self._s: list[np.ndarray] = []
        self._y: list[np.ndarray] = []
        self._rho: list[float] = []
        self._bs: list[np.ndarray] = []
        self._sbs: list[float] = []

    @property
    def num_updates(self) -> int:
        return len(self._s)

    def mat_vec(self, v: np.ndarray) -> np.ndarray:
        r = self.h0 * np.asarray(v, dtype=float)
        for y, rho, bs, sbs in zip(self._y, self._rho, self._bs, self._sbs):
            r = r + y * (rho * (y @ v)) - bs * ((bs @ v) / sbs)
        return r

    def update(self, s: np.ndarray, y_diff: np.ndarray) -> bool:
        """Rank-two update; skipped (returns False) on tiny curvature."""
        s = np.asarray(s, dtype=float)
        y_diff = np.asarray(y_diff, dtype=float)
        curvature = float(y_diff @ s)
        if curvature <= _CURVATURE_SKIP * np.linalg.norm(y_diff) * np.linalg.norm(s):
            return False
        bs = self.mat_vec(s)
        sbs = float(s @ bs)
        if sbs <= 0.0:
            return False
        self._s.append(s.copy())
        self._y.append(y_diff.copy())
        self._rho.append(1.0 / curvature)
        self._bs.append(bs)
        self._sbs.append(sbs)
        return True

    def solve_newton(self, g: np.ndarray) -> np.ndarray:
        """Quasi-Newton step: solve B s = -g by the inverse two-loop recursion."""
        q = np.asarray(g, dtype=float).copy()
        k = self.num_updates
        alphas = np.zeros(k)
        for j in range(k - 1, -1, -1):
            alphas[j] = self._rho[j] * (self._s[j] @ q)
            q -= alphas[j] * self._y[j]
        r = q / self.h0
        for j in range(k):
            beta = self._rho[j] * (self._y[j] @ r)
            r += (alphas[j] - beta) * self._s[j]
        step = -r
        gnorm = np.linalg.norm(g)
        if gnorm > 0.0:
            residual = np.linalg.norm(self.mat_vec(step) + g) / gnorm
            if not np.isfinite(residual) or residual > _NEWTON_REL_RESIDUAL:
                raise SingularModelError(f"model solve residual {residual:.2e}")
        return step

    def as_dense(self) -> np.ndarray:
        cols = [self.mat_vec(col) for col in np.eye(self.n)]
        return np.column_stack(cols)


def _model_matvec(h, v: np.ndarray) -> np.ndarray:
    if isinstance(h, BfgsModel):
        return h.mat_vec(v)
    return np.asarray(h, dtype=float) @ v


@dataclass
class QuadraticModel:
    """Local model q(s) = j_k + g_k's + 0.5 s'H_k s of the reduced cost."""

    j_k: float
    g_k: np.ndarray
    h_k: BfgsModel | np.ndarray

    def pred(self, s: np.ndarray) -> float:
        """Predicted reduction j_k - q(s)."""
        return -float(self.g_k @ s) - 0.5 * float(s @ _model_matvec(self.h_k, s))

    def value(self, s: np.ndarray) -> float:
        return self.j_k - self.pred(s)


def bfgs_update(h: np.ndarray, s: np.ndarray, y_diff: np.ndarray) -> np.ndarray:
    """Dense BFGS update H - (Hss'H)/(s'Hs) + (yy')/(y's), with a skip rule
    that returns H unchanged on tiny curvature."""
    h = np.asarray(h, dtype=float)
    s = np.asarray(s, dtype=float)
    y_diff = np.asarray(y_diff, dtype=float)
    curvature = float(y_diff @ s)
    if curvature <= _CURVATURE_SKIP * np.linalg.norm(y_diff) * np.linalg.norm(s):
        return h.copy()
    hs = h @ s
    return h - np.outer(hs, hs) / float(s @ hs) + np.outer(y_diff, y_diff) / curvature


def cauchy_step(g: np.ndarray, h, delta: float) -> np.ndarray:
    """Steepest-descent minimizer of the model within the radius."""
    g = np.asarray(g, dtype=float)
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0:
        raise ZeroGradientError("cannot take a Cauchy step at a zero gradient")
    ghg = float(g @ _model_matvec(h, g))
    if ghg <= 0.0:
        t = delta / gnorm
    else:
        t = min(gnorm**2 / ghg, delta / gnorm)
    return -t * g


def newton_step(g: np.ndarray, h) -> np.ndarray:
    """Full model step solving H s = -g to relative residual 1e-10."""
    g = np.asarray(g, dtype=float)
    if isinstance(h, BfgsModel):
        return h.solve_newton(g)
    h = np.asarray(h, dtype=float)
    try:
        s = np.linalg.solve(h, -g)
    except np.linalg.LinAlgError as exc:
        raise SingularModelError(str(exc)) from exc
    gnorm = np.linalg.norm(g)
    if gnorm > 0.0:
        residual = np.linalg.norm(h @ s + g) / gnorm
        if not np.isfinite(residual) or residual > _NEWTON_REL_RESIDUAL:
            raise SingularModelError(f"dense model solve residual {residual:.2e}")
    return s


def fcd_accepts(
    s: np.ndarray,
    s_c: np.ndarray,
    model: QuadraticModel,
    cfg: TrustRegionConfig,
    delta: float,
) -> bool:
    """Fraction-of-Cauchy-decrease test: bounded step with enough model drop."""
    if float(np.linalg.norm(s)) > cfg.beta * delta:
        return False
    return model.pred(s) >= cfg.delta_fcd * model.pred(s_c)


def radius_update(rho: float, delta: float, cfg: TrustRegionConfig) -> tuple[bool, float]:
    """Accept/reject and the next radius.

    rho > eta2 accepts and grows by gamma2; eta1 < rho <= eta2 accepts and
    shrinks to max(delta_min, gamma1*delta); otherwise reject and shrink by
    gamma1.  A non-finite rho (undefined ratio) lands in the reject branch.
    """
    if np.isfinite(rho) and rho > cfg.eta2:
        return True, cfg.gamma2 * delta
    if np.isfinite(rho) and rho > cfg.eta1:
        return True, max(cfg.delta_min, cfg.gamma1 * delta)
    return False, cfg.gamma1 * delta


@dataclass(frozen=True)
class IterationRecord:
    k: int
    j: float
    gnorm: float
    delta: float
    rho: float
    step_type: str
    accepted: bool
    biactive_count: int


@dataclass
class OptimizeResult:
    """Final iterate plus the full per-iteration history."""

    u_final: np.ndarray
    y_final: np.ndarray
    q_final: np.ndarray
    iterations: int
    history: list[IterationRecord] = field(default_factory=list)
    converged: bool = False

    _CSV_COLUMNS = ("k", "j", "gnorm", "delta", "rho", "step_type", "accepted", "biactive_count")

    def history_rows(self) -> list[dict]:
        return [
            {
                "k": r.k,
                "j": r.j,
                "gnorm": r.gnorm,
                "delta": r.delta,
                "rho": r.rho,
                "step_type": r.step_type,
                "accepted": r.accepted,
                "biactive_count": r.biactive_count,
            }
            for r in self.history
        ]

    def history_to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self._CSV_COLUMNS)
        for r in self.history:
            writer.writerow(
                [
                    r.k,
                    f"{r.j:.10g}",
                    f"{r.gnorm:.10g}",
                    f"{r.delta:.10g}",
                    f"{r.rho:.10g}",
                    r.step_type,
                    int(r.accepted),
                    r.biactive_count,
                ]
            )
        return buf.getvalue()

    def write_history_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.history_to_csv())

    def history_to_json_lines(self) -> str:
        return "\n".join(json.dumps(row) for row in self.history_rows())


def optimize(
    cp: ControlProblem,
    cfg: TrustRegionConfig,
    params: HuberParams,
    u0: np.ndarray,
) -> OptimizeResult:
    """Run the trust-region loop from ``u0`` until the accepted-step size
    drops below ``stop_tol`` (or the iteration cap is hit)."""
    u = np.asarray(u0, dtype=float).ravel().copy()
    if u.size != cp.n:
        raise ValueError(f"initial control has length {u.size}, expected {cp.n}")
    delta = cfg.delta0

    sol, _ = solve_vi(cp.problem_at(u), params)
    sets = classify_sets(sol.y, sol.q, cp.vi.g)
    grad, _ = reduced_gradient(cp, u, sol, sets)
    j = cp.cost_of(sol.y, u)
    h = BfgsModel(cp.n, cp.alpha)

    history: list[IterationRecord] = []
    converged = False
    iterations = 0
    # A gradient this far below its starting size is numerically zero; the
    # exact-zero test alone would spin on rejected steps forever.
    zero_floor = _ZERO_GRADIENT_REL * (1.0 + float(np.linalg.norm(grad)))
    for k in range(cfg.max_iters):
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= zero_floor:
            converged = True
            break
        iterations = k + 1
        model = QuadraticModel(j, grad, h)
        s_c = cauchy_step(grad, h, delta)
        try:
            s_n = newton_step(grad, h)
        except SingularModelError:
            s_n = None
        if s_n is not None and fcd_accepts(s_n, s_c, model, cfg, delta):
            s, step_type = s_n, "newton"
        else:
            s, step_type = s_c, "cauchy"

        u_trial = u + s
        trial_sol, _ = solve_vi(cp.problem_at(u_trial), params, y0=sol.y, q0=sol.q)
        j_trial = cp.cost_of(trial_sol.y, u_trial)
        ared = j - j_trial
        pred = model.pred(s)
        trial_sets = None
        if trial_sol.converged:
            try:
                trial_sets = classify_sets(trial_sol.y, trial_sol.q, cp.vi.g)
            except ValueError:
                trial_sets = None
        # A trial point whose solve or classification cannot be trusted is
        # treated as a plain rejection.
        if pred <= 0.0 or trial_sets is None:
            rho = -np.inf
        else:
            rho = ared / pred
        delta_used = delta
        accepted, delta = radius_update(rho, delta, cfg)
        history.append(
            IterationRecord(
                k, j, gnorm, delta_used, rho, step_type, accepted, sets.biactive_count
            )
        )
        if accepted:
            grad_new, _ = reduced_gradient(cp, u_trial, trial_sol, trial_sets)
            h.update(s, grad_new - grad)
            u, sol, sets, grad, j = u_trial, trial_sol, trial_sets, grad_new, j_trial
            if float(np.linalg.norm(s)) <= cfg.stop_tol:
                converged = True
                break

    return OptimizeResult(
        u_final=u,
        y_final=sol.y,
        q_final=sol.q,
        iterations=iterations,
        history=history,
        converged=converged,
    )
