"""Problem/solution data model for the l1-weighted variational inequality.

The governing inequality in R^n is

    <A y, v - y> + g*|v|_1 - g*|y|_1 >= <u, v - y>   for all v,

with A positive definite and weight g > 0.  Introducing the slack
q := u - A y, the solution is characterized by the complementarity system

    A y + q = u,      q_i y_i = g*|y_i|,      |q_i| <= g.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, InitVar
from pathlib import Path

import numpy as np
from scipy import sparse

_PD_PROBES = 20
_PD_SEED = 1729


def _as_csr(a) -> sparse.csr_array:
    if sparse.issparse(a):
        mat = sparse.csr_array(a)
    else:
        mat = sparse.csr_array(np.asarray(a, dtype=float))
    mat = mat.astype(float)
    mat.sort_indices()
    return mat


@dataclass(frozen=True)
class ViProblem:
    """One VI instance: matrix ``a``, weight ``g`` and right-hand side ``u``.

    ``a`` is stored row-compressed; ``symmetric_hint`` is derived on
    construction unless supplied.  Validation checks the shape contract,
    structurally non-empty rows, ``g > 0`` and positive definiteness
    (probabilistically, with a fixed number of random probe vectors).
    """

    a: sparse.csr_array
    g: float
    u: np.ndarray
    symmetric_hint: bool | None = None
    validate: InitVar[bool] = True

    def __post_init__(self, validate: bool):
        a = _as_csr(self.a)
        u = np.asarray(self.u, dtype=float).ravel()
        g = float(self.g)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "g", g)
        if self.symmetric_hint is None:
            object.__setattr__(self, "symmetric_hint", _is_symmetric(a))
        if validate:
            self._check()

    def _check(self) -> None:
        n = self.u.size
        if n < 1:
            raise ValueError("dimension must be at least 1")
        if self.a.shape != (n, n):
            raise ValueError(f"matrix shape {self.a.shape} does not match u of length {n}")
        if self.g <= 0.0:
            raise ValueError("nonsmooth weight g must be positive")
        row_counts = np.diff(self.a.indptr)
        if np.any(row_counts == 0):
            raise ValueError("matrix has a structurally empty row")
        rng = np.random.default_rng(_PD_SEED)
        for _ in range(_PD_PROBES):
            x = rng.standard_normal(n)
            x /= np.linalg.norm(x)
            if x @ (self.a @ x) <= 0.0:
                raise ValueError("matrix failed the positive-definiteness probe")

    @property
    def n(self) -> int:
        return self.u.size

    def with_rhs(self, u: np.ndarray) -> "ViProblem":
        """Same matrix and weight, new right-hand side (no re-validation)."""
        u = np.asarray(u, dtype=float).ravel()
        if u.size != self.n:
            raise ValueError(f"new rhs has length {u.size}, expected {self.n}")
        return ViProblem(self.a, self.g, u, symmetric_hint=self.symmetric_hint, validate=False)

    def to_json_dict(self) -> dict:
        coo = sparse.coo_array(self.a)
        return {
            "n": self.n,
            "g": self.g,
            "u": self.u.tolist(),
            "A": {
                "rows": coo.row.tolist(),
                "cols": coo.col.tolist(),
                "vals": coo.data.tolist(),
            },
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ViProblem":
        n = int(doc["n"])
        tri = doc["A"]
        a = sparse.coo_array(
            (np.asarray(tri["vals"], dtype=float),
             (np.asarray(tri["rows"], dtype=int), np.asarray(tri["cols"], dtype=int))),
            shape=(n, n),
        )
        return cls(a, float(doc["g"]), np.asarray(doc["u"], dtype=float))


def _is_symmetric(a: sparse.csr_array) -> bool:
    diff = (a - a.T).tocoo()
    return diff.nnz == 0 or not np.any(diff.data)


def save_problem(problem: ViProblem, path: str | Path) -> None:
    Path(path).write_text(json.dumps(problem.to_json_dict()))


def load_problem(path: str | Path) -> ViProblem:
    return ViProblem.from_json_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ViSolution:
    """Solved VI: state ``y``, slack ``q`` and convergence summary."""

    y: np.ndarray
    q: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool

    def to_json_dict(self) -> dict:
        return {
            "y": self.y.tolist(),
            "q": self.q.tolist(),
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "converged": self.converged,
        }


@dataclass(frozen=True)
class IndexSets:
    """Partition of ``{0..n-1}`` by the state/slack geometry.

    inactive:        y_i != 0 (split by sign of y_i)
    strongly_active: y_i  = 0 and |q_i| < g
    biactive:        y_i  = 0 and |q_i| = g (split by sign of q_i)
    """

    inactive: np.ndarray
    inactive_plus: np.ndarray
    inactive_minus: np.ndarray
    strongly_active: np.ndarray
    biactive: np.ndarray
    biactive_plus: np.ndarray
    biactive_minus: np.ndarray
    tol_y: float
    tol_q: float

    @property
    def biactive_count(self) -> int:
        return self.biactive.size

    @property
    def size(self) -> int:
        return self.inactive.size + self.strongly_active.size + self.biactive.size


def compute_slack(problem: ViProblem, y: np.ndarray) -> np.ndarray:
    """Slack vector q = u - A y."""
    y = np.asarray(y, dtype=float).ravel()
    if y.size != problem.n:
        raise ValueError(f"state has length {y.size}, expected {problem.n}")
    return problem.u - problem.a @ y


def complementarity_residual(
    problem: ViProblem, y: np.ndarray, q: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Residual vectors of the weighted complementarity system.

    Returns ``(A y + q - u, q*y - g*|y|, max(|q|, g) - g)``; all three vanish
    exactly at a solution.
    """
    y = np.asarray(y, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if y.size != problem.n or q.size != problem.n:
        raise ValueError("state/slack length does not match the problem dimension")
    r_linear = problem.a @ y + q - problem.u
    r_slack = q * y - problem.g * np.abs(y)
    r_bound = np.maximum(np.abs(q), problem.g) - problem.g
    return r_linear, r_slack, r_bound


def residual_norm(problem: ViProblem, y: np.ndarray, q: np.ndarray) -> float:
    """Max-norm over the three complementarity residual vectors."""
    r1, r2, r3 = complementarity_residual(problem, y, q)
    return float(max(np.abs(r1).max(), np.abs(r2).max(), np.abs(r3).max()))


def default_tol_y(y: np.ndarray) -> float:
    return 1e-10 * max(1.0, float(np.abs(y).max(initial=0.0)))


def default_tol_q(g: float) -> float:
    return 1e-8 * g


def classify_sets(
    y: np.ndarray,
    q: np.ndarray,
    g: float,
    tol_y: float | None = None,
    tol_q: float | None = None,
) -> IndexSets:
    """Classify indices into inactive / strongly active / biactive sets.

    An index is inactive when ``|y_i| > tol_y``; the remaining indices are
    biactive when ``|q_i| >= g - tol_q`` and strongly active otherwise.
    Inactive indices must carry a consistent slack ``q_i = g*sign(y_i)``
    (within ``tol_q``); a violation signals an unconverged solve and raises.
    """
    y = np.asarray(y, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if y.size != q.size:
        raise ValueError("state and slack must have equal length")
    if tol_y is None:
        tol_y = default_tol_y(y)
    if tol_q is None:
        tol_q = default_tol_q(g)

    inactive_mask = np.abs(y) > tol_y
    slack_gap = np.abs(q - g * np.sign(y))
    bad = inactive_mask & (slack_gap > tol_q)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ValueError(
            f"inconsistent slackness at index {i}: |y|={abs(y[i]):.3e} but "
            f"|q - g*sign(y)|={slack_gap[i]:.3e} > tol_q={tol_q:.3e}"
        )

    active_mask = ~inactive_mask
    biactive_mask = active_mask & (np.abs(q) >= g - tol_q)
    strongly_mask = active_mask & ~biactive_mask

    inactive = np.flatnonzero(inactive_mask)
    biactive = np.flatnonzero(biactive_mask)
    return IndexSets(
        inactive=inactive,
        inactive_plus=np.flatnonzero(inactive_mask & (y > 0)),
        inactive_minus=np.flatnonzero(inactive_mask & (y < 0)),
        strongly_active=np.flatnonzero(strongly_mask),
        biactive=biactive,
        biactive_plus=np.flatnonzero(biactive_mask & (q > 0)),
        biactive_minus=np.flatnonzero(biactive_mask & (q < 0)),
        tol_y=float(tol_y),
        tol_q=float(tol_q),
    )
