"""Builders for the Dirichlet-Laplacian control benchmark and parameter sweeps.

The benchmark tracks z(x1, x2) = 10 sin(5 x1) cos(4 x2) on the unit square
with the 5-point finite-difference Laplacian and homogeneous Dirichlet
boundary.  Interior nodes are ordered row-major with x1 varying fastest.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse

from .adjoint import ControlProblem
from .core import ViProblem
from .ssn import HuberParams
from .trust_region import OptimizeResult, TrustRegionConfig, optimize

ZERO_STATE_TOL = 0.0  # polished states carry exact zeros


@dataclass(frozen=True)
class GridSpec:
    """Uniform mesh on ]0,1[^2 with step 1/m; unknowns live at interior nodes."""

    m: int

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("mesh subdivision m must be at least 2")

    @property
    def h(self) -> float:
        return 1.0 / self.m

    @property
    def m_interior(self) -> int:
        return self.m - 1

    @property
    def n(self) -> int:
        return (self.m - 1) ** 2


def build_laplacian(grid: GridSpec) -> sparse.csr_array:
    """5-point negative-Laplacian stencil: 4/h^2 diagonal, -1/h^2 neighbors."""
    k = grid.m_interior
    scale = float(grid.m) ** 2
    main = 2.0 * np.ones(k)
    off = -np.ones(k - 1)
    t = sparse.diags([off, main, off], offsets=(-1, 0, 1), format="csr")
    eye = sparse.identity(k, format="csr")
    a = sparse.kron(eye, t) + sparse.kron(t, eye)
    return sparse.csr_array(a) * scale


def desired_state(grid: GridSpec) -> np.ndarray:
    """Target state 10 sin(5 x1) cos(4 x2) sampled at the interior nodes."""
    coords = np.arange(1, grid.m) * grid.h
    rows = np.cos(4.0 * coords)  # x2 index
    cols = np.sin(5.0 * coords)  # x1 index, fastest
    return 10.0 * np.outer(rows, cols).ravel()


def paper_example(alpha: float, g: float, grid: GridSpec) -> ControlProblem:
    """Assemble the benchmark control problem for the given weights."""
    if alpha <= 0.0 or g <= 0.0:
        raise ValueError("alpha and g must be positive")
    vi = ViProblem(build_laplacian(grid), g, np.zeros(grid.n))
    return ControlProblem(vi, alpha, desired_state(grid))


def tracking_control(cp: ControlProblem) -> np.ndarray:
    """Control whose VI solution is exactly the target state.

    u = A z + g*sign(z) makes y = z feasible with slack g*sign(z), giving a
    zero tracking term.  Starting here steers the optimizer into the dense
    (low-cost, barely sparse) basin.
    """
    return cp.vi.a @ cp.z + cp.vi.g * np.sign(cp.z)


def default_initial_control(cp: ControlProblem) -> np.ndarray:
    """Default start for the outer loop: the target state itself.

    The all-zero control is a stationary point of the reduced cost (the
    solution map vanishes on a whole box around the origin, so the reduced
    gradient is identically alpha*u there); u0 = z is the standard naive
    warm start that actually makes progress and favors sparse solutions.
    """
    return cp.z.copy()


def zero_fraction(y: np.ndarray, tol: float = ZERO_STATE_TOL) -> float:
    """Fraction of exactly-zero (or |.| <= tol) components of the state."""
    y = np.asarray(y, dtype=float)
    return float(np.count_nonzero(np.abs(y) <= tol)) / y.size


@dataclass
class SweepCell:
    alpha: float
    g: float
    iterations: int = 0
    converged: bool = False
    j_final: float = float("nan")
    zero_fraction: float = float("nan")
    u_final: np.ndarray | None = None
    error: str | None = None

    @property
    def label(self) -> str:
        return str(self.iterations) if self.converged else "NC"


@dataclass
class SweepResult:
    alphas: list[float]
    gs: list[float]
    cells: dict = field(default_factory=dict)

    def cell(self, alpha: float, g: float) -> SweepCell:
        return self.cells[(alpha, g)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["alpha\\g"] + [f"{g:.10g}" for g in self.gs])
        for alpha in self.alphas:
            writer.writerow(
                [f"{alpha:.10g}"] + [self.cells[(alpha, g)].label for g in self.gs]
            )
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv())


def _run_cell(args: tuple) -> SweepCell:
    alpha, g, m, cfg, params = args
    cell = SweepCell(alpha=alpha, g=g)
    try:
        cp = paper_example(alpha, g, GridSpec(m))
        result = optimize(cp, cfg, params, default_initial_control(cp))
        cell.iterations = result.iterations
        cell.converged = result.converged
        cell.j_final = cp.cost_of(result.y_final, result.u_final)
        cell.zero_fraction = zero_fraction(result.y_final)
        cell.u_final = result.u_final
    except Exception as exc:  # cell failures are data, not fatal
        cell.error = f"{type(exc).__name__}: {exc}"
    return cell


def sweep(
    alphas: list[float],
    gs: list[float],
    grid: GridSpec,
    cfg: TrustRegionConfig,
    params: HuberParams,
    jobs: int = 1,
) -> SweepResult:
    """Run the optimizer over every (alpha, g) cell; failures never abort."""
    if not alphas or not gs:
        raise ValueError("sweep needs at least one alpha and one g value")
    result = SweepResult(alphas=list(alphas), gs=list(gs))
    tasks = [(alpha, g, grid.m, cfg, params) for alpha in alphas for g in gs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_run_cell, tasks))
    else:
        cells = [_run_cell(t) for t in tasks]
    for cell in cells:
        result.cells[(cell.alpha, cell.g)] = cell
    return result


def state_grid_csv(y: np.ndarray, grid: GridSpec) -> str:
    """Dump a nodal field as an (m-1) x (m-1) CSV grid (rows follow x2)."""
    values = np.asarray(y, dtype=float).reshape(grid.m_interior, grid.m_interior)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in values:
        writer.writerow([f"{v:.10g}" for v in row])
    return buf.getvalue()
