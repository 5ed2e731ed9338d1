"""Auxiliary decompositions of the solved field.

The frozen-coefficient equation is linear, so the solution splits exactly into
pieces driven by the initial profile and by each boundary trace, and each piece
splits further into comonotone barrier solutions whose difference reproduces
it.  All sub-problems reuse the master frozen coefficient by node-aligned
restriction; nothing is ever re-solved nonlinearly on a subdomain, so the
identities below hold to roundoff, not merely to discretization error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import ExprAst, differentiate, evaluate, evaluate_on
from .grid import Field, Grid1D, TimeGrid, diff_xx, running_total_variation
from .pde import LinearProblem, SolverConfig, solve_linear
from .problem import ProblemSpec

__all__ = [
    "DecompositionError",
    "ThreeWaySplit",
    "MonotoneSplit",
    "BarrierDiagnostics",
    "BarrierPair",
    "StripSplit",
    "split_three",
    "monotone_split",
    "build_barriers_boundary",
    "build_barriers_initial",
    "strip_split",
]

STRICT_CORNER_TOL = 1e-12


class DecompositionError(ValueError):
    pass


@dataclass(frozen=True)
class ThreeWaySplit:
    """Solution pieces driven by the initial profile, left trace, right trace."""

    initial_part: Field
    left_part: Field
    right_part: Field

    def total(self) -> np.ndarray:
        return self.initial_part.values + self.left_part.values + self.right_part.values


@dataclass(frozen=True)
class MonotoneSplit:
    """g = gain - loss with both parts nondecreasing from zero.

    ``gain + loss`` is the running total variation of g; the rate samples come
    from the exact derivative, so gain_rate + loss_rate = |g'| nodewise.
    """

    tgrid: TimeGrid
    gain: np.ndarray
    loss: np.ndarray
    gain_rate: np.ndarray
    loss_rate: np.ndarray


@dataclass(frozen=True)
class BarrierDiagnostics:
    """Sign facts for a barrier pair, measured the way the scheme preserves them.

    Time monotonicity is measured on one-step increments (forward differences),
    which is the discrete statement the implicit scheme propagates; convexity
    is measured on interior centered second differences.
    """

    min_dt_major: float
    min_dt_minor: float
    min_xx_major: float
    min_xx_minor: float


@dataclass(frozen=True)
class BarrierPair:
    major: Field
    minor: Field
    diagnostics: BarrierDiagnostics

    def difference(self) -> np.ndarray:
        return self.major.values - self.minor.values


@dataclass(frozen=True)
class StripSplit:
    """Restriction of the initial-driven piece to a strip.

    ``from_initial`` carries the initial profile with constant lateral data,
    ``from_boundary`` carries the strip-edge traces, and ``homogenized`` is
    ``from_initial`` minus the endpoint interpolant, with exactly zero lateral
    traces and the same mixed derivative.
    """

    from_initial: Field
    from_boundary: Field
    homogenized: Field
    x_lo_index: int
    x_hi_index: int


def _barrier_diagnostics(major: Field, minor: Field) -> BarrierDiagnostics:
    dt = major.tgrid.dt
    inc_major = np.diff(major.values, axis=0) / dt
    inc_minor = np.diff(minor.values, axis=0) / dt
    xx_major = diff_xx(major).values[:, 1:-1]
    xx_minor = diff_xx(minor).values[:, 1:-1]
    return BarrierDiagnostics(
        min_dt_major=float(inc_major.min()),
        min_dt_minor=float(inc_minor.min()),
        min_xx_major=float(xx_major.min()),
        min_xx_minor=float(xx_minor.min()),
    )


def split_three(abar: Field, spec: ProblemSpec, cfg: SolverConfig = SolverConfig()) -> ThreeWaySplit:
    """Three solves against the same frozen coefficient, one per data piece.

    Requires strictly zero corner data so that every sub-problem is corner
    compatible on its own.
    """
    data = spec.data
    corners = data.corners()
    scale = max(1.0, *(abs(v) for v in corners.values()))
    bad = {k: v for k, v in corners.items() if abs(v) > STRICT_CORNER_TOL * scale}
    if bad:
        raise DecompositionError(f"splitting needs zero corner data, got {bad}")
    grid, tgrid = abar.grid, abar.tgrid
    xs, ts = grid.nodes, tgrid.nodes
    phi_nodes = evaluate_on(data.phi, {data.phi.variables[0]: xs})
    g0_nodes = evaluate_on(data.g0, {data.g0.variables[0]: ts})
    g1_nodes = evaluate_on(data.g1, {data.g1.variables[0]: ts})
    zeros_t = np.zeros_like(ts)
    zeros_x = np.zeros_like(xs)

    def solve_piece(initial, left, right):
        problem = LinearProblem(grid, tgrid, abar.values, initial, left, right)
        return solve_linear(problem, cfg)

    return ThreeWaySplit(
        initial_part=solve_piece(phi_nodes, zeros_t, zeros_t),
        left_part=solve_piece(zeros_x, g0_nodes, zeros_t),
        right_part=solve_piece(zeros_x, zeros_t, g1_nodes),
    )


def monotone_split(g: ExprAst, tgrid: TimeGrid) -> MonotoneSplit:
    """Split g with g(0)=0 into nondecreasing gain/loss parts.

    gain = (V + g)/2 and loss = (V - g)/2 where V is the running total
    variation; V's increments dominate |g| increments exactly, so both parts
    are nondecreasing to roundoff while gain - loss = g holds nodewise.
    """
    (var,) = g.variables
    g0 = evaluate(g, {var: 0.0})
    if abs(g0) > STRICT_CORNER_TOL:
        raise DecompositionError(f"monotone split needs g(0)=0, got {g0:.3e}")
    nodes = tgrid.nodes
    variation = running_total_variation(g, tgrid)
    g_nodes = evaluate_on(g, {var: nodes})
    rate = evaluate_on(differentiate(g, var), {var: nodes})
    return MonotoneSplit(
        tgrid=tgrid,
        gain=0.5 * (variation + g_nodes),
        loss=0.5 * (variation - g_nodes),
        gain_rate=0.5 * (np.abs(rate) + rate),
        loss_rate=0.5 * (np.abs(rate) - rate),
    )


def build_barriers_boundary(
    abar: Field,
    side: str,
    g: ExprAst,
    cfg: SolverConfig = SolverConfig(),
) -> BarrierPair:
    """Barrier pair for a boundary-driven piece: solves with the gain/loss data.

    Both solutions have zero initial data and zero data on the opposite side,
    so each inherits the monotonicity of its driving trace; their difference
    reproduces the boundary-driven piece exactly by linearity.
    """
    if side not in ("left", "right"):
        raise DecompositionError("side must be 'left' or 'right'")
    grid, tgrid = abar.grid, abar.tgrid
    split = monotone_split(g, tgrid)
    zeros_t = np.zeros(tgrid.n_steps + 1)
    zeros_x = np.zeros(grid.n_cells + 1)

    def solve_piece(trace):
        left = trace if side == "left" else zeros_t
        right = trace if side == "right" else zeros_t
        problem = LinearProblem(grid, tgrid, abar.values, zeros_x, left, right)
        return solve_linear(problem, cfg)

    major = solve_piece(split.gain)
    minor = solve_piece(split.loss)
    return BarrierPair(major, minor, _barrier_diagnostics(major, minor))


def _double_integral_convex(magnitude: np.ndarray, dx: float) -> np.ndarray:
    """Second antiderivative of a nonnegative sample set, discretely convex.

    Built so that the centered second difference at interior nodes equals the
    sample there exactly; plain repeated trapezoid sums only achieve that up to
    a smoothing stencil, which would let the assembled barrier rows lose their
    convexity by O(dx^2).
    """
    n = magnitude.size
    out = np.empty(n)
    out[0] = 0.0
    out[1] = 0.5 * dx * dx * magnitude[0]
    for j in range(1, n - 1):
        out[j + 1] = 2.0 * out[j] - out[j - 1] + dx * dx * magnitude[j]
    return out


def build_barriers_initial(
    abar: Field,
    initial_part: Field,
    t_start: float,
    cfg: SolverConfig = SolverConfig(),
) -> BarrierPair:
    """Barrier pair for the initial-driven piece, restarted at t_start.

    The pair's starting rows are built from the double integral of the second
    derivative's magnitude: both rows are discretely convex, and their
    difference equals the restarted row exactly.  Forward in time both solve
    the frozen-coefficient equation with zero lateral data.  The right-corner
    values of the rows do not vanish, so each solve is corner-incompatible on
    its own (their difference is not); the scheme smooths the jump.
    """
    grid, tgrid = abar.grid, abar.tgrid
    m0 = tgrid.index_of(t_start)
    if tgrid.n_steps - m0 < 4:
        raise DecompositionError("restart time leaves fewer than 4 steps")
    row = initial_part.values[m0]
    curvature = diff_xx(initial_part).values[m0]
    hump = _double_integral_convex(np.abs(curvature), grid.dx)
    major_row = 0.5 * (hump + row)
    minor_row = 0.5 * (hump - row)
    sub_t = TimeGrid(float(tgrid.nodes[m0]), tgrid.t_hi, tgrid.n_steps - m0)
    zeros_t = np.zeros(sub_t.n_steps + 1)
    abar_sub = abar.values[m0:]

    def solve_piece(start_row):
        problem = LinearProblem(
            grid, sub_t, abar_sub, start_row, zeros_t, zeros_t, check_corners=False
        )
        return solve_linear(problem, cfg)

    major = solve_piece(major_row)
    minor = solve_piece(minor_row)
    return BarrierPair(major, minor, _barrier_diagnostics(major, minor))


def strip_split(
    abar: Field,
    initial_part: Field,
    phi: ExprAst,
    x_lo: float,
    x_hi: float,
    cfg: SolverConfig = SolverConfig(),
) -> StripSplit:
    """Split the initial-driven piece on a strip into initial and edge pieces."""
    grid, tgrid = abar.grid, abar.tgrid
    j0 = grid.index_of(x_lo)
    j1 = grid.index_of(x_hi)
    if not 0 < j0 < j1 < grid.n_cells:
        raise DecompositionError("strip endpoints must be interior nodes in order")
    if j1 - j0 < 4:
        raise DecompositionError("strip narrower than 4 cells")
    sub_grid = Grid1D(float(grid.nodes[j0]), float(grid.nodes[j1]), j1 - j0)
    xs = sub_grid.nodes
    xv = phi.variables[0]
    phi_nodes = evaluate_on(phi, {xv: xs})
    phi_lo = evaluate(phi, {xv: float(grid.nodes[j0])})
    phi_hi = evaluate(phi, {xv: float(grid.nodes[j1])})
    abar_sub = abar.values[:, j0 : j1 + 1]
    ones_t = np.ones(tgrid.n_steps + 1)

    from_initial = solve_linear(
        LinearProblem(sub_grid, tgrid, abar_sub, phi_nodes, phi_lo * ones_t, phi_hi * ones_t),
        cfg,
    )
    from_boundary = solve_linear(
        LinearProblem(
            sub_grid,
            tgrid,
            abar_sub,
            np.zeros_like(xs),
            initial_part.values[:, j0] - phi_lo,
            initial_part.values[:, j1] - phi_hi,
        ),
        cfg,
    )

    master = initial_part.values[:, j0 : j1 + 1]
    recombined = from_initial.values + from_boundary.values
    gap = float(np.max(np.abs(master - recombined)))
    scale = max(float(np.max(np.abs(master))), 1e-300)
    if gap > 1e-10 * scale:
        raise DecompositionError(f"strip pieces miss the master field by {gap:.3e}")

    interpolant = ((xs - xs[0]) * phi_hi + (xs[-1] - xs) * phi_lo) / (xs[-1] - xs[0])
    hom = from_initial.values - interpolant[None, :]
    hom[:, 0] = 0.0
    hom[:, -1] = 0.0
    homogenized = Field(sub_grid, tgrid, hom)
    return StripSplit(from_initial, from_boundary, homogenized, j0, j1)
