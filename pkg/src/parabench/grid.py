"""Uniform space-time grids, sampled fields, difference operators, quadrature.

Everything downstream measures on node-aligned subsets of one master grid, so
no interpolation error ever enters an inequality check.  Difference stencils
are second order: centered in the interior, one-sided at the edges.  Quadrature
is the composite trapezoid rule (integrands like |u_t| have kinks at sign
changes, where higher-order rules buy nothing).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .expr import ExprAst, differentiate, evaluate_on

__all__ = [
    "GridError",
    "Grid1D",
    "TimeGrid",
    "Field",
    "diff_x",
    "diff_xx",
    "diff_t",
    "diff_tx",
    "integrate_x",
    "integrate_t",
    "integrate_xt",
    "total_variation",
    "running_total_variation",
    "write_field_csv",
    "read_field_csv",
]

_trapz = getattr(np, "trapezoid", None) or np.trapz


class GridError(ValueError):
    pass


def _index_of(nodes: np.ndarray, value: float, span: float) -> int:
    j = int(np.argmin(np.abs(nodes - value)))
    if abs(nodes[j] - value) > 1e-9 * span:
        raise GridError(f"{value!r} is not a grid node (nearest {nodes[j]!r})")
    return j


@dataclass(frozen=True)
class Grid1D:
    x_lo: float
    x_hi: float
    n_cells: int

    def __post_init__(self):
        if not self.x_lo < self.x_hi:
            raise GridError("need x_lo < x_hi")
        if self.n_cells < 4:
            raise GridError("need at least 4 cells")

    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / self.n_cells

    @cached_property
    def nodes(self) -> np.ndarray:
        xs = np.linspace(self.x_lo, self.x_hi, self.n_cells + 1)
        xs.flags.writeable = False
        return xs

    def index_of(self, x: float) -> int:
        return _index_of(self.nodes, x, self.x_hi - self.x_lo)

    def snap(self, x: float) -> tuple[int, float]:
        """Nearest node index and coordinate (no alignment requirement)."""
        j = int(np.argmin(np.abs(self.nodes - x)))
        return j, float(self.nodes[j])


@dataclass(frozen=True)
class TimeGrid:
    t_lo: float
    t_hi: float
    n_steps: int

    def __post_init__(self):
        if not self.t_lo < self.t_hi:
            raise GridError("need t_lo < t_hi")
        if self.n_steps < 4:
            raise GridError("need at least 4 steps")

    @property
    def dt(self) -> float:
        return (self.t_hi - self.t_lo) / self.n_steps

    @cached_property
    def nodes(self) -> np.ndarray:
        ts = np.linspace(self.t_lo, self.t_hi, self.n_steps + 1)
        ts.flags.writeable = False
        return ts

    def index_of(self, t: float) -> int:
        return _index_of(self.nodes, t, self.t_hi - self.t_lo)

    def snap(self, t: float) -> tuple[int, float]:
        m = int(np.argmin(np.abs(self.nodes - t)))
        return m, float(self.nodes[m])


@dataclass(frozen=True)
class Field:
    """A scalar function sampled on (time node, space node)."""

    grid: Grid1D
    tgrid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        expected = (self.tgrid.n_steps + 1, self.grid.n_cells + 1)
        if vals.shape != expected:
            raise GridError(f"field shape {vals.shape} does not match grids {expected}")
        if not np.all(np.isfinite(vals)):
            bad = np.argwhere(~np.isfinite(vals))[0]
            raise GridError(f"non-finite value at (time {bad[0]}, space {bad[1]})")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def sample(cls, grid: Grid1D, tgrid: TimeGrid, fn) -> "Field":
        tt, xx = np.meshgrid(tgrid.nodes, grid.nodes, indexing="ij")
        return cls(grid, tgrid, fn(tt, xx))

    @property
    def scale(self) -> float:
        return float(np.max(np.abs(self.values)))

    def restrict(self, t_lo=None, t_hi=None, x_lo=None, x_hi=None) -> "Field":
        """Node-aligned restriction to a subrectangle."""
        m0 = 0 if t_lo is None else self.tgrid.index_of(t_lo)
        m1 = self.tgrid.n_steps if t_hi is None else self.tgrid.index_of(t_hi)
        j0 = 0 if x_lo is None else self.grid.index_of(x_lo)
        j1 = self.grid.n_cells if x_hi is None else self.grid.index_of(x_hi)
        if m1 - m0 < 4 or j1 - j0 < 4:
            raise GridError("restriction leaves fewer than 4 cells")
        sub_g = Grid1D(float(self.grid.nodes[j0]), float(self.grid.nodes[j1]), j1 - j0)
        sub_t = TimeGrid(float(self.tgrid.nodes[m0]), float(self.tgrid.nodes[m1]), m1 - m0)
        return Field(sub_g, sub_t, self.values[m0 : m1 + 1, j0 : j1 + 1])


# --- difference operators ----------------------------------------------------


def _first_derivative(vals: np.ndarray, h: float, axis: int) -> np.ndarray:
    v = np.moveaxis(vals, axis, 0)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    out[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
    return np.moveaxis(out, 0, axis)


def _second_derivative(vals: np.ndarray, h: float, axis: int) -> np.ndarray:
    v = np.moveaxis(vals, axis, 0)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (h * h)
    out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (h * h)
    out[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / (h * h)
    return np.moveaxis(out, 0, axis)


def diff_x(f: Field) -> Field:
    return Field(f.grid, f.tgrid, _first_derivative(f.values, f.grid.dx, axis=1))


def diff_xx(f: Field) -> Field:
    return Field(f.grid, f.tgrid, _second_derivative(f.values, f.grid.dx, axis=1))


def diff_t(f: Field) -> Field:
    return Field(f.grid, f.tgrid, _first_derivative(f.values, f.tgrid.dt, axis=0))


def diff_tx(f: Field) -> Field:
    return diff_t(diff_x(f))


# --- quadrature --------------------------------------------------------------


def integrate_x(f: Field, t_index: int, x_lo: float, x_hi: float) -> float:
    j0 = f.grid.index_of(x_lo)
    j1 = f.grid.index_of(x_hi)
    if j1 == j0:
        return 0.0
    return float(_trapz(f.values[t_index, j0 : j1 + 1], dx=f.grid.dx))


def integrate_t(f: Field, x_index: int, t_lo: float, t_hi: float) -> float:
    m0 = f.tgrid.index_of(t_lo)
    m1 = f.tgrid.index_of(t_hi)
    if m1 == m0:
        return 0.0
    return float(_trapz(f.values[m0 : m1 + 1, x_index], dx=f.tgrid.dt))


def integrate_xt(f: Field, t_lo: float, t_hi: float, x_lo: float, x_hi: float) -> float:
    m0 = f.tgrid.index_of(t_lo)
    m1 = f.tgrid.index_of(t_hi)
    j0 = f.grid.index_of(x_lo)
    j1 = f.grid.index_of(x_hi)
    if m1 == m0 or j1 == j0:
        return 0.0
    block = f.values[m0 : m1 + 1, j0 : j1 + 1]
    lines = _trapz(block, dx=f.grid.dx, axis=1)
    return float(_trapz(lines, dx=f.tgrid.dt))


def total_variation(g: ExprAst, T: float, n: int = 4096) -> float:
    """Trapezoid quadrature of |g'| on [0, T] with a symbolic derivative."""
    if T <= 0:
        raise GridError("need T > 0")
    if n < 8:
        raise GridError("need at least 8 quadrature nodes")
    (var,) = g.variables
    ts = np.linspace(0.0, T, n)
    rate = np.abs(evaluate_on(differentiate(g, var), {var: ts}))
    return float(_trapz(rate, dx=ts[1] - ts[0]))


def running_total_variation(g: ExprAst, tgrid: TimeGrid, probes_per_step: int = 8) -> np.ndarray:
    """Exact running total variation of g evaluated at the time nodes.

    Sign changes of g' inside each step are isolated by bisection, then the
    variation accumulates as sums of |g(b)-g(a)| over monotone pieces.  Unlike
    plain quadrature of |g'| this is monotone to roundoff and exact for C^1
    data, which the comonotone decompositions downstream rely on.
    """
    (var,) = g.variables
    dg = differentiate(g, var)
    nodes = tgrid.nodes
    fine = np.linspace(nodes[0], nodes[-1], tgrid.n_steps * probes_per_step + 1)
    slopes = evaluate_on(dg, {var: fine})
    flip = np.nonzero(slopes[:-1] * slopes[1:] < 0.0)[0]
    lo, hi = fine[flip].copy(), fine[flip + 1].copy()
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        sm = evaluate_on(dg, {var: mid})
        left = sm * slopes[flip] > 0.0
        lo = np.where(left, mid, lo)
        hi = np.where(left, hi, mid)
    roots = 0.5 * (lo + hi)
    breakpoints = np.unique(np.concatenate([nodes, roots]))
    gb = evaluate_on(g, {var: breakpoints})
    pieces = np.abs(np.diff(gb))
    cum = np.concatenate([[0.0], np.cumsum(pieces)])
    where = np.searchsorted(breakpoints, nodes)
    return cum[where]


# --- CSV serialization --------------------------------------------------------


def write_field_csv(f: Field, path) -> None:
    """One row per time node; header row of x coordinates; first column t."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [repr(float(x)) for x in f.grid.nodes])
        for m, t in enumerate(f.tgrid.nodes):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in f.values[m]])


def read_field_csv(path) -> Field:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    xs = np.array([float(v) for v in rows[0][1:]])
    ts = np.array([float(r[0]) for r in rows[1:]])
    values = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    grid = Grid1D(float(xs[0]), float(xs[-1]), len(xs) - 1)
    tgrid = TimeGrid(float(ts[0]), float(ts[-1]), len(ts) - 1)
    return Field(grid, tgrid, values)
