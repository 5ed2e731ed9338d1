"""Problem instances and admissibility validation.

A complete instance bundles the diffusion coefficient a(x, y) with its claimed
uniform bounds, the initial and boundary data, and the time horizon.  The
admissibility conditions (uniform ellipticity, a C^3-norm cap, matching corner
data) are analytic hypotheses; they are checked here by dense sampling with
symbolic derivatives, which is adequate at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expr import ExprAst, differentiate, evaluate, evaluate_on

__all__ = [
    "ProblemError",
    "CoefficientSpec",
    "DataSpec",
    "ProblemSpec",
    "EstimateWindow",
    "BoundsReport",
    "CompatReport",
    "validate_bounds",
    "check_compatibility",
    "solution_range",
    "validate_problem",
]

CORNER_TOL = 1e-12


class ProblemError(ValueError):
    pass


@dataclass(frozen=True)
class CoefficientSpec:
    """Coefficient a(x, y) with claimed bounds 0 < a_lo <= a <= a_hi and C^3 cap."""

    a: ExprAst
    a_lo: float
    a_hi: float
    c3_bound: float

    def __post_init__(self):
        if len(self.a.variables) != 2:
            raise ProblemError("coefficient must be declared in two variables (x, y)")
        if not (0.0 < self.a_lo <= self.a_hi < np.inf):
            raise ProblemError("need 0 < a_lo <= a_hi < inf")
        if not (0.0 < self.c3_bound < np.inf):
            raise ProblemError("need a finite positive c3_bound")

    @property
    def x_var(self) -> str:
        return self.a.variables[0]

    @property
    def y_var(self) -> str:
        return self.a.variables[1]


@dataclass(frozen=True)
class DataSpec:
    """Initial profile phi(x) and boundary traces g0(t), g1(t)."""

    phi: ExprAst
    g0: ExprAst
    g1: ExprAst

    def __post_init__(self):
        for name, ast in (("phi", self.phi), ("g0", self.g0), ("g1", self.g1)):
            if len(ast.variables) != 1:
                raise ProblemError(f"{name} must be declared in one variable")

    def corners(self) -> dict[str, float]:
        xv = self.phi.variables[0]
        t0 = self.g0.variables[0]
        t1 = self.g1.variables[0]
        return {
            "phi_left": evaluate(self.phi, {xv: 0.0}),
            "phi_right": evaluate(self.phi, {xv: 1.0}),
            "g0_start": evaluate(self.g0, {t0: 0.0}),
            "g1_start": evaluate(self.g1, {t1: 0.0}),
        }


@dataclass(frozen=True)
class ProblemSpec:
    coefficient: CoefficientSpec
    data: DataSpec
    horizon: float

    def __post_init__(self):
        if not self.horizon > 0:
            raise ProblemError("need horizon > 0")


@dataclass(frozen=True)
class EstimateWindow:
    """Interior region: t in [t_start, t_end], x in [x_margin, 1 - x_margin]."""

    t_start: float
    x_margin: float
    t_end: float

    def __post_init__(self):
        if not 0.0 < self.x_margin < 0.5:
            raise ProblemError("need 0 < x_margin < 1/2")
        if not 0.0 < self.t_start <= self.t_end:
            raise ProblemError("need 0 < t_start <= t_end")


@dataclass(frozen=True)
class BoundsReport:
    passed: bool
    a_min: float
    a_max: float
    range_ok: bool
    c3_sup: float
    c3_ok: bool
    y_range: tuple[float, float]
    lattice: tuple[int, int]
    violation: str | None = None


@dataclass(frozen=True)
class CompatReport:
    passed: bool
    passed_strict: bool
    residual_left: float
    residual_right: float
    corners: dict = field(default_factory=dict)


def validate_bounds(spec: CoefficientSpec, y_range, lattice=(201, 201)) -> BoundsReport:
    """Sample a and its partials up to total order 3 on [0,1] x y_range."""
    y_lo, y_hi = float(y_range[0]), float(y_range[1])
    if not y_lo < y_hi:
        raise ProblemError("y_range must be a nondegenerate interval")
    nx, ny = lattice
    xs = np.linspace(0.0, 1.0, nx)
    ys = np.linspace(y_lo, y_hi, ny)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    env = {spec.x_var: xx, spec.y_var: yy}

    a_vals = evaluate_on(spec.a, env)
    a_min = float(a_vals.min())
    a_max = float(a_vals.max())
    range_ok = (a_min >= spec.a_lo - 1e-12) and (a_max <= spec.a_hi + 1e-12)
    violation = None
    if not range_ok:
        flat = np.argmin(a_vals) if a_min < spec.a_lo else np.argmax(a_vals)
        i, j = np.unravel_index(flat, a_vals.shape)
        violation = (
            f"coefficient value {a_vals[i, j]:.6g} at "
            f"(x={xs[i]:.6g}, y={ys[j]:.6g}) outside [{spec.a_lo:g}, {spec.a_hi:g}]"
        )

    # all partial derivatives up to total order 3, by repeated symbolic diff
    derivs = {(0, 0): spec.a}
    for order in range(3):
        for (i, j), ast in list(derivs.items()):
            if i + j == order:
                derivs[(i + 1, j)] = differentiate(ast, spec.x_var)
                derivs[(i, j + 1)] = differentiate(ast, spec.y_var)
    c3_sup = max(float(np.max(np.abs(evaluate_on(ast, env)))) for ast in derivs.values())
    c3_ok = c3_sup <= spec.c3_bound * (1 + 1e-12)
    if not c3_ok and violation is None:
        violation = f"sampled C3 norm {c3_sup:.6g} exceeds claimed bound {spec.c3_bound:g}"

    return BoundsReport(
        passed=range_ok and c3_ok,
        a_min=a_min,
        a_max=a_max,
        range_ok=range_ok,
        c3_sup=c3_sup,
        c3_ok=c3_ok,
        y_range=(y_lo, y_hi),
        lattice=(nx, ny),
        violation=violation,
    )


def check_compatibility(data: DataSpec, strict_zero: bool = False) -> CompatReport:
    """Corner residuals g0(0)-phi(0), g1(0)-phi(1); strict mode wants all zero."""
    corners = data.corners()
    residual_left = corners["g0_start"] - corners["phi_left"]
    residual_right = corners["g1_start"] - corners["phi_right"]
    passed = abs(residual_left) <= CORNER_TOL and abs(residual_right) <= CORNER_TOL
    passed_strict = passed and all(abs(v) <= CORNER_TOL for v in corners.values())
    if strict_zero:
        passed = passed_strict
    return CompatReport(
        passed=passed,
        passed_strict=passed_strict,
        residual_left=residual_left,
        residual_right=residual_right,
        corners=corners,
    )


def solution_range(data: DataSpec, T: float, n: int = 201) -> tuple[float, float]:
    """A-priori range of the solution: the data range, widened by 5% per side.

    By the maximum principle the solution stays inside the range of the initial
    and boundary data, so this interval is where the coefficient bounds matter.
    """
    if T <= 0:
        raise ProblemError("need T > 0")
    xv = data.phi.variables[0]
    t0 = data.g0.variables[0]
    t1 = data.g1.variables[0]
    xs = np.linspace(0.0, 1.0, n)
    ts = np.linspace(0.0, T, n)
    samples = np.concatenate(
        [
            evaluate_on(data.phi, {xv: xs}),
            evaluate_on(data.g0, {t0: ts}),
            evaluate_on(data.g1, {t1: ts}),
        ]
    )
    lo = float(samples.min())
    hi = float(samples.max())
    pad = 0.05 * (hi - lo)
    if pad == 0.0:
        pad = 0.05
    return lo - pad, hi + pad


def validate_problem(spec: ProblemSpec, strict_zero: bool = False, lattice=(201, 201)):
    """Run the range and compatibility checks; raise on the first failure."""
    compat = check_compatibility(spec.data, strict_zero=strict_zero)
    if not compat.passed:
        raise ProblemError(
            "corner compatibility violated: "
            f"g0(0)-phi(0)={compat.residual_left:.3e}, "
            f"g1(0)-phi(1)={compat.residual_right:.3e}"
            + (", strict zero corners required" if strict_zero else "")
        )
    y_range = solution_range(spec.data, spec.horizon)
    bounds = validate_bounds(spec.coefficient, y_range, lattice=lattice)
    if not bounds.passed:
        raise ProblemError(f"coefficient bounds violated: {bounds.violation}")
    return bounds, compat, y_range
