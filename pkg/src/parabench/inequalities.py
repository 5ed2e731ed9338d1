"""Property checks for two auxiliary integral inequalities with their constants.

Gronwall-type lemma.  If nonnegative continuous f, h and lam > 0 satisfy

    f(t)^2 <= exp(-lam t) * int_0^t exp(lam s) h(s) f(s) ds        (hypothesis)

for all t, then int_0^T f <= (2/lam) int_0^T h for every T >= 0.

Witness construction.  Random (f, h) pairs essentially never satisfy the
hypothesis, so witnesses come from the equality case: differentiating
f(t)^2 = exp(-lam t) int_0^t exp(lam s) h f ds gives 2 f f' = -lam f^2 + h f,
hence h = 2 f' + lam f wherever f > 0.  Any smooth f >= 0 with f(0) = 0 and
2 f' + lam f >= 0 therefore yields a valid pair, and the running integral of
exp(lam s) h f is exactly exp(lam t) f(t)^2, so the hypothesis can be verified
in closed form at construction time.  Multiplying h by an inflation factor
>= 1 only enlarges the right side and keeps the pair valid.

Poincare-type inequalities, both with constant 2 on an interval [a, b]:

    int f'^2 <= 2 (b-a)^2 int f''^2 + 2 (f(b) - f(a))^2 / (b-a)
    int f^2  <= 2 (b-a)^2 int f'^2  + 2 (b-a) f(a)^2

Hypothesis verification always precedes conclusion verification, and the two
failure modes stay distinct ("inapplicable" vs "fail"): a vacuous pass must
never look like a real one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .expr import ExprAst, differentiate, evaluate, evaluate_on
from .grid import TimeGrid
from .estimates import EstimateReport

__all__ = [
    "WitnessError",
    "GronwallTriple",
    "construct_gronwall_pair",
    "check_gronwall",
    "check_poincare_gradient",
    "check_poincare_value",
    "poincare_margins",
]

_trapz = getattr(np, "trapezoid", None) or np.trapz


class WitnessError(ValueError):
    pass


@dataclass(frozen=True)
class GronwallTriple:
    """Nonnegative samples f, h on a time grid together with the rate lam."""

    tgrid: TimeGrid
    f: np.ndarray
    h: np.ndarray
    lam: float

    def __post_init__(self):
        n = self.tgrid.n_steps + 1
        if self.f.shape != (n,) or self.h.shape != (n,):
            raise WitnessError("sample arrays do not match the time grid")
        if self.lam <= 0:
            raise WitnessError("lam must be positive")
        if np.any(self.f < 0) or np.any(self.h < 0):
            raise WitnessError("f and h must be nonnegative")


def construct_gronwall_pair(
    f: ExprAst, lam: float, inflation: float, tgrid: TimeGrid
) -> GronwallTriple:
    """Equality-case witness h = inflation * (2 f' + lam f); see module docs."""
    if inflation < 1.0:
        raise WitnessError("inflation must be >= 1")
    (var,) = f.variables
    ts = tgrid.nodes
    fv = evaluate_on(f, {var: ts})
    scale = max(float(np.max(np.abs(fv))), 1e-300)
    if fv.min() < -1e-12 * scale:
        j = int(np.argmin(fv))
        raise WitnessError(f"f must be nonnegative, f({ts[j]:.6g}) = {fv[j]:.3e}")
    f0 = evaluate(f, {var: 0.0})
    if abs(f0) > 1e-12 * max(scale, 1.0):
        raise WitnessError(f"equality construction needs f(0)=0, got {f0:.3e}")
    fp = evaluate_on(differentiate(f, var), {var: ts})
    base = 2.0 * fp + lam * fv
    if base.min() < -1e-12 * scale:
        j = int(np.argmin(base))
        raise WitnessError(
            f"need 2 f' + lam f >= 0, violated at t={ts[j]:.6g} ({base[j]:.3e})"
        )
    h = inflation * np.clip(base, 0.0, None)
    return GronwallTriple(tgrid, np.clip(fv, 0.0, None), h, lam)


def check_gronwall(
    triple: GronwallTriple,
    T: float,
    hypothesis_slack: float = 1e-8,
    conclusion_slack: float = 1e-6,
) -> EstimateReport:
    """Verify the hypothesis by cumulative quadrature, then the conclusion.

    A hypothesis violation beyond the slack makes the triple inapplicable;
    that is reported as its own status, never as a pass or a conclusion
    failure.
    """
    m1 = triple.tgrid.index_of(T)
    ts = triple.tgrid.nodes[: m1 + 1]
    f = triple.f[: m1 + 1]
    h = triple.h[: m1 + 1]
    lam = triple.lam
    weighted = np.exp(lam * ts) * h * f
    running = np.concatenate([[0.0], cumulative_trapezoid(weighted, ts)])
    bound = np.exp(-lam * ts) * running
    f2 = f * f
    scale = max(float(np.max(f2)), 1e-300)
    violation = float(np.max(f2 - bound))
    if violation > hypothesis_slack * scale:
        where = int(np.argmax(f2 - bound))
        return EstimateReport(
            name="gronwall",
            lhs=violation,
            rhs=hypothesis_slack * scale,
            constant_used=2.0 / lam,
            slack=hypothesis_slack,
            passed=False,
            status="inapplicable",
            horizon=float(ts[-1]),
            n_steps=m1,
            details={"note": f"hypothesis fails at t={ts[where]:.6g}"},
        )
    lhs = float(_trapz(f, ts))
    rhs = float((2.0 / lam) * _trapz(h, ts))
    tol = conclusion_slack * max(lhs, rhs, 1.0)
    ok = lhs <= rhs + tol
    report = EstimateReport(
        name="gronwall",
        lhs=lhs,
        rhs=rhs,
        constant_used=2.0 / lam,
        slack=conclusion_slack,
        passed=ok,
        status="pass" if ok else "fail",
        horizon=float(ts[-1]),
        n_steps=m1,
    )
    report.details["hypothesis_residual"] = violation
    return report


def _poincare_report(name, lhs, rhs, slack, n) -> EstimateReport:
    tol = slack * max(lhs, rhs, 1e-300)
    ok = lhs <= rhs + tol
    return EstimateReport(
        name=name,
        lhs=lhs,
        rhs=rhs,
        constant_used=2.0,
        slack=slack,
        passed=ok,
        status="pass" if ok else "fail",
        n_steps=n,
    )


def check_poincare_gradient(
    f: ExprAst, a: float, b: float, n: int = 2001, slack: float = 1e-9
) -> EstimateReport:
    """int f'^2 <= 2 (b-a)^2 int f''^2 + 2 (f(b)-f(a))^2 / (b-a)."""
    if not a < b:
        raise WitnessError("need a < b")
    (var,) = f.variables
    xs = np.linspace(a, b, n)
    fp_ast = differentiate(f, var)
    fp = evaluate_on(fp_ast, {var: xs})
    fpp = evaluate_on(differentiate(fp_ast, var), {var: xs})
    w = b - a
    lhs = float(_trapz(fp * fp, xs))
    jump = evaluate(f, {var: b}) - evaluate(f, {var: a})
    rhs = float(2.0 * w * w * _trapz(fpp * fpp, xs) + 2.0 * jump * jump / w)
    return _poincare_report("poincare_gradient", lhs, rhs, slack, n)


def check_poincare_value(
    f: ExprAst, a: float, b: float, n: int = 2001, slack: float = 1e-9
) -> EstimateReport:
    """int f^2 <= 2 (b-a)^2 int f'^2 + 2 (b-a) f(a)^2."""
    if not a < b:
        raise WitnessError("need a < b")
    (var,) = f.variables
    xs = np.linspace(a, b, n)
    fv = evaluate_on(f, {var: xs})
    fp = evaluate_on(differentiate(f, var), {var: xs})
    w = b - a
    lhs = float(_trapz(fv * fv, xs))
    left = evaluate(f, {var: a})
    rhs = float(2.0 * w * w * _trapz(fp * fp, xs) + 2.0 * w * left * left)
    return _poincare_report("poincare_value", lhs, rhs, slack, n)


def poincare_margins(f: ExprAst, a: np.ndarray, b: np.ndarray, n: int = 401):
    """Vectorized relative margins of both inequalities over many subintervals.

    Evaluates f, f', f'' on an (intervals x nodes) lattice in single calls, so
    large seeded sweeps stay cheap.  Returns (gradient_margins, value_margins),
    each (rhs - lhs) / max(rhs, lhs, tiny) per interval.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or np.any(a >= b):
        raise WitnessError("need elementwise a < b")
    (var,) = f.variables
    frac = np.linspace(0.0, 1.0, n)
    xs = a[:, None] + (b - a)[:, None] * frac[None, :]
    fp_ast = differentiate(f, var)
    fv = evaluate_on(f, {var: xs})
    fp = evaluate_on(fp_ast, {var: xs})
    fpp = evaluate_on(differentiate(fp_ast, var), {var: xs})
    w = b - a
    dx = w / (n - 1)

    def rows(y):
        return _trapz(y, dx=1.0, axis=1) * dx

    int_f2 = rows(fv * fv)
    int_fp2 = rows(fp * fp)
    int_fpp2 = rows(fpp * fpp)
    jump = fv[:, -1] - fv[:, 0]
    left = fv[:, 0]

    lhs_g = int_fp2
    rhs_g = 2.0 * w * w * int_fpp2 + 2.0 * jump * jump / w
    lhs_v = int_f2
    rhs_v = 2.0 * w * w * int_fp2 + 2.0 * w * left * left

    def rel(lhs, rhs):
        return (rhs - lhs) / np.maximum(np.maximum(rhs, lhs), 1e-300)

    return rel(lhs_g, rhs_g), rel(lhs_v, rhs_v)
