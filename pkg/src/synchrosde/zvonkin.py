"""Intermediate drift construction and the partial scale transform.

The troublesome drift component alpha is not removed outright.  Instead an
odd, bounded, Lipschitz, integrable intermediate function gamma is built so
that the space change

    s(x) = int_0^x exp( -2 int_0^y (alpha(z) - gamma(z)) / sigma(z)^2 dz ) dy

removes exactly alpha - gamma from the dynamics.  gamma is shaped so that
the transformed state map ``tilde_id = (s' o s^-1) * s^-1`` keeps slope at
least 1/2, which is what makes the transformed drift dissipative for large
lambda.

Numerics: s' and s are tabulated on a uniform grid with all AST breakpoints
of alpha, gamma, sigma inserted as nodes.  Cell integrals use composite
trapezoid, except cells touching a breakpoint, which are sampled at their
midpoint; piecewise-linear integrands are therefore integrated exactly and
jumps never get evaluated at the discontinuity itself.  Outside [-R, R] the
tabulated s extends linearly with the recorded boundary slopes, exact under
compact support and dressed with the analytic envelope tail otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .funcspec import (
    BinOp,
    Compose,
    Const,
    Func,
    FunctionDescriptor,
    Indicator,
    PiecewiseLinear,
    Var,
    breakpoints,
    evaluate,
    evaluate_array,
    proved_support_radius,
    tail_l1_mass,
)
from .model import MODE_A3, MODE_A3PRIME, ModelError, SDEModel, union_grid

__all__ = [
    "ConstructionError",
    "RefinementError",
    "GammaConstruction",
    "ScaleTransform",
    "TransformedModel",
    "build_gamma",
    "build_scale",
    "scale",
    "scale_prime",
    "inverse_scale",
    "transformed_coefficients",
    "check_slope",
    "transform_table_rows",
]

SLOPE_THRESHOLD = 0.5 - 1e-6


class ConstructionError(RuntimeError):
    """A structural guarantee of the construction failed numerically."""

    def __init__(self, message: str, witness: float | None = None):
        super().__init__(message)
        self.witness = witness


class RefinementError(RuntimeError):
    """The quadrature grid is too coarse for the requested transform."""


# ---------------------------------------------------------------------------
# Intermediate drift gamma
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GammaConstruction:
    """Odd intermediate drift, with its exact construction constants."""

    gamma: FunctionDescriptor
    delta: float  # +inf sentinel when alpha == 0
    mode: str
    lipschitz: float
    sup: float
    l1: float


def build_gamma(model: SDEModel) -> GammaConstruction:
    """Build gamma for the model's regime.

    delta = c_sigma / (4 * sup|alpha|); under A3 gamma ramps linearly to
    sup|alpha| on [0, delta], plateaus to N_alpha, and falls back to 0 at
    N_alpha + 1; under A3prime gamma follows the envelope g beyond delta
    and is linearized through the origin inside [-delta, delta].
    """
    sup_alpha = model.sup_alpha
    c_sigma = model.c_sigma
    if c_sigma <= 0:
        raise ModelError("cannot build gamma: sigma is not uniformly elliptic on the grid")

    if sup_alpha == 0.0:
        zero = FunctionDescriptor(ast=Const(0.0))
        return GammaConstruction(
            gamma=zero, delta=math.inf, mode=model.mode, lipschitz=0.0, sup=0.0, l1=0.0
        )

    delta = c_sigma / (4.0 * sup_alpha)

    if model.mode == MODE_A3:
        n_alpha = model.n_alpha
        if n_alpha is None:
            raise ModelError("mode A3 requires alpha with AST-provable compact support")
        # The plateau [delta, N_alpha] must be non-degenerate; shrinking delta
        # only improves the slope bound, so clamp it to N_alpha.
        delta = min(delta, n_alpha)
        a = sup_alpha
        knots = [
            (-(n_alpha + 1.0), 0.0),
            (-n_alpha, -a),
            (-delta, -a),
            (0.0, 0.0),
            (delta, a),
            (n_alpha, a),
            (n_alpha + 1.0, 0.0),
        ]
        xs, ys = [], []
        for x, y in knots:
            if xs and x <= xs[-1]:
                continue
            xs.append(x)
            ys.append(y)
        gamma = FunctionDescriptor(ast=PiecewiseLinear(tuple(xs), tuple(ys)))
        lipschitz = max(a / delta, a)
        l1 = a * (2.0 * n_alpha - delta + 1.0)
        return GammaConstruction(
            gamma=gamma, delta=delta, mode=model.mode, lipschitz=lipschitz, sup=a, l1=l1
        )

    g = model.envelope_g
    if g is None:
        raise ModelError("mode A3prime requires an envelope function g")
    g_at_delta = evaluate(g, delta)
    if g_at_delta < 0:
        raise ModelError(f"envelope g must be nonnegative, g({delta}) = {g_at_delta}")
    ind = Indicator(-delta, delta)
    ramp = BinOp("*", BinOp("*", ind, Const(g_at_delta / delta)), Var())
    outside = BinOp(
        "*",
        BinOp("*", BinOp("-", Const(1.0), ind), Func("sgn", Var())),
        Compose(g.ast, Func("abs", Var())),
    )
    gamma = FunctionDescriptor(ast=BinOp("+", ramp, outside))

    gp = model.profiles["g"]
    lipschitz = max(g_at_delta / delta, gp.lipschitz)
    grid = union_grid(model.grid_radius, model.grid_step, (gamma,))
    gvals = np.abs(evaluate_array(gamma, grid))
    sup = float(gvals.max())
    tail = tail_l1_mass(g, model.grid_radius)
    l1 = float(np.trapezoid(gvals, grid)) + (tail if tail is not None else 0.0)
    return GammaConstruction(
        gamma=gamma, delta=delta, mode=model.mode, lipschitz=lipschitz, sup=sup, l1=l1
    )


# ---------------------------------------------------------------------------
# Scale transform
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScaleTransform:
    """Tabulated s, s' on a grid, with exact-quadrature constants."""

    grid_x: np.ndarray
    s_values: np.ndarray
    s_prime_values: np.ndarray
    L_s: float
    abs_integral: float  # int over [-R, R] of |alpha - gamma| / sigma^2, plus tail
    slope_left: float
    slope_right: float
    inversion_tol: float
    truncation_radius: float | None  # set when no closed-form tail was available

    @property
    def radius(self) -> float:
        return float(self.grid_x[-1])


def _cell_integrals(
    fvals: np.ndarray, fmid: np.ndarray, widths: np.ndarray, use_mid: np.ndarray
) -> np.ndarray:
    trap = 0.5 * (fvals[:-1] + fvals[1:]) * widths
    return np.where(use_mid, fmid * widths, trap)


def build_scale(
    model: SDEModel,
    gamma: GammaConstruction,
    radius: float | None = None,
    step: float | None = None,
) -> ScaleTransform:
    """Tabulate the scale transform for (model, gamma) on [-radius, radius].

    Under A3 the grid must cover the support of alpha - gamma (it is exact
    beyond); under A3prime the envelope's analytic tail mass is folded into
    L_s when the envelope admits one, else the truncation radius is recorded.
    """
    R = float(radius if radius is not None else model.grid_radius)
    h = float(step if step is not None else model.grid_step)
    if R <= 0 or h <= 0:
        raise ModelError("transform grid needs radius > 0 and step > 0")

    support = None
    for fn in (model.alpha, gamma.gamma):
        r = proved_support_radius(fn)
        if r is None:
            support = None
            break
        support = max(support or 0.0, r)
    if model.mode == MODE_A3:
        if support is None:
            raise ModelError("mode A3 requires compactly supported alpha and gamma")
        if R < support:
            raise ModelError(
                f"transform radius {R} does not cover the support radius {support} of alpha - gamma"
            )

    grid = union_grid(R, h, (model.alpha, gamma.gamma, model.sigma), one_sided=False)
    grid = np.unique(np.concatenate([grid, [0.0]]))
    bset = set()
    for fn in (model.alpha, gamma.gamma, model.sigma):
        bset.update(b for b in breakpoints(fn) if abs(b) <= R)
    is_bp = np.isin(grid, np.array(sorted(bset))) if bset else np.zeros(grid.shape, bool)
    use_mid = is_bp[:-1] | is_bp[1:]

    mids = 0.5 * (grid[:-1] + grid[1:])
    widths = np.diff(grid)

    def q(x: np.ndarray) -> np.ndarray:
        sig = evaluate_array(model.sigma, x)
        sig_sq = sig * sig
        if np.any(sig_sq == 0.0):
            raise ModelError("sigma vanishes inside the transform grid")
        return (evaluate_array(model.alpha, x) - evaluate_array(gamma.gamma, x)) / sig_sq

    q_nodes = q(grid)
    q_mids = q(mids)

    w = _cell_integrals(q_nodes, q_mids, widths, use_mid)
    a = _cell_integrals(np.abs(q_nodes), np.abs(q_mids), widths, use_mid)

    cum = np.concatenate([[0.0], np.cumsum(w)])
    j0 = int(np.searchsorted(grid, 0.0))
    inner = 2.0 * (cum - cum[j0])
    s_prime = np.exp(-inner)

    ratio = s_prime[1:] / s_prime[:-1]
    worst = float(np.abs(ratio - 1.0).max()) if ratio.size else 0.0
    if worst > 0.10:
        raise RefinementError(
            f"s' varies by {worst:.1%} between adjacent nodes; decrease the grid step h"
        )

    trap = 0.5 * (s_prime[:-1] + s_prime[1:]) * widths
    cum_s = np.concatenate([[0.0], np.cumsum(trap)])
    s_vals = cum_s - cum_s[j0]

    abs_total = float(np.sum(a))
    truncation_radius = None
    if model.mode == MODE_A3PRIME:
        tail = tail_l1_mass(model.envelope_g, R)
        if tail is None:
            truncation_radius = R
        else:
            # |alpha - gamma| <= 2 g beyond the grid, sigma^2 >= c_sigma
            abs_total += 2.0 * tail / model.c_sigma
    L_s = math.exp(2.0 * abs_total)

    if np.any(np.diff(s_vals) <= 0.0):
        raise ConstructionError("tabulated s is not strictly increasing")

    return ScaleTransform(
        grid_x=grid,
        s_values=s_vals,
        s_prime_values=s_prime,
        L_s=L_s,
        abs_integral=abs_total,
        slope_left=float(s_prime[0]),
        slope_right=float(s_prime[-1]),
        inversion_tol=1e-12,
        truncation_radius=truncation_radius,
    )


def _as_array(x) -> tuple[np.ndarray, bool]:
    scalar = np.isscalar(x) or getattr(x, "ndim", 1) == 0
    return np.atleast_1d(np.asarray(x, dtype=float)), scalar


def scale(t: ScaleTransform, x):
    """s(x) by piecewise-linear interpolation, linear beyond the grid."""
    xv, scalar = _as_array(x)
    out = np.interp(xv, t.grid_x, t.s_values)
    lo, hi = t.grid_x[0], t.grid_x[-1]
    out = np.where(xv < lo, t.s_values[0] + (xv - lo) * t.slope_left, out)
    out = np.where(xv > hi, t.s_values[-1] + (xv - hi) * t.slope_right, out)
    return float(out[0]) if scalar else out


def scale_prime(t: ScaleTransform, x):
    """s'(x); constant (the recorded boundary slope) beyond the grid."""
    xv, scalar = _as_array(x)
    out = np.interp(xv, t.grid_x, t.s_prime_values)
    return float(out[0]) if scalar else out


def _inverse_table(t: ScaleTransform, yv: np.ndarray) -> np.ndarray:
    """Linear-cell inverse of the tabulated s (exact up to roundoff), unguarded."""
    out = np.interp(yv, t.s_values, t.grid_x)
    lo, hi = t.s_values[0], t.s_values[-1]
    out = np.where(yv < lo, t.grid_x[0] + (yv - lo) / t.slope_left, out)
    out = np.where(yv > hi, t.grid_x[-1] + (yv - hi) / t.slope_right, out)
    return out


def inverse_scale(t: ScaleTransform, y):
    """Invert the tabulated monotone s to |s(x) - y| <= tol * max(1, |y|).

    Inside the table the bracketing cell is solved linearly (the exact
    inverse of the interpolant); a bisection pass cleans up any point whose
    residual still exceeds the tolerance.
    """
    yv, scalar = _as_array(y)
    out = _inverse_table(t, yv)

    tol = t.inversion_tol * np.maximum(1.0, np.abs(yv))
    resid = np.abs(scale(t, out) - yv)
    bad = resid > tol
    if np.any(bad):
        lo_b = np.full(out.shape, t.grid_x[0])
        hi_b = np.full(out.shape, t.grid_x[-1])
        for _ in range(200):
            mid = 0.5 * (lo_b + hi_b)
            fmid = scale(t, mid) - yv
            lo_b = np.where(bad & (fmid < 0), mid, lo_b)
            hi_b = np.where(bad & (fmid >= 0), mid, hi_b)
            out = np.where(bad, 0.5 * (lo_b + hi_b), out)
            resid = np.abs(scale(t, out) - yv)
            bad = bad & (resid > tol)
            if not np.any(bad):
                break
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Transformed coefficients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransformedModel:
    """Coefficient evaluators of the drift-cleaned SDE in s-coordinates."""

    base: SDEModel
    transform: ScaleTransform
    gamma: GammaConstruction

    def inverse(self, y):
        return inverse_scale(self.transform, y)

    def tilde_id(self, y):
        u = inverse_scale(self.transform, y)
        return scale_prime(self.transform, u) * u

    def tilde_beta(self, y):
        u = inverse_scale(self.transform, y)
        return scale_prime(self.transform, u) * self.base.beta(u)

    def tilde_gamma(self, y):
        u = inverse_scale(self.transform, y)
        return scale_prime(self.transform, u) * self.gamma.gamma(u)

    def tilde_sigma(self, y):
        u = inverse_scale(self.transform, y)
        return scale_prime(self.transform, u) * self.base.sigma(u)

    def drift(self, y):
        """-lambda * tilde_id + tilde_beta + tilde_gamma, sharing one inversion.

        Hot-loop evaluator: uses the unguarded table inverse, which is the
        exact inverse of the interpolated s up to roundoff.
        """
        u = _inverse_table(self.transform, np.asarray(y, dtype=float))
        sp = scale_prime(self.transform, u)
        return sp * (-self.base.lam * u + self.base.beta(u) + self.gamma.gamma(u))

    def diffusion(self, y):
        u = _inverse_table(self.transform, np.asarray(y, dtype=float))
        return scale_prime(self.transform, u) * self.base.sigma(u)

    def node_values(self):
        """(y, tilde_id, drift, diffusion) at the tabulated nodes, inversion-free."""
        t = self.transform
        x = t.grid_x
        sp = t.s_prime_values
        tid = sp * x
        drift = sp * (-self.base.lam * x + self.base.beta(x) + self.gamma.gamma(x))
        diff = sp * self.base.sigma(x)
        return t.s_values, tid, drift, diff

    def drift_dissipativity(self) -> float:
        """Min over tabulated node pairs of -(drift(y2)-drift(y1))/(y2-y1)."""
        y, _, drift, _ = self.node_values()
        quotients = np.diff(drift) / np.diff(y)
        return float(-np.max(quotients))


def transformed_coefficients(
    model: SDEModel, transform: ScaleTransform, gamma: GammaConstruction
) -> TransformedModel:
    tm = TransformedModel(base=model, transform=transform, gamma=gamma)
    tid0 = tm.tilde_id(0.0)
    if abs(tid0) > 1e-12:
        raise ConstructionError(f"tilde_id(0) = {tid0}, expected 0", witness=0.0)
    return tm


def check_slope(tm: TransformedModel, threshold: float = SLOPE_THRESHOLD) -> float:
    """Minimum finite-difference slope of tilde_id over the tabulated grid.

    Raises :class:`ConstructionError` with the witness point when the slope
    drops below the threshold, which indicates a broken gamma / delta / grid
    configuration rather than a tolerance issue.
    """
    y, tid, _, _ = tm.node_values()
    slopes = np.diff(tid) / np.diff(y)
    i = int(np.argmin(slopes))
    min_slope = float(slopes[i])
    if min_slope < threshold:
        witness = float(tm.transform.grid_x[i])
        raise ConstructionError(
            f"slope of tilde_id is {min_slope:.6g} < {threshold:.6g} near x = {witness:.6g}",
            witness=witness,
        )
    return min_slope


def transform_table_rows(tm: TransformedModel):
    """Rows (x, s, s_prime, gamma, alpha, tilde_id_slope) for CSV dumps."""
    t = tm.transform
    x = t.grid_x
    y, tid, _, _ = tm.node_values()
    slopes = np.diff(tid) / np.diff(y)
    slopes = np.concatenate([slopes, slopes[-1:]])  # last node repeats its cell slope
    gam = tm.gamma.gamma(x)
    alp = tm.base.alpha(x)
    return zip(x, t.s_values, t.s_prime_values, gam, alp, slopes)
