"""Explicit synchronization constants.

Every constant comes in two variants:

* ``exact_quadrature``: built from the tabulated transform (quadrature L_s,
  grid suprema with one-sided limits at breakpoints).  This is the tight,
  desk-scale number.
* ``paper_closed_form``: closed-form upper bounds that use only the raw
  model parameters (no gamma, no quadrature).  These are astronomically
  conservative by design (factors like e^32 for the canonical model) but
  they bound the exact variant, which is checked as a property.

The chain, with L_f denoting a Lipschitz constant of f:

    L_s' = 2 * sup|gamma - alpha| / c_sigma * L_s
    L_tg = (L_s * L_gamma + sup|gamma| * L_s') * L_s
    L_tb = (L_s * L_beta  + sup|beta|  * L_s') * L_s     (sup local under A3)
    L_ts = (L_s * L_sigma + sup|sigma| * L_s') * L_s

    lambda0  = 2 * (L_tb + L_tg)
    c_lambda = lambda/2 - L_tb - L_tg          (positive iff lambda > lambda0)
    prefactor C = L_s
    c_lambda_p = p * c_lambda - p*(p-1)/2 * L_ts^2   (p-th moment decay rate)

For the regular dissipative problem the rates are D_b (almost sure, any
c < D_b) and c_p = D_b - (p-1)/2 * L_sigma^2 (p-norm decay).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .funcspec import evaluate_array
from .model import MODE_A3, DissipativeModel, ModelError, SDEModel, union_grid
from .zvonkin import GammaConstruction, ScaleTransform

__all__ = [
    "TransformedLipschitz",
    "ConstantsReport",
    "Prop1Rates",
    "lipschitz_constants",
    "synchronization_constants",
    "paper_closed_form_bound",
    "closed_form_scale_bounds",
    "compute_constants",
    "prop1_constants",
]


def _sup_abs(fn, radius: float, step: float) -> float:
    """sup |fn| over the union grid on [-radius, radius] incl. one-sided limits."""
    grid = union_grid(radius, step, (fn,), one_sided=True)
    return float(np.abs(evaluate_array(fn, grid)).max())


def _sup_abs_diff(f, g, radius: float, step: float) -> float:
    grid = union_grid(radius, step, (f, g), one_sided=True)
    return float(np.abs(evaluate_array(f, grid) - evaluate_array(g, grid)).max())


@dataclass(frozen=True)
class TransformedLipschitz:
    """Lipschitz data of the transformed coefficients (exact-quadrature route)."""

    L_s: float
    L_s_prime: float
    L_gamma: float
    sup_gamma: float
    sup_gamma_minus_alpha: float
    L_beta: float
    L_sigma: float
    sup_beta: float  # local sup over |x| <= N_alpha + 1 under A3, global otherwise
    sup_sigma: float
    L_tilde_beta: float
    L_tilde_gamma: float
    L_tilde_sigma: float


def lipschitz_constants(
    model: SDEModel, transform: ScaleTransform, gamma: GammaConstruction
) -> TransformedLipschitz:
    """Lipschitz constants of tilde_beta, tilde_gamma, tilde_sigma.

    Uses the exact-quadrature L_s from the transform; under A3 the suprema
    of beta and sigma are taken over |x| <= N_alpha + 1 only, which is what
    makes unbounded Lipschitz beta/sigma admissible there.
    """
    c_sigma = model.c_sigma
    if c_sigma <= 0:
        raise ModelError("constants need a uniformly elliptic sigma (c_sigma > 0)")
    h = model.grid_step
    L_s = transform.L_s

    sup_diff = _sup_abs_diff(gamma.gamma, model.alpha, model.grid_radius, h)
    L_s_prime = 2.0 * sup_diff / c_sigma * L_s

    L_beta = model.profiles["beta"].lipschitz
    L_sigma = model.profiles["sigma"].lipschitz
    if model.mode == MODE_A3:
        n_alpha = model.n_alpha
        if n_alpha is None:
            raise ModelError("mode A3 requires a provable support radius for alpha")
        local = n_alpha + 1.0
        sup_beta = _sup_abs(model.beta, local, h)
        sup_sigma = _sup_abs(model.sigma, local, h)
    else:
        sup_beta = model.profiles["beta"].sup_norm
        sup_sigma = model.profiles["sigma"].sup_norm
        if not (math.isfinite(sup_beta) and math.isfinite(sup_sigma)):
            raise ModelError("mode A3prime requires bounded beta and sigma")

    L_tilde_beta = (L_s * L_beta + sup_beta * L_s_prime) * L_s
    L_tilde_gamma = (L_s * gamma.lipschitz + gamma.sup * L_s_prime) * L_s
    L_tilde_sigma = (L_s * L_sigma + sup_sigma * L_s_prime) * L_s

    return TransformedLipschitz(
        L_s=L_s,
        L_s_prime=L_s_prime,
        L_gamma=gamma.lipschitz,
        sup_gamma=gamma.sup,
        sup_gamma_minus_alpha=sup_diff,
        L_beta=L_beta,
        L_sigma=L_sigma,
        sup_beta=sup_beta,
        sup_sigma=sup_sigma,
        L_tilde_beta=L_tilde_beta,
        L_tilde_gamma=L_tilde_gamma,
        L_tilde_sigma=L_tilde_sigma,
    )


def closed_form_scale_bounds(model: SDEModel) -> tuple[float, float]:
    """Closed-form upper bounds (L_s, L_s') from raw parameters only."""
    c_sigma = model.c_sigma
    if c_sigma <= 0:
        raise ModelError("closed-form bounds need c_sigma > 0")
    if model.mode == MODE_A3:
        a = model.sup_alpha
        n_alpha = model.n_alpha
        if n_alpha is None:
            raise ModelError("mode A3 requires a provable support radius for alpha")
        L_s_bound = math.exp(8.0 * a * (n_alpha + 1.0) / c_sigma**2)
        L_sp_bound = 4.0 * a / c_sigma * L_s_bound
    else:
        gp = model.profiles["g"]
        g_l1 = gp.l1_norm
        if g_l1 is None:
            raise ModelError("closed-form A3prime bounds need a finite |g|_L1")
        L_s_bound = math.exp(4.0 * g_l1 / c_sigma**2)
        L_sp_bound = 4.0 * gp.sup_norm / c_sigma * L_s_bound
    return L_s_bound, L_sp_bound


def paper_closed_form_bound(model: SDEModel) -> float:
    """Closed-form upper bound on L_tilde_beta + L_tilde_gamma.

    A3:      (A + L_beta + (A + sup_{N+1}|beta|) * 4A/c_sigma) * exp(16 A (N+1) / c_sigma^2)
    A3prime: (L_beta + L_g + (sup|beta| + 2 sup|g|^2) * 4 sup|g|/c_sigma) * exp(8 |g|_L1 / c_sigma^2)
    """
    c_sigma = model.c_sigma
    if c_sigma <= 0:
        raise ModelError("closed-form bounds need c_sigma > 0")
    L_beta = model.profiles["beta"].lipschitz
    if model.mode == MODE_A3:
        a = model.sup_alpha
        n_alpha = model.n_alpha
        if n_alpha is None:
            raise ModelError("mode A3 requires a provable support radius for alpha")
        sup_beta = _sup_abs(model.beta, n_alpha + 1.0, model.grid_step)
        return (a + L_beta + (a + sup_beta) * 4.0 * a / c_sigma) * math.exp(
            16.0 * a * (n_alpha + 1.0) / c_sigma**2
        )
    gp = model.profiles["g"]
    g_l1 = gp.l1_norm
    if g_l1 is None:
        raise ModelError("closed-form A3prime bounds need a finite |g|_L1")
    sup_g = gp.sup_norm
    sup_beta = model.profiles["beta"].sup_norm
    return (L_beta + gp.lipschitz + (sup_beta + 2.0 * sup_g**2) * 4.0 * sup_g / c_sigma) * math.exp(
        8.0 * g_l1 / c_sigma**2
    )


@dataclass(frozen=True)
class ConstantsReport:
    """All derived synchronization constants, in both variants."""

    lam: float
    mode: str
    lipschitz: TransformedLipschitz
    D_tilde_b_lower: float
    lambda0: float
    c_lambda: float
    C_prefactor: float
    c_lambda_p: dict[float, float]
    # paper_closed_form variant
    closed_form_L_s: float
    closed_form_L_s_prime: float
    closed_form_sum: float
    closed_form_lambda0: float
    closed_form_c_lambda: float

    @property
    def c_lambda_positive(self) -> bool:
        return self.c_lambda > 0.0

    def to_dict(self) -> dict:
        lc = self.lipschitz
        return {
            "lambda": self.lam,
            "mode": self.mode,
            "exact_quadrature": {
                "L_s": lc.L_s,
                "L_s_prime": lc.L_s_prime,
                "L_gamma": lc.L_gamma,
                "sup_gamma": lc.sup_gamma,
                "sup_gamma_minus_alpha": lc.sup_gamma_minus_alpha,
                "L_beta": lc.L_beta,
                "L_sigma": lc.L_sigma,
                "sup_beta": lc.sup_beta,
                "sup_sigma": lc.sup_sigma,
                "L_tilde_beta": lc.L_tilde_beta,
                "L_tilde_gamma": lc.L_tilde_gamma,
                "L_tilde_sigma": lc.L_tilde_sigma,
                "D_tilde_b_lower": self.D_tilde_b_lower,
                "lambda0": self.lambda0,
                "c_lambda": self.c_lambda,
                "c_lambda_positive": self.c_lambda_positive,
                "C_prefactor": self.C_prefactor,
                "c_lambda_p": {f"{p:g}": v for p, v in sorted(self.c_lambda_p.items())},
                "c_lambda_p_positive": {
                    f"{p:g}": v > 0.0 for p, v in sorted(self.c_lambda_p.items())
                },
            },
            "paper_closed_form": {
                "L_s": self.closed_form_L_s,
                "L_s_prime": self.closed_form_L_s_prime,
                "L_tilde_beta_plus_L_tilde_gamma": self.closed_form_sum,
                "lambda0": self.closed_form_lambda0,
                "c_lambda": self.closed_form_c_lambda,
            },
        }


def synchronization_constants(
    model: SDEModel,
    lips: TransformedLipschitz,
    p_values: tuple[float, ...] = (2.0,),
) -> ConstantsReport:
    """Complete the report: threshold, rates, and closed-form counterparts.

    Requires every p >= 2.  c_lambda and c_lambda_p may come out
    non-positive (lambda below threshold); they are reported with sign
    flags rather than clamped, since the guarantee is simply silent there.
    """
    for p in p_values:
        if p < 2.0:
            raise ValueError(f"L_p rates need p >= 2, got {p}")
    total = lips.L_tilde_beta + lips.L_tilde_gamma
    lambda0 = 2.0 * total
    c_lambda = model.lam / 2.0 - total
    c_lambda_p = {
        float(p): p * c_lambda - p * (p - 1.0) / 2.0 * lips.L_tilde_sigma**2 for p in p_values
    }
    L_s_bound, L_sp_bound = closed_form_scale_bounds(model)
    sum_bound = paper_closed_form_bound(model)
    return ConstantsReport(
        lam=model.lam,
        mode=model.mode,
        lipschitz=lips,
        D_tilde_b_lower=c_lambda,
        lambda0=lambda0,
        c_lambda=c_lambda,
        C_prefactor=lips.L_s,
        c_lambda_p=c_lambda_p,
        closed_form_L_s=L_s_bound,
        closed_form_L_s_prime=L_sp_bound,
        closed_form_sum=sum_bound,
        closed_form_lambda0=2.0 * sum_bound,
        closed_form_c_lambda=model.lam / 2.0 - sum_bound,
    )


def compute_constants(
    model: SDEModel,
    transform: ScaleTransform,
    gamma: GammaConstruction,
    p_values: tuple[float, ...] = (2.0,),
) -> ConstantsReport:
    return synchronization_constants(model, lipschitz_constants(model, transform, gamma), p_values)


# ---------------------------------------------------------------------------
# Regular dissipative models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Prop1Rates:
    """Rates for the regular dissipative problem at one p."""

    D_b: float
    L_sigma: float
    p: float
    c_as_bound: float  # almost-sure decay holds for every c < D_b
    c_p: float
    c_p_positive: bool

    def to_dict(self) -> dict:
        return {
            "D_b": self.D_b,
            "L_sigma": self.L_sigma,
            "p": self.p,
            "c_as_bound": self.c_as_bound,
            "c_p": self.c_p,
            "c_p_positive": self.c_p_positive,
        }


def prop1_constants(dm: DissipativeModel, p: float) -> Prop1Rates:
    """c_as_bound = D_b and c_p = D_b - (p-1)/2 * L_sigma^2, flagged if <= 0."""
    if p < 2.0:
        raise ValueError(f"L_p rates need p >= 2, got {p}")
    if not dm.D_b > 0:
        raise ModelError("prop1 constants need a dissipative drift (D_b > 0)")
    c_p = dm.D_b - (p - 1.0) / 2.0 * dm.L_sigma**2
    return Prop1Rates(
        D_b=dm.D_b,
        L_sigma=dm.L_sigma,
        p=float(p),
        c_as_bound=dm.D_b,
        c_p=c_p,
        c_p_positive=c_p > 0.0,
    )
