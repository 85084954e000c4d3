"""Problem instances and hypothesis validation.

An :class:`SDEModel` bundles the coefficients of

    dX = (-lambda*X + beta(X) + alpha(X)) dt + sigma(X) dW

together with the structural regime for the irregular part alpha: either
``A3`` (alpha bounded with compact support) or ``A3prime`` (|alpha| dominated
by an integrable Lipschitz envelope g, with beta and sigma bounded).

Validation is grid-based and explicit about it: every hypothesis is checked
on a documented finite grid and yields either PASS with the computed
constant or FAIL with a concrete witness point.  Declared metadata can
assert constants the grid cannot certify (e.g. a global Lipschitz bound).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .funcspec import (
    DeclaredMeta,
    FunctionDescriptor,
    FunctionProfile,
    breakpoints,
    evaluate_array,
    format_expression,
    is_bounded,
    parse,
    profile,
    proved_support_radius,
    DEFAULT_GRID_STEP,
)

__all__ = [
    "MODE_A3",
    "MODE_A3PRIME",
    "ModelError",
    "SDEModel",
    "DissipativeModel",
    "HypothesisCheck",
    "ValidationReport",
    "build_model",
    "build_dissipative",
    "validate",
    "dissipativity_scan",
    "union_grid",
    "load_model",
    "model_from_dict",
    "model_to_dict",
]

MODE_A3 = "A3"
MODE_A3PRIME = "A3prime"

# Offset used to sample one-sided limits next to AST breakpoints.
_SIDE_EPS = 1e-12


class ModelError(ValueError):
    """Invalid model configuration (missing pieces, bad numeric attributes)."""


def _coerce(f, declared: DeclaredMeta | None = None) -> FunctionDescriptor:
    if isinstance(f, str):
        f = parse(f)
    if not isinstance(f, FunctionDescriptor):
        raise ModelError(f"expected expression string or FunctionDescriptor, got {type(f).__name__}")
    if declared is not None:
        f = replace(f, declared=declared)
    return f


def union_grid(
    radius: float,
    step: float,
    fns: tuple[FunctionDescriptor, ...],
    one_sided: bool = True,
) -> np.ndarray:
    """Uniform grid on [-radius, radius] with AST breakpoints inserted.

    With ``one_sided=True`` each breakpoint also contributes two points at
    a relative offset of 1e-12, so suprema catch one-sided limits at jumps.
    """
    n = max(2, int(round(2.0 * radius / step)) + 1)
    pieces = [np.linspace(-radius, radius, n)]
    for f in fns:
        for b in breakpoints(f):
            if abs(b) > radius:
                continue
            pieces.append(np.asarray([b]))
            if one_sided:
                eps = _SIDE_EPS * max(1.0, abs(b))
                pieces.append(np.asarray([b - eps, b + eps]))
    grid = np.unique(np.concatenate(pieces))
    return grid[(grid >= -radius) & (grid <= radius)]


@dataclass(frozen=True)
class SDEModel:
    """Validated-or-validatable instance of the singular-drift SDE."""

    lam: float
    beta: FunctionDescriptor
    alpha: FunctionDescriptor
    sigma: FunctionDescriptor
    mode: str
    envelope_g: FunctionDescriptor | None
    grid_radius: float
    grid_step: float
    profiles: dict[str, FunctionProfile]

    @property
    def c_sigma(self) -> float:
        return self.profiles["sigma"].inf_sq_est

    @property
    def sup_alpha(self) -> float:
        return self.profiles["alpha"].sup_norm

    @property
    def n_alpha(self) -> float | None:
        """Support radius of alpha from the AST, rounded up to 3 decimals."""
        r = proved_support_radius(self.alpha)
        if r is None:
            return None
        return math.ceil(r * 1000.0) / 1000.0


def build_model(
    lam: float,
    beta,
    alpha,
    sigma,
    mode: str = MODE_A3,
    envelope_g=None,
    grid_radius: float | None = None,
    grid_step: float | None = None,
    declared: dict[str, DeclaredMeta] | None = None,
) -> SDEModel:
    """Assemble an SDEModel from expression strings (or descriptors).

    ``declared`` maps function names (beta/alpha/sigma/g) to DeclaredMeta.
    The default grid is R = max(10, 2*(support radius of alpha + 1)) with
    step 1e-3, both overridable.
    """
    declared = declared or {}
    if mode not in (MODE_A3, MODE_A3PRIME):
        raise ModelError(f"mode must be {MODE_A3!r} or {MODE_A3PRIME!r}, got {mode!r}")
    beta = _coerce(beta, declared.get("beta"))
    alpha = _coerce(alpha, declared.get("alpha"))
    sigma = _coerce(sigma, declared.get("sigma"))
    if mode == MODE_A3PRIME:
        if envelope_g is None:
            raise ModelError("mode A3prime requires an envelope function g")
        envelope_g = _coerce(envelope_g, declared.get("g"))
    elif envelope_g is not None:
        envelope_g = _coerce(envelope_g, declared.get("g"))

    if grid_radius is None:
        r = proved_support_radius(alpha)
        grid_radius = 10.0 if r is None else max(10.0, 2.0 * (r + 1.0))
    if grid_step is None:
        grid_step = DEFAULT_GRID_STEP
    if grid_radius <= 0 or grid_step <= 0:
        raise ModelError("grid radius and step must be positive")

    profs = {
        "beta": profile(beta, grid_radius, grid_step),
        "alpha": profile(alpha, grid_radius, grid_step),
        "sigma": profile(sigma, grid_radius, grid_step),
    }
    if envelope_g is not None:
        profs["g"] = profile(envelope_g, grid_radius, grid_step)

    return SDEModel(
        lam=float(lam),
        beta=beta,
        alpha=alpha,
        sigma=sigma,
        mode=mode,
        envelope_g=envelope_g,
        grid_radius=float(grid_radius),
        grid_step=float(grid_step),
        profiles=profs,
    )


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    passed: bool
    detail: str
    constant: float | None = None
    witness: float | None = None


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[HypothesisCheck, ...]
    n_alpha: float | None
    c_sigma: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> tuple[HypothesisCheck, ...]:
        return tuple(c for c in self.checks if not c.passed)


def validate(model: SDEModel) -> ValidationReport:
    """Check every hypothesis of the model's regime on the validation grid.

    Failures never raise; they come back as report entries with witnesses.
    """
    checks: list[HypothesisCheck] = []
    R, h = model.grid_radius, model.grid_step

    checks.append(
        HypothesisCheck(
            name="lambda_positive",
            passed=model.lam > 0,
            detail=f"lambda = {model.lam}",
            constant=model.lam,
        )
    )

    for name, fn in (("beta", model.beta), ("sigma", model.sigma)):
        lip = model.profiles[name].lipschitz
        declared = model.profiles[name].declared.lipschitz is not None
        checks.append(
            HypothesisCheck(
                name=f"{name}_lipschitz",
                passed=math.isfinite(lip),
                detail=(
                    f"L_{name} = {lip:.6g} "
                    + ("(declared)" if declared else f"(grid certificate on [-{R}, {R}], h = {h})")
                ),
                constant=lip,
            )
        )

    grid = union_grid(R, h, (model.sigma,))
    sig_sq = evaluate_array(model.sigma, grid) ** 2
    i_min = int(np.argmin(sig_sq))
    c_sigma = float(sig_sq[i_min])
    checks.append(
        HypothesisCheck(
            name="sigma_uniformly_elliptic",
            passed=c_sigma > 0.0,
            detail=(
                f"c_sigma = {c_sigma:.6g}"
                if c_sigma > 0.0
                else f"sigma^2 vanishes near x = {grid[i_min]:.6g}"
            ),
            constant=c_sigma,
            witness=None if c_sigma > 0.0 else float(grid[i_min]),
        )
    )

    n_alpha = model.n_alpha
    if model.mode == MODE_A3:
        sup_a = model.sup_alpha
        bounded = is_bounded(model.alpha) or model.alpha.declared.sup_norm is not None
        # compact support plus evaluability already implies a finite sup on the grid
        bounded = bounded or proved_support_radius(model.alpha) is not None
        checks.append(
            HypothesisCheck(
                name="alpha_bounded",
                passed=bounded and math.isfinite(sup_a),
                detail=f"sup|alpha| = {sup_a:.6g}",
                constant=sup_a,
            )
        )
        checks.append(
            HypothesisCheck(
                name="alpha_compact_support",
                passed=n_alpha is not None,
                detail=(
                    f"support radius N_alpha = {n_alpha}"
                    if n_alpha is not None
                    else "AST does not prove compact support of alpha"
                ),
                constant=n_alpha,
            )
        )
    else:
        g = model.envelope_g
        gp = model.profiles["g"]
        checks.append(
            HypothesisCheck(
                name="envelope_bounded",
                passed=(is_bounded(g) or g.declared.sup_norm is not None)
                and math.isfinite(gp.sup_norm),
                detail=f"sup g = {gp.sup_norm:.6g}",
                constant=gp.sup_norm,
            )
        )
        checks.append(
            HypothesisCheck(
                name="envelope_lipschitz",
                passed=math.isfinite(gp.lipschitz),
                detail=f"L_g = {gp.lipschitz:.6g}",
                constant=gp.lipschitz,
            )
        )
        l1 = gp.l1_norm
        checks.append(
            HypothesisCheck(
                name="envelope_integrable",
                passed=l1 is not None,
                detail=(
                    f"|g|_L1 = {l1:.6g}"
                    if l1 is not None
                    else "no certifiable L1 bound for g (declare l1_norm or use a compactly"
                    " supported / exponentially decaying envelope)"
                ),
                constant=l1,
            )
        )
        dom_grid = union_grid(R, h, (model.alpha, g))
        gap = np.abs(evaluate_array(model.alpha, dom_grid)) - evaluate_array(g, dom_grid)
        i_bad = int(np.argmax(gap))
        dominated = bool(gap[i_bad] <= 1e-12)
        checks.append(
            HypothesisCheck(
                name="alpha_dominated_by_envelope",
                passed=dominated,
                detail=(
                    "|alpha| <= g on the validation grid"
                    if dominated
                    else f"|alpha(x)| - g(x) = {gap[i_bad]:.6g} at x = {dom_grid[i_bad]:.6g}"
                ),
                witness=None if dominated else float(dom_grid[i_bad]),
            )
        )
        for name, fn in (("beta", model.beta), ("sigma", model.sigma)):
            ok = is_bounded(fn) or fn.declared.sup_norm is not None
            sup = model.profiles[name].sup_norm
            checks.append(
                HypothesisCheck(
                    name=f"{name}_bounded",
                    passed=ok and math.isfinite(sup),
                    detail=(
                        f"sup|{name}| = {sup:.6g}"
                        if ok
                        else f"{name} is not provably bounded (declare sup_norm to assert)"
                    ),
                    constant=sup if ok else None,
                )
            )

    return ValidationReport(checks=tuple(checks), n_alpha=n_alpha, c_sigma=c_sigma)


# ---------------------------------------------------------------------------
# Dissipative (regular-drift) models
# ---------------------------------------------------------------------------


def dissipativity_scan(b, radius: float = 10.0, step: float = DEFAULT_GRID_STEP) -> float:
    """Min over adjacent grid pairs of -(b(y) - b(x)) / (y - x).

    A positive return value certifies grid-level dissipativity with that
    constant; for linear b(x) = -k*x the scan returns exactly k.
    """
    b = _coerce(b)
    n = max(2, int(round(2.0 * radius / step)) + 1)
    grid = np.linspace(-radius, radius, n)
    vals = evaluate_array(b, grid)
    quotients = np.diff(vals) / np.diff(grid)
    return float(-np.max(quotients))


@dataclass(frozen=True)
class DissipativeModel:
    """dY = b(Y) dt + sigma(Y) dW with dissipative b and Lipschitz sigma."""

    b: FunctionDescriptor
    sigma: FunctionDescriptor
    D_b: float
    L_sigma: float
    grid_radius: float
    grid_step: float


def build_dissipative(
    b,
    sigma,
    D_b: float | None = None,
    L_sigma: float | None = None,
    radius: float = 10.0,
    step: float = DEFAULT_GRID_STEP,
) -> DissipativeModel:
    """Build and grid-check a dissipative model; D_b must come out positive."""
    b = _coerce(b)
    sigma = _coerce(sigma)
    scanned = dissipativity_scan(b, radius, step)
    if D_b is None:
        D_b = scanned
    elif scanned < D_b - 1e-9 * max(1.0, abs(D_b)):
        raise ModelError(
            f"declared D_b = {D_b} but the grid scan only certifies {scanned:.6g}"
        )
    if not (D_b > 0):
        raise ModelError(f"drift is not dissipative on the grid (D_b estimate {D_b:.6g})")
    if L_sigma is None:
        L_sigma = profile(sigma, radius, step).lipschitz
    return DissipativeModel(
        b=b, sigma=sigma, D_b=float(D_b), L_sigma=float(L_sigma),
        grid_radius=float(radius), grid_step=float(step),
    )


# ---------------------------------------------------------------------------
# Model files (JSON)
# ---------------------------------------------------------------------------

_DECLARED_KEYS = ("sup_norm", "lipschitz", "support_radius", "l1_norm")


def _declared_from_dict(d: dict) -> DeclaredMeta:
    unknown = set(d) - set(_DECLARED_KEYS)
    if unknown:
        raise ModelError(f"unknown declared keys: {sorted(unknown)}")
    return DeclaredMeta(**{k: float(v) for k, v in d.items()})


def model_from_dict(cfg: dict) -> SDEModel:
    """Build a model from the JSON document schema.

    Keys: lambda, beta, alpha, sigma, mode, optional g, optional declared
    (per-function metadata), optional grid {"R": ..., "h": ...}.
    """
    try:
        lam = float(cfg["lambda"])
        beta, alpha, sigma = cfg["beta"], cfg["alpha"], cfg["sigma"]
        mode = cfg.get("mode", MODE_A3)
    except KeyError as e:
        raise ModelError(f"model file missing required key {e.args[0]!r}") from None
    declared_cfg = cfg.get("declared", {})
    if not isinstance(declared_cfg, dict):
        raise ModelError("'declared' must be an object keyed by function name")
    declared = {name: _declared_from_dict(d) for name, d in declared_cfg.items()}
    grid = cfg.get("grid", {})
    return build_model(
        lam=lam,
        beta=beta,
        alpha=alpha,
        sigma=sigma,
        mode=mode,
        envelope_g=cfg.get("g"),
        grid_radius=grid.get("R"),
        grid_step=grid.get("h"),
        declared=declared,
    )


def load_model(path) -> SDEModel:
    with open(Path(path), "r", encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as e:
            raise ModelError(f"{path}: not valid JSON ({e})") from None
    if not isinstance(cfg, dict):
        raise ModelError(f"{path}: model file must contain a JSON object")
    return model_from_dict(cfg)


def model_to_dict(model: SDEModel) -> dict:
    """Canonical echo of the parsed model; re-ingesting it reproduces the model."""
    out = {
        "lambda": model.lam,
        "beta": format_expression(model.beta),
        "alpha": format_expression(model.alpha),
        "sigma": format_expression(model.sigma),
        "mode": model.mode,
        "grid": {"R": model.grid_radius, "h": model.grid_step},
    }
    if model.envelope_g is not None:
        out["g"] = format_expression(model.envelope_g)
    declared = {}
    names = [("beta", model.beta), ("alpha", model.alpha), ("sigma", model.sigma)]
    if model.envelope_g is not None:
        names.append(("g", model.envelope_g))
    for name, fn in names:
        d = {k: getattr(fn.declared, k) for k in _DECLARED_KEYS if getattr(fn.declared, k) is not None}
        if d:
            declared[name] = d
    if declared:
        out["declared"] = declared
    return out
