"""Command-line interface.

Subcommands mirror the pipeline: ``validate`` checks the hypotheses of a
model file, ``constants`` derives every explicit rate constant, ``transform``
builds and sanity-checks the scale transform, ``simulate`` runs coupled
trajectories, ``verify`` runs the full theory-vs-simulation comparison.

Exit codes: 0 success, 1 usage/configuration error, 2 hypothesis-validation
failure, 3 numerical-construction or simulation failure.  All outputs are
deterministic functions of the configuration and the seed.
"""

from __future__ import annotations

import argparse
import sys

from . import analyze, constants as constants_mod, simulate, zvonkin
from ._serialize import dumps, fmt_real, write_csv, write_json
from .funcspec import ExpressionError
from .model import ModelError, load_model, model_from_dict, model_to_dict, validate
from .simulate import SimulationError, SimulationSpec
from .zvonkin import ConstructionError, RefinementError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_CONSTRUCTION = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we reserve that
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_model_arg(p: _Parser) -> None:
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--R", type=float, default=None, help="override grid radius")
    p.add_argument("--h", type=float, default=None, help="override grid step")


def _add_sim_args(p: _Parser) -> None:
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--y0", type=float, required=True)
    p.add_argument("--T", type=float, required=True, help="time horizon")
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--paths", type=int, default=1)
    p.add_argument("--coalesce-eps", type=float, default=0.0,
                   help="clamp the pair once |X-Y| < eps (0 disables)")


def _build_parser() -> _Parser:
    parser = _Parser(prog="synchrosde")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check the model hypotheses")
    _add_model_arg(p)
    p.add_argument("--dump-model", metavar="FILE",
                   help="echo the parsed model as canonical JSON ('-' for stdout)")

    p = sub.add_parser("constants", help="derive all synchronization constants")
    _add_model_arg(p)
    p.add_argument("--p", default="2", help="comma-separated moment orders, each >= 2")
    p.add_argument("--out", metavar="FILE", help="write the JSON report here (default stdout)")

    p = sub.add_parser("transform", help="build the scale transform and check it")
    _add_model_arg(p)
    p.add_argument("--dump-transform", metavar="FILE",
                   help="CSV with x, s, s_prime, gamma, alpha, tilde_id_slope per node")

    p = sub.add_parser("simulate", help="run coupled trajectory pairs")
    _add_model_arg(p)
    _add_sim_args(p)
    p.add_argument("--out", metavar="FILE", required=True, help="trajectory CSV")
    p.add_argument("--samples", type=int, default=0,
                   help="record this many sample times (0 = every step)")
    p.add_argument("--transformed", action="store_true",
                   help="simulate in transformed coordinates, map back through the inverse")

    p = sub.add_parser("verify", help="compare simulated rates against the constants")
    _add_model_arg(p)
    _add_sim_args(p)
    p.add_argument("--p", default="2", help="comma-separated moment orders, each >= 2")
    p.add_argument("--samples", type=int, default=201)
    p.add_argument("--window", default=None, help="regression window 't0,t1'")
    p.add_argument("--out", metavar="FILE", help="write the JSON report here")
    p.add_argument("--rates-csv", metavar="FILE", help="per-path fitted slopes")

    return parser


def _parse_p_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise ModelError(f"--p expects comma-separated numbers, got {text!r}") from None
    if not values:
        raise ModelError("--p produced an empty list")
    return values


def _load(args):
    model = load_model(args.model)
    if args.R is not None or args.h is not None:
        cfg = model_to_dict(model)
        if args.R is not None:
            cfg["grid"]["R"] = args.R
        if args.h is not None:
            cfg["grid"]["h"] = args.h
        model = model_from_dict(cfg)
    return model

def _validated(model):
    report = validate(model)
    if not report.passed:
        for c in report.failures():
            print(f"FAIL {c.name}: {c.detail}", file=sys.stderr)
        raise SystemExit(EXIT_VALIDATION)
    return report


def _pipeline(model):
    gamma = zvonkin.build_gamma(model)
    transform = zvonkin.build_scale(model, gamma)
    tm = zvonkin.transformed_coefficients(model, transform, gamma)
    return gamma, transform, tm


def _cmd_validate(args) -> int:
    model = _load(args)
    report = validate(model)
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
    if args.dump_model:
        text = dumps(model_to_dict(model))
        if args.dump_model == "-":
            sys.stdout.write(text)
        else:
            with open(args.dump_model, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
    return EXIT_OK if report.passed else EXIT_VALIDATION


def _cmd_constants(args) -> int:
    p_values = _parse_p_list(args.p)
    model = _load(args)
    _validated(model)
    gamma, transform, tm = _pipeline(model)
    min_slope = zvonkin.check_slope(tm)
    report = constants_mod.compute_constants(model, transform, gamma, p_values)
    doc = report.to_dict()
    doc["gamma"] = {
        "expression": gamma.gamma.text(),
        "delta": gamma.delta,
        "lipschitz": gamma.lipschitz,
        "sup": gamma.sup,
        "l1": gamma.l1,
    }
    doc["transform"] = {
        "radius": transform.radius,
        "abs_integral": transform.abs_integral,
        "truncation_radius": transform.truncation_radius,
        "min_tilde_id_slope": min_slope,
    }
    text = dumps(doc)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_transform(args) -> int:
    model = _load(args)
    _validated(model)
    gamma, transform, tm = _pipeline(model)
    min_slope = zvonkin.check_slope(tm)
    print(f"L_s = {fmt_real(transform.L_s)}")
    print(f"min tilde_id slope = {fmt_real(min_slope)}")
    if transform.truncation_radius is not None:
        print(f"note: L_s truncated at radius {fmt_real(transform.truncation_radius)} "
              f"(no closed-form envelope tail)")
    if args.dump_transform:
        write_csv(
            args.dump_transform,
            ["x", "s", "s_prime", "gamma", "alpha", "tilde_id_slope"],
            zvonkin.transform_table_rows(tm),
        )
    return EXIT_OK


def _make_spec(args) -> SimulationSpec:
    return SimulationSpec(
        x0=args.x0,
        y0=args.y0,
        horizon=args.T,
        dt=args.dt,
        seed=args.seed,
        n_paths=args.paths,
        coalescence_eps=args.coalesce_eps,
    )


def _cmd_simulate(args) -> int:
    model = _load(args)
    _validated(model)
    spec = _make_spec(args)
    n_samples = args.samples if args.samples > 0 else spec.n_steps + 1
    if spec.n_paths * min(n_samples, spec.n_steps + 1) > 20_000_000:
        raise ModelError("refusing to materialize > 2e7 samples; use --samples to thin the output")

    if args.transformed:
        gamma, transform, tm = _pipeline(model)
        zvonkin.check_slope(tm)
        ens = simulate.ensemble_sampled(
            tm.drift, tm.diffusion, simulate.transformed_spec(tm, spec), n_samples
        )
        X = zvonkin.inverse_scale(transform, ens.X)
        Y = zvonkin.inverse_scale(transform, ens.Y)
    else:
        ens = simulate.ensemble_sampled(
            simulate.drift_from_model(model), simulate.diffusion_from_model(model), spec, n_samples
        )
        X, Y = ens.X, ens.Y

    def rows():
        for i in range(ens.n_paths):
            for j, t in enumerate(ens.times):
                yield (str(i), t, X[i, j], Y[i, j], abs(X[i, j] - Y[i, j]))

    write_csv(args.out, ["path", "t", "X", "Y", "absdiff"], rows())
    return EXIT_OK


def _cmd_verify(args) -> int:
    p_values = _parse_p_list(args.p)
    model = _load(args)
    _validated(model)
    gamma, transform, tm = _pipeline(model)
    zvonkin.check_slope(tm)
    report = constants_mod.compute_constants(model, transform, gamma, p_values)

    spec = _make_spec(args)
    ens = simulate.ensemble_sampled(
        simulate.drift_from_model(model), simulate.diffusion_from_model(model), spec, args.samples
    )
    window = None
    if args.window:
        try:
            t0, t1 = (float(tok) for tok in args.window.split(","))
        except ValueError:
            raise ModelError(f"--window expects 't0,t1', got {args.window!r}") from None
        window = (t0, t1)
    verification = analyze.verify(model, report, ens, p_values, window)

    print(f"{'claim':<28}{'status':<14}margin")
    for v in verification.verdicts:
        print(f"{v.claim:<28}{v.status:<14}{fmt_real(v.margin)}")
        print(f"    {v.detail}")
    if args.out:
        write_json(args.out, verification.to_dict())
    if args.rates_csv:
        used, slopes, intercepts, _ = analyze.per_path_slopes(ens, window)
        write_csv(
            args.rates_csv,
            ["path", "slope", "intercept"],
            ((str(int(i)), s, b) for i, s, b in zip(used, slopes, intercepts)),
        )
    return EXIT_OK


_COMMANDS = {
    "validate": _cmd_validate,
    "constants": _cmd_constants,
    "transform": _cmd_transform,
    "simulate": _cmd_simulate,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConstructionError, RefinementError, SimulationError) as e:
        print(f"synchrosde: construction error: {e}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    except (ModelError, ExpressionError, FileNotFoundError, ValueError) as e:
        print(f"synchrosde: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
