import numpy as np
import pytest

import synchrosde as s
from synchrosde.funcspec import DeclaredMeta

CANONICAL = dict(
    beta="0",
    alpha="sgn(x)*indicator[-1,1]",
    sigma="1",
    mode="A3",
)


@pytest.fixture(scope="session")
def canonical_model():
    return s.build_model(2000.0, **CANONICAL)


@pytest.fixture(scope="session")
def canonical_bundle(canonical_model):
    """(model, gamma, transform, transformed model) for the canonical instance."""
    m = canonical_model
    g = s.build_gamma(m)
    tr = s.build_scale(m, g)
    tm = s.transformed_coefficients(m, tr, g)
    return m, g, tr, tm


@pytest.fixture(scope="session")
def a3prime_model():
    # exact metadata makes the closed-form example values exact
    return s.build_model(
        50.0,
        "0",
        "sgn(x)*exp(-abs(x))",
        "1",
        mode="A3prime",
        envelope_g="exp(-abs(x))",
        declared={
            "alpha": DeclaredMeta(sup_norm=1.0),
            "g": DeclaredMeta(sup_norm=1.0, lipschitz=1.0, l1_norm=2.0),
        },
    )


@pytest.fixture(scope="session")
def a3prime_bundle(a3prime_model):
    m = a3prime_model
    g = s.build_gamma(m)
    tr = s.build_scale(m, g)
    tm = s.transformed_coefficients(m, tr, g)
    return m, g, tr, tm


@pytest.fixture(scope="session")
def identity_model():
    return s.build_model(4.0, "0", "0", "1")


def make_random_models(n, seed, lam=1.0):
    """Reproducible mix of valid A3 / A3prime instances for property sweeps.

    c_sigma stays <= 1 throughout, the regime where the closed-form bounds
    provably dominate the exact-quadrature constants.
    """
    rng = np.random.default_rng(seed)
    models = []
    for i in range(n):
        s0 = rng.uniform(0.6, 0.95)
        s1 = rng.uniform(0.05, 0.3)
        sigma = rng.choice(["1", f"{s0} + {s1}*sin(x)"])
        if i % 2 == 0:
            a = rng.uniform(0.2, 2.0)
            big_n = rng.uniform(0.5, 3.0)
            w = rng.uniform(1.0, 6.0)
            alpha = rng.choice(
                [
                    f"{a}*sgn(x)*indicator[{-big_n},{big_n}]",
                    f"{a}*indicator[{-big_n},{big_n}]",
                    f"{a}*sin({w}*x)*indicator[{-big_n},{big_n}]",
                ]
            )
            beta = rng.choice(["0", f"{rng.uniform(0.1, 0.6)}*sin(x)", f"-{rng.uniform(0.1, 0.5)}*x"])
            models.append(s.build_model(lam, beta, alpha, sigma, mode="A3"))
        else:
            c = rng.uniform(0.3, 1.5)
            k = rng.uniform(0.5, 2.0)
            w = rng.uniform(1.0, 6.0)
            g = f"{c}*exp(-{k}*abs(x))"
            alpha = rng.choice([f"{c}*exp(-{k}*abs(x))*sin({w}*x)", f"{c}*sgn(x)*exp(-{k}*abs(x))"])
            beta = rng.choice(["0", f"{rng.uniform(0.1, 0.6)}*cos(x)"])
            models.append(s.build_model(lam, beta, alpha, sigma, mode="A3prime", envelope_g=g))
    return models


@pytest.fixture(scope="session")
def random_model_list():
    models = make_random_models(20, seed=1234)
    for m in models:
        assert s.validate(m).passed, f"random model generator produced an invalid model: {s.model_to_dict(m)}"
    return models


@pytest.fixture(scope="session")
def geometric_l2_ensemble():
    """10^4 coupled pairs of the lam=1, sigma(x)=x model on [0, 5]."""
    spec = s.SimulationSpec(x0=0.0, y0=1.0, horizon=5.0, dt=1e-2, seed=500, n_paths=10**4)
    return s.ensemble_sampled(lambda x: -x, lambda x: x, spec, n_samples=101)
