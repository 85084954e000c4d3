import json
import math

import numpy as np
import pytest

import synchrosde as s
from synchrosde.funcspec import DeclaredMeta
from synchrosde.model import ModelError, dissipativity_scan, union_grid


class TestValidateCanonical:
    def test_all_pass(self, canonical_model):
        rep = s.validate(canonical_model)
        assert rep.passed
        assert rep.n_alpha == 1.0
        assert rep.c_sigma == 1.0
        names = {c.name for c in rep.checks}
        assert {"lambda_positive", "beta_lipschitz", "sigma_lipschitz",
                "sigma_uniformly_elliptic", "alpha_bounded", "alpha_compact_support"} <= names

    def test_n_alpha_rounds_up_to_3_decimals(self):
        m = s.build_model(1.0, "0", "indicator[-1.23456,1.23456]", "1")
        assert m.n_alpha == 1.235


class TestValidateFailures:
    def test_sin_sigma_fails_ellipticity_with_witness_near_zero(self):
        m = s.build_model(5.0, "0", "sgn(x)*indicator[-1,1]", "sin(x)")
        rep = s.validate(m)
        assert not rep.passed
        fail = {c.name: c for c in rep.failures()}["sigma_uniformly_elliptic"]
        assert abs(fail.witness) < 1e-6

    def test_a3prime_constant_envelope_fails_integrability(self):
        m = s.build_model(5.0, "0", "sgn(x)", "1", mode="A3prime", envelope_g="1")
        rep = s.validate(m)
        failed = {c.name for c in rep.failures()}
        assert "envelope_integrable" in failed

    def test_a3_without_compact_support_fails(self):
        m = s.build_model(5.0, "0", "sgn(x)", "1", mode="A3")
        rep = s.validate(m)
        assert "alpha_compact_support" in {c.name for c in rep.failures()}

    def test_domination_failure_has_witness(self):
        m = s.build_model(
            5.0, "0", "2*sgn(x)*exp(-abs(x))", "1", mode="A3prime", envelope_g="exp(-abs(x))"
        )
        rep = s.validate(m)
        fail = {c.name: c for c in rep.failures()}["alpha_dominated_by_envelope"]
        a = abs(s.evaluate(m.alpha, fail.witness))
        g = s.evaluate(m.envelope_g, fail.witness)
        assert a > g

    def test_unbounded_beta_fails_under_a3prime(self):
        m = s.build_model(
            5.0, "x", "sgn(x)*exp(-abs(x))", "1", mode="A3prime", envelope_g="exp(-abs(x))"
        )
        assert "beta_bounded" in {c.name for c in s.validate(m).failures()}

    def test_fail_witness_survives_grid_refinement(self):
        coarse = s.build_model(5.0, "0", "sgn(x)*indicator[-1,1]", "sin(x)", grid_step=1e-2)
        w = {c.name: c for c in s.validate(coarse).failures()}["sigma_uniformly_elliptic"].witness
        fine = s.build_model(5.0, "0", "sgn(x)*indicator[-1,1]", "sin(x)", grid_step=1e-3)
        rep = s.validate(fine)
        assert not rep.passed
        assert s.evaluate(fine.sigma, w) ** 2 <= fine.c_sigma + 1e-15


class TestBuildModel:
    def test_a3prime_requires_envelope(self):
        with pytest.raises(ModelError, match="envelope"):
            s.build_model(1.0, "0", "sgn(x)", "1", mode="A3prime")

    def test_unknown_mode(self):
        with pytest.raises(ModelError, match="mode"):
            s.build_model(1.0, "0", "0", "1", mode="A4")

    def test_default_grid_radius_tracks_support(self):
        m = s.build_model(1.0, "0", "indicator[-6,6]", "1")
        assert m.grid_radius == 14.0
        m2 = s.build_model(1.0, "0", "indicator[-1,1]", "1")
        assert m2.grid_radius == 10.0


class TestDissipativityScan:
    def test_linear(self):
        assert dissipativity_scan("-2*x") == pytest.approx(2.0, abs=1e-12)
        assert dissipativity_scan("x") == pytest.approx(-1.0, abs=1e-12)

    def test_sin_perturbation_flat_at_origin(self):
        # slope of sin near 0 cancels the -x drift: estimate ~ 0
        est = dissipativity_scan("-x + sin(x)")
        assert abs(est) < 1e-5

    def test_exactly_k_for_linear(self):
        for k in (0.5, 3.0, 7.25):
            assert dissipativity_scan(f"-{k}*x") == pytest.approx(k, rel=1e-12)


class TestDissipativeModel:
    def test_build_and_rates(self):
        dm = s.build_dissipative("-x", "x")
        assert dm.D_b == pytest.approx(1.0, rel=1e-12)
        assert dm.L_sigma == pytest.approx(1.0, rel=1e-12)

    def test_non_dissipative_rejected(self):
        with pytest.raises(ModelError, match="not dissipative"):
            s.build_dissipative("x", "1")

    def test_declared_d_b_checked_against_grid(self):
        with pytest.raises(ModelError, match="grid scan"):
            s.build_dissipative("-x", "1", D_b=2.0)


class TestModelFiles:
    def test_roundtrip_is_bit_exact(self, tmp_path, canonical_model):
        doc = s.model_to_dict(canonical_model)
        path = tmp_path / "model.json"
        path.write_text(json.dumps(doc))
        again = s.load_model(path)
        assert s.model_to_dict(again) == doc
        assert again.n_alpha == canonical_model.n_alpha
        assert again.profiles["alpha"] == canonical_model.profiles["alpha"]

    def test_declared_metadata_roundtrip(self, tmp_path):
        cfg = {
            "lambda": 3.0,
            "beta": "0",
            "alpha": "sgn(x)*exp(-abs(x))",
            "sigma": "1",
            "mode": "A3prime",
            "g": "exp(-abs(x))",
            "declared": {"alpha": {"sup_norm": 1.0}},
        }
        path = tmp_path / "m.json"
        path.write_text(json.dumps(cfg))
        m = s.load_model(path)
        assert m.sup_alpha == 1.0
        assert s.model_to_dict(m)["declared"] == {"alpha": {"sup_norm": 1.0}}

    def test_missing_key(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"lambda": 1.0, "beta": "0"}))
        with pytest.raises(ModelError, match="missing required key"):
            s.load_model(path)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        with pytest.raises(ModelError, match="not valid JSON"):
            s.load_model(path)

    def test_unknown_declared_key(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({
            "lambda": 1.0, "beta": "0", "alpha": "0", "sigma": "1",
            "declared": {"alpha": {"sup": 1.0}},
        }))
        with pytest.raises(ModelError, match="unknown declared keys"):
            s.load_model(path)


def test_union_grid_contains_breakpoints_and_one_sided_samples():
    f = s.parse("sgn(x)*indicator[-1,1]")
    grid = union_grid(10.0, 1e-2, (f,))
    for b in (-1.0, 0.0, 1.0):
        assert b in grid
        assert np.any((grid > b) & (grid < b + 1e-9))
        assert np.any((grid < b) & (grid > b - 1e-9))
