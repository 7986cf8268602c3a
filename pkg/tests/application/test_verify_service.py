import json
import os

import pytest

from app.application.services.verify_service import (
    CHECKS,
    VerifyService,
    run_conditional_consistency_test,
    run_conditional_distribution_check,
    run_equivalence_test,
    run_finite_difference_check,
    run_gaussian_elimination_check,
    run_kl_gradient_check,
    run_oracle_sweep,
    run_projection_invariants,
    run_unbiasedness_power,
    run_unbiasedness_test,
    run_value_preservation_check,
    run_variance_dominance,
)
from app.domain.errors import ConfigError
from app.infrastructure.settings import Settings


class TestDeterministicChecks:
    def test_oracle_sweep(self, make_cfg):
        result = run_oracle_sweep(make_cfg())
        assert result.passed, result.metrics
        assert result.metrics["sites"] == 20

    def test_projection_invariants(self, make_cfg):
        assert run_projection_invariants(make_cfg()).passed

    def test_gaussian_elimination(self, make_cfg):
        assert run_gaussian_elimination_check(make_cfg()).passed

    def test_equivalence(self, make_cfg):
        result = run_equivalence_test(make_cfg())
        assert result.passed, result.metrics
        assert result.metrics["zero_input_rejected"] is True
        assert result.metrics["max_abs_diff"] <= 1e-9

    def test_finite_differences(self, make_cfg):
        result = run_finite_difference_check(make_cfg())
        assert result.passed, result.metrics

    def test_kl_gradient(self, make_cfg):
        assert run_kl_gradient_check(make_cfg()).passed

    def test_value_preservation(self, make_cfg):
        result = run_value_preservation_check(make_cfg())
        assert result.passed, result.metrics


@pytest.mark.slow
class TestStatisticalChecks:
    def test_unbiasedness(self, smoke_cfg):
        result = run_unbiasedness_test(smoke_cfg)
        assert result.passed, result.metrics

    def test_biased_mutant_is_detected(self, smoke_cfg):
        assert run_unbiasedness_power(smoke_cfg).passed

    def test_variance_dominance(self, smoke_cfg):
        result = run_variance_dominance(smoke_cfg)
        assert result.passed, result.metrics
        assert result.metrics["tau_variance_ratio"] < 1.0
        assert result.metrics["mu_blocks_identical"] is True

    def test_conditional_consistency(self, smoke_cfg):
        result = run_conditional_consistency_test(smoke_cfg)
        assert result.passed, result.metrics

    def test_conditional_distribution(self, smoke_cfg):
        result = run_conditional_distribution_check(smoke_cfg)
        assert result.passed, result.metrics
        assert result.metrics["draws"] == 100_000
        assert result.metrics["cov_frobenius_error"] <= 0.02

    def test_conditional_distribution_needs_enough_draws(self, make_cfg):
        result = run_conditional_distribution_check(make_cfg(mc__distribution_draws=50))
        assert not result.passed
        assert result.metrics["cov_frobenius_error"] > 0.02


class TestVerifyService:
    def test_runs_selected_checks_and_writes_report(self, make_cfg, tmp_path):
        service = VerifyService(settings=Settings())
        report = service.run(make_cfg(), ["kl_gradient", "equivalence"])
        assert [c.name for c in report.checks] == ["kl_gradient", "equivalence"]
        assert report.passed

        paths = service.write(report, str(tmp_path / "verify"))
        data = json.loads(open(paths["json"], encoding="utf-8").read())
        assert data["passed"] is True
        assert [c["name"] for c in data["checks"]] == ["kl_gradient", "equivalence"]
        text = open(os.path.join(tmp_path, "verify", "report.txt"), encoding="utf-8").read()
        assert "[PASS] equivalence" in text

    def test_unknown_check(self, make_cfg):
        with pytest.raises(ConfigError):
            VerifyService(settings=Settings()).run(make_cfg(), ["nope"])

    def test_registry_names(self):
        assert {"oracle_sweep", "unbiasedness", "variance_dominance", "equivalence", "finite_differences"} <= set(CHECKS)

    def test_report_is_reproducible(self, make_cfg):
        service = VerifyService(settings=Settings())
        a = service.run(make_cfg(), ["oracle_sweep", "projection_invariants"]).as_dict()
        b = service.run(make_cfg(), ["oracle_sweep", "projection_invariants"]).as_dict()
        assert a == b
