import json

import numpy as np
import pytest

from app.domain.errors import ArtifactWriteError, ConfigError, DimensionMismatchError
from app.infrastructure.estimators.site import EstimatorId
from app.infrastructure.gaussian.rng import RngStream, StreamKey, sample_standard_normal
from app.infrastructure.harness.artifacts import (
    TRAINING_COLUMNS,
    read_csv,
    to_jsonable,
    write_csv,
    write_json,
    write_text,
)
from app.infrastructure.harness.config import load_config, parse_config, resolve_config_path
from app.infrastructure.harness.datasets import DatasetKind, make_synthetic_dataset
from app.infrastructure.harness.sites import layer_site, paired_site_estimates, paired_site_gradients, quadratic_oracle
from app.infrastructure.harness.stats import EstimatorStats, variance_dominated
from app.infrastructure.nets.layers import NoiseSharing
from tests.conftest import CONFIG_DIR


class TestEstimatorStats:
    def test_moments_match_numpy(self):
        x = np.random.default_rng(0).standard_normal((500, 3))
        stats = EstimatorStats.from_samples(x, "RT", "site")
        np.testing.assert_allclose(stats.mean, x.mean(axis=0))
        np.testing.assert_allclose(stats.variance, x.var(axis=0, ddof=1))
        np.testing.assert_allclose(stats.se_mean, np.sqrt(x.var(axis=0, ddof=1) / 500))
        assert stats.count == 500 and stats.dim == 3

    def test_deterministic_coordinates(self):
        x = np.column_stack([np.full(10, 2.0), np.arange(10.0)])
        stats = EstimatorStats.from_samples(x, "RT")
        np.testing.assert_array_equal(stats.z_scores([2.0, 4.5])[0], 0.0)
        assert np.isinf(stats.z_scores([3.0, 4.5])[0])
        assert stats.z_scores([2.0, 4.5])[1] == pytest.approx(0.0)

    def test_needs_two_samples(self):
        with pytest.raises(DimensionMismatchError):
            EstimatorStats.from_samples(np.ones((1, 3)), "RT")

    def test_variance_dominance_mask(self):
        rng = np.random.default_rng(1)
        low = EstimatorStats.from_samples(0.5 * rng.standard_normal((4000, 2)), "R2G2")
        high = EstimatorStats.from_samples(2.0 * rng.standard_normal((4000, 2)), "RT")
        assert variance_dominated(low, high, 3.0).all()
        assert not variance_dominated(high, low, 3.0).any()


class TestDatasets:
    @pytest.mark.parametrize("kind", list(DatasetKind))
    def test_reproducible_per_seed(self, kind):
        a = make_synthetic_dataset(kind, 50, seed=3)
        b = make_synthetic_dataset(kind, 50, seed=3)
        c = make_synthetic_dataset(kind, 50, seed=4)
        np.testing.assert_array_equal(a.inputs, b.inputs)
        np.testing.assert_array_equal(a.targets, b.targets)
        assert not np.array_equal(a.inputs, c.inputs)
        assert a.inputs.shape == (50, 2)

    def test_blobs_are_balanced(self):
        data = make_synthetic_dataset(DatasetKind.BLOBS, 40, seed=0)
        assert data.is_classification
        assert int(data.targets.sum()) == 20

    def test_linreg_targets(self):
        data = make_synthetic_dataset(DatasetKind.LINREG, 30, seed=0)
        assert not data.is_classification
        assert data.targets.shape == (30,)

    def test_too_small(self):
        with pytest.raises(ValueError):
            make_synthetic_dataset(DatasetKind.BLOBS, 5, seed=0)

    def test_batch_selection(self):
        data = make_synthetic_dataset(DatasetKind.XOR_RINGS, 20, seed=1)
        batch = data.batch(np.array([0, 5]))
        assert batch.size == 2
        np.testing.assert_array_equal(batch.inputs[1], data.inputs[5])


class TestExperimentConfig:
    def test_bundled_configs_parse(self):
        for name in ("default", "smoke"):
            cfg = load_config(resolve_config_path(name, str(CONFIG_DIR)))
            assert cfg.network_estimators == [EstimatorId.RT, EstimatorId.LRT, EstimatorId.R2G2]

    def test_estimator_names_are_normalised(self, make_cfg):
        cfg = make_cfg(estimator="rt, r2-g2")
        assert cfg.estimators == [EstimatorId.RT, EstimatorId.R2G2]

    def test_comma_lists(self, make_cfg):
        cfg = make_cfg(seeds="1, 2,3", model__widths="2,8,8,2")
        assert cfg.seeds == [1, 2, 3]
        assert cfg.model_widths == [2, 8, 8, 2]

    def test_unknown_key(self, make_cfg):
        with pytest.raises(ConfigError):
            make_cfg(bogus__key="1")

    def test_lrt_rejected_with_shared_noise(self, make_cfg):
        with pytest.raises(ConfigError):
            make_cfg(model__noise_sharing="per_batch")
        cfg = make_cfg(model__noise_sharing="per_batch", estimator="RT,R2G2")
        assert cfg.model_noise_sharing is NoiseSharing.PER_BATCH

    def test_regression_needs_single_output(self, make_cfg):
        with pytest.raises(ConfigError):
            make_cfg(dataset__kind="linreg", loss__kind="gaussian_nll")
        cfg = make_cfg(dataset__kind="linreg", loss__kind="gaussian_nll", model__widths="2,4,1")
        assert cfg.model_widths[-1] == 1

    def test_overrides_revalidate(self, make_cfg):
        cfg = make_cfg().with_overrides(seed=5, estimator="R2G2", out_dir="elsewhere")
        assert cfg.seeds == [5]
        assert cfg.estimators == [EstimatorId.R2G2]
        assert cfg.out_dir == "elsewhere"
        with pytest.raises(ConfigError):
            make_cfg().with_overrides(estimator="NOPE")

    def test_cg_config(self, make_cfg):
        assert make_cfg().cg_config().iteration_limit(4) == 9
        assert make_cfg(cg__max_iters="3").cg_config().iteration_limit(4) == 3

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            resolve_config_path("nope", str(tmp_path))
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / "nope.cfg"))

    def test_file_with_comments(self, tiny_cfg_file):
        cfg = load_config(str(tiny_cfg_file))
        assert cfg.steps == 6
        assert cfg.site_n == 6

    def test_invalid_value(self):
        with pytest.raises(ConfigError):
            parse_config({"steps": "0"})


class TestArtifacts:
    def test_csv_is_byte_stable(self, tmp_path):
        row = {c: 0 for c in TRAINING_COLUMNS}
        row.update(estimator=EstimatorId.R2G2, layer="layer0", loss=0.1, elbo=np.float64(-3.25))
        a = write_csv(str(tmp_path / "a.csv"), TRAINING_COLUMNS, [row])
        b = write_csv(str(tmp_path / "b.csv"), TRAINING_COLUMNS, [row])
        assert open(a, "rb").read() == open(b, "rb").read()
        parsed = read_csv(a)[0]
        assert parsed["estimator"] == "R2G2"
        assert parsed["loss"] == "0.1"
        assert parsed["elbo"] == "-3.25"

    def test_json_handles_numpy_and_infinity(self, tmp_path):
        path = write_json(str(tmp_path / "r.json"), {"z": np.inf, "v": np.arange(2), "e": EstimatorId.RT})
        data = json.loads(open(path, encoding="utf-8").read())
        assert data == {"e": "RT", "v": [0, 1], "z": "inf"}

    def test_to_jsonable_nested(self):
        assert to_jsonable({EstimatorId.LRT: (np.float64(1.5), float("nan"))}) == {"LRT": [1.5, "nan"]}

    def test_write_failure(self, tmp_path):
        with pytest.raises(ArtifactWriteError):
            write_text(str(tmp_path), "x")


class TestPairedSites:
    def test_mu_blocks_shared_and_lrt_matches_r2g2_per_unit(self):
        gen = np.random.default_rng(0)
        ctx, lrt = layer_site(gen, 2, 3)
        oracle = quadratic_oracle(gen, ctx)
        eps = gen.standard_normal((50, ctx.n))
        grads = paired_site_gradients(oracle, eps, list(EstimatorId), lrt_site=lrt)
        n = ctx.n
        np.testing.assert_array_equal(grads[EstimatorId.RT][:, :n], grads[EstimatorId.R2G2][:, :n])
        np.testing.assert_allclose(grads[EstimatorId.LRT][:, :n], grads[EstimatorId.RT][:, :n], atol=1e-12)
        # W = I ⊗ xᵀ: bloques 1×1 por unidad, LRT y R2-G2 coinciden
        np.testing.assert_allclose(grads[EstimatorId.LRT], grads[EstimatorId.R2G2], atol=1e-9)
        assert grads[EstimatorId.SCORE].shape == (50, 2 * n)

    def test_lrt_needs_layer_structure(self):
        gen = np.random.default_rng(1)
        ctx, _ = layer_site(gen, 1, 2)
        with pytest.raises(ValueError):
            paired_site_gradients(quadratic_oracle(gen, ctx), gen.standard_normal((3, 2)), [EstimatorId.LRT])

    def test_every_estimate_carries_the_shared_noise_tag(self):
        gen = np.random.default_rng(2)
        ctx, lrt = layer_site(gen, 2, 3)
        noise = RngStream(7).child(StreamKey.NOISE)
        eps = sample_standard_normal((20, ctx.n), noise)
        estimates = paired_site_estimates(quadratic_oracle(gen, ctx), eps, list(EstimatorId), lrt_site=lrt, noise_tag=noise)
        assert len(estimates[EstimatorId.LRT]) == 2
        for estimator, parts in estimates.items():
            for part in parts:
                assert part.estimator_id is estimator
                assert part.noise_tag == noise
