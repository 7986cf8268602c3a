import logging
import os

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.domain.constants import CG_RESIDUAL_TOL
from app.domain.errors import ConfigError
from app.infrastructure.estimators.site import EstimatorId
from app.infrastructure.harness.datasets import DatasetKind
from app.infrastructure.linalg.cg import CgConfig
from app.infrastructure.nets.layers import NETWORK_ESTIMATORS, Activation, NoiseSharing
from app.infrastructure.nets.losses import LossKind
from app.infrastructure.nets.network import LrtNoise
from app.infrastructure.nets.optim import OptimizerKind

"""
Configuración de experimentos: archivo plano `clave = valor` (sintaxis .env).

Las claves con punto (model.widths, cg.tol, ...) se mapean a campos por alias.
Las listas se escriben separadas por comas. El entorno nunca se consulta.
"""

_logger = logging.getLogger(__name__)

_LIST_FIELDS = ("seeds", "model_widths")


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid", frozen=True)

    estimators: list[EstimatorId] = Field(
        default_factory=lambda: [EstimatorId.RT, EstimatorId.LRT, EstimatorId.R2G2],
        alias="estimator", min_length=1,
        description="Estimadores a comparar (SCORE, RT, LRT, R2G2)",
    )
    seeds: list[int] = Field(default_factory=lambda: [0], min_length=1)
    steps: int = Field(2000, ge=1)
    lr: float = Field(1e-3, gt=0)
    optimizer: OptimizerKind = OptimizerKind.ADAM
    batch_size: int = Field(32, ge=1)
    log_every: int = Field(100, ge=1)

    model_widths: list[int] = Field(default_factory=lambda: [2, 16, 2], alias="model.widths")
    model_activation: Activation = Field(Activation.TANH, alias="model.activation")
    model_noise_sharing: NoiseSharing = Field(NoiseSharing.PER_EXAMPLE, alias="model.noise_sharing")
    model_gaussian_bias: bool = Field(False, alias="model.gaussian_bias")
    model_lrt_noise: LrtNoise = Field(LrtNoise.DERIVED, alias="model.lrt_noise")

    site_m: int = Field(2, ge=1, alias="site.m")
    site_n: int = Field(8, ge=1, alias="site.n")
    cg_tol: float = Field(CG_RESIDUAL_TOL, gt=0, alias="cg.tol")
    cg_max_iters: int = Field(0, ge=0, alias="cg.max_iters", description="0 = filas + 5")

    dataset_kind: DatasetKind = Field(DatasetKind.BLOBS, alias="dataset.kind")
    dataset_n: int = Field(200, ge=10, alias="dataset.n")
    dataset_separation: float = Field(4.0, gt=0, alias="dataset.separation")
    dataset_noise: float = Field(0.1, ge=0, alias="dataset.noise")

    loss_kind: LossKind = Field(LossKind.SOFTMAX_NLL, alias="loss.kind")
    loss_obs_noise: float = Field(1.0, gt=0, alias="loss.obs_noise")

    mc_replicates: int = Field(16, ge=2, alias="mc.replicates")
    mc_samples: int = Field(100_000, ge=2, alias="mc.samples")
    mc_paired_draws: int = Field(10_000, ge=2, alias="mc.paired_draws")
    mc_conditional_draws: int = Field(10_000, ge=2, alias="mc.conditional_draws")
    mc_distribution_draws: int = Field(100_000, ge=2, alias="mc.distribution_draws")
    equivalence_trials: int = Field(1000, ge=1, alias="equivalence.trials")
    oracle_sites: int = Field(500, ge=1, alias="oracle.sites")
    variance_driver: EstimatorId = Field(EstimatorId.RT, alias="variance.driver")

    out_dir: str = Field("results", alias="out.dir")
    out_wall_time: bool = Field(False, alias="out.wall_time")

    @field_validator(*_LIST_FIELDS, mode="before")
    @classmethod
    def _split_commas(cls, value):
        if isinstance(value, str):
            return [item.strip() for item in value.split(",") if item.strip()]
        return value

    @field_validator("estimators", "variance_driver", mode="before")
    @classmethod
    def _upper_estimator(cls, value, info):
        if info.field_name == "estimators" and isinstance(value, str):
            value = [item.strip() for item in value.split(",") if item.strip()]
        if isinstance(value, list):
            return [v.upper().replace("-", "") if isinstance(v, str) else v for v in value]
        if isinstance(value, str):
            return value.upper().replace("-", "")
        return value

    @field_validator("model_widths")
    @classmethod
    def _check_widths(cls, value: list[int]):
        if len(value) < 2 or min(value) < 1:
            raise ValueError("model.widths necesita al menos dos anchos >= 1")
        return value

    @model_validator(mode="after")
    def _check_consistency(self):
        if self.model_noise_sharing is NoiseSharing.PER_BATCH and EstimatorId.LRT in self.estimators:
            raise ValueError("LRT no es válido con model.noise_sharing = per_batch")
        if self.model_widths[0] != 2:
            raise ValueError("los datasets sintéticos son 2-D: model.widths debe empezar en 2")
        if self.dataset_kind is DatasetKind.LINREG:
            if self.loss_kind is LossKind.SOFTMAX_NLL or self.model_widths[-1] != 1:
                raise ValueError("linreg requiere loss gaussian_nll/quadratic y una salida")
        elif self.loss_kind is not LossKind.SOFTMAX_NLL or self.model_widths[-1] < 2:
            raise ValueError("datasets de clasificación requieren softmax_nll y >= 2 salidas")
        if self.variance_driver not in NETWORK_ESTIMATORS:
            raise ValueError("variance.driver debe ser RT, LRT o R2G2")
        return self

    @property
    def network_estimators(self) -> list[EstimatorId]:
        return [e for e in self.estimators if e in NETWORK_ESTIMATORS]

    def cg_config(self) -> CgConfig:
        return CgConfig(max_iters=self.cg_max_iters or None, residual_tol=self.cg_tol)

    def with_overrides(
        self, seed: int | None = None, estimator: str | None = None, out_dir: str | None = None
    ) -> "ExperimentConfig":
        """Aplica overrides de la CLI pasando otra vez por la validación."""

        data = self.model_dump(by_alias=True)
        if seed is not None:
            data["seeds"] = [seed]
        if estimator is not None:
            data["estimator"] = estimator
        if out_dir is not None:
            data["out.dir"] = out_dir
        return parse_config(data, source="overrides")


def parse_config(data: dict, source: str = "<dict>") -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"config inválida ({source}): {e}") from e


def resolve_config_path(name: str, config_dir: str) -> str:
    """`default` → <config_dir>/default.cfg; rutas existentes se usan tal cual."""

    if os.path.isfile(name):
        return name
    candidate = os.path.join(config_dir, name if name.endswith(".cfg") else f"{name}.cfg")
    if os.path.isfile(candidate):
        return candidate
    raise ConfigError(f"no existe el archivo de config: {name}")


def load_config(path: str) -> ExperimentConfig:
    if not os.path.isfile(path):
        raise ConfigError(f"no existe el archivo de config: {path}")
    raw = dotenv_values(path, interpolate=False)
    data = {k: v for k, v in raw.items() if v is not None and v != ""}
    missing = [k for k, v in raw.items() if v is None]
    if missing:
        raise ConfigError(f"claves sin valor en {path}: {', '.join(missing)}")
    cfg = parse_config(data, source=path)
    _logger.debug("config %s: %s", path, cfg.model_dump(by_alias=True))
    return cfg
