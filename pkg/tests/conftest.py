from pathlib import Path

import pytest

from app.infrastructure.harness.config import ExperimentConfig, load_config, parse_config

ROOT = Path(__file__).resolve().parents[1]
CONFIG_DIR = ROOT / "app" / "configs"

# Config mínima para correr servicios completos en segundos.
TINY = {
    "estimator": "RT,LRT,R2G2",
    "seeds": "0",
    "steps": "6",
    "lr": "0.01",
    "batch_size": "8",
    "log_every": "3",
    "model.widths": "2,4,2",
    "site.m": "2",
    "site.n": "6",
    "dataset.n": "20",
    "mc.replicates": "2",
    "mc.samples": "2000",
    "mc.paired_draws": "200",
    "mc.conditional_draws": "2000",
    "mc.distribution_draws": "2000",
    "equivalence.trials": "20",
    "oracle.sites": "20",
}


@pytest.fixture
def smoke_cfg() -> ExperimentConfig:
    return load_config(str(CONFIG_DIR / "smoke.cfg"))


@pytest.fixture
def make_cfg(tmp_path):
    """Fábrica de configs pequeñas con overrides por clave (alias con punto)."""

    def _make(**overrides) -> ExperimentConfig:
        data = dict(TINY)
        data["out.dir"] = str(tmp_path / "out")
        data.update({k.replace("__", "."): v for k, v in overrides.items()})
        return parse_config(data, source="test")

    return _make


@pytest.fixture
def tiny_cfg_file(tmp_path) -> Path:
    """La config TINY escrita como archivo clave = valor."""

    path = tmp_path / "tiny.cfg"
    lines = [f"{k} = {v}" for k, v in TINY.items()]
    path.write_text("# config de test\n" + "\n".join(lines) + "\n", encoding="utf-8")
    return path
