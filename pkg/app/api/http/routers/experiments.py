import logging

from fastapi import APIRouter, Depends, HTTPException

from app.api.http.schemas.requests import EquivalenceRequest, VerifyRequest
from app.api.http.schemas.responses import EquivalenceResponse, VerifyResponse
from app.application.services.verify_service import VerifyService
from app.domain.errors import ConfigError, GradientLabError
from app.infrastructure.harness.artifacts import to_jsonable
from app.infrastructure.harness.config import ExperimentConfig, load_config, parse_config, resolve_config_path
from app.infrastructure.settings import Settings, get_settings

router = APIRouter(tags=["experiments"])

"""
Router de verificación de estimadores.

Corre los checks del laboratorio sobre una config empaquetada con overrides
opcionales. No escribe artefactos: el reporte vuelve en la respuesta.

Errores:
  - 422: config inválida, clave desconocida o check inexistente.
  - 500: fallo numérico (CG, oráculo, varianza degenerada) u otro error controlado.
"""

_logger = logging.getLogger(__name__)


def _request_config(name: str, overrides: dict, seed: int | None, settings: Settings) -> ExperimentConfig:
    cfg = load_config(resolve_config_path(name, settings.CONFIG_DIR))
    data = cfg.model_dump(by_alias=True)
    data.update(overrides)
    if seed is not None:
        data["seeds"] = [seed]
    return parse_config(data, source=f"request:{name}")


def _run(cfg: ExperimentConfig, checks: list[str] | None, settings: Settings) -> dict:
    try:
        report = VerifyService(settings=settings).run(cfg, checks)
    except ConfigError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except GradientLabError as e:
        _logger.error("verificación abortada: %s", e)
        raise HTTPException(status_code=500, detail=f"{type(e).__name__}: {e}")
    return to_jsonable(report.as_dict())


@router.post(
    "/verify",
    response_model=VerifyResponse,
    summary="Verificar estimadores: oráculos, sesgo, varianza y equivalencia",
    description=(
        "Corre los checks con nombre sobre una config empaquetada.\n\n"
        "Checks disponibles: `oracle_sweep`, `projection_invariants`, `gaussian_elimination`, "
        "`unbiasedness`, `unbiasedness_power`, `variance_dominance`, `equivalence`, "
        "`conditional_consistency`, `conditional_distribution`, `finite_differences`, "
        "`kl_gradient`, `value_preservation`.\n\n"
        "**Detalles**\n"
        "- `overrides` usa las mismas claves que el archivo de config (`mc.samples`, `site.m`, ...).\n"
        "- Un check fallido no es un error HTTP: vuelve 200 con `passed=false`.\n"
        "- Con la config `default` los checks estadísticos pueden tardar decenas de segundos."
    ),
    responses={
        200: {"description": "OK – Reporte de verificación."},
        422: {"description": "Config, override o nombre de check inválido."},
        500: {"description": "Fallo numérico durante la verificación."},
    },
)
def verify(req: VerifyRequest, settings: Settings = Depends(get_settings)) -> VerifyResponse:
    try:
        cfg = _request_config(req.config, req.overrides, req.seed, settings)
    except ConfigError as e:
        raise HTTPException(status_code=422, detail=str(e))
    return VerifyResponse(**_run(cfg, req.checks or None, settings))


@router.post(
    "/equivalence",
    response_model=EquivalenceResponse,
    summary="Equivalencia exacta LRT / R2-G2 en sitios de una unidad",
    description=(
        "Para sitios m = 1 aleatorios compara el gradiente LRT (ξ derivado del mismo z) "
        "con el gradiente R2-G2 condicionado en z. También verifica que LRT rechace x = 0."
    ),
    responses={
        200: {"description": "OK – Máxima diferencia y veredicto."},
        422: {"description": "Config inválida."},
        500: {"description": "Fallo numérico."},
    },
)
def equivalence(req: EquivalenceRequest, settings: Settings = Depends(get_settings)) -> EquivalenceResponse:
    overrides = {} if req.trials is None else {"equivalence.trials": req.trials}
    try:
        cfg = _request_config(req.config, overrides, req.seed, settings)
    except ConfigError as e:
        raise HTTPException(status_code=422, detail=str(e))
    check = _run(cfg, ["equivalence"], settings)["checks"][0]
    return EquivalenceResponse(passed=check["passed"], **check["metrics"])
