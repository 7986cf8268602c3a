from typing import Any, List

from pydantic import BaseModel


class CheckResultModel(BaseModel):
    """
    Resultado de un check con nombre.
    - passed: True si el check cumple su tolerancia.
    - metrics: métricas del check (errores máximos, z-scores, conteos).
    - detail: texto libre cuando el check falla.
    """
    name: str
    passed: bool
    metrics: dict[str, Any]
    detail: str = ""


class VerifyResponse(BaseModel):
    """
    Respuesta de /api/verify:
    - seed: seed usada.
    - passed: True si todos los checks pasaron.
    - checks: resultado por check, en orden de ejecución.
    """
    seed: int
    passed: bool
    checks: List[CheckResultModel]

    model_config = {
        "json_schema_extra": {
            "examples": [{
                "seed": 0,
                "passed": True,
                "checks": [{
                    "name": "oracle_sweep",
                    "passed": True,
                    "metrics": {"sites": 50, "rank_deficient_sites": 21, "max_abs_diff": 3.1e-14},
                    "detail": "",
                }],
            }]
        }
    }


class EquivalenceResponse(BaseModel):
    """
    Respuesta de /api/equivalence.

    Campos:
      - passed: max_abs_diff ≤ tolerancia y la entrada x = 0 fue rechazada.
      - trials: sitios m = 1 evaluados.
      - max_abs_diff: mayor diferencia absoluta entre gradientes LRT y R2-G2.
      - zero_input_rejected: LRT con x = 0 levantó DegenerateVarianceError.
    """
    passed: bool
    trials: int
    max_abs_diff: float
    zero_input_rejected: bool

    model_config = {
        "json_schema_extra": {
            "examples": [{"passed": True, "trials": 1000, "max_abs_diff": 2.2e-15, "zero_input_rejected": True}]
        }
    }
