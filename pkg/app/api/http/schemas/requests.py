from typing import Any, List, Optional

from pydantic import AliasChoices, BaseModel, ConfigDict, Field


class VerifyRequest(BaseModel):
    """
    Payload de verificación.

    Campos:
      - config: nombre de una config empaquetada (default, smoke).
      - overrides: claves de config a reemplazar (mismas claves con punto que el archivo).
      - checks: subconjunto de checks a correr; vacío = todos.
      - seed: reemplaza la lista de seeds (se usa la primera).
    """
    model_config = ConfigDict(
        populate_by_name=True,
        json_schema_extra={
            "example": {
                "config": "smoke",
                "overrides": {"site.m": 2, "site.n": 8},
                "checks": ["oracle_sweep", "equivalence"],
                "seed": 0,
            }
        },
    )

    config: str = Field("smoke", description="Config empaquetada (sin extensión)", pattern=r"^[A-Za-z0-9_\-]+$")

    overrides: dict[str, Any] = Field(
        default_factory=dict,
        description="Claves de config a reemplazar, p. ej. {'mc.samples': 20000}",
        validation_alias=AliasChoices("overrides", "config_overrides"),
    )

    checks: List[str] = Field(default_factory=list, description="Checks a correr (vacío = todos)")

    seed: Optional[int] = Field(None, ge=0, description="Seed de la verificación")


class EquivalenceRequest(BaseModel):
    """
    Payload del test de equivalencia LRT / R2-G2.
    """
    model_config = ConfigDict(
        populate_by_name=True,
        json_schema_extra={"example": {"config": "smoke", "trials": 200, "seed": 1}},
    )

    config: str = Field("smoke", description="Config empaquetada (sin extensión)", pattern=r"^[A-Za-z0-9_\-]+$")
    trials: Optional[int] = Field(None, ge=1, description="Reemplaza equivalence.trials")
    seed: Optional[int] = Field(None, ge=0, description="Seed del test")
