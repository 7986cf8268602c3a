import logging
from functools import lru_cache

from pydantic_settings import BaseSettings
from rich.logging import RichHandler

"""
Configuración de ejecución (se carga de .env si existe).

No toca la semántica de los experimentos: éstos se leen de los archivos
de app/configs y nunca del entorno.
"""

class Settings(BaseSettings):
    LOG_LEVEL: str = "INFO"

    # Procesos para réplicas/seeds (1 = en línea)
    WORKERS: int = 1

    # Configs de experimento empaquetadas
    CONFIG_DIR: str = "app/configs"
    DEFAULT_OUT_DIR: str = "results"

    # wall_ms en los CSV (rompe la reproducibilidad byte a byte)
    RECORD_WALL_TIME: bool = False

    class Config:
        env_file = ".env"

@lru_cache
def get_settings() -> Settings:
    """Singleton de Settings para inyectar en FastAPI y la CLI."""

    return Settings()

def configure_logging(level: str | int | None = None) -> None:
    """Instala un RichHandler en el logger raíz (idempotente)."""

    level = level or get_settings().LOG_LEVEL
    root = logging.getLogger()
    if not any(isinstance(h, RichHandler) for h in root.handlers):
        handler = RichHandler(rich_tracebacks=True, show_path=False)
        handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
        root.addHandler(handler)
    root.setLevel(level.upper() if isinstance(level, str) else level)
