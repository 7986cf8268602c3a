import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI

from app.api.http.routers.experiments import router as experiments_router
from app.infrastructure.settings import configure_logging, get_settings

"""
Punto de entrada de la app FastAPI.
Expone los checks del laboratorio bajo /api y un healthcheck.
"""


@asynccontextmanager
async def lifespan(app: FastAPI):
    """En startup configura logging con el nivel de Settings."""

    settings = get_settings()
    configure_logging(settings.LOG_LEVEL)
    logging.getLogger(__name__).info("gradient lab: configs en %s", settings.CONFIG_DIR)
    yield


app = FastAPI(title="Gradient Lab", version="1.0.0", lifespan=lifespan)

app.include_router(experiments_router, prefix="/api")


@app.get("/health", tags=["health"])
def health():
    """Healthcheck simple para liveness/readiness."""

    return {"status": "ok"}
