from contextlib import asynccontextmanager

from fastapi import FastAPI

from src.config.settings import get_config
from src.helper.workers import fft_workers
from src.helper.loggers import startup_sequence_logger


def startup_sequence():
    config = get_config()
    startup_sequence_logger.info(
        f"Starting up: environment={config.environment}, fft_workers={fft_workers()}, "
        f"memory_limit_gb={config.memory_limit_gb}"
    )
    if not config.api_key:
        startup_sequence_logger.warning("ORIENT3D_API_KEY is not set; every request will be rejected")


def shutdown_sequence():
    startup_sequence_logger.debug("Shutting down...")


@asynccontextmanager
async def lifespan(_: FastAPI):
    startup_sequence()
    yield
    shutdown_sequence()
