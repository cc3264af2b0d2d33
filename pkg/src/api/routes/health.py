from fastapi import APIRouter

from src import __version__
from src.config import get_config
from src.helper.workers import fft_workers

router = APIRouter(tags=["Health"])


@router.get("/health")
async def health_check():
    """Liveness plus the resource limits requests run under."""
    return {
        "status": "healthy",
        "fft_workers": fft_workers(),
        "memory_limit_gb": get_config().memory_limit_gb,
    }


@router.get("/")
async def root_route():
    return {"service": "orient3d", "version": __version__}
