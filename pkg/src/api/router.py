from fastapi import FastAPI
from fastapi.openapi.utils import get_openapi

from src import __version__
from src.api.middleware import setup_middleware
from src.api.startup_sequence import lifespan

app = FastAPI(
    title="Orientation Score API",
    description="Invertible 3D orientation scores: cake-wavelet stability reports, "
                "crossing-preserving enhancement and volume comparison",
    version=__version__,
    lifespan=lifespan,
    openapi_tags=[
        {
            "name": "Orientation Scores",
            "description": "Wavelet construction, enhancement and metrics endpoints"
        }
    ]
)


def custom_openapi():
    if app.openapi_schema:
        return app.openapi_schema

    openapi_schema = get_openapi(
        title=app.title,
        version=app.version,
        description=app.description,
        routes=app.routes,
    )
    openapi_schema.setdefault("components", {})["securitySchemes"] = {
        "APIKeyHeader": {
            "type": "apiKey",
            "in": "header",
            "name": "X-API-Key",
            "description": "The key configured as ORIENT3D_API_KEY."
        }
    }
    openapi_schema["security"] = [{"APIKeyHeader": []}]

    app.openapi_schema = openapi_schema
    return app.openapi_schema


app.openapi = custom_openapi

setup_middleware(app)

from src.api.routes.health import router as health_router
from src.api.routes.orientation_score_endpoints import router as orientation_score_router

app.include_router(health_router)
app.include_router(orientation_score_router)
