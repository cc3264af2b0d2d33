import secrets

from fastapi import HTTPException, Security, status
from fastapi.security import APIKeyHeader

from src.config.settings import get_config
from src.helper.loggers import api_logger

api_key_header = APIKeyHeader(name="X-API-Key", auto_error=False)


async def verify_api_key(api_key: str = Security(api_key_header)):
    """
    Check the X-API-Key header against ORIENT3D_API_KEY.

    Raises:
        HTTPException: 401 when the header is missing, 403 when it does not match
            (or no key is configured)
    """
    expected = get_config().api_key

    if api_key is None:
        raise HTTPException(
            status_code=status.HTTP_401_UNAUTHORIZED,
            detail="Missing API Key. Please provide X-API-Key header."
        )

    if not expected or not secrets.compare_digest(api_key.encode(), expected.encode()):
        api_logger.warning("rejected request with an invalid API key")
        raise HTTPException(
            status_code=status.HTTP_403_FORBIDDEN,
            detail="Invalid API Key"
        )

    return api_key
