from typing import List, Optional
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import BaseModel, Field


class CorsSettings(BaseModel):
    allow_origins: List[str] = ["*"]
    allow_credentials: bool = True
    allow_methods: List[str] = ["*"]
    allow_headers: List[str] = ["*"]


class ServerSettings(BaseModel):
    port: int = 1999
    workers: int = 1
    limit_concurrency: int = 4
    stack_cache_size: int = Field(4, ge=1, description="Wavelet stacks kept in memory by the HTTP service")
    cors: CorsSettings = CorsSettings()


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="ORIENT3D_",
        env_nested_delimiter="__",
        extra="ignore",
    )
    environment: str = "development"
    log_level: str = "INFO"
    threads: Optional[int] = Field(None, ge=1)
    memory_limit_gb: float = Field(8.0, gt=0)
    api_key: Optional[str] = None
    server: ServerSettings = ServerSettings()


_config_instance = None


def get_config() -> Settings:
    """
    Returns the singleton instance of the Settings class.
    """
    global _config_instance
    if _config_instance is None:
        _config_instance = Settings()
    return _config_instance


def reset_config() -> None:
    """Drop the cached settings so the next get_config() re-reads the environment."""
    global _config_instance
    _config_instance = None


if __name__ == "__main__":
    settings = get_config()
    print(settings.model_dump())
