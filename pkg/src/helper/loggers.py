import logging
import sys

from src.config import get_config

conf = get_config()

_FORMATS = {
    "production": "ts=%(asctime)s level=%(levelname)s logger=%(name)s msg=\"%(message)s\"",
    "development": "%(asctime)s | %(levelname)-7s | %(name)s | %(message)s",
}


def _build_logger(logger_name: str, log_level: str, environment: str) -> logging.Logger:
    logger = logging.getLogger(logger_name)
    logger.setLevel(log_level.upper())
    if not logger.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(_FORMATS.get(environment, _FORMATS["development"])))
        logger.addHandler(handler)
    logger.propagate = False
    return logger


startup_sequence_logger = _build_logger(
    logger_name="startup_sequence_logger",
    log_level=conf.log_level,
    environment=conf.environment
)

sphere_logger = _build_logger(
    logger_name="sphere_logger",
    log_level=conf.log_level,
    environment=conf.environment
)

harmonics_logger = _build_logger(
    logger_name="harmonics_logger",
    log_level=conf.log_level,
    environment=conf.environment
)

wavelet_logger = _build_logger(
    logger_name="wavelet_logger",
    log_level=conf.log_level,
    environment=conf.environment
)

score_logger = _build_logger(
    logger_name="score_logger",
    log_level=conf.log_level,
    environment=conf.environment
)

diffusion_logger = _build_logger(
    logger_name="diffusion_logger",
    log_level=conf.log_level,
    environment=conf.environment
)

io_logger = _build_logger(
    logger_name="io_logger",
    log_level=conf.log_level,
    environment=conf.environment
)

cli_logger = _build_logger(
    logger_name="cli_logger",
    log_level=conf.log_level,
    environment=conf.environment
)

api_logger = _build_logger(
    logger_name="api_logger",
    log_level=conf.log_level,
    environment=conf.environment
)
