import sys
from typing import Optional

from loguru import logger

from common.config import get_settings

_FORMAT = "<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {name}:{function} - {message}"


def configure_logging(level: Optional[str] = None) -> None:
    logger.remove()
    logger.add(sys.stderr, level=(level or get_settings().log_level).upper(), format=_FORMAT)
