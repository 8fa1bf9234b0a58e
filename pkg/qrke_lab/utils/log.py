"""
log.py
包级日志：所有模块通过 `from ..utils.log import logger` 取得同一个 logger
"""

import logging

from rich.console import Console
from rich.logging import RichHandler

logger = logging.getLogger("qrke_lab")

_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


def setup_logging(level: str = "INFO") -> None:
    """在 stderr 上安装 RichHandler；报告走 stdout，日志不会混入报告"""
    level = (level or "INFO").upper()
    if level not in _LEVELS:
        level = "INFO"
    for handler in list(logger.handlers):
        if isinstance(handler, RichHandler):
            logger.removeHandler(handler)
    handler = RichHandler(
        console=Console(stderr=True),
        show_path=False,
        rich_tracebacks=True,
    )
    handler.setFormatter(logging.Formatter("%(message)s", datefmt="[%X]"))
    logger.addHandler(handler)
    logger.setLevel(level)
    logger.propagate = False
