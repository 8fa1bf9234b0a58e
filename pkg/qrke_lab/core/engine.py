import asyncio
from typing import Optional

from ..utils.log import logger
from .precision import PrecisionContext, make_context


class LabEngine:
    """计算引擎包装器，持有配置并把阻塞计算移交给工作线程"""

    def __init__(self, lab_config):
        self.lab_config = lab_config
        self._contexts: dict[int, PrecisionContext] = {}

    def context(self, digits: Optional[int] = None) -> PrecisionContext:
        """按位数取精度上下文（同一位数复用同一个对象）"""
        digits = digits or self.lab_config.default_digits
        if digits not in self._contexts:
            self._contexts[digits] = make_context(digits, guard=self.lab_config.guard_digits)
            logger.debug(f"创建精度上下文: {digits} 位 + {self.lab_config.guard_digits} 保护位")
        return self._contexts[digits]

    def chunks(self, requested: Optional[int] = None) -> int:
        return requested or self.lab_config.default_chunks

    async def call(self, func, *args, **kwargs):
        """在线程中执行阻塞计算"""
        try:
            return await asyncio.to_thread(func, *args, **kwargs)
        except Exception as e:
            logger.debug(f"计算 {getattr(func, '__name__', func)} 失败 - {type(e).__name__}: {e}")
            raise
