"""
help.py
帮助消息：静态主题来自 data/helpmsg.json，命名实验的参数说明由 NAMED_EXPERIMENTS 生成
"""

import json
from pathlib import Path
from typing import Any, Dict, Optional

from .experiments import NAMED_EXPERIMENTS
from .log import logger

# 参数名 -> 命令行选项
_OPTION_NAMES = {
    "digits": "--digits",
    "x": "--x",
    "r": "--r",
    "m": "--m",
    "match_digits": "--match-digits",
    "modulus": "--modulus",
    "comp": "--comp",
    "seed": "--seed",
}


def format_param(value: Any) -> str:
    """10 的整数次幂写成 1eN，与范围简写一致"""
    if isinstance(value, int) and value >= 10**6:
        text = str(value)
        if text.strip("0") == "1":
            return f"1e{len(text) - 1}"
    return str(value)


class HelpManager:
    """帮助消息管理器"""

    def __init__(self, help_file: Optional[Path] = None):
        """初始化帮助管理器

        Args:
            help_file: 帮助文件路径，默认为包内 data/helpmsg.json
        """
        self.help_file = help_file or Path(__file__).parent.parent / "data" / "helpmsg.json"
        self._topics: Dict[str, str] = {}
        self._experiment_notes: Dict[str, str] = {}
        self._load_help_messages()

    def _load_help_messages(self):
        """加载帮助消息；文件缺失或损坏时只保留生成的实验说明"""
        self._topics, self._experiment_notes = {}, {}
        if not self.help_file.exists():
            logger.warning(f"帮助消息文件不存在: {self.help_file}")
            return
        try:
            with open(self.help_file, "r", encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            logger.error(f"加载帮助消息文件失败 - {e}")
            return
        self._topics = dict(data.get("topics", {}))
        self._experiment_notes = dict(data.get("experiments", {}))
        unknown = sorted(set(self._experiment_notes) - set(NAMED_EXPERIMENTS))
        if unknown:
            logger.warning(f"帮助文件中有未定义的命名实验: {', '.join(unknown)}")
        logger.debug(f"成功加载帮助消息文件 {self.help_file}")

    def topics(self) -> list[str]:
        return sorted(self._topics)

    def experiment_table(self) -> str:
        """命名实验一览，每行一个实验"""
        width = max(len(name) for name in NAMED_EXPERIMENTS)
        lines = ["Named experiments (qrke-lab help NAME lists the parameters):"]
        for name in NAMED_EXPERIMENTS:
            lines.append(f"  {name.ljust(width)}  {self._experiment_notes.get(name, '')}".rstrip())
        return "\n".join(lines)

    def experiment_help(self, name: str) -> str:
        """命名实验的固定参数及等价的 attack / kex 命令行"""
        params = NAMED_EXPERIMENTS[name]
        lines = [f"{name}: {self._experiment_notes.get(name, 'named experiment')}", "", "Fixed parameters:"]
        for key, value in params.items():
            if key == "extra":
                continue
            lines.append(f"  {key} = {format_param(value)}")
        for key, value in params.get("extra", {}).items():
            lines.append(f"  {key} = {format_param(value)}  (second instance)")

        options = [f"--r-range {format_param(params['r_lo'])}:{format_param(params['r_hi'])}"]
        options += [f"{_OPTION_NAMES[k]} {format_param(v)}" for k, v in params.items() if k in _OPTION_NAMES]
        lines += ["", f"Run: qrke-lab reproduce --experiment {name}", f"Parameters as options: {' '.join(options)}"]
        return "\n".join(lines)

    def get_help_message(self, key: str, default: Optional[str] = None) -> str:
        """获取帮助消息

        Args:
            key: 主题名或命名实验名
            default: 默认消息（如果键不存在）

        Returns:
            str: 帮助消息
        """
        if key in NAMED_EXPERIMENTS:
            return self.experiment_help(key)
        if key in self._topics:
            text = self._topics[key]
            if key == "reproduce":
                text += "\n\n" + self.experiment_table()
            return text
        logger.warning(f"未找到帮助消息键: {key}")
        if default is not None:
            return default
        names = self.topics() + list(NAMED_EXPERIMENTS)
        return f"help topic '{key}' not found; topics: {', '.join(names)}"


# 全局帮助管理器实例
_help_manager: Optional[HelpManager] = None


def init_help_manager(help_file: Optional[Path] = None):
    """初始化帮助管理器"""
    global _help_manager
    _help_manager = HelpManager(help_file)


def get_help_message(key: str, default: Optional[str] = None) -> str:
    """获取帮助消息；管理器未初始化时先初始化"""
    if _help_manager is None:
        init_help_manager()
    return _help_manager.get_help_message(key, default)
