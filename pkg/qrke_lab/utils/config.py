import json
from pathlib import Path
from typing import Any, Dict, Optional

from .log import logger

SCHEMA_FILE = Path(__file__).parent.parent / "_conf_schema.json"


def load_schema() -> Dict[str, Dict[str, Any]]:
    """读取配置 schema"""
    with open(SCHEMA_FILE, "r", encoding="utf-8") as f:
        return json.load(f)


class LabConfig:
    """工作台配置类"""

    def __init__(self, config: Dict[str, Any]):
        """初始化配置"""
        self.config = config
        self._load_config()

    def _load_config(self):
        """加载配置项"""
        self.default_digits = self.config.get("default_digits", 40)
        self.guard_digits = self.config.get("guard_digits", 20)
        self.cf_max_terms = self.config.get("cf_max_terms", 80)
        self.reanchor_period = self.config.get("reanchor_period", 1000000)
        self.default_chunks = self.config.get("default_chunks", 1)
        self.bench_min_elapsed_ms = self.config.get("bench_min_elapsed_ms", 50)
        self.output_format = self.config.get("output_format", "text")
        self.report_dir = self.config.get("report_dir", "").strip()
        self.write_pdf = self.config.get("write_pdf", False)
        self.log_level = self.config.get("log_level", "INFO")
        self.kex_margin_digits = self.config.get("kex_margin_digits", 10)

    @classmethod
    def from_schema(cls, path: Optional[str] = None) -> "LabConfig":
        """以 schema 默认值为底，叠加可选的 JSON 配置文件"""
        values = {key: item.get("default") for key, item in load_schema().items()}
        if path:
            try:
                with open(path, "r", encoding="utf-8") as f:
                    overrides = json.load(f)
            except (OSError, json.JSONDecodeError) as e:
                raise ValueError(f"无法读取配置文件 {path}: {e}") from e
            if not isinstance(overrides, dict):
                raise ValueError(f"配置文件 {path} 必须是 JSON 对象")
            values.update(overrides)
            logger.debug(f"已从 {path} 加载 {len(overrides)} 个配置项")
        return cls(values)

    def get_config_info(self) -> str:
        """获取配置信息字符串"""
        return (
            f"default_digits={self.default_digits}, guard_digits={self.guard_digits}, "
            f"cf_max_terms={self.cf_max_terms}, reanchor_period={self.reanchor_period}, "
            f"default_chunks={self.default_chunks}, output_format='{self.output_format}', "
            f"write_pdf={self.write_pdf}, report_dir='{self.report_dir or '当前目录'}'"
        )

    def save_config(self, path: str):
        """保存配置"""
        data = {key: getattr(self, key) for key in load_schema()}
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f, ensure_ascii=False, indent=2)


class LabConfigManager:
    """配置管理器，用于命令行 --set key=value"""

    def __init__(self, config: LabConfig):
        self.config = config
        self.schema = {}
        for key, item in load_schema().items():
            if "options" in item:
                self.schema[key] = {"type": "enum", "choices": item["options"]}
            else:
                self.schema[key] = {
                    "type": item["type"],
                    "min": item.get("min"),
                    "max": item.get("max"),
                }
        # 隐藏的配置项，不显示给用户但仍然可以设置
        self.schema["report_dir"]["hidden"] = True

    def get_current_config(self) -> Dict[str, Any]:
        """获取当前配置（只显示非隐藏项）"""
        return {
            k: getattr(self.config, k, None)
            for k, v in self.schema.items()
            if not v.get("hidden", False)
        }

    def validate_and_set_config(self, key: str, value: str) -> tuple[bool, str]:
        """验证并设置配置"""
        if key not in self.schema:
            # 只显示非隐藏的参数
            visible_keys = [k for k, v in self.schema.items() if not v.get("hidden", False)]
            return False, f"不支持的参数: {key}\n可用参数: {', '.join(visible_keys)}"

        schema_item = self.schema[key]
        typ = schema_item["type"]

        if typ == "enum":
            if value not in schema_item["choices"]:
                return False, f"无效值: {value}\n可选值: {', '.join(schema_item['choices'])}"
            setattr(self.config, key, value)
        elif typ == "bool":
            v = value.lower()
            if v in ("true", "1", "yes", "on"):
                v = True
            elif v in ("false", "0", "no", "off"):
                v = False
            else:
                return False, "布尔值仅支持: true/false/yes/no/on/off/1/0"
            setattr(self.config, key, v)
        elif typ == "int":
            try:
                v = int(value)
            except ValueError:
                return False, f"配置项 {key} 的值 '{value}' 不是有效的整数。"
            minv, maxv = schema_item.get("min"), schema_item.get("max")
            if (minv is not None and v < minv) or (maxv is not None and v > maxv):
                return False, f"配置项 {key} 的值必须在 {minv} 到 {maxv} 之间。"
            setattr(self.config, key, v)
        else:
            setattr(self.config, key, value)

        return True, f"{key} 已更新为: {getattr(self.config, key)}"
