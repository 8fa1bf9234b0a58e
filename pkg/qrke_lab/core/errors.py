"""
errors.py
工作台统一异常层级
"""


class LabError(Exception):
    """所有工作台异常的基类"""


class ParameterError(LabError, ValueError):
    """参数不合法（范围、格式、缺失等）"""


class DomainError(LabError, ValueError):
    """数值超出定义域，例如 |x| > 1 或非有限值"""


class DegenerateParameterError(ParameterError):
    """平凡角参数 x ∈ {0, ±1/2, ±1}，密钥交换退化"""


class PrecisionBudgetError(ParameterError):
    """精度预算不足，结果的尾部数字将是舍入噪声"""


class ConsistencyError(LabError):
    """内部一致性检查失败（例如两种筛法结果不一致）"""


class UsageError(LabError):
    """命令行用法错误"""
