"""
precision.py
任意精度实数上下文：所有模块共用的超越函数与取整原语
"""

import math
import re
from dataclasses import dataclass
from decimal import Decimal, ROUND_FLOOR, localcontext
from fractions import Fraction
from functools import cached_property
from typing import Optional, Union

import mpmath
from mpmath.ctx_mp import MPContext
from mpmath.libmp import to_str

from .errors import DomainError, ParameterError

MIN_DIGITS = 10
DEFAULT_GUARD = 20

# 纯十进制写法：可选符号、整数部分、可选小数部分
_PLAIN_DECIMAL = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)$")

Real = mpmath.mpf
RealLike = Union[mpmath.mpf, int, str, Decimal, Fraction]


@dataclass(frozen=True)
class PrecisionContext:
    """精度上下文

    digits 为对外承诺的十进制有效位数，guard 为额外的工作位数。
    每个上下文持有一份独立的 mpmath 上下文副本，互不共享可变精度状态。
    """

    digits: int
    guard: int = DEFAULT_GUARD

    def __post_init__(self):
        if not isinstance(self.digits, int) or self.digits < MIN_DIGITS:
            raise ParameterError(f"精度位数必须 ≥ {MIN_DIGITS}，当前为 {self.digits}")
        if not isinstance(self.guard, int) or self.guard < 0:
            raise ParameterError(f"保护位数必须为非负整数，当前为 {self.guard}")

    @property
    def working_digits(self) -> int:
        return self.digits + self.guard

    @cached_property
    def mp(self) -> MPContext:
        ctx = mpmath.mp.clone()
        ctx.dps = self.working_digits
        return ctx

    def scratch(self, working_digits: int) -> MPContext:
        """返回一个指定工作位数的临时 mpmath 上下文"""
        ctx = mpmath.mp.clone()
        ctx.dps = working_digits
        return ctx

    def __getstate__(self):
        # mpmath 上下文不参与序列化，反序列化后按需重建
        return {"digits": self.digits, "guard": self.guard}

    def __setstate__(self, state):
        object.__setattr__(self, "digits", state["digits"])
        object.__setattr__(self, "guard", state["guard"])


def make_context(digits: int, guard: int = DEFAULT_GUARD) -> PrecisionContext:
    """创建精度上下文，digits 低于下限时抛出 ParameterError"""
    return PrecisionContext(digits=digits, guard=guard)


def _context_of(value) -> MPContext:
    return getattr(value, "context", mpmath.mp)


def to_real(value: RealLike, ctx: PrecisionContext, mp=None) -> Real:
    """把各种数值表示转换为 ctx 工作精度下的实数"""
    mp = mp or ctx.mp
    if isinstance(value, Fraction):
        result = mp.mpf(value.numerator) / mp.mpf(value.denominator)
    elif isinstance(value, Decimal):
        result = mp.mpf(str(value))
    elif isinstance(value, str):
        result = parse_real(value, ctx, mp=mp)
    else:
        result = mp.mpf(value)
    if not mp.isfinite(result):
        raise DomainError(f"数值必须是有限值: {value}")
    return result


def is_plain_decimal(text: str) -> bool:
    return bool(_PLAIN_DECIMAL.match(text.strip()))


def parse_real(text: str, ctx: PrecisionContext, mp=None) -> Real:
    """按纯十进制字符串解析实数，格式错误时抛出 ParameterError"""
    cleaned = text.strip()
    if not is_plain_decimal(cleaned):
        raise ParameterError(f"不是合法的十进制实数: '{text}'")
    return (mp or ctx.mp).mpf(cleaned)


def render(value: Real, ctx: PrecisionContext, digits: Optional[int] = None) -> str:
    """以定点十进制形式输出实数（有效位数默认为 ctx.digits）"""
    if isinstance(value, int):
        return str(value)
    n = digits or ctx.digits
    return to_str(
        ctx.mp.mpf(value)._mpf_, n, min_fixed=-math.inf, max_fixed=math.inf
    )


def render_short(value, digits: int = 6) -> str:
    """短格式，必要时使用科学记数（残差等只关心量级的数）"""
    return mpmath.nstr(value, digits)


def digits_agree(a: Real, b: Real, digits: int) -> bool:
    """a 与 b 的差的绝对值是否小于 10^-digits"""
    mp = _context_of(a)
    return mp.fabs(a - b) < mp.mpf(10) ** (-digits)


def arccos(x: RealLike, ctx: PrecisionContext) -> Real:
    """反余弦主值，取值于 [0, π]"""
    x = to_real(x, ctx)
    if mpmath.fabs(x) > 1:
        raise DomainError(f"arccos 的参数必须在 [-1, 1] 内: {render(x, ctx, 20)}")
    return ctx.mp.acos(x)


def cos_of(theta: RealLike, ctx: PrecisionContext, working_digits: Optional[int] = None) -> Real:
    """余弦

    先在工作精度下把 theta 约化到 [0, 2π)，再求余弦，结果舍入回 ctx 精度。
    working_digits 未给出时使用 ctx.digits + guard + theta 整数部分位数。
    """
    if not hasattr(theta, "_mpf_"):
        theta = to_real(theta, ctx)
    elif not _context_of(theta).isfinite(theta):
        raise DomainError("cos_of 的参数必须是有限值")
    if working_digits is None:
        working_digits = ctx.working_digits + len(str(abs(int(theta))))
    wp = ctx.scratch(working_digits)
    theta = wp.mpf(theta)
    two_pi = 2 * wp.pi
    reduced = theta - wp.floor(theta / two_pi) * two_pi
    return ctx.mp.mpf(wp.cos(reduced))


def pi(ctx: PrecisionContext) -> Real:
    return +ctx.mp.pi


def exact_text(a: Real) -> str:
    """a 在其自身工作精度下的定点十进制表示"""
    mp = _context_of(a)
    if not mp.isfinite(a):
        raise DomainError("数值必须是有限值")
    return to_str(a._mpf_, mp.dps, min_fixed=-math.inf, max_fixed=math.inf)


def floor_scaled(a: RealLike, m: int) -> int:
    """⌊a·10^m⌋，向负无穷取整

    在 a 当前精度下的十进制表示上做精确的十进制移位与取整，
    因此 0.3 这类十进制输入按十进制方式取整。
    """
    if m < 0:
        raise ParameterError(f"缩放指数必须非负: {m}")
    if isinstance(a, int):
        return a * 10**m
    if isinstance(a, Fraction):
        return math.floor(a * 10**m)
    if isinstance(a, Decimal):
        text = str(a)
    elif isinstance(a, str):
        text = a
    else:
        text = exact_text(a)
    value = Decimal(text)
    with localcontext() as dctx:
        dctx.prec = len(text) + m + 10
        return int(value.scaleb(m).to_integral_value(rounding=ROUND_FLOOR))


def frac_part(a: Real) -> Real:
    """小数部分 a − ⌊a⌋，取值于 [0, 1)"""
    mp = _context_of(a)
    return a - mp.floor(a)


def is_trivial_angle(x: RealLike) -> bool:
    """x 是否为平凡角 {0, ±1/2, ±1}（精确比较）"""
    if hasattr(x, "_mpf_"):
        if not _context_of(x).isfinite(x):
            raise DomainError("参数必须是有限值")
    elif isinstance(x, str):
        x = Fraction(x.strip())
    else:
        x = Fraction(x)
    if abs(x) > 1:
        raise DomainError(f"参数必须在 [-1, 1] 内: {x}")
    return x in (0, 1, -1) or 2 * x in (1, -1)
