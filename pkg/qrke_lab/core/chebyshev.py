"""
chebyshev.py
切比雪夫 T 多项式求值（余弦形式与代数阶梯两种独立实现）以及基于它的密钥交换
"""

import random
from dataclasses import dataclass
from typing import Optional

from .errors import (
    DegenerateParameterError,
    DomainError,
    ParameterError,
    PrecisionBudgetError,
)
from .precision import (
    PrecisionContext,
    Real,
    RealLike,
    cos_of,
    is_trivial_angle,
    make_context,
    render,
    to_real,
)

# 密钥交换参数的精度策略：digits ≥ len(r_max) + 该值
KEX_PRECISION_MARGIN = 40


def _check_unit_interval(x: Real, name: str = "x"):
    if abs(x) > 1:
        raise DomainError(f"{name} 必须在 [-1, 1] 内")


def _check_budget(r: int, ctx: PrecisionContext, working_digits: Optional[int], floor: int) -> int:
    if working_digits is None:
        return floor + ctx.guard
    if working_digits < floor:
        raise PrecisionBudgetError(
            f"工作精度 {working_digits} 位不足：r 有 {len(str(r))} 位，"
            f"至少需要 {floor} 位，否则尾部数字只是舍入噪声"
        )
    return working_digits


def t_cos_eval(r: int, x: RealLike, ctx: PrecisionContext, working_digits: Optional[int] = None) -> Real:
    """T_r(x) = cos(r·arccos(x))

    r·arccos(x) 在约化时会丢失 len(r) 位前导数字，因此工作精度取
    ctx.digits + len(r) + guard；显式给出的 working_digits 低于
    ctx.digits + len(r) 时抛出 PrecisionBudgetError。
    """
    if r < 0:
        raise ParameterError(f"r 必须非负: {r}")
    wd = _check_budget(r, ctx, working_digits, ctx.digits + len(str(r)))
    wp = ctx.scratch(wd)
    xw = to_real(x, ctx, mp=wp)
    _check_unit_interval(xw)
    if r == 0:
        return ctx.mp.mpf(1)
    theta = r * wp.acos(xw)
    return cos_of(theta, ctx, working_digits=wd)


def t_ladder_eval(r: int, x: RealLike, ctx: PrecisionContext, working_digits: Optional[int] = None) -> Real:
    """用二进制乘积阶梯计算 T_r(x)，不调用任何三角函数

    维护 (T_n, T_{n+1})，逐位读取 r：
        T_2n   = 2·T_n² − 1
        T_2n+1 = 2·T_n·T_{n+1} − x
        T_2n+2 = 2·T_{n+1}² − 1
    每步的舍入误差最多被放大 r² 倍，所以工作精度多留一份 len(r)。
    """
    if r < 0:
        raise ParameterError(f"r 必须非负: {r}")
    length = len(str(r))
    wd = _check_budget(r, ctx, working_digits, ctx.digits + 2 * length)
    wp = ctx.scratch(wd)
    xw = to_real(x, ctx, mp=wp)
    _check_unit_interval(xw)

    lo, hi = wp.mpf(1), xw
    for bit in bin(r)[2:]:
        if bit == "1":
            lo, hi = 2 * lo * hi - xw, 2 * hi * hi - 1
        else:
            lo, hi = 2 * lo * lo - 1, 2 * lo * hi - xw
    return ctx.mp.mpf(lo)


@dataclass(frozen=True)
class KexParams:
    """密钥交换公共参数"""

    x: Real
    r_min: int
    r_max: int
    ctx: PrecisionContext

    def __post_init__(self):
        x = to_real(self.x, self.ctx)
        object.__setattr__(self, "x", x)
        if abs(x) >= 1:
            raise DomainError("x 必须在开区间 (-1, 1) 内")
        if is_trivial_angle(x):
            raise DegenerateParameterError(
                f"x = {render(x, self.ctx, 20)} 是平凡角，T_r(x) 只取有限个值"
            )
        if self.r_min < 2:
            raise ParameterError(f"r_min 必须 ≥ 2，当前为 {self.r_min}")
        if self.r_max <= self.r_min:
            raise ParameterError(f"r_max 必须大于 r_min ({self.r_max} ≤ {self.r_min})")
        required = len(str(self.r_max)) + KEX_PRECISION_MARGIN
        if self.ctx.digits < required:
            raise PrecisionBudgetError(
                f"精度 {self.ctx.digits} 位不足，r_max 有 {len(str(self.r_max))} 位，"
                f"至少需要 {required} 位"
            )

    @classmethod
    def create(cls, x: RealLike, r_min: int, r_max: int, digits: int) -> "KexParams":
        return cls(x=x, r_min=r_min, r_max=r_max, ctx=make_context(digits))


@dataclass(frozen=True)
class KexInstance:
    """一方的密钥：秘密 r 与公开值 y = T_r(x)"""

    params: KexParams
    r: int
    y: Real

    @property
    def ctx(self) -> PrecisionContext:
        return self.params.ctx

    @property
    def x(self) -> Real:
        return self.params.x


def kex_instance(params: KexParams, r: int) -> KexInstance:
    """用指定的秘密 r 构造实例"""
    if not params.r_min <= r <= params.r_max:
        raise ParameterError(f"r = {r} 不在 [{params.r_min}, {params.r_max}] 内")
    return KexInstance(params=params, r=r, y=t_cos_eval(r, params.x, params.ctx))


def kex_keygen(params: KexParams, seed: int) -> KexInstance:
    """在 [r_min, r_max] 上按种子确定性地均匀抽取秘密 r"""
    rng = random.Random(seed)
    return kex_instance(params, rng.randint(params.r_min, params.r_max))


def kex_shared(my_r: int, their_y: RealLike, ctx: PrecisionContext) -> Real:
    """共享秘密 T_{my_r}(their_y) = T_{rs}(x)"""
    their_y = to_real(their_y, ctx)
    _check_unit_interval(their_y, "their_y")
    return t_cos_eval(my_r, their_y, ctx)


@dataclass(frozen=True)
class KexRecord:
    x: str
    y: str
    digits: int
    r: Optional[int] = None


def instance_record(inst: KexInstance, insecure_export: bool = False) -> str:
    """把实例序列化为键值文本记录；只有显式要求时才写出秘密 r"""
    lines = [
        f"x={render(inst.x, inst.ctx)}",
        f"y={render(inst.y, inst.ctx)}",
        f"digits={inst.ctx.digits}",
    ]
    if insecure_export:
        lines.insert(0, f"r={inst.r}")
    return "\n".join(lines) + "\n"


def parse_record(text: str) -> KexRecord:
    fields = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ParameterError(f"记录行缺少 '=': {line}")
        fields[key.strip()] = value.strip()

    missing = [k for k in ("x", "y", "digits") if k not in fields]
    if missing:
        raise ParameterError(f"记录缺少字段: {', '.join(missing)}")
    try:
        digits = int(fields["digits"])
        r = int(fields["r"]) if "r" in fields else None
    except ValueError as e:
        raise ParameterError(f"记录中的整数字段格式错误: {e}") from e
    return KexRecord(x=fields["x"], y=fields["y"], digits=digits, r=r)


def verification_digits(ctx: PrecisionContext) -> int:
    """候选验证比较的前导位数：ctx.digits 的一半"""
    return ctx.digits // 2


def verify_secret(r: int, x: RealLike, tr: RealLike, ctx: PrecisionContext) -> tuple[Real, bool]:
    """在降低的精度下检查候选 r 是否重现公开值 tr

    Returns:
        (残差 |tr − T_r(x)|, 是否在前 ctx.digits/2 位上一致)
    """
    if r < 0:
        return ctx.mp.mpf(2), False
    vdigits = verification_digits(ctx)
    vctx = make_context(max(vdigits + 10, 10), guard=ctx.guard)
    value = t_cos_eval(r, x, vctx)
    residual = abs(to_real(tr, vctx) - value)
    return ctx.mp.mpf(residual), residual < vctx.mp.mpf(10) ** (-vdigits)
