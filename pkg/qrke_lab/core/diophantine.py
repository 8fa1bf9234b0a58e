"""
diophantine.py
反余弦求逆攻击：推导 (d, e)，缩放为整数丢番图方程，扩展欧几里得求解，
枚举解族并在窗口内扫描秘密
"""

from dataclasses import dataclass, field
from math import gcd
from typing import Iterable, Literal, Optional, Sequence

from .chebyshev import verify_secret
from .errors import (
    ConsistencyError,
    DegenerateParameterError,
    DomainError,
    ParameterError,
)
from .precision import (
    PrecisionContext,
    Real,
    RealLike,
    arccos,
    floor_scaled,
    is_trivial_angle,
    to_real,
)

ScanMode = Literal["oracle", "attack"]


@dataclass(frozen=True)
class AttackReals:
    """攻击实数：秘密满足 r = ±d + k·e

    d = arccos(y)/arccos(x)，e = 2π/arccos(x)
    """

    d: Real
    e: Real
    ctx: PrecisionContext


def derive_attack_reals(x: RealLike, y: RealLike, ctx: PrecisionContext, force: bool = False) -> AttackReals:
    """由公开参数 x 与公开值 y 推导 (d, e)

    平凡角会抛出 DegenerateParameterError，force=True 时放行。
    """
    x = to_real(x, ctx)
    y = to_real(y, ctx)
    if abs(x) >= 1:
        raise DomainError("x 必须在开区间 (-1, 1) 内")
    if abs(y) > 1:
        raise DomainError("y 必须在 [-1, 1] 内")
    if not force and is_trivial_angle(x):
        raise DegenerateParameterError("x 是平凡角，攻击实数没有意义（可用 force 强制计算）")

    mp = ctx.mp
    ax = arccos(x, ctx)
    return AttackReals(d=arccos(y, ctx) / ax, e=2 * mp.pi / ax, ctx=ctx)


@dataclass(frozen=True)
class DiophEquation:
    """规范形式 a·n + b·k = c，其中 a = −10^m

    sign_branch 为 '+' 时 c = −D，为 '−' 时 c = +D；
    d_offset / e_offset 表示取 ⌊d·M⌋ 或 ⌊d·M⌋+1、⌊e·M⌋ 或 ⌊e·M⌋+1。
    """

    a: int
    b: int
    c: int
    m: int
    sign_branch: str = "+"
    d_offset: int = 0
    e_offset: int = 0

    @property
    def variant(self) -> str:
        d_part = "D+1" if self.d_offset else "D"
        e_part = "E+1" if self.e_offset else "E"
        return f"{self.sign_branch}{d_part},{e_part}"

    def __str__(self) -> str:
        if self.a < 0:
            return f"-n*{-self.a} + k*{self.b} = {self.c}"
        return f"n*{self.a} + k*{self.b} = {self.c}"


def enumerate_equations(reals: AttackReals, m: int) -> list[DiophEquation]:
    """枚举 4 种取整变体 × 2 个符号分支，共 8 个方程"""
    if m < 1:
        raise ParameterError(f"缩放指数 m 必须 ≥ 1: {m}")
    scale = 10**m
    d_floor = floor_scaled(reals.d, m)
    e_floor = floor_scaled(reals.e, m)

    equations = []
    for sign in ("+", "-"):
        for d_offset in (0, 1):
            for e_offset in (0, 1):
                big_d = d_floor + d_offset
                equations.append(
                    DiophEquation(
                        a=-scale,
                        b=e_floor + e_offset,
                        c=-big_d if sign == "+" else big_d,
                        m=m,
                        sign_branch=sign,
                        d_offset=d_offset,
                        e_offset=e_offset,
                    )
                )
    return equations


def ext_gcd(a: int, b: int) -> tuple[int, int, int]:
    """扩展欧几里得算法，返回 (g, u, v) 使 a·u + b·v = g，g > 0"""
    if a == 0 and b == 0:
        raise ParameterError("ext_gcd 的两个参数不能同时为 0")
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    if old_r < 0:
        old_r, old_s, old_t = -old_r, -old_s, -old_t
    return old_r, old_s, old_t


@dataclass(frozen=True)
class DiophFamily:
    """全部整数解 k(z) = k0 + k_step·z，n(z) = n0 + n_step·z"""

    k0: int
    n0: int
    k_step: int
    n_step: int
    g: int = 1

    def k(self, z: int) -> int:
        return self.k0 + self.k_step * z

    def n(self, z: int) -> int:
        return self.n0 + self.n_step * z

    def contains(self, n: int, k: int) -> bool:
        """(n, k) 是否属于该解族"""
        if self.k_step == 0:
            if k != self.k0:
                return False
            return self.n_step != 0 and (n - self.n0) % self.n_step == 0
        if (k - self.k0) % self.k_step:
            return False
        return self.n((k - self.k0) // self.k_step) == n

    def satisfies(self, eq: DiophEquation, zs: Iterable[int] = (-10, -1, 0, 1, 10)) -> bool:
        return all(eq.a * self.n(z) + eq.b * self.k(z) == eq.c for z in zs)


def solve_diophantine(eq: DiophEquation) -> Optional[DiophFamily]:
    """求解 a·n + b·k = c

    gcd(a, b) 不整除 c 时返回 None；否则返回解族，特解规范化为
    k0 取其模 k_step 剩余类中绝对值最小的代表。
    """
    g, u, v = ext_gcd(eq.a, eq.b)
    if eq.c % g:
        return None
    scale = eq.c // g
    n0, k0 = u * scale, v * scale
    k_step, n_step = -eq.a // g, eq.b // g

    if k_step:
        step = abs(k_step)
        rem = k0 % step
        if rem > step // 2:
            rem -= step
        z = (rem - k0) // k_step
        k0, n0 = k0 + k_step * z, n0 + n_step * z

    family = DiophFamily(k0=k0, n0=n0, k_step=k_step, n_step=n_step, g=g)
    if not family.satisfies(eq):
        raise ConsistencyError(f"解族代入检查失败: {eq}")
    return family


def count_solvable(equations: Sequence[DiophEquation]) -> int:
    """可解方程个数（gcd(a, b) | c）"""
    return sum(1 for eq in equations if eq.c % gcd(eq.a, eq.b) == 0)


def normalized_offsets(reals: AttackReals, ms: Iterable[int]) -> dict[int, Optional[float]]:
    """对每个 m 取第一个可解变体，返回 k0 / k_step 在 [0, 1) 上的位置"""
    offsets = {}
    for m in ms:
        offsets[m] = None
        for eq in enumerate_equations(reals, m):
            fam = solve_diophantine(eq)
            if fam is not None:
                offsets[m] = (fam.k0 % fam.k_step) / fam.k_step
                break
    return offsets


@dataclass
class CandidateReport:
    """候选秘密及其验证结果

    residual 为 |tr − T_candidate(x)|，verified 当且仅当 residual 小于验证容差；
    signed_diff = 真实 r − 候选值，仅在 oracle 模式下记录。
    """

    candidate_r: int
    source: str
    residual: Optional[Real] = None
    verified: bool = False
    signed_diff: Optional[int] = None
    index: int = 0
    branch: str = "+"
    extras: dict = field(default_factory=dict)

    @property
    def ratio(self) -> Optional[float]:
        """r / 候选值（oracle 模式）"""
        if self.signed_diff is None or self.candidate_r == 0:
            return None
        return (self.candidate_r + self.signed_diff) / self.candidate_r


def z_window(fam: DiophFamily, r_lo: int, r_hi: int) -> tuple[int, int]:
    """扫描区间 [⌊(r_lo − n0)/n_step⌋, ⌊(r_hi − n0)/n_step⌋]

    下端包含紧挨 r_lo 之下的那个成员。
    """
    if fam.n_step <= 0:
        raise ParameterError("解族的 n_step 必须为正才能按窗口扫描")
    return (r_lo - fam.n0) // fam.n_step, (r_hi - fam.n0) // fam.n_step


def scan_family(
    fam: DiophFamily,
    eq: DiophEquation,
    r_lo: int,
    r_hi: int,
    x: RealLike,
    tr: RealLike,
    ctx: PrecisionContext,
    mode: ScanMode = "attack",
    r_true: Optional[int] = None,
) -> list[CandidateReport]:
    """在 n(z) 序列上扫描秘密

    只扫描 n 为正的一半（'+' 方程的负半部分正是 '−' 方程的正半部分）。
    每个候选都用 tr 做验证；oracle 模式额外记录与真实 r 的差值。
    """
    if r_lo >= r_hi:
        raise ParameterError(f"扫描范围为空: [{r_lo}, {r_hi}]")
    if mode == "oracle" and r_true is None:
        raise ParameterError("oracle 模式需要提供真实的 r")

    z_lo, z_hi = z_window(fam, r_lo, r_hi)
    reports = []
    for z in range(z_lo, z_hi + 1):
        candidate = fam.n(z)
        if candidate <= 0:
            continue
        residual, verified = verify_secret(candidate, x, tr, ctx)
        reports.append(
            CandidateReport(
                candidate_r=candidate,
                source=f"z={z}",
                residual=residual,
                verified=verified,
                signed_diff=r_true - candidate if mode == "oracle" else None,
                index=z,
                branch=eq.sign_branch,
            )
        )
    return reports


def best_candidates(
    reports: Sequence[CandidateReport], r_true: int
) -> tuple[Optional[CandidateReport], Optional[CandidateReport]]:
    """最接近真实 r 的下方候选与上方候选"""
    below = [rep for rep in reports if rep.candidate_r <= r_true]
    above = [rep for rep in reports if rep.candidate_r > r_true]
    best_below = max(below, key=lambda rep: rep.candidate_r, default=None)
    best_above = min(above, key=lambda rep: rep.candidate_r, default=None)
    return best_below, best_above
