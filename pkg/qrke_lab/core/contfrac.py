"""
contfrac.py
攻击实数 e 的连分数展开、渐近分数与中间分数，以及基于它们的候选生成
"""

import math
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Optional

from .chebyshev import verify_secret
from .diophantine import CandidateReport
from .errors import ParameterError
from .precision import PrecisionContext, Real, RealLike, exact_text, frac_part, to_real


@dataclass
class CFExpansion:
    """连分数展开

    p_i = a_i·p_{i−1} + p_{i−2}，q_i = a_i·q_{i−1} + q_{i−2}，
    初值 p_{−1} = 1, q_{−1} = 0, p_{−2} = 0, q_{−2} = 1。
    """

    quotients: list[int] = field(default_factory=list)
    convergents: list[tuple[int, int]] = field(default_factory=list)

    def _previous(self, i: int) -> tuple[tuple[int, int], tuple[int, int]]:
        p1, q1 = self.convergents[i - 1] if i >= 1 else (1, 0)
        p2, q2 = self.convergents[i - 2] if i >= 2 else (1, 0)
        return (p1, q1), (p2, q2)

    def intermediate_fractions(self, include_convergents: bool = False) -> list[tuple[int, int, int, int]]:
        """中间分数 (i, j, j·p_{i−1} + p_{i−2}, j·q_{i−1} + q_{i−2})，1 ≤ j < a_i

        include_convergents=True 时也包含 j = a_i（即完整渐近分数 p_i/q_i）。
        """
        rows = []
        for i in range(1, len(self.quotients)):
            (p1, q1), (p2, q2) = self._previous(i)
            top = self.quotients[i] if include_convergents else self.quotients[i] - 1
            for j in range(1, top + 1):
                rows.append((i, j, j * p1 + p2, j * q1 + q2))
        return rows

    def fold(self) -> Fraction:
        """把商序列折回分数"""
        value = Fraction(self.quotients[-1])
        for a in reversed(self.quotients[:-1]):
            value = a + 1 / value
        return value


def _exact_fraction(v: Real) -> Fraction:
    return Fraction(Decimal(exact_text(v)))


def cf_expand(v: RealLike, max_terms: int, ctx: PrecisionContext) -> CFExpansion:
    """展开 v 的连分数

    v 在工作精度下的十进制表示被转换为精确分数后用整数运算展开；
    当 q_i 达到 10^(digits/2) 时停止，此后的商只是舍入产物。
    """
    if max_terms < 1:
        raise ParameterError(f"max_terms 必须 ≥ 1: {max_terms}")
    v = to_real(v, ctx)
    if v <= 0:
        raise ParameterError("连分数展开要求 v > 0")

    bound = 10 ** (ctx.digits // 2)
    rest = _exact_fraction(v)
    expansion = CFExpansion()
    (p1, q1), (p2, q2) = (1, 0), (0, 1)
    while len(expansion.quotients) < max_terms:
        a = math.floor(rest)
        p, q = a * p1 + p2, a * q1 + q2
        if expansion.quotients and q >= bound:
            break
        expansion.quotients.append(a)
        expansion.convergents.append((p, q))
        (p1, q1), (p2, q2) = (p, q), (p1, q1)
        rest -= a
        if rest == 0:
            break
        rest = 1 / rest
    return expansion


def cf_candidates(
    d: RealLike,
    e: RealLike,
    r_lo: int,
    r_hi: int,
    ctx: PrecisionContext,
    max_terms: int = 80,
    x: Optional[RealLike] = None,
    tr: Optional[RealLike] = None,
    r_true: Optional[int] = None,
) -> list[CandidateReport]:
    """以 e 的渐近分数和中间分数的分子 m 生成候选

    估计值取 m·frac(±d)（与已发表的数值一致，而非文字描述中的 m/frac(d)），
    估计值落在 [r_lo, r_hi] 内的才产生候选，两个符号分支都输出。
    给出 x 和 tr 时逐个验证；给出 r_true 时记录差值 dr = r − r'。
    """
    if r_lo >= r_hi:
        raise ParameterError(f"候选窗口为空: [{r_lo}, {r_hi}]")
    d = to_real(d, ctx)
    mp = ctx.mp
    expansion = cf_expand(e, max_terms, ctx)

    fractions = [(0, expansion.quotients[0], *expansion.convergents[0])]
    fractions += expansion.intermediate_fractions(include_convergents=True)
    branches = (("+", frac_part(d)), ("-", frac_part(-d)))

    reports = []
    for i, j, p, q in fractions:
        for branch, fd in branches:
            estimate = p * fd
            if not r_lo <= estimate <= r_hi:
                continue
            candidate = int(mp.nint(estimate))
            rep = CandidateReport(
                candidate_r=candidate,
                source=f"cf[{i}.{j}]",
                index=i,
                branch=branch,
                extras={
                    "level": i,
                    "multiplier": j,
                    "convergent": j == expansion.quotients[i],
                    "p": p,
                    "q": q,
                    "estimate": estimate,
                },
            )
            if x is not None and tr is not None:
                rep.residual, rep.verified = verify_secret(candidate, x, tr, ctx)
            if r_true is not None:
                dr = r_true - estimate
                rep.signed_diff = r_true - candidate
                rep.extras["dr"] = dr
                rep.extras["dr_over_r"] = dr / r_true
                rep.extras["r_over_estimate"] = r_true / estimate
            reports.append(rep)
    return reports
