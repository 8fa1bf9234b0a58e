"""
sieve.py
在 k 上穷举，检查 ±d + k·e 是否接近整数：浮点（十进制累加）筛与模整数筛，
命中验证、性能对比、规模外推
"""

import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_EVEN, Decimal, localcontext
from typing import Optional, Sequence, Union

from ..utils.log import logger
from .chebyshev import verify_secret
from .contfrac import cf_expand
from .diophantine import AttackReals
from .errors import ConsistencyError, ParameterError, PrecisionBudgetError
from .precision import (
    PrecisionContext,
    Real,
    RealLike,
    exact_text,
    floor_scaled,
    to_real,
)

DEFAULT_REANCHOR_PERIOD = 10**6


@dataclass(frozen=True)
class SieveHit:
    """筛法命中：r_candidate = round(±d + k·e)

    fractional_residual 为到最近整数的有符号距离；浮点筛是 Decimal，
    整数筛是以 1/M 为单位的整数。
    """

    k: int
    sign_branch: str
    r_candidate: int
    fractional_residual: Union[Decimal, int]
    verified: bool = False


@dataclass(frozen=True)
class FloatSieveConfig:
    d: Real
    e: Real
    k_lo: int
    k_hi: int
    match_digits: int
    ctx: PrecisionContext
    reanchor_period: int = DEFAULT_REANCHOR_PERIOD

    def __post_init__(self):
        if self.k_lo >= self.k_hi:
            raise ParameterError(f"k 范围为空: [{self.k_lo}, {self.k_hi}]")
        if self.match_digits < 4:
            raise ParameterError(f"match_digits 必须 ≥ 4: {self.match_digits}")
        if self.reanchor_period < 1:
            raise ParameterError(f"重新锚定周期必须为正: {self.reanchor_period}")
        required = self.match_digits + len(str(abs(self.k_hi))) + 10
        if self.ctx.digits < required:
            raise PrecisionBudgetError(
                f"浮点筛需要至少 {required} 位精度 (match_digits + len(k_hi) + 10)，"
                f"当前为 {self.ctx.digits}"
            )


@dataclass(frozen=True)
class IntSieveConfig:
    """模整数筛配置

    di, ei 为 d, e 小数部分乘以 M 后的整数；d_int, e_int 为整数部分，
    仅用于还原 r_candidate。
    """

    di: int
    ei: int
    M: int
    comp: int
    k_lo: int
    k_hi: int
    d_int: int = 0
    e_int: int = 0

    def __post_init__(self):
        if self.M <= 0:
            raise ParameterError(f"模数 M 必须为正: {self.M}")
        if not 0 <= self.di < self.M:
            raise ParameterError("di 必须满足 0 ≤ di < M")
        if not 0 <= self.ei < self.M:
            raise ParameterError("ei 必须满足 0 ≤ ei < M")
        # comp = 0 合法，此时不会有任何命中
        if not 0 <= self.comp < self.M:
            raise ParameterError("comp 必须满足 0 ≤ comp < M")
        if self.k_lo >= self.k_hi:
            raise ParameterError(f"k 范围为空: [{self.k_lo}, {self.k_hi}]")

    @classmethod
    def from_reals(cls, reals: AttackReals, m: int, comp: int, k_lo: int, k_hi: int) -> "IntSieveConfig":
        """由攻击实数构造：M = 10^m，di = ⌊d·M⌋ mod M，ei = ⌊e·M⌋ mod M"""
        modulus = 10**m
        big_d = floor_scaled(reals.d, m)
        big_e = floor_scaled(reals.e, m)
        return cls(
            di=big_d % modulus,
            ei=big_e % modulus,
            M=modulus,
            comp=comp,
            k_lo=k_lo,
            k_hi=k_hi,
            d_int=big_d // modulus,
            e_int=big_e // modulus,
        )


def k_range_for_r_range(r_lo: int, r_hi: int, reals: AttackReals) -> tuple[int, int]:
    """k_lo = ⌊(r_lo − d)/e⌋，k_hi = ⌈(r_hi + d)/e⌉，覆盖两个符号分支"""
    if r_lo >= r_hi:
        raise ParameterError(f"r 范围为空: [{r_lo}, {r_hi}]")
    mp = reals.ctx.mp
    d, e = abs(reals.d), reals.e
    k_lo = int(mp.floor((r_lo - d) / e))
    k_hi = int(mp.ceil((r_hi + d) / e))
    return max(k_lo, 0), k_hi


def _split(k_lo: int, k_hi: int, chunks: int) -> list[tuple[int, int]]:
    chunks = max(1, min(chunks, k_hi - k_lo + 1))
    size = (k_hi - k_lo) // chunks + 1
    segments = []
    start = k_lo
    while start <= k_hi:
        end = min(start + size - 1, k_hi)
        segments.append((start, end))
        start = end + 1
    return segments


# 调用方可能运行在 asyncio.to_thread 的线程里，子进程不能用 fork 启动
_POOL_CONTEXT = multiprocessing.get_context("spawn")


def _run_chunked(kernel, segments: list[tuple[int, int]], args: tuple, chunks: int) -> list[SieveHit]:
    if chunks <= 1 or len(segments) == 1:
        results = [kernel(lo, hi, *args) for lo, hi in segments]
    else:
        with ProcessPoolExecutor(max_workers=len(segments), mp_context=_POOL_CONTEXT) as executor:
            futures = [executor.submit(kernel, lo, hi, *args) for lo, hi in segments]
            results = [future.result() for future in futures]
    hits = []
    for (lo, hi), chunk_hits in zip(segments, results):
        logger.debug(f"筛块 [{lo}, {hi}] 完成，命中 {len(chunk_hits)} 个")
        hits.extend(chunk_hits)
    return hits


def _float_hit(k: int, branch: str, acc: Decimal) -> SieveHit:
    nearest = acc.to_integral_value(rounding=ROUND_HALF_EVEN)
    return SieveHit(k=k, sign_branch=branch, r_candidate=int(nearest), fractional_residual=acc - nearest)


def _float_chunk(k_lo: int, k_hi: int, d_text: str, e_text: str, prec: int, match_digits: int, period: int) -> list[SieveHit]:
    hits = []
    with localcontext() as dctx:
        dctx.prec = prec
        d, e = Decimal(d_text), Decimal(e_text)
        eps = Decimal(1).scaleb(-match_digits)
        upper = 1 - eps
        start = k_lo
        while start <= k_hi:
            stop = min(start + period - 1, k_hi)
            # 每个周期用一次直接乘法重新锚定累加器
            plus = d + start * e
            minus = -d + start * e
            for k in range(start, stop + 1):
                f = plus % 1
                if f < 0:
                    f += 1
                if f < eps or f > upper:
                    hits.append(_float_hit(k, "+", plus))
                f = minus % 1
                if f < 0:
                    f += 1
                if f < eps or f > upper:
                    hits.append(_float_hit(k, "-", minus))
                plus += e
                minus += e
            start = stop + 1
    return hits


def float_sieve(cfg: FloatSieveConfig, chunks: int = 1) -> list[SieveHit]:
    """浮点筛：十进制累加 acc ← acc + e，按 k 升序返回命中"""
    segments = _split(cfg.k_lo, cfg.k_hi, chunks)
    args = (
        exact_text(to_real(cfg.d, cfg.ctx)),
        exact_text(to_real(cfg.e, cfg.ctx)),
        cfg.ctx.working_digits,
        cfg.match_digits,
        cfg.reanchor_period,
    )
    logger.debug(f"浮点筛 k ∈ [{cfg.k_lo}, {cfg.k_hi}]，分 {len(segments)} 块")
    return _run_chunked(_float_chunk, segments, args, chunks)


def _int_hit(k: int, branch: str, s: int, cfg_tuple: tuple) -> SieveHit:
    di, ei, modulus, d_int, e_int = cfg_tuple
    big_d = d_int * modulus + di
    big_e = e_int * modulus + ei
    total = (big_d if branch == "+" else -big_d) + k * big_e
    residual = s if s < modulus // 2 else s - modulus
    return SieveHit(
        k=k,
        sign_branch=branch,
        r_candidate=(total + modulus // 2) // modulus,
        fractional_residual=residual,
    )


def _int_chunk(k_lo: int, k_hi: int, di: int, ei: int, modulus: int, comp: int, d_int: int, e_int: int) -> list[SieveHit]:
    hits = []
    cfg_tuple = (di, ei, modulus, d_int, e_int)
    upper = modulus - comp
    plus = (di + k_lo * ei) % modulus
    minus = (-di + k_lo * ei) % modulus
    for k in range(k_lo, k_hi + 1):
        if plus < comp or plus > upper:
            hits.append(_int_hit(k, "+", plus, cfg_tuple))
        if minus < comp or minus > upper:
            hits.append(_int_hit(k, "-", minus, cfg_tuple))
        plus += ei
        if plus >= modulus:
            plus -= modulus
        minus += ei
        if minus >= modulus:
            minus -= modulus
    return hits


def int_sieve(cfg: IntSieveConfig, chunks: int = 1) -> list[SieveHit]:
    """模整数筛：内层循环只做模加法 s ← s + ei (mod M)"""
    segments = _split(cfg.k_lo, cfg.k_hi, chunks)
    args = (cfg.di, cfg.ei, cfg.M, cfg.comp, cfg.d_int, cfg.e_int)
    logger.debug(f"整数筛 k ∈ [{cfg.k_lo}, {cfg.k_hi}]，分 {len(segments)} 块")
    return _run_chunked(_int_chunk, segments, args, chunks)


def verify_hits(hits: Sequence[SieveHit], x: RealLike, tr: RealLike, ctx: PrecisionContext) -> list[SieveHit]:
    """用 T_{r_candidate}(x) 与 tr 的前 ctx.digits/2 位比较设置 verified"""
    checked = []
    for hit in hits:
        _, verified = verify_secret(hit.r_candidate, x, tr, ctx)
        checked.append(replace(hit, verified=verified))
    return checked


@dataclass
class VariantTiming:
    variant: str
    k_lo: int
    k_hi: int
    hits: int
    elapsed_ms: float

    @property
    def throughput(self) -> float:
        """每秒处理的 k 个数"""
        seconds = self.elapsed_ms / 1000
        return (self.k_hi - self.k_lo + 1) / seconds if seconds > 0 else float("inf")


@dataclass
class BenchmarkReport:
    timings: list[VariantTiming]
    hit_ks: list[int]
    ratio: float
    below_threshold: bool
    float_hits: list[SieveHit] = field(default_factory=list)
    int_hits: list[SieveHit] = field(default_factory=list)


def _timed(func, *args) -> tuple[list[SieveHit], float]:
    start = time.perf_counter()
    result = func(*args)
    return result, (time.perf_counter() - start) * 1000


def sieve_benchmark(
    float_cfg: FloatSieveConfig,
    int_cfg: IntSieveConfig,
    chunks: int = 1,
    min_elapsed_ms: float = 50,
) -> BenchmarkReport:
    """两种筛法在同一 k 范围上计时；命中的 k 集合不一致时抛出 ConsistencyError

    ratio = 浮点耗时 / 整数耗时；任一耗时低于 min_elapsed_ms 时标记为低于测量阈值。
    """
    if (float_cfg.k_lo, float_cfg.k_hi) != (int_cfg.k_lo, int_cfg.k_hi):
        raise ParameterError("两种筛法的 k 范围必须相同")

    float_hits, float_ms = _timed(float_sieve, float_cfg, chunks)
    int_hits, int_ms = _timed(int_sieve, int_cfg, chunks)

    float_ks = sorted({hit.k for hit in float_hits})
    int_ks = sorted({hit.k for hit in int_hits})
    if float_ks != int_ks:
        raise ConsistencyError(f"两种筛法命中不一致: float={float_ks} int={int_ks}")

    timings = [
        VariantTiming("float", float_cfg.k_lo, float_cfg.k_hi, len(float_hits), float_ms),
        VariantTiming("int", int_cfg.k_lo, int_cfg.k_hi, len(int_hits), int_ms),
    ]
    below = min(float_ms, int_ms) < min_elapsed_ms
    if below:
        logger.warning(f"计时低于测量阈值 {min_elapsed_ms} ms，比值仅供参考")
    ratio = float_ms / int_ms if int_ms > 0 else float("inf")
    return BenchmarkReport(
        timings=timings,
        hit_ks=float_ks,
        ratio=ratio,
        below_threshold=below,
        float_hits=float_hits,
        int_hits=int_hits,
    )


@dataclass(frozen=True)
class NeighborRow:
    j: int
    k: int
    sign_branch: str
    r_candidate: int
    residual: Real


def progression_neighbors(
    reals: AttackReals, k: int, span: int, k_lo: int, k_hi: int, ctx: PrecisionContext
) -> tuple[int, list[NeighborRow]]:
    """沿 k + j·q 查看 ±d + k·e 的残差

    q 取 e 的渐近分数分母中不超过 k 范围一半的最大者；frac(q·e) 很小，
    所以一个真实命中附近会出现一串残差按 j 线性漂移的近似命中。

    Returns:
        (q, 各行残差)
    """
    half = (k_hi - k_lo) // 2
    expansion = cf_expand(reals.e, 80, ctx)
    q = max((qq for _, qq in expansion.convergents if 1 < qq <= half), default=1)

    mp = ctx.mp
    rows = []
    for j in range(-span, span + 1):
        kk = k + j * q
        if not k_lo <= kk <= k_hi:
            continue
        for branch, sd in (("+", reals.d), ("-", -reals.d)):
            value = sd + kk * reals.e
            nearest = mp.nint(value)
            rows.append(NeighborRow(j=j, k=kk, sign_branch=branch, r_candidate=int(nearest), residual=value - nearest))
    return q, rows


@dataclass(frozen=True)
class CostEstimate:
    r_digits: int
    precision_digits: int
    steps: float
    seconds: float

    @property
    def years(self) -> float:
        return self.seconds / (365.25 * 86400)


def extrapolate_cost(
    throughput: float,
    r_digits: int,
    measured_digits: int,
    precision_digits: int = 300,
    e: float = 6.3,
) -> CostEstimate:
    """按 O(r·n) 模型外推：步数 ≈ 10^r_digits / e，单步耗时与精度位数成正比"""
    if throughput <= 0:
        raise ParameterError("吞吐量必须为正")
    if measured_digits <= 0 or precision_digits <= 0:
        raise ParameterError("精度位数必须为正")
    steps = 10.0**r_digits / e
    seconds = steps / throughput * (precision_digits / measured_digits)
    return CostEstimate(r_digits=r_digits, precision_digits=precision_digits, steps=steps, seconds=seconds)


@dataclass
class ScalingReport:
    variant: str
    rows: list[tuple[int, float]]

    @property
    def ratio(self) -> Optional[float]:
        """最后一个宽度与第一个宽度的耗时比"""
        if len(self.rows) < 2 or self.rows[0][1] <= 0:
            return None
        return self.rows[-1][1] / self.rows[0][1]


def scaling_probe(
    reals: AttackReals,
    widths: Sequence[int],
    k_start: int,
    variant: str = "int",
    match_digits: int = 9,
    m: int = 21,
    chunks: int = 1,
) -> ScalingReport:
    """对若干宽度的 k 范围计时，用于检查 O(r) 的线性增长"""
    if variant not in ("int", "float"):
        raise ParameterError(f"未知的筛法变体: {variant}")
    rows = []
    for width in widths:
        k_hi = k_start + width
        if variant == "int":
            cfg = IntSieveConfig.from_reals(reals, m, 10 ** (m - match_digits - 1), k_start, k_hi)
            _, elapsed = _timed(int_sieve, cfg, chunks)
        else:
            cfg = FloatSieveConfig(reals.d, reals.e, k_start, k_hi, match_digits, reals.ctx)
            _, elapsed = _timed(float_sieve, cfg, chunks)
        logger.info(f"规模探测 {variant} 宽度 {width}: {elapsed:.1f} ms")
        rows.append((width, elapsed))
    return ScalingReport(variant=variant, rows=rows)
