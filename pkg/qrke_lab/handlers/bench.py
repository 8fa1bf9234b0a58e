"""
bench.py
性能命令处理器：两种筛法对比、规模探测、全尺寸实例的代价外推
未给出的参数取已发表筛法实例的参数
"""

from ..core.chebyshev import t_cos_eval
from ..core.diophantine import AttackReals, derive_attack_reals
from ..core.errors import ParameterError
from ..core.precision import RealLike
from ..core.sieve import (
    FloatSieveConfig,
    IntSieveConfig,
    extrapolate_cost,
    k_range_for_r_range,
    scaling_probe,
    sieve_benchmark,
    verify_hits,
)
from ..utils.experiments import ExperimentSpec, echo_params, with_defaults
from ..utils.log import logger
from ..utils.report import RunReport
from .attack import modulus_exponent

DEFAULT_WIDTHS = [10**6, 10**7]
DEFAULT_COST_WIDTH = 10**6
DEFAULT_COST_R_DIGITS = 100
DEFAULT_COST_PRECISION = 300
# 规模探测允许的偏差
SCALING_TOLERANCE = 0.4


class BenchHandler:
    """性能测试处理器；报告中的计时只出现在 timing 记录里"""

    def __init__(self, engine, lab_config):
        self.engine = engine
        self.lab_config = lab_config

    async def run(self, spec: ExperimentSpec) -> RunReport:
        precision_digits = spec.digits or DEFAULT_COST_PRECISION
        spec = with_defaults(with_defaults(spec, "sec5-float-sieve"), "sec5-int-sieve")
        report = RunReport(experiment=f"bench-{spec.subcommand}", params=echo_params(spec))
        logger.info(f"开始性能测试: {spec.subcommand}")

        if spec.subcommand == "sieve":
            await self.sieve(spec, report)
        elif spec.subcommand == "scaling":
            await self.scaling(spec, report)
        elif spec.subcommand == "cost":
            await self.cost(spec, report, precision_digits)
        else:
            raise ParameterError(f"未知的 bench 子命令: {spec.subcommand}")
        return report

    async def _reals(self, spec: ExperimentSpec) -> tuple[AttackReals, RealLike]:
        ctx = self.engine.context(spec.digits)
        tr = spec.tr
        if tr is None:
            tr = await self.engine.call(t_cos_eval, spec.r, spec.x, ctx)
        reals = await self.engine.call(derive_attack_reals, spec.x, tr, ctx)
        return reals, tr

    async def sieve(self, spec: ExperimentSpec, report: RunReport):
        """浮点筛与整数筛在同一 k 范围上计时"""
        reals, tr = await self._reals(spec)
        k_lo, k_hi = k_range_for_r_range(spec.r_lo, spec.r_hi, reals)
        m = modulus_exponent(spec.m, spec.modulus)
        float_cfg = FloatSieveConfig(
            d=reals.d,
            e=reals.e,
            k_lo=k_lo,
            k_hi=k_hi,
            match_digits=spec.match_digits,
            ctx=reals.ctx,
            reanchor_period=self.lab_config.reanchor_period,
        )
        int_cfg = IntSieveConfig.from_reals(reals, m, spec.comp, k_lo, k_hi)
        chunks = self.engine.chunks(spec.chunks)

        bench = await self.engine.call(
            sieve_benchmark, float_cfg, int_cfg, chunks, self.lab_config.bench_min_elapsed_ms
        )
        hits = await self.engine.call(verify_hits, bench.int_hits, spec.x, tr, reals.ctx)

        report.add_value("k_range", f"{k_lo}..{k_hi}")
        report.add_value("hit k", ",".join(str(k) for k in bench.hit_ks) or "-")
        report.add_value("verified r", ",".join(str(h.r_candidate) for h in hits if h.verified) or "-")
        for timing in bench.timings:
            report.add_timing(
                variant=timing.variant,
                k_lo=timing.k_lo,
                k_hi=timing.k_hi,
                hits=timing.hits,
                elapsed_ms=round(timing.elapsed_ms, 3),
                throughput=round(timing.throughput, 1),
            )
        report.add_timing(variant="ratio", float_over_int=round(bench.ratio, 3))
        if bench.below_threshold:
            report.add_note(
                f"elapsed time below {self.lab_config.bench_min_elapsed_ms} ms; the ratio is not a reliable measurement"
            )
        report.add_value("float hits", len(bench.float_hits))
        report.add_value("int hits", len(bench.int_hits))
        report.finish(f"float/int elapsed ratio: {bench.ratio:.2f}", success=True)

    async def scaling(self, spec: ExperimentSpec, report: RunReport):
        """耗时随 k 范围宽度线性增长"""
        widths = spec.widths or DEFAULT_WIDTHS
        if len(widths) < 2:
            raise ParameterError("规模探测至少需要两个宽度")
        reals, _ = await self._reals(spec)
        k_lo, _ = k_range_for_r_range(spec.r_lo, spec.r_hi, reals)
        m = modulus_exponent(spec.m, spec.modulus)

        probe = await self.engine.call(
            scaling_probe, reals, widths, k_lo, "int", spec.match_digits, m, self.engine.chunks(spec.chunks)
        )
        for width, elapsed in probe.rows:
            report.add_timing(variant=probe.variant, width=width, elapsed_ms=round(elapsed, 3))

        expected = widths[-1] / widths[0]
        ratio = probe.ratio
        report.add_value("width ratio", f"{expected:g}")
        if ratio is None:
            report.add_note("first measurement took no measurable time")
            report.finish("scaling not measurable", success=False)
            return
        report.add_timing(variant="ratio", elapsed_ratio=round(ratio, 3))
        report.add_check(
            "elapsed time grows linearly with the k range",
            abs(ratio / expected - 1) <= SCALING_TOLERANCE,
            f"measured {ratio:.2f}, expected {expected:g}",
        )
        report.finish(f"elapsed ratio {ratio:.2f} for width ratio {expected:g}", success=True)

    async def cost(self, spec: ExperimentSpec, report: RunReport, precision_digits: int):
        """测量整数筛吞吐量，按 O(r·n) 外推全尺寸实例的穷举代价"""
        width = spec.widths[0] if spec.widths else DEFAULT_COST_WIDTH
        r_digits = spec.r_digits or DEFAULT_COST_R_DIGITS
        reals, _ = await self._reals(spec)
        k_lo, _ = k_range_for_r_range(spec.r_lo, spec.r_hi, reals)
        m = modulus_exponent(spec.m, spec.modulus)

        probe = await self.engine.call(
            scaling_probe, reals, [width], k_lo, "int", spec.match_digits, m, self.engine.chunks(spec.chunks)
        )
        elapsed_ms = probe.rows[0][1]
        if elapsed_ms <= 0:
            raise ParameterError(f"宽度 {width} 的测量耗时为 0，请增大 --widths")
        throughput = width / (elapsed_ms / 1000)
        estimate = extrapolate_cost(throughput, r_digits, m, precision_digits=precision_digits, e=float(reals.e))

        report.add_value("r digits", r_digits)
        report.add_value("precision digits", precision_digits)
        report.add_value("steps", f"{estimate.steps:.3e}")
        report.add_timing(variant="int", width=width, elapsed_ms=round(elapsed_ms, 3), throughput=round(throughput, 1))
        report.add_timing(variant="estimate", seconds=f"{estimate.seconds:.3e}", years=f"{estimate.years:.3e}")
        report.add_note("cost model: steps = 10^r_digits / e, time per step proportional to precision digits")
        report.finish(f"estimated exhaustive search: {estimate.years:.3e} years", success=True)
