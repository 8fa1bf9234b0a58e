"""
reproduce.py
命名实验：用固定参数重跑已发表的实验，并把结果与已发表的数值逐项对照
"""

from decimal import Decimal, localcontext

from ..core.chebyshev import t_cos_eval
from ..core.diophantine import count_solvable, enumerate_equations, ext_gcd, normalized_offsets
from ..core.errors import ParameterError
from ..core.precision import exact_text, render, render_short
from ..core.sieve import progression_neighbors
from ..utils.experiments import ExperimentSpec, echo_params
from ..utils.log import logger
from ..utils.report import RunReport
from .attack import recovery_verdict

# 已发表的数值，按原样分行拼接
PUBLISHED_TR = (
    "0.7403861482024649794710508003339062035627295103915700058583940113150"
    "512830650614599318710233011943378"
)
PUBLISHED_D = (
    "0.73995897022306966689744239562920880188490492328069029456993812469123"
    "02384626566753074188492306315011"
)
PUBLISHED_E = (
    "6.30711352191035348845280507405321920159472559634174671071047970845689"
    "2071359128166852644030941847249"
)
PUBLISHED_D_SECOND = (
    "0.695284850628009596657361422254322600534283635157238489523441957086229"
    "4723430015348764036691302557555"
)
PUBLISHED_EQUATION = "-n*1000000000 + k*6307113521 = -739958970"
PUBLISHED_BEZOUT = (2058824009, 326428881)
PUBLISHED_PARTICULAR = (-1523445293110910730, -241543978563012570)
PUBLISHED_WINDOW_WIDTH = 143
PUBLISHED_N_RANGE = (97362832144, 999280065647)
PUBLISHED_BEST_BELOW = (337033145942, 5649977070, "1.016763862")
PUBLISHED_BEST_ABOVE = (343340259463, -657136451, "0.9980860489")

# (分子 p, 估计值 r', dr, dr/r)
PUBLISHED_CF_FIRST = [(467330149284, "345805136018.3821", "-3122013006.382058", "-0.009110495372346459")]
PUBLISHED_CF_SECOND = [
    (884248097465, "614804306364.0542", "127879248646.9458", "0.1721853779905653"),
    (2771863706161, "1927234842899.352", "-1184551287888.352", "-1.594960976173503"),
]
PUBLISHED_CF_PAIR = (467330149284, 74095725035)

PUBLISHED_D_SIEVE = "2.828536898289298870761221685646344096466"
PUBLISHED_E_SIEVE = "6.307113521910353488452805074053219201595"
PUBLISHED_K_RANGE = (15855112, 158551135)
PUBLISHED_FLOAT_HITS = [(19482666, 122879389), (51484409, 324718015), (83486152, 526556641)]
PUBLISHED_DI = 828536898289298870761
PUBLISHED_EI = 307113521910353488452
PUBLISHED_SECRET_SIEVE = 526556641

LEMMA_SCALES = range(6, 13)


def agrees_with_printed(value: str, printed: str) -> bool:
    """value 与已发表数值在除最后一位以外的数位上一致

    已发表数值的最后一位可能是舍入也可能是截断，所以容差取最后一位的一个单位。
    """
    published = Decimal(printed)
    unit = Decimal(1).scaleb(published.as_tuple().exponent)
    with localcontext() as dctx:
        dctx.prec = len(value) + len(printed) + 10
        return abs(Decimal(value) - published) <= unit


class ReproduceHandler:
    """
    复现实验处理器
    计算部分全部委托给攻击处理器与密钥交换处理器，这里只负责对照检查
    """

    def __init__(self, engine, lab_config, attack_handler, kex_handler):
        self.engine = engine
        self.lab_config = lab_config
        self.attack_handler = attack_handler
        self.kex_handler = kex_handler

    async def run(self, spec: ExperimentSpec) -> RunReport:
        runners = {
            "sec3-diophantine": self.sec3_diophantine,
            "sec3-contfrac": self.sec3_contfrac,
            "sec5-float-sieve": self.sec5_float_sieve,
            "sec5-int-sieve": self.sec5_int_sieve,
        }
        report = RunReport(experiment=spec.name, params=echo_params(spec))
        logger.info(f"开始复现实验: {spec.name}")

        if spec.name == "kex-demo":
            await self.kex_handler.demo(spec, report)
        elif spec.name in runners:
            recovered = await runners[spec.name](spec, report)
            reproduced = report.all_checks_passed
            report.finish(
                f"{recovery_verdict(recovered)}; published values reproduced: {'yes' if reproduced else 'no'}",
                success=True,
            )
        else:
            raise ParameterError(f"未知的实验名称: {spec.name}")

        passed = sum(check.passed for check in report.checks)
        logger.info(f"复现实验 {spec.name} 完成: {passed}/{len(report.checks)} 项检查通过")
        return report

    async def _public_value(self, spec: ExperimentSpec, report: RunReport, label: str = "tr"):
        """由已知秘密计算公开值 tr（复现实验扮演密钥持有方）"""
        ctx = self.engine.context(spec.digits)
        tr = await self.engine.call(t_cos_eval, spec.r, spec.x, ctx)
        report.add_value(label, render(tr, ctx))
        return tr

    def _check_printed(self, report: RunReport, name: str, value, printed: str):
        text = value if isinstance(value, str) else exact_text(value)
        report.add_check(name, agrees_with_printed(text, printed), f"published {printed[:24]}...")

    async def sec3_diophantine(self, spec: ExperimentSpec, report: RunReport) -> list[int]:
        tr = await self._public_value(spec, report)
        self._check_printed(report, "tr matches published", tr, PUBLISHED_TR)

        outcome = await self.attack_handler.diophantine(spec, report, tr=tr, r_true=spec.r)
        self._check_printed(report, "d matches published", outcome.reals.d, PUBLISHED_D)
        self._check_printed(report, "e matches published", outcome.reals.e, PUBLISHED_E)

        eq, fam = outcome.primary, outcome.primary_family
        report.add_check("equation", str(eq) == PUBLISHED_EQUATION, str(eq))
        g, u, v = ext_gcd(eq.a, eq.b)
        report.add_value("bezout", f"{u}*({eq.a}) + {v}*{eq.b} = {g}")
        report.add_check("gcd(a, b) = 1", g == 1, f"gcd = {g}")
        bn, bk = PUBLISHED_BEZOUT
        report.add_check("published Bezout pair", eq.a * bn + eq.b * bk == 1, f"n = {bn}, k = {bk}")

        pn, pk = PUBLISHED_PARTICULAR
        report.add_value("particular solution", f"n0 = {fam.n0}, k0 = {fam.k0}")
        report.add_check(
            "published particular pair is a family member",
            eq.a * pn + eq.b * pk == eq.c and fam.contains(pn, pk),
            f"n = {pn}, k = {pk}",
        )

        z_lo, z_hi = outcome.window
        report.add_check("z window width", z_hi - z_lo == PUBLISHED_WINDOW_WIDTH, f"{z_hi - z_lo}")
        n_range = (outcome.candidates[0].candidate_r, outcome.candidates[-1].candidate_r)
        report.add_check("n range", n_range == PUBLISHED_N_RANGE, f"{n_range[0]}..{n_range[1]}")

        for label, rep, published in zip(
            ("best_below", "best_above"), outcome.best, (PUBLISHED_BEST_BELOW, PUBLISHED_BEST_ABOVE)
        ):
            got = (rep.candidate_r, rep.signed_diff, f"{rep.ratio:.10g}") if rep else None
            report.add_check(label, got == published, f"{got}")
        report.add_check("no candidate verifies", not outcome.verified, f"{len(outcome.verified)} verified")

        # 不同缩放位数下可解方程个数与规范特解位置
        offsets = normalized_offsets(outcome.reals, LEMMA_SCALES)
        counts = {m: count_solvable(enumerate_equations(outcome.reals, m)) for m in LEMMA_SCALES}
        report.add_table(
            "solvable variants by scale",
            ["m", "solvable", "k0/k_step"],
            [[m, counts[m], "-" if offsets[m] is None else f"{offsets[m]:.6f}"] for m in LEMMA_SCALES],
        )
        report.add_check("at least two solvable variants for m = 6..12", all(c >= 2 for c in counts.values()))
        spread = [o for o in offsets.values() if o is not None]
        report.add_check(
            "canonical offsets distinct and spread over half the range",
            len(set(spread)) == len(spread) and max(spread) - min(spread) > 0.5,
            f"min {min(spread):.6f}, max {max(spread):.6f}",
        )
        report.add_note("published z window 241543994..241544137 uses a different particular solution; the width matches")
        return outcome.recovered

    async def sec3_contfrac(self, spec: ExperimentSpec, report: RunReport) -> list[int]:
        tr = await self._public_value(spec, report)
        first = await self.attack_handler.contfrac(spec, report, tr=tr, r_true=spec.r)
        self._check_printed(report, "d matches published", first.reals.d, PUBLISHED_D)
        self._check_printed(report, "e matches published", first.reals.e, PUBLISHED_E)

        pairs = {(p, q) for _, _, p, q in first.expansion.intermediate_fractions(include_convergents=True)}
        report.add_check(
            "published (z, n) pair is an intermediate fraction of e",
            PUBLISHED_CF_PAIR in pairs,
            f"{PUBLISHED_CF_PAIR[0]}/{PUBLISHED_CF_PAIR[1]}",
        )
        self._check_estimates(report, first, PUBLISHED_CF_FIRST)

        extra = spec.extra
        second_spec = spec.model_copy(
            update={"r": extra["second_r"], "r_lo": extra["second_r_lo"], "r_hi": extra["second_r_hi"]}
        )
        tr_second = await self._public_value(second_spec, report, label="tr (second)")
        second = await self.attack_handler.contfrac(
            second_spec, report, tr=tr_second, r_true=second_spec.r, tag=" (second)"
        )
        self._check_printed(report, "second d matches published", second.reals.d, PUBLISHED_D_SECOND)
        self._check_estimates(report, second, PUBLISHED_CF_SECOND)

        verified = first.recovered + second.recovered
        report.add_check("no candidate verifies", not verified, f"{len(verified)} verified")
        report.add_note(
            "the published prose states r' = m / frac(d); the published numbers satisfy r' = m * frac(d), "
            "which is what the estimate column uses"
        )
        report.add_note("the published 'r/r'' column equals dr / r and is reported here as dr_over_r")
        return verified

    def _check_estimates(self, report: RunReport, outcome, published):
        for p, estimate, dr, dr_over_r in published:
            rep = outcome.find(p, "+")
            if rep is None:
                report.add_check(f"estimate for p = {p}", False, "no candidate")
                continue
            ex = rep.extras
            ok = (
                agrees_with_printed(exact_text(ex["estimate"]), estimate)
                and agrees_with_printed(exact_text(ex["dr"]), dr)
                and agrees_with_printed(exact_text(ex["dr_over_r"]), dr_over_r)
            )
            report.add_check(f"estimate for p = {p}", ok, f"r' = {render(ex['estimate'], outcome.reals.ctx, 20)}")

    def _check_sieve_reals(self, report: RunReport, outcome):
        self._check_printed(report, "d matches published", outcome.reals.d, PUBLISHED_D_SIEVE)
        self._check_printed(report, "e matches published", outcome.reals.e, PUBLISHED_E_SIEVE)
        k_lo, k_hi = outcome.k_range
        p_lo, p_hi = PUBLISHED_K_RANGE
        report.add_check("k range", abs(k_lo - p_lo) <= 1 and abs(k_hi - p_hi) <= 1, f"{k_lo}..{k_hi}")

    def _check_single_secret(self, report: RunReport, outcome):
        report.add_check(
            "exactly one verified hit",
            outcome.recovered == [PUBLISHED_SECRET_SIEVE],
            f"verified r = {outcome.recovered}",
        )

    async def sec5_float_sieve(self, spec: ExperimentSpec, report: RunReport) -> list[int]:
        tr = await self._public_value(spec, report)
        outcome = await self.attack_handler.sieve(spec, report, tr=tr)
        self._check_sieve_reals(report, outcome)

        hit_ks = sorted({hit.k for hit in outcome.hits})
        report.add_check(f"hits at match_digits {spec.match_digits}", hit_ks == [PUBLISHED_FLOAT_HITS[-1][0]], f"{hit_ks}")
        self._check_single_secret(report, outcome)

        # 已发表的另外两个 k 是真实命中沿 e 的渐近分母方向的近邻
        k_lo, k_hi = outcome.k_range
        true_k = PUBLISHED_FLOAT_HITS[-1][0]
        q, rows = progression_neighbors(outcome.reals, true_k, 2, k_lo, k_hi, outcome.reals.ctx)
        report.add_value("progression step q", q)
        report.add_table(
            "progression neighbours",
            ["j", "k", "branch", "r_candidate", "residual"],
            [[row.j, row.k, row.sign_branch, row.r_candidate, render_short(row.residual, 3)] for row in rows],
        )
        plus_rows = {row.k: row for row in rows if row.sign_branch == "+"}
        bound = Decimal(1).scaleb(-(spec.match_digits - 1))
        for k, r in PUBLISHED_FLOAT_HITS[:-1]:
            row = plus_rows.get(k)
            ok = row is not None and row.r_candidate == r and abs(Decimal(exact_text(row.residual))) < bound
            report.add_check(f"published k = {k} is a near hit", ok, f"r = {r}")
        report.add_note(
            f"the published k = {PUBLISHED_FLOAT_HITS[0][0]} and {PUBLISHED_FLOAT_HITS[1][0]} sit on the progression "
            f"k - j*{q}; their residuals pass {spec.match_digits - 1} matching digits but not {spec.match_digits}"
        )
        return outcome.recovered

    async def sec5_int_sieve(self, spec: ExperimentSpec, report: RunReport) -> list[int]:
        tr = await self._public_value(spec, report)
        outcome = await self.attack_handler.int_sieve(spec, report, tr=tr)
        self._check_sieve_reals(report, outcome)

        cfg = outcome.config
        report.add_check("di", cfg.di == PUBLISHED_DI, f"{cfg.di}")
        report.add_check("ei", cfg.ei == PUBLISHED_EI, f"{cfg.ei}")
        hit_ks = sorted({hit.k for hit in outcome.hits})
        report.add_check("hits", hit_ks == [PUBLISHED_FLOAT_HITS[-1][0]], f"{hit_ks}")
        self._check_single_secret(report, outcome)

        solvable = count_solvable(enumerate_equations(outcome.reals, 7))
        report.add_value("solvable equations at m = 7", solvable)
        report.add_note(
            f"comp / M = 1e-{len(str(cfg.M)) - len(str(cfg.comp))} is one digit stricter than the float sieve's 9 matching digits"
        )
        return outcome.recovered
