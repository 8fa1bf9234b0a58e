"""
attack.py
攻击命令处理器：丢番图扫描、连分数候选、浮点筛与整数筛
"""

from dataclasses import dataclass, field
from math import gcd
from typing import Optional, Union

from ..core.contfrac import CFExpansion, cf_candidates, cf_expand
from ..core.diophantine import (
    AttackReals,
    CandidateReport,
    DiophEquation,
    DiophFamily,
    best_candidates,
    count_solvable,
    derive_attack_reals,
    enumerate_equations,
    scan_family,
    solve_diophantine,
    z_window,
)
from ..core.errors import ParameterError
from ..core.precision import RealLike, render, render_short
from ..core.sieve import (
    FloatSieveConfig,
    IntSieveConfig,
    SieveHit,
    float_sieve,
    int_sieve,
    k_range_for_r_range,
    verify_hits,
)
from ..utils.experiments import (
    DEFAULT_MATCH_DIGITS,
    DEFAULT_SCALE_DIGITS,
    ExperimentSpec,
    echo_params,
)
from ..utils.log import logger
from ..utils.report import RunReport

ORACLE_NOTE = (
    "oracle mode: distances to the true secret use knowledge an attacker does not have; "
    "verification itself uses tr only"
)


@dataclass
class DiophantineOutcome:
    reals: AttackReals
    equations: list[DiophEquation]
    families: list[tuple[DiophEquation, Optional[DiophFamily]]] = field(default_factory=list)
    primary: Optional[DiophEquation] = None
    primary_family: Optional[DiophFamily] = None
    window: Optional[tuple[int, int]] = None
    candidates: list[CandidateReport] = field(default_factory=list)
    verified: list[CandidateReport] = field(default_factory=list)
    best: tuple[Optional[CandidateReport], Optional[CandidateReport]] = (None, None)

    @property
    def recovered(self) -> list[int]:
        return sorted({rep.candidate_r for rep in self.verified})


@dataclass
class ContfracOutcome:
    reals: AttackReals
    expansion: CFExpansion
    candidates: list[CandidateReport] = field(default_factory=list)

    @property
    def recovered(self) -> list[int]:
        return sorted({rep.candidate_r for rep in self.candidates if rep.verified})

    def find(self, p: int, branch: str = "+") -> Optional[CandidateReport]:
        """按分子 p 与符号分支查找候选"""
        for rep in self.candidates:
            if rep.extras["p"] == p and rep.branch == branch:
                return rep
        return None


@dataclass
class SieveOutcome:
    reals: AttackReals
    k_range: tuple[int, int]
    config: Union[FloatSieveConfig, IntSieveConfig]
    hits: list[SieveHit] = field(default_factory=list)

    @property
    def recovered(self) -> list[int]:
        return sorted({hit.r_candidate for hit in self.hits if hit.verified})


def recovery_verdict(recovered: list[int]) -> str:
    if recovered:
        values = ", ".join(str(r) for r in recovered)
        return f"secret recovered: yes (r = {values}); verified candidates: {len(recovered)}"
    return "secret recovered: no; verified candidates: 0"


def modulus_exponent(m: Optional[int], modulus: Optional[int]) -> int:
    """--modulus 必须是 10 的幂；与 --m 同时给出时二者必须一致"""
    if modulus is None:
        if m is None:
            raise ParameterError("整数筛需要 --m 或 --modulus")
        return m
    text = str(modulus)
    if text.rstrip("0") != "1" or len(text) < 2:
        raise ParameterError(f"模数必须是 10 的正整数次幂: {modulus}")
    exponent = len(text) - 1
    if m is not None and m != exponent:
        raise ParameterError(f"--m {m} 与 --modulus {modulus} 不一致")
    return exponent


def _format_residual(value) -> str:
    if isinstance(value, int):
        return str(value)
    return f"{value:.3e}"


class AttackHandler:
    """
    攻击处理器
    每种攻击把结果写入 RunReport，同时返回结构化结果，供复现实验做对照检查
    """

    def __init__(self, engine, lab_config):
        self.engine = engine
        self.lab_config = lab_config

    async def run(self, spec: ExperimentSpec) -> RunReport:
        """执行 attack 子命令；有候选通过验证时退出码为 0，否则为 1"""
        report = RunReport(experiment=f"attack-{spec.subcommand}", params=echo_params(spec))
        logger.info(f"开始攻击: {spec.subcommand}")

        if spec.subcommand == "diophantine":
            outcome = await self.diophantine(spec, report, r_true=spec.r)
        elif spec.subcommand == "contfrac":
            outcome = await self.contfrac(spec, report, r_true=spec.r)
        elif spec.subcommand == "sieve":
            outcome = await self.sieve(spec, report)
        elif spec.subcommand == "int-sieve":
            outcome = await self.int_sieve(spec, report)
        else:
            raise ParameterError(f"未知的攻击类型: {spec.subcommand}")

        report.finish(recovery_verdict(outcome.recovered), success=bool(outcome.recovered))
        logger.info(f"攻击 {spec.subcommand} 完成: {report.verdict}")
        return report

    async def attack_reals(self, spec: ExperimentSpec, report: RunReport, tr: RealLike, tag: str = "") -> AttackReals:
        ctx = self.engine.context(spec.digits)
        reals = await self.engine.call(derive_attack_reals, spec.x, tr, ctx)
        report.add_value(f"d{tag}", render(reals.d, ctx))
        report.add_value(f"e{tag}", render(reals.e, ctx))
        return reals

    async def diophantine(
        self,
        spec: ExperimentSpec,
        report: RunReport,
        tr: Optional[RealLike] = None,
        r_true: Optional[int] = None,
    ) -> DiophantineOutcome:
        """枚举 8 个方程，求解所有可解方程并扫描各自的解族

        候选明细只列出第一个可解方程（通常是 +D,E），其余解族给出汇总。
        """
        tr = spec.tr if tr is None else tr
        reals = await self.attack_reals(spec, report, tr)
        ctx = reals.ctx
        mode = "oracle" if r_true is not None else "attack"
        m = spec.m or DEFAULT_SCALE_DIGITS
        equations = enumerate_equations(reals, m)
        outcome = DiophantineOutcome(reals=reals, equations=equations)

        eq_rows, family_rows = [], []
        for eq in equations:
            fam = solve_diophantine(eq)
            outcome.families.append((eq, fam))
            eq_rows.append([eq.variant, str(eq), gcd(eq.a, eq.b), "yes" if fam else "no"])
            if fam is None:
                continue

            reports = await self.engine.call(
                scan_family, fam, eq, spec.r_lo, spec.r_hi, spec.x, tr, ctx, mode, r_true
            )
            z_lo, z_hi = z_window(fam, spec.r_lo, spec.r_hi)
            verified = [rep for rep in reports if rep.verified]
            outcome.verified.extend(verified)
            family_rows.append(
                [eq.variant, fam.k0, fam.n0, fam.k_step, fam.n_step, z_lo, z_hi, z_hi - z_lo, len(reports), len(verified)]
            )
            logger.debug(f"解族 {eq.variant}: z ∈ [{z_lo}, {z_hi}]，候选 {len(reports)} 个，验证通过 {len(verified)} 个")
            if outcome.primary is None:
                outcome.primary, outcome.primary_family = eq, fam
                outcome.window = (z_lo, z_hi)
                outcome.candidates = reports

        report.add_value("solvable equations", count_solvable(equations))
        report.add_table("equations", ["variant", "equation", "gcd", "solvable"], eq_rows)
        report.add_table(
            "families",
            ["variant", "k0", "n0", "k_step", "n_step", "z_lo", "z_hi", "width", "candidates", "verified"],
            family_rows,
        )

        if outcome.primary is None:
            report.add_note(f"no solvable equation at m = {m}; nothing to scan")
            return outcome

        z_lo, z_hi = outcome.window
        report.add_value("equation", str(outcome.primary))
        report.add_value("z_window", f"{z_lo}..{z_hi} (width {z_hi - z_lo})")
        if outcome.candidates:
            first, last = outcome.candidates[0].candidate_r, outcome.candidates[-1].candidate_r
            report.add_value("n_range", f"{first}..{last}")

        columns = ["z", "n", "residual", "verified"]
        if mode == "oracle":
            columns += ["diff", "ratio"]
        rows = []
        for rep in outcome.candidates:
            row = [rep.index, rep.candidate_r, render_short(rep.residual), "yes" if rep.verified else "no"]
            if mode == "oracle":
                row += [rep.signed_diff, f"{rep.ratio:.10g}"]
            rows.append(row)
        report.add_table(f"candidates {outcome.primary.variant}", columns, rows)

        if mode == "oracle" and outcome.candidates:
            outcome.best = best_candidates(outcome.candidates, r_true)
            best_rows = [
                [label, rep.candidate_r, rep.signed_diff, f"{rep.ratio:.10g}"]
                for label, rep in zip(("best_below", "best_above"), outcome.best)
                if rep is not None
            ]
            report.add_table("best candidates", ["label", "candidate", "diff", "ratio"], best_rows)
            report.add_note(ORACLE_NOTE)
        return outcome

    async def contfrac(
        self,
        spec: ExperimentSpec,
        report: RunReport,
        tr: Optional[RealLike] = None,
        r_true: Optional[int] = None,
        tag: str = "",
    ) -> ContfracOutcome:
        """e 的连分数展开，以渐近分数与中间分数的分子生成候选"""
        tr = spec.tr if tr is None else tr
        reals = await self.attack_reals(spec, report, tr, tag)
        ctx = reals.ctx
        max_terms = self.lab_config.cf_max_terms

        expansion = await self.engine.call(cf_expand, reals.e, max_terms, ctx)
        if not tag:
            report.add_value("cf(e) quotients", ",".join(str(a) for a in expansion.quotients))
        candidates = await self.engine.call(
            cf_candidates, reals.d, reals.e, spec.r_lo, spec.r_hi, ctx, max_terms, spec.x, tr, r_true
        )
        outcome = ContfracOutcome(reals=reals, expansion=expansion, candidates=candidates)

        columns = ["level", "j", "convergent", "branch", "p", "q", "estimate", "candidate", "residual", "verified"]
        if r_true is not None:
            columns += ["dr", "dr_over_r", "r_over_estimate"]
        rows = []
        for rep in candidates:
            ex = rep.extras
            row = [
                ex["level"],
                ex["multiplier"],
                "yes" if ex["convergent"] else "no",
                rep.branch,
                ex["p"],
                ex["q"],
                render(ex["estimate"], ctx, 20),
                rep.candidate_r,
                render_short(rep.residual),
                "yes" if rep.verified else "no",
            ]
            if r_true is not None:
                row += [
                    render(ex["dr"], ctx, 20),
                    render(ex["dr_over_r"], ctx, 16),
                    render(ex["r_over_estimate"], ctx, 16),
                ]
            rows.append(row)
        report.add_table(f"cf candidates{tag}", columns, rows)
        report.add_value(f"cf candidates{tag}", len(candidates))
        if r_true is not None:
            report.add_note(ORACLE_NOTE)
        logger.debug(f"连分数候选{tag}: {len(candidates)} 个，展开 {len(expansion.quotients)} 项")
        return outcome

    def _hit_table(self, report: RunReport, hits: list[SieveHit], name: str = "hits"):
        rows = [
            [hit.k, hit.sign_branch, hit.r_candidate, _format_residual(hit.fractional_residual), "yes" if hit.verified else "no"]
            for hit in hits
        ]
        report.add_table(name, ["k", "branch", "r_candidate", "residual", "verified"], rows)
        if hits and all(hit.sign_branch == "+" for hit in hits):
            report.add_note("all hits lie on the +d branch")

    async def sieve(self, spec: ExperimentSpec, report: RunReport, tr: Optional[RealLike] = None) -> SieveOutcome:
        """浮点筛：±d + k·e 的小数部分前 match_digits 位全为 0 或全为 9"""
        tr = spec.tr if tr is None else tr
        reals = await self.attack_reals(spec, report, tr)
        ctx = reals.ctx
        match_digits = spec.match_digits or DEFAULT_MATCH_DIGITS
        k_lo, k_hi = k_range_for_r_range(spec.r_lo, spec.r_hi, reals)
        report.add_value("k_range", f"{k_lo}..{k_hi}")
        cfg = FloatSieveConfig(
            d=reals.d,
            e=reals.e,
            k_lo=k_lo,
            k_hi=k_hi,
            match_digits=match_digits,
            ctx=ctx,
            reanchor_period=self.lab_config.reanchor_period,
        )
        chunks = self.engine.chunks(spec.chunks)
        logger.info(f"浮点筛: k ∈ [{k_lo}, {k_hi}]，match_digits = {match_digits}，分 {chunks} 块")
        hits = await self.engine.call(float_sieve, cfg, chunks)
        hits = await self.engine.call(verify_hits, hits, spec.x, tr, ctx)
        self._hit_table(report, hits)
        return SieveOutcome(reals=reals, k_range=(k_lo, k_hi), config=cfg, hits=hits)

    async def int_sieve(self, spec: ExperimentSpec, report: RunReport, tr: Optional[RealLike] = None) -> SieveOutcome:
        """模整数筛：±di + k·ei (mod M) 落在 comp 以内"""
        tr = spec.tr if tr is None else tr
        m = modulus_exponent(spec.m, spec.modulus)
        reals = await self.attack_reals(spec, report, tr)
        ctx = reals.ctx
        k_lo, k_hi = k_range_for_r_range(spec.r_lo, spec.r_hi, reals)
        report.add_value("k_range", f"{k_lo}..{k_hi}")
        cfg = IntSieveConfig.from_reals(reals, m, spec.comp, k_lo, k_hi)
        report.add_value("di", cfg.di)
        report.add_value("ei", cfg.ei)
        report.add_value("M", cfg.M)
        report.add_value("comp", cfg.comp)
        if cfg.comp == 0:
            report.add_note("comp = 0 admits no residue, so the sieve cannot hit")

        chunks = self.engine.chunks(spec.chunks)
        logger.info(f"整数筛: k ∈ [{k_lo}, {k_hi}]，M = 10^{m}，分 {chunks} 块")
        hits = await self.engine.call(int_sieve, cfg, chunks)
        hits = await self.engine.call(verify_hits, hits, spec.x, tr, ctx)
        self._hit_table(report, hits)
        return SieveOutcome(reals=reals, k_range=(k_lo, k_hi), config=cfg, hits=hits)
