"""
kex.py
密钥交换命令处理器：生成密钥记录、计算共享秘密、双方演示
"""

from ..core.chebyshev import (
    KexParams,
    instance_record,
    kex_keygen,
    kex_shared,
    parse_record,
    t_cos_eval,
)
from ..core.errors import ParameterError
from ..core.precision import digits_agree, render
from ..utils.experiments import ExperimentSpec, echo_params, with_defaults
from ..utils.log import logger
from ..utils.report import RunReport


class KexHandler:
    """密钥交换处理器"""

    def __init__(self, engine, lab_config):
        self.engine = engine
        self.lab_config = lab_config

    async def run(self, spec: ExperimentSpec) -> RunReport:
        if spec.subcommand == "demo":
            spec = with_defaults(spec, "kex-demo")
        report = RunReport(experiment=f"kex-{spec.subcommand}", params=echo_params(spec))
        if spec.subcommand == "keygen":
            await self.keygen(spec, report)
        elif spec.subcommand == "shared":
            await self.shared(spec, report)
        elif spec.subcommand == "demo":
            await self.demo(spec, report)
        else:
            raise ParameterError(f"未知的 kex 子命令: {spec.subcommand}")
        return report

    def _params(self, spec: ExperimentSpec) -> KexParams:
        ctx = self.engine.context(spec.digits)
        return KexParams(x=spec.x, r_min=spec.r_lo, r_max=spec.r_hi, ctx=ctx)

    async def keygen(self, spec: ExperimentSpec, report: RunReport):
        """按种子生成一方的密钥，输出公开记录"""
        params = self._params(spec)
        inst = await self.engine.call(kex_keygen, params, spec.seed)
        record = instance_record(inst, insecure_export=spec.insecure_export)
        for line in record.splitlines():
            key, _, value = line.partition("=")
            report.add_value(key, value)
        if spec.insecure_export:
            logger.warning("已按要求导出秘密 r，该记录不可公开")
            report.add_note("record contains the secret r (--insecure-export-secrets)")
        report.finish("key generated", success=True)

    async def shared(self, spec: ExperimentSpec, report: RunReport):
        """用自己的秘密 r 与对方公开值 tr 计算共享秘密"""
        ctx = self.engine.context(spec.digits)
        secret = await self.engine.call(kex_shared, spec.r, spec.tr, ctx)
        report.add_value("shared", render(secret, ctx))
        report.finish("shared secret computed", success=True)

    async def demo(self, spec: ExperimentSpec, report: RunReport):
        """两方演示：交换公开记录后各自计算共享秘密，检查二者一致

        公开值 y 以 digits 位记录传递，计算 T_s(y) 时其误差会被放大约 s 倍，
        因此一致位数取 digits − len(r_max) − kex_margin_digits。
        """
        params = self._params(spec)
        ctx = params.ctx
        alice = await self.engine.call(kex_keygen, params, spec.seed)
        bob = await self.engine.call(kex_keygen, params, spec.seed + 1)

        alice_record = parse_record(instance_record(alice))
        bob_record = parse_record(instance_record(bob))
        report.add_value("alice y", alice_record.y)
        report.add_value("bob y", bob_record.y)
        if spec.insecure_export:
            report.add_value("alice r", alice.r)
            report.add_value("bob r", bob.r)

        alice_key = await self.engine.call(kex_shared, alice.r, bob_record.y, ctx)
        bob_key = await self.engine.call(kex_shared, bob.r, alice_record.y, ctx)
        direct = await self.engine.call(t_cos_eval, alice.r * bob.r, params.x, ctx)

        agree = ctx.digits - len(str(params.r_max)) - self.lab_config.kex_margin_digits
        if agree < 1:
            raise ParameterError(f"精度 {ctx.digits} 位不足以在保留余量后比较共享秘密")
        report.add_value("agreement digits", agree)
        report.add_value("shared (alice)", render(alice_key, ctx, agree))
        report.add_value("shared (bob)", render(bob_key, ctx, agree))

        report.add_check("parties agree", digits_agree(alice_key, bob_key, agree), f"to {agree} digits")
        report.add_check("T_s(T_r(x)) = T_rs(x)", digits_agree(alice_key, direct, agree), f"to {agree} digits")
        passed = report.all_checks_passed
        logger.info(f"密钥交换演示: 双方{'一致' if passed else '不一致'}")
        report.finish("shared secrets agree: yes" if passed else "shared secrets agree: no", success=passed)
