import asyncio
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from rich.console import Console
from rich.markup import escape

from .core.engine import LabEngine
from .core.errors import ConsistencyError, LabError, UsageError
from .handlers.attack import AttackHandler
from .handlers.bench import BenchHandler
from .handlers.kex import KexHandler
from .handlers.reproduce import ReproduceHandler
from .utils.config import LabConfig, LabConfigManager
from .utils.experiments import ExperimentSpec, parse_cli
from .utils.help import get_help_message, init_help_manager
from .utils.log import logger, setup_logging
from .utils.report import RunReport, render, render_text, write_pdf, write_report

EXIT_OK = 0
EXIT_NO_RECOVERY = 1
EXIT_USAGE = 2
EXIT_INCONSISTENT = 3


class LabApp:
    """
    切比雪夫密钥交换密码分析工作台
    用法:
        qrke-lab reproduce --experiment sec3-diophantine   复现已发表的实验
        qrke-lab attack sieve --x X --tr TR --r-range 1e8:1e9 --match-digits 9
        qrke-lab help                                       查看帮助信息
    配置通过 --config FILE 与 --set key=value 调整。
    """

    def __init__(self, config: Dict[str, Any]):
        """初始化工作台"""
        self.config = config

        # 1. 初始化配置与配置管理器
        self.lab_config = LabConfig(self.config)
        self.config_manager = LabConfigManager(self.lab_config)

        # 2. 初始化计算引擎 (Facade 持有核心组件)
        self.engine = LabEngine(self.lab_config)

        # 3. 初始化各个子系统 (Handlers)，把工具给它们
        self.attack_handler = AttackHandler(self.engine, self.lab_config)
        self.kex_handler = KexHandler(self.engine, self.lab_config)
        self.bench_handler = BenchHandler(self.engine, self.lab_config)
        self.reproduce_handler = ReproduceHandler(
            self.engine, self.lab_config, self.attack_handler, self.kex_handler
        )

        # 初始化帮助消息管理器
        init_help_manager()

    @classmethod
    def from_spec(cls, spec: ExperimentSpec) -> "LabApp":
        """按命令行给出的配置文件与 --set 覆盖项构造工作台"""
        try:
            config = LabConfig.from_schema(spec.config_path).config
        except ValueError as e:
            raise UsageError(str(e)) from e
        app = cls(config)
        app.apply_overrides(spec.overrides)
        return app

    def apply_overrides(self, overrides: Sequence[str]):
        for item in overrides:
            key, sep, value = item.partition("=")
            if not sep:
                raise UsageError(f"--set 需要 KEY=VALUE 形式: '{item}'")
            ok, message = self.config_manager.validate_and_set_config(key.strip(), value.strip())
            if not ok:
                raise UsageError(message)
            logger.debug(message)

    async def run_experiment(self, spec: ExperimentSpec) -> RunReport:
        """分派到对应的处理器"""
        if spec.command == "reproduce":
            return await self.reproduce_handler.run(spec)
        if spec.command == "attack":
            return await self.attack_handler.run(spec)
        if spec.command == "kex":
            return await self.kex_handler.run(spec)
        if spec.command == "bench":
            return await self.bench_handler.run(spec)
        raise UsageError(f"未知命令: {spec.command}")

    def help_text(self, topic: str) -> str:
        text = get_help_message(topic)
        if topic == "config":
            current = self.config_manager.get_current_config()
            text += "\n\nCurrent values:\n" + "\n".join(f"  {k} = {v}" for k, v in current.items())
        return text + "\n"

    def output_format(self, spec: ExperimentSpec) -> str:
        return spec.output_format or self.lab_config.output_format

    async def write_outputs(self, spec: ExperimentSpec, report: RunReport, content: str):
        """--output 写出渲染后的报告；--pdf 或配置 write_pdf 写出 PDF"""
        if spec.output:
            await write_report(spec.output, content)
        pdf_path: Optional[str] = spec.pdf
        if pdf_path is None and self.lab_config.write_pdf:
            pdf_path = str(Path(self.lab_config.report_dir or ".") / f"{report.experiment}.pdf")
        if pdf_path:
            await write_pdf(pdf_path, f"qrke-lab {report.experiment}", render_text(report))


def run_experiment(spec: ExperimentSpec, config: Optional[Dict[str, Any]] = None) -> RunReport:
    """同步入口：构造工作台并运行一次实验"""
    app = LabApp.from_spec(spec) if config is None else LabApp(config)
    return asyncio.run(app.run_experiment(spec))


async def main(argv: Optional[Sequence[str]] = None) -> int:
    """命令行主流程，返回退出码"""
    console = Console(stderr=True)
    try:
        spec = parse_cli(list(sys.argv[1:] if argv is None else argv))
        app = LabApp.from_spec(spec)
        setup_logging(spec.log_level or app.lab_config.log_level)

        if spec.command == "help":
            sys.stdout.write(app.help_text(spec.topic or "overview"))
            return EXIT_OK

        logger.debug(f"工作台配置加载：{app.lab_config.get_config_info()}")
        report = await app.run_experiment(spec)
        content = render(report, app.output_format(spec))
        sys.stdout.write(content)
        await app.write_outputs(spec, report, content)
        return report.exit_code

    except ConsistencyError as e:
        logger.error(f"内部一致性检查失败 - {e}", exc_info=True)
        console.print(f"[bold red]internal inconsistency[/bold red]: {escape(str(e))}")
        return EXIT_INCONSISTENT
    except UsageError as e:
        console.print(f"[red]usage error[/red]: {escape(str(e))}\n(run 'qrke-lab help' for usage)")
        return EXIT_USAGE
    except LabError as e:
        console.print(f"[red]{type(e).__name__}[/red]: {escape(str(e))}")
        return EXIT_USAGE


def cli():
    sys.exit(asyncio.run(main()))


if __name__ == "__main__":
    cli()
