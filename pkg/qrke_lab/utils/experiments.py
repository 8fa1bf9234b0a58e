"""
experiments.py
命令行解析与实验描述：命名实验完全确定全部参数，custom 实验要求参数显式给出
"""

import argparse
import re
from decimal import Decimal, InvalidOperation
from typing import Any, Literal, Optional

from pydantic import BaseModel, Field, ValidationError, model_validator

from ..core.errors import UsageError
from ..core.precision import is_plain_decimal

PUBLISHED_X = "0.5434908208304983248023984"

NAMED_EXPERIMENTS: dict[str, dict[str, Any]] = {
    "sec3-diophantine": {
        "digits": 150,
        "x": PUBLISHED_X,
        "r": 342683123012,
        "r_lo": 10**11,
        "r_hi": 10**12,
        "m": 9,
    },
    "sec3-contfrac": {
        "digits": 150,
        "x": PUBLISHED_X,
        "r": 342683123012,
        "r_lo": 10**11,
        "r_hi": 10**12,
        "extra": {"second_r": 742683555011, "second_r_lo": 10**11, "second_r_hi": 10**13},
    },
    "sec5-float-sieve": {
        "digits": 40,
        "x": PUBLISHED_X,
        "r": 526556641,
        "r_lo": 10**8,
        "r_hi": 10**9,
        "match_digits": 9,
    },
    "sec5-int-sieve": {
        "digits": 40,
        "x": PUBLISHED_X,
        "r": 526556641,
        "r_lo": 10**8,
        "r_hi": 10**9,
        "modulus": 10**21,
        "comp": 10**11,
    },
    "kex-demo": {
        "digits": 60,
        "x": PUBLISHED_X,
        "r_lo": 10**12,
        "r_hi": 10**13,
        "seed": 20240101,
    },
}

# attack 命令未给出 --m / --match-digits 时的取值
DEFAULT_SCALE_DIGITS = 9
DEFAULT_MATCH_DIGITS = 9

ATTACK_KINDS = ("diophantine", "contfrac", "sieve", "int-sieve")
KEX_KINDS = ("keygen", "shared", "demo")
BENCH_KINDS = ("sieve", "scaling", "cost")

_PLAIN_INT = re.compile(r"^\d+$")

# 命名实验允许的运行选项（不影响实验参数）
RUN_OPTIONS = {
    "experiment",
    "chunks",
    "output_format",
    "insecure_export",
    "output",
    "pdf",
    "log_level",
    "config_path",
    "overrides",
}


class ExperimentSpec(BaseModel):
    """一次运行的完整描述"""

    command: Literal["reproduce", "attack", "kex", "bench", "help"]
    subcommand: Optional[str] = None
    name: str = "custom"
    digits: Optional[int] = Field(default=None, ge=10)
    x: Optional[str] = None
    r: Optional[int] = None
    tr: Optional[str] = None
    r_lo: Optional[int] = None
    r_hi: Optional[int] = None
    m: Optional[int] = Field(default=None, ge=1)
    match_digits: Optional[int] = Field(default=None, ge=4)
    comp: Optional[int] = Field(default=None, ge=0)
    modulus: Optional[int] = Field(default=None, gt=0)
    seed: Optional[int] = None
    chunks: Optional[int] = Field(default=None, ge=1, le=64)
    output_format: Optional[Literal["text", "structured"]] = None
    insecure_export: bool = False
    widths: list[int] = Field(default_factory=list)
    r_digits: Optional[int] = Field(default=None, ge=1)
    topic: Optional[str] = None
    output: Optional[str] = None
    pdf: Optional[str] = None
    log_level: Optional[str] = None
    config_path: Optional[str] = None
    overrides: list[str] = Field(default_factory=list)
    extra: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_required(self) -> "ExperimentSpec":
        if self.command == "reproduce" and self.name not in NAMED_EXPERIMENTS:
            raise ValueError(f"unknown experiment '{self.name}'")
        if self.r_lo is not None and self.r_hi is not None and self.r_lo >= self.r_hi:
            raise ValueError(f"empty r-range {self.r_lo}:{self.r_hi}")

        required: tuple[str, ...] = ()
        if self.command == "attack":
            required = ("x", "tr", "r_lo", "r_hi")
            if self.subcommand == "int-sieve":
                required += ("comp",) if self.modulus is not None else ("m", "comp")
        elif self.command == "kex" and self.subcommand == "keygen":
            required = ("x", "r_lo", "r_hi", "seed")
        elif self.command == "kex" and self.subcommand == "shared":
            required = ("r", "tr")
        missing = [name for name in required if getattr(self, name) is None]
        if missing:
            flags = ", ".join("--" + ("r-range" if n in ("r_lo", "r_hi") else n.replace("_", "-")) for n in missing)
            raise ValueError(f"missing required parameter(s): {flags}")
        return self

    @classmethod
    def named(cls, name: str, **overrides) -> "ExperimentSpec":
        """按名称构造命名实验"""
        if name not in NAMED_EXPERIMENTS:
            raise UsageError(f"未知的实验名称: {name}，可选: {', '.join(NAMED_EXPERIMENTS)}")
        fields = dict(NAMED_EXPERIMENTS[name])
        fields.update({k: v for k, v in overrides.items() if v is not None})
        return cls(command="reproduce", name=name, **fields)


class LabArgumentParser(argparse.ArgumentParser):
    """用法错误抛出 UsageError，而不是直接退出进程"""

    def error(self, message):
        raise UsageError(message)


def _range_bound(text: str) -> int:
    """范围端点：十进制整数或科学记数简写（1e8）"""
    try:
        value = Decimal(text)
    except InvalidOperation:
        raise UsageError(f"范围端点格式错误: '{text}'") from None
    if not value.is_finite() or value != value.to_integral_value() or value < 0:
        raise UsageError(f"范围端点必须是非负整数: '{text}'")
    return int(value)


def parse_range(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition(":")
    if not sep:
        raise UsageError(f"范围格式应为 LO:HI: '{text}'")
    return _range_bound(lo.strip()), _range_bound(hi.strip())


def _plain_int(text: str) -> int:
    if not _PLAIN_INT.match(text.strip()):
        raise argparse.ArgumentTypeError(f"not a plain decimal integer: '{text}'")
    return int(text)


def _plain_decimal(text: str) -> str:
    if not is_plain_decimal(text):
        raise argparse.ArgumentTypeError(f"not a plain decimal number: '{text}'")
    return text.strip()


def _widths(text: str) -> list[int]:
    return [_range_bound(part.strip()) for part in text.split(",") if part.strip()]


def build_parser() -> LabArgumentParser:
    common = LabArgumentParser(add_help=False)
    common.add_argument("--digits", type=_plain_int)
    common.add_argument("--x", type=_plain_decimal)
    common.add_argument("--r", type=_plain_int)
    common.add_argument("--tr", type=_plain_decimal)
    common.add_argument("--r-range", dest="r_range")
    common.add_argument("--m", type=_plain_int)
    common.add_argument("--match-digits", dest="match_digits", type=_plain_int)
    common.add_argument("--comp", type=_plain_int)
    common.add_argument("--modulus", type=_plain_int)
    common.add_argument("--seed", type=_plain_int)
    common.add_argument("--chunks", type=_plain_int)
    common.add_argument("--format", dest="output_format", choices=("text", "structured"))
    common.add_argument("--insecure-export-secrets", dest="insecure_export", action="store_true")
    common.add_argument("--widths", type=_widths)
    common.add_argument("--r-digits", dest="r_digits", type=_plain_int)
    common.add_argument("--output")
    common.add_argument("--pdf")
    common.add_argument("--log-level", dest="log_level", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    common.add_argument("--config", dest="config_path")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")

    parser = LabArgumentParser(prog="qrke-lab", description="Chebyshev key exchange cryptanalysis workbench")
    commands = parser.add_subparsers(dest="command", required=True)

    reproduce = commands.add_parser("reproduce", parents=[common])
    reproduce.add_argument("--experiment", required=True, choices=sorted(NAMED_EXPERIMENTS))

    for command, kinds in (("attack", ATTACK_KINDS), ("kex", KEX_KINDS), ("bench", BENCH_KINDS)):
        sub = commands.add_parser(command).add_subparsers(dest="subcommand", required=True)
        for kind in kinds:
            sub.add_parser(kind, parents=[common])

    help_parser = commands.add_parser("help")
    help_parser.add_argument("topic", nargs="?", default="overview")
    return parser


def parse_cli(args: list[str]) -> ExperimentSpec:
    """把命令行参数解析为 ExperimentSpec；任何用法问题都抛出 UsageError"""
    ns = vars(build_parser().parse_args(args))
    command = ns.pop("command")
    if command == "help":
        return ExperimentSpec(command="help", topic=ns.get("topic"))

    r_range = ns.pop("r_range", None)
    if r_range is not None:
        ns["r_lo"], ns["r_hi"] = parse_range(r_range)
    fields = {k: v for k, v in ns.items() if v is not None}

    try:
        if command == "reproduce":
            fixed = sorted(set(fields) - RUN_OPTIONS)
            if fixed:
                raise UsageError(f"命名实验的参数是固定的，不能覆盖: {', '.join(fixed)}")
            return ExperimentSpec.named(fields.pop("experiment"), **fields)
        return ExperimentSpec(command=command, **fields)
    except ValidationError as e:
        problems = "; ".join(err["msg"] for err in e.errors())
        raise UsageError(problems) from e


_ECHO_FIELDS = (
    "digits",
    "x",
    "r",
    "tr",
    "r_lo",
    "r_hi",
    "m",
    "match_digits",
    "comp",
    "modulus",
    "seed",
    "widths",
    "r_digits",
)


def echo_params(spec: ExperimentSpec) -> dict[str, Any]:
    """报告开头回显的实验参数；kex 命令的秘密 r 只在显式导出时回显"""
    params: dict[str, Any] = {}
    if spec.subcommand:
        params["command"] = f"{spec.command} {spec.subcommand}"
    for name in _ECHO_FIELDS:
        value = getattr(spec, name)
        if value is None or value == []:
            continue
        if name == "r" and spec.command == "kex" and not spec.insecure_export:
            continue
        params[name] = value
    return params


def with_defaults(spec: ExperimentSpec, name: str) -> ExperimentSpec:
    """用命名实验的参数补齐 spec 中未给出的字段（kex demo 与 bench 命令使用）"""
    fills = {k: v for k, v in NAMED_EXPERIMENTS[name].items() if getattr(spec, k, None) is None}
    return spec.model_copy(update=fills)
