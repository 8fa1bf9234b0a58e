"""
report.py
运行报告：文本表格与 JSON lines 两种渲染，异步写文件，PDF 输出
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import aiofiles
from fpdf import FPDF
from fpdf.enums import XPos, YPos

from .log import logger

SCHEMA_VERSION = 1


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[list[str]] = field(default_factory=list)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class RunReport:
    """一次运行的完整报告

    所有数值在加入报告时就已渲染为字符串，文本与结构化两种输出共用这些字符串。
    """

    experiment: str
    params: dict[str, Any] = field(default_factory=dict)
    values: list[tuple[str, str]] = field(default_factory=list)
    tables: list[Table] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    timings: list[dict[str, Any]] = field(default_factory=list)
    verdict: str = ""
    exit_code: int = 0

    def add_value(self, label: str, value: Any):
        self.values.append((label, str(value)))

    def add_table(self, name: str, columns: list[str], rows: list[list[Any]]) -> Table:
        table = Table(name=name, columns=columns, rows=[[str(c) for c in row] for row in rows])
        self.tables.append(table)
        return table

    def add_check(self, name: str, passed: bool, detail: str = "") -> bool:
        self.checks.append(Check(name=name, passed=bool(passed), detail=detail))
        if not passed:
            logger.warning(f"检查未通过: {name} {detail}")
        return bool(passed)

    def add_note(self, text: str):
        self.notes.append(text)

    def add_timing(self, **fields):
        self.timings.append(fields)

    @property
    def all_checks_passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def finish(self, verdict: str, success: bool):
        """写入结论行；success 为假或有检查未通过时退出码为 1"""
        self.verdict = verdict
        self.exit_code = 0 if success and self.all_checks_passed else 1


def _align(rows: list[list[str]]) -> list[str]:
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    return ["  ".join(cell.rjust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]


def render_text(report: RunReport) -> str:
    lines = [f"== {report.experiment} =="]
    for key, value in report.params.items():
        lines.append(f"param {key}: {value}")

    if report.values:
        width = max(len(label) for label, _ in report.values)
        lines.append("")
        lines.extend(f"{label.ljust(width)} = {value}" for label, value in report.values)

    for table in report.tables:
        lines.append("")
        lines.append(f"-- {table.name} ({len(table.rows)} rows) --")
        lines.extend(_align([table.columns] + table.rows))

    if report.checks:
        lines.append("")
        for check in report.checks:
            mark = "PASS" if check.passed else "FAIL"
            lines.append(f"[{mark}] {check.name}" + (f": {check.detail}" if check.detail else ""))

    if report.notes:
        lines.append("")
        lines.extend(f"note: {note}" for note in report.notes)

    if report.timings:
        lines.append("")
        for timing in report.timings:
            lines.append("timing " + " ".join(f"{k}={v}" for k, v in timing.items()))

    lines.append("")
    lines.append(f"verdict: {report.verdict}")
    return "\n".join(lines) + "\n"


def render_structured(report: RunReport) -> str:
    """JSON lines，每条记录都带 schema_version 与 kind"""

    def record(kind: str, **fields) -> str:
        return json.dumps({"schema_version": SCHEMA_VERSION, "kind": kind, **fields}, ensure_ascii=False)

    out = [record("run", experiment=report.experiment, params=report.params)]
    out += [record("value", label=label, value=value) for label, value in report.values]
    for table in report.tables:
        out += [record("row", table=table.name, **dict(zip(table.columns, row))) for row in table.rows]
    out += [record("check", name=c.name, passed=c.passed, detail=c.detail) for c in report.checks]
    out += [record("note", text=note) for note in report.notes]
    out += [record("timing", **timing) for timing in report.timings]
    out.append(record("verdict", text=report.verdict, exit_code=report.exit_code))
    return "\n".join(out) + "\n"


def render(report: RunReport, output_format: str = "text") -> str:
    if output_format == "structured":
        return render_structured(report)
    return render_text(report)


async def write_report(path: str, content: str):
    """异步写出渲染好的报告"""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    async with aiofiles.open(target, "w", encoding="utf-8") as f:
        await f.write(content)
    logger.info(f"报告已写入 {target}")


def create_pdf_from_text(title: str, text: str) -> bytes:
    """使用 fpdf2 将文本报告转换为 PDF 字节流（等宽字体）"""
    pdf = FPDF()
    pdf.add_page()
    pdf.set_font("Courier", size=14)
    pdf.multi_cell(0, 8, title, align="C", new_x=XPos.LMARGIN, new_y=YPos.NEXT)
    pdf.ln(4)
    pdf.set_font_size(7)
    # 内置字体只支持 latin-1
    safe = text.encode("latin-1", "replace").decode("latin-1")
    for line in safe.splitlines() or [""]:
        pdf.multi_cell(0, 3.5, line or " ", new_x=XPos.LMARGIN, new_y=YPos.NEXT)
    return bytes(pdf.output())


async def write_pdf(path: str, title: str, text: str):
    data = create_pdf_from_text(title, text)
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    async with aiofiles.open(target, "wb") as f:
        await f.write(data)
    logger.info(f"PDF 报告已写入 {target}")
