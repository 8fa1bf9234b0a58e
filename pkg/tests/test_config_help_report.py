import asyncio
import json

import pytest

from qrke_lab.core.engine import LabEngine
from qrke_lab.core.errors import ParameterError
from qrke_lab.main import main
from qrke_lab.utils.config import LabConfig, LabConfigManager, load_schema
from qrke_lab.utils.experiments import NAMED_EXPERIMENTS
from qrke_lab.utils.help import HelpManager, format_param, get_help_message
from qrke_lab.utils.report import (
    SCHEMA_VERSION,
    RunReport,
    create_pdf_from_text,
    render,
    render_structured,
    render_text,
    write_report,
)

HELP_TOPICS = ["attack", "bench", "config", "formats", "kex", "labels", "overview", "reproduce"]


def test_schema_defaults():
    config = LabConfig.from_schema()
    schema = load_schema()
    assert config.default_digits == schema["default_digits"]["default"] == 40
    assert config.guard_digits == 20
    assert config.output_format == "text"
    assert config.write_pdf is False
    assert config.kex_margin_digits == 10


def test_config_file_overrides(tmp_path):
    path = tmp_path / "lab.json"
    path.write_text(json.dumps({"default_digits": 80, "output_format": "structured"}), encoding="utf-8")
    config = LabConfig.from_schema(str(path))
    assert config.default_digits == 80
    assert config.output_format == "structured"
    assert config.cf_max_terms == 80


def test_bad_config_files(tmp_path):
    with pytest.raises(ValueError):
        LabConfig.from_schema(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ValueError):
        LabConfig.from_schema(str(bad))


def test_save_config_round_trip(tmp_path):
    config = LabConfig.from_schema()
    config.default_digits = 77
    path = tmp_path / "saved.json"
    config.save_config(str(path))
    assert LabConfig.from_schema(str(path)).default_digits == 77


@pytest.fixture
def manager():
    return LabConfigManager(LabConfig.from_schema())


def test_set_int(manager):
    ok, _ = manager.validate_and_set_config("guard_digits", "30")
    assert ok and manager.config.guard_digits == 30
    ok, message = manager.validate_and_set_config("guard_digits", "300")
    assert not ok and "0" in message
    ok, _ = manager.validate_and_set_config("guard_digits", "many")
    assert not ok
    assert manager.config.guard_digits == 30


def test_set_enum_and_bool(manager):
    assert manager.validate_and_set_config("output_format", "structured")[0]
    assert not manager.validate_and_set_config("output_format", "xml")[0]
    assert manager.validate_and_set_config("write_pdf", "yes")[0]
    assert manager.config.write_pdf is True
    assert not manager.validate_and_set_config("write_pdf", "maybe")[0]


def test_unknown_and_hidden_keys(manager):
    ok, message = manager.validate_and_set_config("nope", "1")
    assert not ok
    assert "report_dir" not in message
    assert "report_dir" not in manager.get_current_config()
    assert manager.validate_and_set_config("report_dir", "/tmp/reports")[0]


def test_help_topics():
    helper = HelpManager()
    assert helper.topics() == HELP_TOPICS
    assert "qrke-lab" in get_help_message("overview")
    assert "not found" in helper.get_help_message("nonexistent")


def test_help_file_missing(tmp_path):
    helper = HelpManager(tmp_path / "none.json")
    assert helper.topics() == []
    assert helper.get_help_message("overview", "fallback") == "fallback"
    assert helper.get_help_message("kex-demo").startswith("kex-demo: named experiment")


def test_experiment_help_lists_fixed_parameters():
    text = get_help_message("sec5-int-sieve")
    assert text.startswith("sec5-int-sieve: modular integer sieve")
    assert "  modulus = 1e21" in text
    assert "  r = 526556641" in text
    assert "--r-range 1e8:1e9 --digits 40 --x 0.5434908208304983248023984 --r 526556641" in text
    assert "--modulus 1e21 --comp 1e11" in text

    contfrac = get_help_message("sec3-contfrac")
    assert "  second_r = 742683555011  (second instance)" in contfrac


def test_reproduce_help_lists_every_experiment():
    text = get_help_message("reproduce")
    for name in NAMED_EXPERIMENTS:
        assert f"\n  {name}" in text
    assert "qrke-lab help NAME" in text
    assert "sec3-diophantine" in get_help_message("nonexistent")


def test_format_param():
    assert format_param(10**21) == "1e21"
    assert format_param(100) == "100"
    assert format_param(526556641) == "526556641"
    assert format_param("0.3") == "0.3"


def test_help_cli_for_experiment(capsys):
    assert asyncio.run(main(["help", "kex-demo"])) == 0
    assert "seed = 20240101" in capsys.readouterr().out


def sample_report() -> RunReport:
    report = RunReport(experiment="demo", params={"x": "0.3"})
    report.add_value("d", "0.75")
    report.add_table("rows", ["k", "r"], [[1, 2], [10, 20]])
    report.add_check("works", True, "detail")
    report.add_note("a note")
    report.add_timing(variant="int", elapsed_ms=1.5)
    return report


def test_finish_exit_codes():
    report = sample_report()
    report.finish("fine", success=True)
    assert report.exit_code == 0
    report.finish("no recovery", success=False)
    assert report.exit_code == 1
    report.add_check("broken", False)
    report.finish("fine", success=True)
    assert report.exit_code == 1


def test_render_text():
    report = sample_report()
    report.finish("done", success=True)
    text = render_text(report)
    assert text.startswith("== demo ==\n")
    assert "-- rows (2 rows) --" in text
    assert " k   r" in text
    assert "[PASS] works: detail" in text
    assert "timing variant=int elapsed_ms=1.5" in text
    assert text.endswith("verdict: done\n")
    assert render(report) == text


def test_render_structured():
    report = sample_report()
    report.finish("done", success=True)
    records = [json.loads(line) for line in render_structured(report).splitlines()]
    assert all(rec["schema_version"] == SCHEMA_VERSION for rec in records)
    assert [rec["kind"] for rec in records] == [
        "run", "value", "row", "row", "check", "note", "timing", "verdict"
    ]
    assert records[2] == {"schema_version": 1, "kind": "row", "table": "rows", "k": "1", "r": "2"}
    assert records[-1]["exit_code"] == 0
    assert render(report, "structured") == render_structured(report)


def test_write_report(tmp_path):
    target = tmp_path / "out" / "report.txt"
    asyncio.run(write_report(str(target), "hello\n"))
    assert target.read_text(encoding="utf-8") == "hello\n"


def test_pdf_output():
    data = create_pdf_from_text("qrke-lab demo", "line one\nk ∈ [1, 2]\n")
    assert data.startswith(b"%PDF")


def test_engine_contexts_and_calls():
    engine = LabEngine(LabConfig.from_schema())
    ctx = engine.context()
    assert ctx.digits == 40 and ctx.guard == 20
    assert engine.context(40) is ctx
    assert engine.context(80).digits == 80
    assert engine.chunks() == 1
    assert engine.chunks(4) == 4
    assert asyncio.run(engine.call(pow, 2, 10)) == 1024
    with pytest.raises(ParameterError):
        engine.context(5)
