import asyncio
import json

import pytest

from qrke_lab import main as lab_main
from qrke_lab.core.chebyshev import t_cos_eval
from qrke_lab.core.errors import ConsistencyError, UsageError
from qrke_lab.core.precision import make_context, render
from qrke_lab.handlers.reproduce import PUBLISHED_TR
from qrke_lab.main import EXIT_INCONSISTENT, EXIT_NO_RECOVERY, EXIT_OK, EXIT_USAGE, main, run_experiment
from qrke_lab.utils.experiments import PUBLISHED_X, ExperimentSpec, parse_cli


def run_cli(*argv) -> int:
    return asyncio.run(main(list(argv)))


def structured(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines()]


def test_parse_named_experiment():
    spec = parse_cli(["reproduce", "--experiment", "sec3-diophantine"])
    assert spec.name == "sec3-diophantine"
    assert (spec.digits, spec.m, spec.r) == (150, 9, 342683123012)

    spec = parse_cli(["reproduce", "--experiment", "sec5-int-sieve", "--format", "structured", "--chunks", "2"])
    assert spec.output_format == "structured"
    assert spec.chunks == 2


def test_named_experiment_parameters_are_fixed():
    with pytest.raises(UsageError):
        parse_cli(["reproduce", "--experiment", "sec3-diophantine", "--digits", "20"])


def test_parse_custom_attack():
    spec = parse_cli(["attack", "sieve", "--x", PUBLISHED_X, "--tr", "0.25", "--r-range", "1e8:1e9"])
    assert (spec.command, spec.subcommand) == ("attack", "sieve")
    assert (spec.r_lo, spec.r_hi) == (10**8, 10**9)
    assert spec.match_digits is None


@pytest.mark.parametrize(
    "argv",
    [
        ["attack", "sieve", "--x", PUBLISHED_X, "--r-range", "1e8:1e9"],
        ["attack", "sieve", "--x", PUBLISHED_X, "--tr", "0.25", "--r-range", "5:5"],
        ["attack", "sieve", "--x", "1e-3", "--tr", "0.25", "--r-range", "1:9"],
        ["attack", "sieve", "--x", PUBLISHED_X, "--tr", "0.25", "--r-range", "1.5:9"],
        ["attack", "int-sieve", "--x", PUBLISHED_X, "--tr", "0.25", "--r-range", "1:9", "--comp", "5"],
        ["attack", "brute", "--x", PUBLISHED_X],
        ["kex", "shared", "--r", "5"],
        ["reproduce", "--experiment", "nope"],
        [],
    ],
)
def test_usage_errors(argv):
    with pytest.raises(UsageError):
        parse_cli(argv)


def test_parse_help():
    spec = parse_cli(["help"])
    assert spec.command == "help" and spec.topic == "overview"
    assert parse_cli(["help", "kex"]).topic == "kex"


def test_help_exit_code(capsys):
    assert run_cli("help") == EXIT_OK
    assert "qrke-lab" in capsys.readouterr().out
    assert run_cli("help", "config") == EXIT_OK
    assert "default_digits = 40" in capsys.readouterr().out


def test_usage_exit_codes(capsys):
    assert run_cli("reproduce", "--experiment", "nope") == EXIT_USAGE
    assert run_cli("reproduce", "--experiment", "kex-demo", "--set", "nope=1") == EXIT_USAGE
    assert run_cli("reproduce", "--experiment", "kex-demo", "--set", "guard_digits") == EXIT_USAGE
    assert "usage error" in capsys.readouterr().err


def test_trivial_angle_exit_code(capsys):
    code = run_cli("attack", "diophantine", "--x", "0.5", "--tr", "0.3", "--r-range", "1:100")
    assert code == EXIT_USAGE
    assert "DegenerateParameterError" in capsys.readouterr().err


def test_consistency_error_exit_code(monkeypatch, capsys):
    async def broken(self, spec):
        raise ConsistencyError("float and int sieves disagree")

    monkeypatch.setattr(lab_main.LabApp, "run_experiment", broken)
    assert run_cli("reproduce", "--experiment", "kex-demo") == EXIT_INCONSISTENT
    assert "internal inconsistency" in capsys.readouterr().err


def test_reproduce_diophantine_is_deterministic(capsys):
    argv = ("reproduce", "--experiment", "sec3-diophantine", "--format", "structured")
    assert run_cli(*argv) == EXIT_OK
    first = capsys.readouterr().out
    assert run_cli(*argv) == EXIT_OK
    assert capsys.readouterr().out == first

    records = structured(first)
    assert records[0]["kind"] == "run"
    assert not any(rec["kind"] == "timing" for rec in records)
    checks = [rec for rec in records if rec["kind"] == "check"]
    assert checks and all(rec["passed"] for rec in checks)
    verdict = records[-1]
    assert verdict["text"].startswith("secret recovered: no")
    assert verdict["text"].endswith("published values reproduced: yes")


def test_reproduce_contfrac(capsys):
    assert run_cli("reproduce", "--experiment", "sec3-contfrac") == EXIT_OK
    out = capsys.readouterr().out
    assert "cf candidates (second)" in out
    assert "published values reproduced: yes" in out


def test_reproduce_kex_demo(capsys):
    assert run_cli("reproduce", "--experiment", "kex-demo") == EXIT_OK
    out = capsys.readouterr().out
    assert "[PASS] parties agree" in out
    assert "verdict: shared secrets agree: yes" in out


def test_custom_diophantine_without_recovery(capsys):
    code = run_cli(
        "attack", "diophantine", "--x", PUBLISHED_X, "--tr", PUBLISHED_TR, "--r-range", "1e11:1e12", "--digits", "150"
    )
    assert code == EXIT_NO_RECOVERY
    assert "secret recovered: no" in capsys.readouterr().out


def test_custom_int_sieve_recovers_small_secret(capsys):
    ctx = make_context(40)
    tr = render(t_cos_eval(1009, "0.3", ctx), ctx)
    code = run_cli(
        "attack", "int-sieve", "--x", "0.3", "--tr", tr, "--r-range", "1000:1100",
        "--m", "21", "--comp", "100000000000", "--format", "structured",
    )
    assert code == EXIT_OK
    records = structured(capsys.readouterr().out)
    assert records[-1]["text"] == "secret recovered: yes (r = 1009); verified candidates: 1"


def test_keygen_record_hides_secret(capsys):
    argv = ["kex", "keygen", "--x", PUBLISHED_X, "--r-range", "1e12:1e13", "--seed", "7", "--digits", "60"]
    assert run_cli(*argv, "--format", "structured") == EXIT_OK
    labels = [rec["label"] for rec in structured(capsys.readouterr().out) if rec["kind"] == "value"]
    assert labels == ["x", "y", "digits"]

    assert run_cli(*argv, "--format", "structured", "--insecure-export-secrets") == EXIT_OK
    labels = [rec["label"] for rec in structured(capsys.readouterr().out) if rec["kind"] == "value"]
    assert labels == ["r", "x", "y", "digits"]


def test_output_files(tmp_path, capsys):
    text_path = tmp_path / "keygen.txt"
    pdf_path = tmp_path / "keygen.pdf"
    code = run_cli(
        "kex", "keygen", "--x", PUBLISHED_X, "--r-range", "1e12:1e13", "--seed", "7", "--digits", "60",
        "--output", str(text_path), "--pdf", str(pdf_path),
    )
    assert code == EXIT_OK
    assert text_path.read_text(encoding="utf-8") == capsys.readouterr().out
    assert pdf_path.read_bytes().startswith(b"%PDF")


def test_run_experiment_entry_point():
    report = run_experiment(ExperimentSpec.named("kex-demo"))
    assert report.exit_code == 0
    assert report.verdict == "shared secrets agree: yes"
