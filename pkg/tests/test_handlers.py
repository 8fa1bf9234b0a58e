import asyncio
import json

import pytest

from qrke_lab.core.errors import ParameterError
from qrke_lab.handlers.attack import modulus_exponent, recovery_verdict
from qrke_lab.handlers.reproduce import agrees_with_printed
from qrke_lab.main import EXIT_OK, main


def run_cli(*argv) -> int:
    return asyncio.run(main(list(argv)))


def test_agrees_with_printed():
    assert agrees_with_printed("1.0163", "1.016")
    assert agrees_with_printed("1.0169", "1.016")
    assert agrees_with_printed("1.015", "1.016")
    assert not agrees_with_printed("1.0149", "1.016")
    assert agrees_with_printed("-3122013006.3820581", "-3122013006.382058")


def test_modulus_exponent():
    assert modulus_exponent(21, None) == 21
    assert modulus_exponent(None, 10**21) == 21
    assert modulus_exponent(21, 10**21) == 21
    for m, modulus in ((None, None), (None, 20), (None, 1), (20, 10**21)):
        with pytest.raises(ParameterError):
            modulus_exponent(m, modulus)


def test_recovery_verdict():
    assert recovery_verdict([]) == "secret recovered: no; verified candidates: 0"
    assert recovery_verdict([5, 9]) == "secret recovered: yes (r = 5, 9); verified candidates: 2"


def test_bench_cost(capsys):
    assert run_cli("bench", "cost", "--widths", "200000") == EXIT_OK
    out = capsys.readouterr().out
    assert "r digits" in out and "timing variant=estimate" in out
    assert "verdict: estimated exhaustive search:" in out


def test_bench_sieve_reports_hit_counts(capsys):
    code = run_cli("bench", "sieve", "--r-range", "526546641:526566641", "--format", "structured")
    assert code == EXIT_OK
    records = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    values = {rec["label"]: rec["value"] for rec in records if rec["kind"] == "value"}
    assert values["float hits"] == values["int hits"] == "1"
    assert values["verified r"] == "526556641"
    assert not [rec for rec in records if rec["kind"] == "check"]


def test_bench_scaling_needs_two_widths(capsys):
    assert run_cli("bench", "scaling", "--widths", "1000") == 2
    assert "ParameterError" in capsys.readouterr().err


def test_kex_shared(capsys):
    code = run_cli("kex", "shared", "--r", "3", "--tr", "0.5", "--digits", "20")
    assert code == EXIT_OK
    # T_3(0.5) = 4·0.125 − 1.5 = −1
    assert "shared = -1.0" in capsys.readouterr().out


@pytest.mark.slow
@pytest.mark.parametrize("experiment", ["sec5-float-sieve", "sec5-int-sieve"])
def test_reproduce_sieves(experiment, capsys):
    assert run_cli("reproduce", "--experiment", experiment, "--chunks", "4") == EXIT_OK
    out = capsys.readouterr().out
    assert "secret recovered: yes (r = 526556641)" in out
    assert "published values reproduced: yes" in out
