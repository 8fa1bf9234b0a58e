import random
from concurrent.futures import ProcessPoolExecutor

import pytest

from qrke_lab.core.errors import ConsistencyError, ParameterError, PrecisionBudgetError
from qrke_lab.core.chebyshev import t_cos_eval
from qrke_lab.core.diophantine import derive_attack_reals
from qrke_lab.core.precision import frac_part, is_trivial_angle, make_context
from qrke_lab.core import sieve
from qrke_lab.core.sieve import (
    FloatSieveConfig,
    IntSieveConfig,
    extrapolate_cost,
    float_sieve,
    int_sieve,
    k_range_for_r_range,
    progression_neighbors,
    scaling_probe,
    sieve_benchmark,
    verify_hits,
)
from qrke_lab.handlers.reproduce import (
    PUBLISHED_DI,
    PUBLISHED_EI,
    PUBLISHED_FLOAT_HITS,
    PUBLISHED_K_RANGE,
    PUBLISHED_SECRET_SIEVE,
)
from qrke_lab.utils.experiments import PUBLISHED_X

TRUE_K = 83486152
K_LO, K_HI = PUBLISHED_K_RANGE
PLUS_NEAR_HITS = [19482666, 51484409, 83486152, 115487895, 147489638]
MINUS_NEAR_HITS = [44520820, 76522563, 108524306, 140526049]


def float_cfg(reals, k_lo, k_hi, match_digits=9, **kw):
    return FloatSieveConfig(reals.d, reals.e, k_lo, k_hi, match_digits, reals.ctx, **kw)


def test_k_range(sec5_reals):
    assert k_range_for_r_range(10**8, 10**9, sec5_reals) == (K_LO, K_HI)
    with pytest.raises(ParameterError):
        k_range_for_r_range(10**9, 10**8, sec5_reals)


def test_float_sieve_finds_secret_near_true_k(sec5_reals, sec5_tr):
    hits = float_sieve(float_cfg(sec5_reals, TRUE_K - 1000, TRUE_K + 1000))
    assert [(hit.k, hit.sign_branch, hit.r_candidate) for hit in hits] == [
        (TRUE_K, "+", PUBLISHED_SECRET_SIEVE)
    ]
    checked = verify_hits(hits, PUBLISHED_X, sec5_tr, sec5_reals.ctx)
    assert all(hit.verified for hit in checked)


def test_float_sieve_near_hit_at_eight_digits(sec5_reals, sec5_tr):
    k, r = PUBLISHED_FLOAT_HITS[1]
    assert float_sieve(float_cfg(sec5_reals, k - 1000, k + 1000, 9)) == []

    hits = float_sieve(float_cfg(sec5_reals, k - 1000, k + 1000, 8))
    assert [(hit.k, hit.r_candidate) for hit in hits] == [(k, r)]
    assert not verify_hits(hits, PUBLISHED_X, sec5_tr, sec5_reals.ctx)[0].verified


def test_published_int_sieve_config(sec5_reals):
    cfg = IntSieveConfig.from_reals(sec5_reals, 21, 10**11, K_LO, K_HI)
    assert (cfg.di, cfg.ei, cfg.M) == (PUBLISHED_DI, PUBLISHED_EI, 10**21)
    assert (cfg.d_int, cfg.e_int) == (2, 6)


def test_int_sieve_finds_secret_near_true_k(sec5_reals, sec5_tr):
    cfg = IntSieveConfig.from_reals(sec5_reals, 21, 10**11, TRUE_K - 1000, TRUE_K + 1000)
    hits = int_sieve(cfg)
    assert [(hit.k, hit.sign_branch, hit.r_candidate) for hit in hits] == [
        (TRUE_K, "+", PUBLISHED_SECRET_SIEVE)
    ]
    assert abs(hits[0].fractional_residual) < 10**11
    assert verify_hits(hits, PUBLISHED_X, sec5_tr, sec5_reals.ctx)[0].verified


def test_int_sieve_with_zero_tolerance_has_no_hits(sec5_reals):
    cfg = IntSieveConfig.from_reals(sec5_reals, 21, 0, TRUE_K - 1000, TRUE_K + 1000)
    assert int_sieve(cfg) == []


def test_int_sieve_matches_brute_force():
    di, ei, modulus, comp = 123, 457, 1000, 5
    cfg = IntSieveConfig(di=di, ei=ei, M=modulus, comp=comp, k_lo=0, k_hi=2000)
    expected = []
    for k in range(0, 2001):
        for branch, start in (("+", di), ("-", -di)):
            s = (start + k * ei) % modulus
            if s < comp or s > modulus - comp:
                expected.append((k, branch))
    assert [(hit.k, hit.sign_branch) for hit in int_sieve(cfg)] == expected


def test_float_sieve_matches_direct_evaluation(sec5_reals):
    mp = sec5_reals.ctx.mp
    k_lo, k_hi = TRUE_K - 5000, TRUE_K + 5000
    eps = mp.mpf(10) ** -4
    expected = []
    for k in range(k_lo, k_hi + 1):
        for branch, sd in (("+", sec5_reals.d), ("-", -sec5_reals.d)):
            f = frac_part(sd + k * sec5_reals.e)
            if f < eps or f > 1 - eps:
                expected.append((k, branch))

    hits = float_sieve(float_cfg(sec5_reals, k_lo, k_hi, 4, reanchor_period=7))
    assert [(hit.k, hit.sign_branch) for hit in hits] == expected
    assert (TRUE_K, "+") in expected


def test_chunking_does_not_change_hits(sec5_reals):
    k_lo, k_hi = TRUE_K - 3000, TRUE_K + 3000
    fcfg = float_cfg(sec5_reals, k_lo, k_hi, 5)
    assert float_sieve(fcfg, chunks=3) == float_sieve(fcfg, chunks=1)
    icfg = IntSieveConfig.from_reals(sec5_reals, 21, 10**16, k_lo, k_hi)
    assert int_sieve(icfg, chunks=4) == int_sieve(icfg, chunks=1)


def test_chunk_pool_starts_workers_with_spawn(monkeypatch, sec5_reals):
    opened = []

    def recording_pool(*args, **kwargs):
        opened.append(kwargs)
        return ProcessPoolExecutor(*args, **kwargs)

    monkeypatch.setattr(sieve, "ProcessPoolExecutor", recording_pool)
    cfg = IntSieveConfig.from_reals(sec5_reals, 21, 10**16, TRUE_K - 1000, TRUE_K + 1000)
    assert int_sieve(cfg, chunks=2) == int_sieve(cfg, chunks=1)
    assert len(opened) == 1
    assert opened[0]["mp_context"].get_start_method() == "spawn"


def test_config_validation(sec5_reals):
    with pytest.raises(ParameterError):
        float_cfg(sec5_reals, 10, 10)
    with pytest.raises(ParameterError):
        float_cfg(sec5_reals, 0, 10, 3)
    with pytest.raises(ParameterError):
        float_cfg(sec5_reals, 0, 10, reanchor_period=0)
    with pytest.raises(PrecisionBudgetError):
        FloatSieveConfig(sec5_reals.d, sec5_reals.e, 0, K_HI, 9, make_context(20))

    with pytest.raises(ParameterError):
        IntSieveConfig(di=1, ei=1, M=0, comp=0, k_lo=0, k_hi=1)
    with pytest.raises(ParameterError):
        IntSieveConfig(di=10, ei=1, M=10, comp=0, k_lo=0, k_hi=1)
    with pytest.raises(ParameterError):
        IntSieveConfig(di=1, ei=1, M=10, comp=10, k_lo=0, k_hi=1)
    with pytest.raises(ParameterError):
        IntSieveConfig(di=1, ei=1, M=10, comp=1, k_lo=1, k_hi=1)


def test_benchmark_reports_identical_hits(sec5_reals):
    k_lo, k_hi = TRUE_K - 1000, TRUE_K + 1000
    report = sieve_benchmark(
        float_cfg(sec5_reals, k_lo, k_hi),
        IntSieveConfig.from_reals(sec5_reals, 21, 10**11, k_lo, k_hi),
        min_elapsed_ms=10**6,
    )
    assert report.hit_ks == [TRUE_K]
    assert report.below_threshold
    assert [t.variant for t in report.timings] == ["float", "int"]


def test_benchmark_detects_disagreement(sec5_reals):
    k = PUBLISHED_FLOAT_HITS[1][0]
    k_lo, k_hi = k - 1000, k + 1000
    with pytest.raises(ConsistencyError):
        sieve_benchmark(
            float_cfg(sec5_reals, k_lo, k_hi, 9),
            IntSieveConfig.from_reals(sec5_reals, 21, 10**13, k_lo, k_hi),
        )
    with pytest.raises(ParameterError):
        sieve_benchmark(
            float_cfg(sec5_reals, k_lo, k_hi),
            IntSieveConfig.from_reals(sec5_reals, 21, 10**11, k_lo, k_hi + 1),
        )


def test_progression_neighbors(sec5_reals):
    q, rows = progression_neighbors(sec5_reals, TRUE_K, 2, K_LO, K_HI, sec5_reals.ctx)
    assert q == 32001743
    plus = {row.k: row for row in rows if row.sign_branch == "+"}
    assert sorted(plus) == PLUS_NEAR_HITS
    for k, r in PUBLISHED_FLOAT_HITS:
        assert plus[k].r_candidate == r
        assert abs(plus[k].residual) < sec5_reals.ctx.mp.mpf(10) ** -8


def test_extrapolate_cost():
    estimate = extrapolate_cost(10**6, 100, 21, precision_digits=300, e=6.3)
    assert estimate.steps == pytest.approx(1e100 / 6.3)
    assert estimate.seconds == pytest.approx(1e100 / 6.3 / 1e6 * 300 / 21)
    assert estimate.years == pytest.approx(estimate.seconds / (365.25 * 86400))
    with pytest.raises(ParameterError):
        extrapolate_cost(0, 100, 21)
    with pytest.raises(ParameterError):
        extrapolate_cost(10**6, 100, 0)


def test_scaling_probe_rejects_unknown_variant(sec5_reals):
    with pytest.raises(ParameterError):
        scaling_probe(sec5_reals, [10, 20], TRUE_K, variant="gpu")


def test_int_sieve_recovers_exactly_one_secret():
    ctx = make_context(40)
    rng = random.Random(50)
    for _ in range(50):
        x = f"0.{rng.randint(100000, 900000)}"
        if is_trivial_angle(x):
            continue
        r = rng.randint(1000, 20000)
        tr = t_cos_eval(r, x, ctx)
        reals = derive_attack_reals(x, tr, ctx)
        k_lo, k_hi = k_range_for_r_range(1000, 20000, reals)
        cfg = IntSieveConfig.from_reals(reals, 21, 10**11, k_lo, k_hi)
        hits = verify_hits(int_sieve(cfg), x, tr, ctx)
        assert sorted({hit.r_candidate for hit in hits if hit.verified}) == [r]


@pytest.mark.slow
def test_full_range_float_sieve(sec5_reals):
    hits = float_sieve(float_cfg(sec5_reals, K_LO, K_HI, 9), chunks=4)
    assert sorted({hit.k for hit in hits}) == [TRUE_K]

    hits = float_sieve(float_cfg(sec5_reals, K_LO, K_HI, 8), chunks=4)
    assert sorted((hit.k, hit.sign_branch) for hit in hits) == sorted(
        [(k, "+") for k in PLUS_NEAR_HITS] + [(k, "-") for k in MINUS_NEAR_HITS]
    )


@pytest.mark.slow
def test_full_range_int_sieve(sec5_reals, sec5_tr):
    cfg = IntSieveConfig.from_reals(sec5_reals, 21, 10**11, K_LO, K_HI)
    hits = verify_hits(int_sieve(cfg, chunks=4), PUBLISHED_X, sec5_tr, sec5_reals.ctx)
    assert [hit.k for hit in hits] == [TRUE_K]
    assert [hit.r_candidate for hit in hits if hit.verified] == [PUBLISHED_SECRET_SIEVE]


@pytest.mark.bench
def test_int_sieve_is_faster(sec5_reals):
    k_lo, k_hi = K_LO, K_LO + 2 * 10**6
    report = sieve_benchmark(
        float_cfg(sec5_reals, k_lo, k_hi),
        IntSieveConfig.from_reals(sec5_reals, 21, 10**11, k_lo, k_hi),
    )
    assert not report.below_threshold
    assert report.ratio >= 3


@pytest.mark.bench
def test_int_sieve_scales_linearly(sec5_reals):
    probe = scaling_probe(sec5_reals, [10**6, 10**7], K_LO)
    assert probe.ratio == pytest.approx(10, rel=0.4)
