import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fileinsurer.bounds import (
    BoundInputs,
    binom_stirling_upper,
    bounds_report,
    compute_r1_r2,
    kl_lemma_check,
    thm1_capacity_bound,
    thm2_collision_bound,
    thm3_in_text_form,
    thm3_robustness_bound,
    thm3_terms,
    thm4_deposit_ratio,
    thm4_terms,
)
from fileinsurer.errors import CollisionExhausted, DomainError, EmptyFileSet, InvalidParams, NonIntegralCount
from fileinsurer.state import NetworkParams

from conftest import build, small_params

DEFAULT = BoundInputs()


# ---- reference evaluations at 50 digits -------------------------------------------

def mp_thm3(inp):
    mpmath.mp.dps = 50
    lam, k, ns, c = mpmath.mpf(inp.lam), inp.k, mpmath.mpf(inp.n_s), mpmath.mpf(inp.c)
    mix = lam * mpmath.log(lam) + (1 - lam) * mpmath.log(1 - lam)
    num = (mpmath.log(mpmath.e / (2 * mpmath.pi)) - mpmath.log(c)) / ns - mix
    t3 = 4 * num / (mpmath.mpf(inp.gamma_vm) * k * mpmath.log(1 / lam) * inp.cap_para)
    return 5 * lam**k, lam ** (mpmath.mpf(k) / 2), t3


def mp_thm4(inp):
    mpmath.mp.dps = 50
    lam, k, ns, c = mpmath.mpf(inp.lam), inp.k, mpmath.mpf(inp.n_s), mpmath.mpf(inp.c)
    t3 = 4 / (k * mpmath.mpf(inp.cap_para)) * (mpmath.log(ns) / mpmath.log(1 / lam) + mpmath.log(1 / c) / mpmath.log(ns))
    return 5 * lam ** (k - 1), lam ** (mpmath.mpf(k) / 2 - 1), t3


def agree(a, b, digits=10):
    return float(abs(mpmath.mpf(a) - b) / abs(b)) < 10 ** (-digits)


def test_thm3_terms_agree_with_reference():
    for got, ref in zip(thm3_terms(DEFAULT), mp_thm3(DEFAULT)):
        assert agree(got, ref)


def test_thm4_terms_agree_with_reference():
    for got, ref in zip(thm4_terms(DEFAULT), mp_thm4(DEFAULT)):
        assert agree(got, ref)


def test_stirling_log_agrees_with_reference():
    mpmath.mp.dps = 50
    ref = mpmath.log(mpmath.e / (2 * mpmath.pi)) + 10**6 * mpmath.log(2)
    assert agree(binom_stirling_upper(10**6, 0.5).log_value, ref)


# ---- worked values ---------------------------------------------------------------

def test_thm4_worked_example():
    t = thm4_terms(DEFAULT)
    assert t[0] == pytest.approx(9.54e-6, rel=1e-3)
    assert t[1] == pytest.approx(1.953e-3, rel=1e-3)
    assert t[2] == pytest.approx(4.586e-3, rel=1e-3)
    assert round(thm4_deposit_ratio(DEFAULT), 4) == 0.0046


def test_thm3_worked_example_and_flag():
    t1, t2, t3 = thm3_terms(DEFAULT)
    assert t1 == pytest.approx(4.768e-6, rel=1e-3)
    assert t2 == pytest.approx(9.766e-4, rel=1e-3)
    assert t3 == pytest.approx(0.0400, rel=1e-3)
    assert thm3_in_text_form(DEFAULT) == pytest.approx(9.54e-4, rel=1e-3)
    rep = bounds_report(DEFAULT)
    assert rep["thm3"]["discrepancy"] is True
    assert rep["thm3"]["bound"] == pytest.approx(t3)


def test_thm3_third_term_small_only_for_large_gamma_vm():
    assert thm3_terms(BoundInputs(gamma_vm=0.2))[2] <= 1.01e-3
    assert thm3_terms(BoundInputs(gamma_vm=0.1))[2] > 1e-3


def test_thm3_small_lambda_limit():
    t1, t2, t3 = thm3_terms(BoundInputs(lam=1e-9))
    assert t1 < 1e-100 and t2 < 1e-80
    assert thm3_robustness_bound(BoundInputs(lam=1e-9)) == t3


def test_thm4_blows_up_near_one():
    assert thm4_deposit_ratio(BoundInputs(lam=0.999999)) > 1
    with pytest.raises(DomainError):
        thm4_deposit_ratio(BoundInputs(n_s=1))


def test_thm2_examples():
    assert thm2_collision_bound(1e12, 1000) < 1e-50
    assert thm2_collision_bound(1e12, 1000) == pytest.approx(2.89e-51, rel=1e-2)
    assert thm2_collision_bound(10, 0) == 1.0
    assert thm2_collision_bound(1e6, 1) == 1.0


def test_thm1_example():
    inp = BoundInputs(n_s=100, min_capacity=64, r1=1, k=4, r2=10)
    assert thm1_capacity_bound(inp) == 640
    tiny_r2 = BoundInputs(n_s=100, min_capacity=64, r1=1, k=4, r2=1e-9)
    assert thm1_capacity_bound(tiny_r2) == 800


def test_r1_r2_examples():
    p = NetworkParams(min_capacity=64, cap_para=1000, cr_size=1, size_limit=64)
    assert compute_r1_r2([(10, 3)], p) == (3, Fraction("0.0192"))
    r1, _ = compute_r1_r2([(5, 1), (7, 1), (100, 1)], p)
    assert r1 == 1
    with pytest.raises(EmptyFileSet):
        compute_r1_r2([], p)


def _fill(stop_at_half):
    params = small_params(k=2, cap_para=1000, gamma_deposit=Fraction(1, 1000))
    eng, _ = build(6, params=params, seed=8, client_balance=10**6)
    total_cap = eng.state.total_capacity()
    used = 0
    sizes = [37, 80, 120, 64, 200]
    for n in range(500):
        size, units = sizes[n % len(sizes)], 1 + n % 3
        if stop_at_half and used + size * 2 * units > total_cap // 2:
            break
        try:
            eng.file_add("alice", size, units)
        except CollisionExhausted:
            break
        used += size * 2 * units
        eng.advance_time(eng.now)
    live = eng.state.live_files()
    r1, r2 = compute_r1_r2([(f.size, f.value) for f in live], params)
    inp = BoundInputs(k=2, n_s=6, cap_para=1000, min_capacity=params.min_capacity, r1=float(r1), r2=float(r2))
    return sum(f.size for f in live), inp


def test_fill_within_redundant_capacity_respects_thm1():
    stored, inp = _fill(stop_at_half=True)
    assert stored <= thm1_capacity_bound(inp)


def test_fill_until_rejection_bounded_by_raw_capacity():
    # File_Add admits files until the sectors are physically full, so the
    # stored total can exceed the half-capacity design point but never the raw one
    stored, inp = _fill(stop_at_half=False)
    assert stored <= 2 * thm1_capacity_bound(inp)
    assert stored > thm1_capacity_bound(inp)


def test_inputs_validation():
    for bad in (dict(lam=0), dict(lam=1), dict(c=0), dict(k=0), dict(gamma_vm=0), dict(r1=0.5), dict(r2=0)):
        with pytest.raises(InvalidParams):
            BoundInputs(**bad).validate()


@given(lam=st.floats(0.01, 0.9), dl=st.floats(1e-4, 0.1), k=st.integers(4, 30))
def test_bounds_monotone_in_lambda(lam, dl, k):
    hi = min(0.9, lam + dl)
    a, b = BoundInputs(k=k, lam=lam), BoundInputs(k=k, lam=hi)
    assert thm3_robustness_bound(a) <= thm3_robustness_bound(b)
    assert thm4_deposit_ratio(a) <= thm4_deposit_ratio(b) * (1 + 1e-12)


# ---- lemmas ------------------------------------------------------------------------

def test_kl_lemma_examples():
    r = kl_lemma_check(0.1, 0.5)
    assert r.dkl == pytest.approx(0.5108, abs=1e-4)
    assert r.half_bound == pytest.approx(0.4024, abs=1e-4)
    assert r.holds
    r = kl_lemma_check(0.1, 1.0)
    assert r.dkl == pytest.approx(math.log(10)) and r.half_bound == pytest.approx(0.5 * math.log(10))
    with pytest.raises(DomainError):
        kl_lemma_check(0.3, 1.0)
    with pytest.raises(DomainError):
        kl_lemma_check(0.1, 0.4)


@given(p=st.floats(1e-6, 0.2), u=st.floats(0, 1))
def test_kl_lemma_property(p, u):
    x = 5 * p + u * (1 - 5 * p)
    assert kl_lemma_check(p, x).holds


def test_stirling_examples():
    b = binom_stirling_upper(10, 0.5)
    assert b.value == pytest.approx(443.01, abs=0.01)
    assert b.value >= math.comb(10, 5)
    with pytest.raises(NonIntegralCount):
        binom_stirling_upper(7, 0.5)
    big = binom_stirling_upper(10**6, 0.5)
    assert big.value is None and big.log_value > 690000


def test_stirling_with_sqrt_factor_holds_everywhere():
    # the form that keeps the square-root factor bounds C(N, N/2) for all even N
    for n in range(2, 61, 2):
        assert math.exp(binom_stirling_upper(n, 0.5).log_value_sqrt) >= math.comb(n, n // 2)
