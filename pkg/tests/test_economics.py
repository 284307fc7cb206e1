from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fileinsurer.economics import (
    charge_rent_and_gas,
    compensate,
    compute_deposit,
    confiscate,
    distribute_rent,
    escrow_traffic_fee,
    gas_per_cycle,
    penalize,
    settle_traffic_fee,
)
from fileinsurer.engine import Engine
from fileinsurer.errors import BadCapacity, BadState, InsufficientBalance
from fileinsurer.state import (
    EntryState,
    FeeSchedule,
    FileDescriptor,
    NetworkParams,
    SectorState,
    init_network,
    token_total,
)

from conftest import MIN_CAP, build, small_params

GB = 2**30


def test_compute_deposit_examples():
    p = NetworkParams(min_capacity=64 * GB, gamma_deposit=Fraction("0.0046"), cap_para=1000)
    assert compute_deposit(128 * GB, p) == Fraction("9.2")
    with pytest.raises(BadCapacity):
        compute_deposit(0, p)
    with pytest.raises(BadCapacity):
        compute_deposit(100 * GB, p)
    assert compute_deposit(64 * GB, p.replace(gamma_deposit=0)) == 0


def _state_with_file(size=10, cp=8, rate="0.001", balance=100, gas=None):
    fees = FeeSchedule(rent_per_byte_replica_cycle=rate, gas_per_task=gas or {})
    st_ = init_network(small_params(), {"alice": balance}, fees)
    st_.files[1] = FileDescriptor(1, size, Fraction(1), "", cp, owner="alice")
    return st_


def test_rent_part_per_cycle():
    s = _state_with_file()
    before = token_total(s)
    assert charge_rent_and_gas(s, 1) == Fraction("0.08")
    assert s.ledger.network_pool == Fraction("0.08")
    assert s.ledger.balance("alice") == 100 - Fraction("0.08")
    assert token_total(s) == before


def test_gas_is_burned_and_averaged_over_refresh_interval():
    s = _state_with_file(rate=0, gas={"CheckProof": 1, "CheckRefresh": 3})
    # avg_refresh = 3 in small_params
    assert gas_per_cycle(s) == 2
    charge_rent_and_gas(s, 1)
    assert s.ledger.burn_sink == 2 and s.ledger.network_pool == 0


def test_charge_is_all_or_nothing():
    s = _state_with_file(balance=Fraction("0.05"))
    with pytest.raises(InsufficientBalance):
        charge_rent_and_gas(s, 1)
    assert s.ledger.balance("alice") == Fraction("0.05")
    assert s.ledger.network_pool == 0


def test_discarded_file_is_never_charged():
    fees = FeeSchedule(rent_per_byte_replica_cycle=Fraction(1, 100))
    eng, _ = build(3, fees=fees)
    fid = eng.file_add("alice", 10, 1)
    eng.advance_time(0)
    eng.file_discard("alice", fid)
    pool = eng.state.ledger.network_pool
    eng.advance_time(9)
    eng.advance_time(10)
    charged = [ev for ev in eng.events if ev.time == 10 and any(n["kind"] == "charged" for n in ev.notes)]
    assert not charged
    assert eng.state.ledger.network_pool <= pool


def _two_providers():
    s = init_network(small_params(), {"a": 100, "b": 100})
    eng = Engine(small_params(), balances={"a": 100, "b": 100})
    eng.sector_register("a", MIN_CAP)
    eng.sector_register("b", 3 * MIN_CAP)
    return eng.state


def test_distribute_rent_proportional():
    s = _two_providers()
    a0, b0 = s.ledger.balance("a"), s.ledger.balance("b")
    s.ledger.accounts["a"] -= 4
    s.ledger.network_pool += 4
    before = token_total(s)
    pay = distribute_rent(s, 0)
    assert pay == {"a": 1, "b": 3}
    assert s.ledger.balance("a") == a0 - 3 and s.ledger.balance("b") == b0 + 3
    assert s.ledger.network_pool == 0
    assert token_total(s) == before


def test_distribute_rent_empty_pool_and_corrupted_sector():
    s = _two_providers()
    assert distribute_rent(s, 0) == {}
    s.ledger.accounts["a"] -= 4
    s.ledger.network_pool += 4
    confiscate(s, ("b", 1))
    pay = distribute_rent(s, 0)
    assert pay == {"a": 4}


def test_distribute_rent_no_eligible_carries_pool():
    s = _two_providers()
    s.ledger.accounts["a"] -= 4
    s.ledger.network_pool += 4
    # sectors registered at t=0 are not eligible for a period that started earlier
    assert distribute_rent(s, -10) == {}
    assert s.ledger.network_pool == 4


@given(caps=st.lists(st.integers(1, 8), min_size=1, max_size=6), pool=st.fractions(0, 1000))
def test_distribute_rent_never_mints(caps, pool):
    balances = {f"p{j}": 100 for j in range(len(caps))}
    eng = Engine(small_params(), balances={**balances, "x": 2000})
    for j, c in enumerate(caps):
        eng.sector_register(f"p{j}", c * MIN_CAP)
    s = eng.state
    s.ledger.accounts["x"] -= pool
    s.ledger.network_pool += pool
    before = token_total(s)
    pay = distribute_rent(s, 0)
    assert sum(pay.values(), Fraction(0)) <= pool
    assert token_total(s) == before
    for j, c in enumerate(caps):
        if pool:
            assert pay[f"p{j}"] == pool * c / sum(caps)


def test_traffic_escrow_release_refund_and_zero():
    fees = FeeSchedule(traffic_per_byte=Fraction(1, 10))
    s = init_network(small_params(), {"alice": 10, "bob": 0}, fees)
    assert escrow_traffic_fee(s, "alice", "bob", 20, (1, 1)) == 2
    assert escrow_traffic_fee(s, "alice", "bob", 30, (1, 2)) == 3
    assert s.ledger.balance("alice") == 5
    settle_traffic_fee(s, (1, 1), confirmed=True)
    settle_traffic_fee(s, (1, 2), confirmed=False)
    assert s.ledger.balance("bob") == 2 and s.ledger.balance("alice") == 8
    assert escrow_traffic_fee(s, "alice", "bob", 0, (1, 3)) == 0
    assert (1, 3) not in s.ledger.escrow
    with pytest.raises(InsufficientBalance):
        escrow_traffic_fee(s, "alice", "bob", 1000, (1, 4))


def test_confiscate_moves_deposit_and_flips_entries():
    eng, _ = build(1, params=small_params(k=3))
    fid = eng.file_add("alice", 10, 1)
    eng.advance_time(0)
    s = eng.state
    ref = ("p0", 1)
    d = s.sectors[ref].deposit
    before = token_total(s)
    amt, flipped = confiscate(s, ref)
    assert amt == d and s.ledger.confiscated_pool == d
    assert s.sectors[ref].state is SectorState.CORRUPTED and s.sectors[ref].deposit == 0
    assert len(flipped) == 3
    assert all(e.state is EntryState.CORRUPTED for e in s.alloc[fid])
    assert token_total(s) == before
    with pytest.raises(BadState):
        confiscate(s, ref)


def test_compensate_full_and_short():
    s = init_network(small_params(), {"alice": 0})
    s.files[1] = FileDescriptor(1, 10, Fraction(5), "", 2, owner="alice")
    s.ledger.confiscated_pool = Fraction(100)
    assert compensate(s, 1) == (5, 0)
    assert s.ledger.confiscated_pool == 95 and s.ledger.balance("alice") == 5
    s.ledger.confiscated_pool = Fraction(3)
    assert compensate(s, 1) == (3, 2)
    assert s.counters.under_compensation == [(1, 2)]


def test_no_corruption_means_no_compensation():
    eng, agent = build(4, seed=4)
    for _ in range(5):
        eng.file_add("alice", 20, 1)
    agent.run_until(300)
    assert eng.state.counters.compensation_paid == 0
    assert not eng.state.counters.under_compensation


def test_penalize_compounds():
    eng = Engine(small_params(gamma_deposit=25, penalty_fraction=Fraction(1, 100)), balances={"a": 100})
    ref = eng.sector_register("a", MIN_CAP)
    s = eng.state
    assert s.sectors[ref].deposit == 100
    assert penalize(s, ref) == 1
    assert s.sectors[ref].deposit == 99 and s.ledger.burn_sink == 1
    penalize(s, ref)
    assert s.sectors[ref].deposit == Fraction(99 * 99, 100)
    confiscate(s, ref)
    with pytest.raises(BadState):
        penalize(s, ref)
