"""Deposits, rent and gas charges, traffic-fee escrow, penalties,
confiscation and compensation. Every function moves tokens between ledger
buckets without creating or destroying any."""

from __future__ import annotations

from fractions import Fraction

from .errors import BadCapacity, BadState, InsufficientBalance
from .state import (
    LIVE_SECTOR,
    EntryState,
    Escrow,
    FileDescriptor,
    NetworkParams,
    NetworkState,
    SectorRef,
    SectorState,
    tokens,
)


def compute_deposit(capacity: int, params: NetworkParams) -> Fraction:
    """Deposit pledged for a sector: proportional to its share of total capacity."""
    if capacity <= 0 or capacity % params.min_capacity:
        raise BadCapacity(f"capacity {capacity} is not a positive multiple of {params.min_capacity}")
    return capacity * params.gamma_deposit * params.cap_para * params.min_value / params.min_capacity


_GAS_MEMO: dict = {}


def gas_per_cycle(state: NetworkState) -> Fraction:
    # one CheckProof per cycle, one CheckRefresh every avg_refresh cycles on average
    fees = state.fees
    key = (fees.gas("CheckProof"), fees.gas("CheckRefresh"), state.params.avg_refresh)
    got = _GAS_MEMO.get(key)
    if got is None:
        got = _GAS_MEMO[key] = key[0] + key[1] / tokens(key[2])
    return got


def rent_per_cycle(state: NetworkState, f: FileDescriptor) -> Fraction:
    return state.fees.rent_rate(state.clock) * f.size * f.cp


def cycle_cost(state: NetworkState, f: FileDescriptor) -> Fraction:
    return rent_per_cycle(state, f) + gas_per_cycle(state)


def charge_rent_and_gas(state: NetworkState, file_id: int) -> Fraction:
    """Prepay one proof cycle of rent and gas for a file; all or nothing."""
    f = state.files[file_id]
    rent = rent_per_cycle(state, f)
    gas = gas_per_cycle(state)
    if not rent and not gas:
        return rent
    lg = state.ledger
    bal = lg.balance(f.owner)
    if bal < rent + gas:
        raise InsufficientBalance(f"{f.owner} holds {bal}, next cycle of file {file_id} costs {rent + gas}")
    lg.accounts[f.owner] = bal - rent - gas
    lg.network_pool += rent
    lg.burn_sink += gas
    return rent + gas


def distribute_rent(state: NetworkState, period_start: int) -> dict[str, Fraction]:
    """Split the rent pool among providers by the capacity of sectors that
    were live for the whole period ending now. Returns payouts per provider."""
    eligible: dict[str, int] = {}
    for s in state.sectors.values():
        if s.state in LIVE_SECTOR and s.registered_at <= period_start:
            eligible[s.owner] = eligible.get(s.owner, 0) + s.capacity
    lg = state.ledger
    pool = lg.network_pool
    total = sum(eligible.values())
    if pool <= 0 or total == 0:
        return {}
    payouts = {}
    for owner in sorted(eligible):
        amt = pool * eligible[owner] / total
        payouts[owner] = amt
        lg.accounts[owner] = lg.balance(owner) + amt
    lg.network_pool = pool - sum(payouts.values(), Fraction(0))
    return payouts


def escrow_traffic_fee(state: NetworkState, payer: str, provider: str, nbytes: int, key: tuple[int, int]) -> Fraction:
    """Lock the traffic fee for one transfer; released on confirm, refunded on failure."""
    amount = state.fees.traffic_per_byte * nbytes
    if amount == 0:
        return amount
    lg = state.ledger
    bal = lg.balance(payer)
    if bal < amount:
        raise InsufficientBalance(f"{payer} cannot escrow traffic fee {amount}")
    lg.accounts[payer] = bal - amount
    lg.escrow[key] = Escrow(payer, provider, amount)
    return amount


def settle_traffic_fee(state: NetworkState, key: tuple[int, int], *, confirmed: bool) -> Fraction:
    lg = state.ledger
    esc = lg.escrow.pop(key, None)
    if esc is None:
        return Fraction(0)
    who = esc.provider if confirmed else esc.payer
    lg.accounts[who] = lg.balance(who) + esc.amount
    return esc.amount


def penalize(state: NetworkState, ref: SectorRef, reason: str = "") -> Fraction:
    """Burn ``penalty_fraction`` of a live sector's remaining deposit."""
    s = state.sectors[ref]
    if s.state not in LIVE_SECTOR:
        raise BadState(f"cannot penalize sector {ref} in state {s.state.value}")
    amt = s.deposit * state.params.penalty_fraction
    s.deposit -= amt
    s.penalized = True
    state.ledger.burn_sink += amt
    state.counters.penalties += 1
    return amt


def confiscate(state: NetworkState, ref: SectorRef) -> tuple[Fraction, list[tuple[int, int]]]:
    """Seize a sector's deposit and drop the sector from every allocation
    entry, marking it corrupted. Returns the amount seized and the entries
    that lost their last holder."""
    s = state.sectors[ref]
    if s.state not in LIVE_SECTOR:
        raise BadState(f"cannot confiscate sector {ref} in state {s.state.value}")
    amt = s.deposit
    state.ledger.confiscated_pool += amt
    s.deposit = Fraction(0)
    s.state = SectorState.CORRUPTED
    s.cr_count = 0
    state.invalidate_weights()
    state.counters.confiscations += 1

    flipped = []
    for fid, idx in sorted(state.holders.get(ref, ())):
        e = state.entry(fid, idx)
        prev = None if e.prev == ref else e.prev
        nxt = e.next
        if nxt == ref and prev is None:
            nxt = None
        if prev is None and nxt is None:
            state.set_entry(fid, idx, prev=None, next=None, last=-1, state=EntryState.CORRUPTED)
            settle_traffic_fee(state, (fid, idx), confirmed=False)
            flipped.append((fid, idx))
        elif prev != e.prev:
            # refresh in flight keeps going from the surviving replicas
            state.set_entry(fid, idx, prev=prev)
            flipped.append((fid, idx))
    return amt, flipped


def compensate(state: NetworkState, file_id: int) -> tuple[Fraction, Fraction]:
    """Pay the owner of a lost file its declared value from confiscated
    deposits. Returns ``(paid, shortfall)``; a shortfall is recorded as an
    under-compensation event rather than hidden."""
    f = state.files[file_id]
    lg = state.ledger
    paid = min(f.value, lg.confiscated_pool)
    lg.confiscated_pool -= paid
    lg.accounts[f.owner] = lg.balance(f.owner) + paid
    shortfall = f.value - paid
    state.counters.compensation_paid += paid
    if shortfall > 0:
        state.counters.under_compensation.append((file_id, shortfall))
    return paid, shortfall
