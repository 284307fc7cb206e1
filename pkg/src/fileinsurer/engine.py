"""Request handlers, scheduled Auto_* tasks and the event loop.

The :class:`Engine` is the single writer of a :class:`NetworkState`. Every
request and every executed task appends one :class:`EngineEvent` to an
append-only log; listeners (simulated providers, for instance) see each
event after it is committed and may issue further requests in response.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import math
import os
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional

from . import economics
from .errors import (
    BadState,
    CollisionExhausted,
    FileTooLarge,
    InsufficientBalance,
    InsufficientFunds,
    InvalidProof,
    NoLiveReplica,
    NoSectors,
    NotLarge,
    NotOwner,
    ProtocolError,
    TimeReversal,
    UnknownAccount,
    UnknownFile,
    ValueNotMultiple,
    WrongSector,
)
from .rng import RngStream
from .state import (
    LIVE_SECTOR,
    AllocEntry,
    EntryState,
    FeeSchedule,
    FileDescriptor,
    FileState,
    NetworkParams,
    NetworkState,
    PendingTask,
    Sector,
    SectorRef,
    SectorState,
    ceil_ticks,
    check_invariants,
    fmt_tokens,
    init_network,
    refill_crs,
    tokens,
)


def random_sector(state: NetworkState, rng: RngStream) -> SectorRef:
    """Draw a normal sector with probability proportional to its capacity."""
    refs, cum = state.normal_weights()
    if not refs:
        raise NoSectors("no sector accepts new replicas")
    return refs[bisect_right(cum, rng.randbelow(cum[-1]))]


def sample_exp(rng: RngStream, mean: float) -> int:
    """Ceiling of an exponential draw with the given mean; always >= 1."""
    return max(1, math.ceil(rng.expovariate(1.0 / mean)))


def random_index(rng: RngStream, f: FileDescriptor) -> int:
    if f.cp < 1:
        raise ValueError(f"file {f.id} has no replica slots")
    return rng.randint(1, f.cp)


@dataclass(frozen=True)
class Proof:
    """Stand-in for a storage proof: the time it attests to and whether it verifies."""

    t: int
    valid: bool = True


@dataclass(frozen=True)
class LargeFile:
    size: int
    value: Fraction
    merkle_root: str


@dataclass(frozen=True)
class Segment:
    index: int
    size: int
    value: Fraction
    merkle_root: str
    count: int

    @property
    def recovery_threshold(self) -> int:
        return math.ceil(self.count / 2)


def split_large_file(descriptor, params: NetworkParams) -> list[Segment]:
    """Cut an oversized file into an even number of erasure-coded segments.

    ``descriptor`` needs ``size``, ``value`` and ``merkle_root``. Any half of
    the segments recovers the file, so each segment carries ``size / (m/2)``
    bytes and is insured for ``2*value/m`` rounded up to a multiple of
    ``min_value``.
    """
    size, value, merkle_root = descriptor.size, tokens(descriptor.value), descriptor.merkle_root
    if size <= params.size_limit:
        raise NotLarge(f"size {size} fits within size_limit {params.size_limit}")
    m = 2 * math.ceil(Fraction(size, params.size_limit))
    seg_size = math.ceil(Fraction(size, m // 2))
    units = math.ceil(2 * value / m / params.min_value)
    seg_value = units * params.min_value
    out = []
    for i in range(1, m + 1):
        root = hashlib.sha256(f"{merkle_root}/{i}".encode()).hexdigest()
        out.append(Segment(i, seg_size, seg_value, root, m))
    return out


def _j(x):
    """JSON-friendly view of sector refs and fractions, recursing into containers."""
    if isinstance(x, Fraction):
        return fmt_tokens(x)
    if isinstance(x, tuple):
        return [_j(v) for v in x]
    if isinstance(x, list):
        return [_j(v) for v in x]
    if isinstance(x, dict):
        return {k: _j(v) for k, v in x.items()}
    return x


@dataclass
class EngineEvent:
    seq: int
    time: int
    kind: str
    payload: dict
    status: str = "ok"
    reason: Optional[str] = None
    result: object = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        outcome: dict = {"status": self.status}
        if self.reason is not None:
            outcome["reason"] = self.reason
        if self.result is not None:
            outcome["result"] = _j(self.result)
        outcome["notes"] = self.notes
        return {"seq": self.seq, "time": self.time, "kind": self.kind, "payload": _j(self.payload), "outcome": outcome}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


Listener = Callable[["Engine", EngineEvent], None]


class Engine:
    """Single-threaded protocol executor over one :class:`NetworkState`.

    ``test_mode`` runs the global validator after every event and raises
    :class:`~fileinsurer.errors.InvariantViolation` on the first breach. It
    defaults to the ``FILEINSURER_TEST_MODE`` environment variable.
    """

    def __init__(
        self,
        params: Optional[NetworkParams] = None,
        fees: Optional[FeeSchedule] = None,
        balances=None,
        seed: int = 0,
        *,
        test_mode: Optional[bool] = None,
        keep_log: bool = True,
        keep_tombstones: Optional[bool] = None,
    ):
        if test_mode is None:
            test_mode = os.environ.get("FILEINSURER_TEST_MODE", "") == "1"
        if keep_tombstones is None:
            keep_tombstones = test_mode
        self.test_mode = test_mode
        self.keep_log = keep_log
        self.state = init_network(params or NetworkParams(), balances, fees, keep_tombstones=keep_tombstones)
        self.rng = RngStream(seed)
        self.events: list[EngineEvent] = []
        self.event_count = 0
        self._listeners: list[Listener] = []
        self._queue: deque = deque()
        self._dispatching = False
        self._notes: list = []

    # ---- plumbing --------------------------------------------------------
    @property
    def now(self) -> int:
        return self.state.clock

    @property
    def params(self) -> NetworkParams:
        return self.state.params

    def subscribe(self, listener: Listener) -> None:
        self._listeners.append(listener)

    def _note(self, kind: str, **data) -> None:
        self._notes.append({"kind": kind, **_j(data)})

    def _emit(self, kind, payload, *, error=None, result=None) -> EngineEvent:
        self.event_count += 1
        ev = EngineEvent(
            seq=self.event_count,
            time=self.state.clock,
            kind=kind,
            payload=payload,
            status="rejected" if error else "ok",
            reason=f"{type(error).__name__}: {error}" if error else None,
            result=result,
            notes=self._notes,
        )
        self._notes = []
        if self.keep_log:
            self.events.append(ev)
        if self.test_mode:
            check_invariants(self.state)
        if self._listeners and error is None:
            self._queue.append(ev)
            if not self._dispatching:
                self._dispatching = True
                try:
                    while self._queue:
                        pending = self._queue.popleft()
                        for fn in list(self._listeners):
                            fn(self, pending)
                finally:
                    self._dispatching = False
        return ev

    def _request(self, kind: str, payload: dict, fn: Callable):
        self._notes = []
        try:
            result = fn()
        except ProtocolError as exc:
            self._notes = []
            self._emit(kind, payload, error=exc)
            raise
        self._emit(kind, payload, result=result)
        return result

    def log_lines(self) -> list[str]:
        return [ev.to_json() for ev in self.events]

    def write_log(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for line in self.log_lines():
                fh.write(line + "\n")

    def _file(self, file_id: int) -> FileDescriptor:
        f = self.state.files.get(file_id)
        if f is None or f.state in (FileState.REMOVED, FileState.LOST):
            raise UnknownFile(f"no stored file {file_id}")
        return f

    def _sector(self, ref) -> Sector:
        ref = tuple(ref)
        s = self.state.sectors.get(ref)
        if s is None:
            raise WrongSector(f"no sector {ref}")
        return s

    def _delay(self, size: int) -> int:
        return ceil_ticks(self.params.delay_per_size * size)

    def _reserve(self, ref: SectorRef, size: int) -> None:
        s = self.state.sectors[ref]
        s.free_cap -= size
        refill_crs(s, self.params)

    def _release(self, ref: SectorRef, size: int) -> None:
        s = self.state.sectors.get(ref)
        if s is None or s.state not in LIVE_SECTOR:
            return
        s.free_cap += size
        refill_crs(s, self.params)
        self._maybe_remove_sector(ref)

    def _maybe_remove_sector(self, ref: SectorRef) -> None:
        st = self.state
        s = st.sectors[ref]
        if s.state is not SectorState.DISABLED or s.free_cap != s.capacity or st.holders.get(ref):
            return
        refund = s.deposit
        st.ledger.accounts[s.owner] = st.ledger.balance(s.owner) + refund
        s.deposit = Fraction(0)
        s.state = SectorState.REMOVED
        s.cr_count = 0
        st.holders.pop(ref, None)
        if not st.keep_tombstones:
            del st.sectors[ref]
        self._note("sector_removed", sector=ref, refund=refund)

    def _remove_file(self, file_id: int, final: FileState) -> None:
        st = self.state
        f = st.files[file_id]
        entries = st.drop_entries(file_id)
        for i, e in enumerate(entries, start=1):
            economics.settle_traffic_fee(st, (file_id, i), confirmed=False)
            for ref in sorted({e.prev, e.next} - {None}):
                self._release(ref, f.size)
        f.state = final
        if not st.keep_tombstones:
            del st.files[file_id]

    def _live_entry_holders(self, f: FileDescriptor) -> list[SectorRef]:
        st = self.state
        out = []
        for e in st.alloc[f.id]:
            if e.prev is not None and st.sectors[e.prev].state in LIVE_SECTOR:
                out.append(e.prev)
        return out

    # ---- client requests -------------------------------------------------
    def file_add(self, client: str, size: int, value, merkle_root: Optional[str] = None) -> int:
        value = tokens(value)
        payload = {"client": client, "size": size, "value": value}
        return self._request("file_add", payload, lambda: self._file_add(client, int(size), value, merkle_root))

    def _file_add(self, client, size, value, merkle_root) -> int:
        st, p = self.state, self.params
        if client not in st.ledger.accounts:
            raise UnknownAccount(f"unknown client {client}")
        units = value / p.min_value
        if value <= 0 or units.denominator != 1:
            raise ValueNotMultiple(f"value {value} is not a positive multiple of {p.min_value}")
        if size <= 0:
            raise FileTooLarge(f"size {size} must be positive")
        if size > p.size_limit:
            raise FileTooLarge(f"size {size} exceeds size_limit {p.size_limit}; split it first")
        cp = p.k * int(units)
        traffic = st.fees.traffic_per_byte * size * cp
        if st.ledger.balance(client) < traffic:
            raise InsufficientBalance(f"{client} cannot escrow traffic fees {traffic}")

        collisions = st.counters.collisions
        reserved: list[SectorRef] = []
        try:
            for _ in range(cp):
                for _attempt in range(p.r_max):
                    ref = random_sector(st, self.rng)
                    if st.sectors[ref].free_cap >= size:
                        break
                    st.counters.collisions += 1
                else:
                    raise CollisionExhausted(f"no sector with {size} free bytes after {p.r_max} draws")
                self._reserve(ref, size)
                reserved.append(ref)
        except (CollisionExhausted, NoSectors):
            for ref in reserved:
                s = st.sectors[ref]
                s.free_cap += size
                refill_crs(s, p)
            st.counters.collisions = collisions
            raise

        fid = st.next_file_id
        st.next_file_id += 1
        root = merkle_root or hashlib.sha256(f"{client}/{fid}/{size}".encode()).hexdigest()
        f = FileDescriptor(fid, size, value, root, cp, -1, FileState.NORMAL, client)
        st.files[fid] = f
        st.add_entries(fid, [AllocEntry(None, ref, -1, EntryState.ALLOC) for ref in reserved])
        for i, ref in enumerate(reserved, start=1):
            economics.escrow_traffic_fee(st, client, ref[0], size, (fid, i))
            self._note("transfer", file=fid, index=i, src=None, dst=ref)
        st.schedule(st.clock + self._delay(size), "CheckAlloc", fid)
        return fid

    def file_add_large(self, client: str, size: int, value, merkle_root: Optional[str] = None) -> list[int]:
        """Store an oversized file as independently insured erasure-coded segments."""
        root = merkle_root or hashlib.sha256(f"{client}/large/{size}".encode()).hexdigest()
        big = LargeFile(int(size), tokens(value), root)
        return [self.file_add(client, seg.size, seg.value, seg.merkle_root)
                for seg in split_large_file(big, self.params)]

    def file_discard(self, client: str, file_id: int) -> None:
        self._request("file_discard", {"client": client, "file": file_id}, lambda: self._file_discard(client, file_id))

    def _file_discard(self, client, file_id):
        f = self._file(file_id)
        if f.owner != client:
            raise NotOwner(f"{client} does not own file {file_id}")
        if f.state is not FileState.NORMAL:
            raise BadState(f"file {file_id} is {f.state.value}")
        f.state = FileState.DISCARD

    def file_get(self, client: str, file_id: int) -> list[SectorRef]:
        return self._request("file_get", {"client": client, "file": file_id}, lambda: self._file_get(file_id))

    def _file_get(self, file_id):
        f = self._file(file_id)
        if f.state is not FileState.NORMAL:
            raise BadState(f"file {file_id} is {f.state.value}")
        refs = self._live_entry_holders(f)
        if not refs:
            raise NoLiveReplica(f"every replica of file {file_id} is corrupted")
        return refs

    # ---- provider requests -----------------------------------------------
    def file_confirm(self, provider: str, file_id: int, index: int, sector) -> None:
        payload = {"provider": provider, "file": file_id, "index": index, "sector": tuple(sector)}
        self._request("file_confirm", payload, lambda: self._file_confirm(provider, file_id, index, tuple(sector)))

    def _entry_for(self, file_id, index) -> AllocEntry:
        f = self._file(file_id)
        if not 1 <= index <= f.cp:
            raise WrongSector(f"file {file_id} has no replica index {index}")
        return self.state.entry(file_id, index)

    def _file_confirm(self, provider, file_id, index, ref):
        s = self._sector(ref)
        if s.owner != provider:
            raise NotOwner(f"{provider} does not own sector {ref}")
        e = self._entry_for(file_id, index)
        if e.state is not EntryState.ALLOC:
            raise BadState(f"entry ({file_id},{index}) is {e.state.value}")
        if e.next != ref or s.state not in LIVE_SECTOR:
            raise WrongSector(f"entry ({file_id},{index}) is not assigned to {ref}")
        self.state.set_entry(file_id, index, state=EntryState.CONFIRM)
        economics.settle_traffic_fee(self.state, (file_id, index), confirmed=True)

    def file_prove(self, provider: str, file_id: int, index: int, sector, proof: Proof) -> None:
        payload = {"provider": provider, "file": file_id, "index": index, "sector": tuple(sector),
                   "proof": {"t": proof.t, "valid": proof.valid}}
        self._request("file_prove", payload, lambda: self._file_prove(provider, file_id, index, tuple(sector), proof))

    def _file_prove(self, provider, file_id, index, ref, proof):
        s = self._sector(ref)
        if s.owner != provider:
            raise NotOwner(f"{provider} does not own sector {ref}")
        e = self._entry_for(file_id, index)
        if s.state not in LIVE_SECTOR or e.prev != ref:
            raise WrongSector(f"sector {ref} does not hold entry ({file_id},{index})")
        if not proof.valid or proof.t > self.now:
            raise InvalidProof(f"proof at t={proof.t} rejected")
        e.last = proof.t

    def sector_register(self, provider: str, capacity: int) -> SectorRef:
        payload = {"provider": provider, "capacity": capacity}
        return self._request("sector_register", payload, lambda: self._sector_register(provider, int(capacity)))

    def _sector_register(self, provider, capacity) -> SectorRef:
        st, p = self.state, self.params
        deposit = economics.compute_deposit(capacity, p)
        bal = st.ledger.balance(provider)
        if bal < deposit:
            raise InsufficientFunds(f"{provider} holds {bal}, deposit is {deposit}")
        st.ledger.accounts[provider] = bal - deposit
        sid = st.next_sector_id.get(provider, 0) + 1
        st.next_sector_id[provider] = sid
        s = Sector(provider, sid, capacity, capacity, 0, deposit, SectorState.NORMAL, st.clock)
        refill_crs(s, p)
        st.sectors[s.ref] = s
        st.invalidate_weights()
        if not st.rent_task_scheduled:
            period = st.fees.period_for(p)
            st.schedule((st.clock // period + 1) * period, "DistributeRent")
            st.rent_task_scheduled = True
        self._note("sector_registered", sector=s.ref, deposit=deposit)
        self._maintain_randomness_on_register(s.ref)
        return s.ref

    def _maintain_randomness_on_register(self, ref: SectorRef) -> int:
        """Swap a Poisson-sized random batch of replicas into a new sector so
        placements stay capacity-proportional."""
        st = self.state
        cands = [
            (fid, i)
            for fid, entries in st.alloc.items()
            if st.files[fid].state is FileState.NORMAL
            for i, e in enumerate(entries, start=1)
            if e.state is EntryState.NORMAL
        ]
        if not cands:
            return 0
        s = st.sectors[ref]
        total = st.total_capacity((SectorState.NORMAL,))
        n = min(len(cands), self.rng.poisson(len(cands) * s.capacity / total))
        moved = 0
        for j in sorted(self.rng.sample(len(cands), n)):
            fid, i = cands[j]
            f = st.files[fid]
            if s.free_cap < f.size:
                self._note("swap_in_skipped", file=fid, index=i)
                continue
            src = st.entry(fid, i).prev
            self._reserve(ref, f.size)
            st.set_entry(fid, i, next=ref, state=EntryState.ALLOC)
            st.schedule(st.clock + self._delay(f.size), "CheckRefresh", fid, i)
            self._note("transfer", file=fid, index=i, src=src, dst=ref)
            moved += 1
        return moved

    def sector_disable(self, provider: str, sector) -> None:
        ref = tuple(sector)
        self._request("sector_disable", {"provider": provider, "sector": ref}, lambda: self._sector_disable(provider, ref))

    def _sector_disable(self, provider, ref):
        s = self._sector(ref)
        if s.owner != provider:
            raise NotOwner(f"{provider} does not own sector {ref}")
        if s.state is not SectorState.NORMAL:
            raise BadState(f"sector {ref} is {s.state.value}")
        s.state = SectorState.DISABLED
        self.state.invalidate_weights()
        self._maybe_remove_sector(ref)

    # ---- adversarial hooks -----------------------------------------------
    def corrupt(self, sectors: Iterable) -> None:
        """Destroy whole sectors at once; their deposits are confiscated."""
        refs = sorted({tuple(r) for r in sectors})
        self._request("corrupt_sectors", {"sectors": refs}, lambda: self._corrupt(refs))

    def _corrupt(self, refs):
        for ref in refs:
            s = self._sector(ref)
            if s.state not in LIVE_SECTOR:
                raise BadState(f"sector {ref} is {s.state.value}")
        for ref in refs:
            amt, _ = economics.confiscate(self.state, ref)
            self._note("confiscated", sector=ref, amount=amt)

    def settle_losses(self) -> list[int]:
        """Declare lost and compensate every file with no live replica now,
        instead of waiting for its next CheckProof."""
        self._notes = []
        lost = [f.id for f in self.state.live_files() if not self._live_entry_holders(f)]
        for fid in lost:
            self._declare_lost(self.state.files[fid])
        self._emit("settle_losses", {"files": lost})
        return lost

    def _declare_lost(self, f: FileDescriptor) -> None:
        paid, short = economics.compensate(self.state, f.id)
        self.state.counters.files_lost += 1
        self._note("file_lost", file=f.id, value=f.value, paid=paid)
        if short > 0:
            self._note("under_compensation", file=f.id, shortfall=short)
        self._remove_file(f.id, FileState.LOST)

    # ---- time ------------------------------------------------------------
    def advance_time(self, to: int, *, record: bool = False) -> int:
        """Run every pending task due at or before ``to``; returns how many ran.

        With ``record`` the clock move itself is also logged, which scenario
        scripts use so that an idle run still leaves a trace.
        """
        st = self.state
        if to < st.clock:
            self._notes = []
            exc = TimeReversal(f"cannot move clock from {st.clock} back to {to}")
            self._emit("advance_time", {"to": to}, error=exc)
            raise exc
        start = st.clock
        ran = 0
        while st.pending and st.pending[0].time <= to:
            task = heapq.heappop(st.pending)
            st.clock = task.time
            self._run_task(task)
            ran += 1
        st.clock = to
        if record:
            self._notes = []
            self._emit("advance_time", {"from": start, "to": to, "tasks": ran})
        return ran

    def _run_task(self, task: PendingTask) -> None:
        self._notes = []
        handler = {
            "CheckAlloc": self._auto_check_alloc,
            "CheckProof": self._auto_check_proof,
            "CheckRefresh": self._auto_check_refresh,
            "DistributeRent": self._auto_distribute_rent,
        }[task.kind]
        handler(task)
        payload = {k: v for k, v in task.to_dict().items() if k != "time"}
        self._emit(task.kind, payload)

    def _live_file(self, file_id) -> Optional[FileDescriptor]:
        f = self.state.files.get(file_id)
        if f is None or f.state in (FileState.REMOVED, FileState.LOST):
            self._note("stale", file=file_id)
            return None
        return f

    def _auto_check_alloc(self, task: PendingTask) -> None:
        st = self.state
        f = self._live_file(task.file_id)
        if f is None:
            return
        entries = st.alloc[f.id]
        if f.state is FileState.DISCARD:
            self._note("upload_cancelled", file=f.id)
            self._remove_file(f.id, FileState.REMOVED)
            return
        confirmed = sum(e.state is EntryState.CONFIRM for e in entries)
        pending = sum(e.state not in (EntryState.CONFIRM, EntryState.CORRUPTED) for e in entries)
        if pending or not confirmed:
            st.counters.upload_failures += 1
            self._note("upload_failed", file=f.id, client=f.owner, unconfirmed=pending)
            self._remove_file(f.id, FileState.REMOVED)
            return
        try:
            charged = economics.charge_rent_and_gas(st, f.id)
        except InsufficientBalance:
            st.counters.upload_failures += 1
            self._note("upload_failed", file=f.id, client=f.owner, reason="insufficient balance")
            self._remove_file(f.id, FileState.REMOVED)
            return
        for i, e in enumerate(entries, start=1):
            if e.state is EntryState.CONFIRM:
                st.set_entry(f.id, i, prev=e.next, next=None, last=st.clock, state=EntryState.NORMAL)
            else:
                st.set_entry(f.id, i, prev=None, next=None, last=-1, state=EntryState.CORRUPTED)
        f.cntdown = sample_exp(self.rng, self.params.avg_refresh)
        st.schedule(st.clock + self.params.proof_cycle, "CheckProof", f.id)
        st.counters.files_stored += 1
        self._note("upload_ok", file=f.id, client=f.owner, charged=charged)

    def _auto_check_proof(self, task: PendingTask) -> None:
        st, p = self.state, self.params
        f = self._live_file(task.file_id)
        if f is None:
            return
        if f.state is FileState.NORMAL and st.ledger.balance(f.owner) < economics.cycle_cost(st, f):
            f.state = FileState.DISCARD
            self._note("discarded", file=f.id, reason="insufficient balance")
        if f.state is FileState.NORMAL:
            charged = economics.charge_rent_and_gas(st, f.id)
            self._note("charged", file=f.id, amount=charged)
            for i, e in enumerate(st.alloc[f.id], start=1):
                if e.prev is None:
                    continue
                s = st.sectors[e.prev]
                if s.state not in LIVE_SECTOR:
                    continue
                if e.last < st.clock - p.proof_deadline:
                    ref = e.prev
                    amt, _ = economics.confiscate(st, ref)
                    self._note("confiscated", sector=ref, amount=amt, file=f.id, index=i)
                elif e.last < st.clock - p.proof_due:
                    amt = economics.penalize(st, e.prev, "proof due")
                    self._note("penalized", sector=e.prev, amount=amt, reason="proof due", file=f.id, index=i)
        if f.state is FileState.DISCARD:
            self._note("file_removed", file=f.id)
            self._remove_file(f.id, FileState.REMOVED)
        elif not self._live_entry_holders(f):
            self._declare_lost(f)
        else:
            st.schedule(st.clock + p.proof_cycle, "CheckProof", f.id)
            f.cntdown -= 1
            if f.cntdown == 0:
                self._refresh(f, random_index(self.rng, f))

    def _refresh(self, f: FileDescriptor, index: int, min_delay: int = 0) -> None:
        st = self.state
        e = st.entry(f.id, index)
        if e.state in (EntryState.ALLOC, EntryState.CONFIRM):
            f.cntdown = sample_exp(self.rng, self.params.avg_refresh)
            self._note("refresh_busy", file=f.id, index=index)
            return
        try:
            ref = random_sector(st, self.rng)
        except NoSectors:
            ref = None
        if ref is not None and st.sectors[ref].free_cap >= f.size:
            if ref != e.prev:
                self._reserve(ref, f.size)
            src = e.prev
            st.set_entry(f.id, index, next=ref, state=EntryState.ALLOC)
            st.schedule(st.clock + max(min_delay, self._delay(f.size)), "CheckRefresh", f.id, index)
            st.counters.refreshes += 1
            self._note("transfer", file=f.id, index=index, src=src, dst=ref)
        else:
            f.cntdown = sample_exp(self.rng, self.params.avg_refresh)
            st.counters.collisions += 1
            self._note("collision", file=f.id, index=index, sector=ref)

    def _auto_check_refresh(self, task: PendingTask) -> None:
        st = self.state
        f = self._live_file(task.file_id)
        if f is None:
            return
        i = task.index
        e = st.entry(f.id, i)
        if e.state not in (EntryState.ALLOC, EntryState.CONFIRM):
            self._note("stale", file=f.id, index=i)
            return
        dst = e.next
        ds = st.sectors.get(dst)
        if e.state is EntryState.CONFIRM and ds is not None and ds.state in LIVE_SECTOR:
            src = e.prev
            st.set_entry(f.id, i, prev=dst, next=None, last=st.clock, state=EntryState.NORMAL)
            if src is not None and src != dst:
                self._release(src, f.size)
            f.cntdown = sample_exp(self.rng, self.params.avg_refresh)
            self._note("refreshed", file=f.id, index=i, src=src, dst=dst)
            return

        punished = []
        if ds is not None and ds.state in LIVE_SECTOR:
            economics.penalize(st, dst, "refresh unconfirmed")
            punished.append(dst)
        for ej in st.alloc[f.id]:
            if ej.prev is not None and st.sectors[ej.prev].state in LIVE_SECTOR:
                economics.penalize(st, ej.prev, "refresh unconfirmed")
                punished.append(ej.prev)
        src = e.prev
        if src is not None:
            st.set_entry(f.id, i, next=None, state=EntryState.NORMAL)
        else:
            st.set_entry(f.id, i, next=None, last=-1, state=EntryState.CORRUPTED)
        if dst != src:
            self._release(dst, f.size)
        st.counters.failed_refreshes += 1
        self._note("refresh_failed", file=f.id, index=i, dst=dst, punished=punished)
        # the retry waits at least a tick so a silent target cannot stall the clock
        self._refresh(f, i, min_delay=1)

    def _auto_distribute_rent(self, task: PendingTask) -> None:
        st = self.state
        period = st.fees.period_for(self.params)
        payouts = economics.distribute_rent(st, st.clock - period)
        if payouts:
            self._note("rent_paid", payouts={k: v for k, v in payouts.items()})
        st.schedule(st.clock + period, "DistributeRent")

    # ---- reporting -------------------------------------------------------
    def summary(self) -> dict:
        st = self.state
        c = st.counters
        lg = st.ledger
        return {
            "clock": st.clock,
            "events": self.event_count,
            "files_stored": c.files_stored,
            "files_lost": c.files_lost,
            "upload_failures": c.upload_failures,
            "refreshes": c.refreshes,
            "failed_refreshes": c.failed_refreshes,
            "collisions": c.collisions,
            "penalties": c.penalties,
            "confiscations": c.confiscations,
            "compensation_paid": fmt_tokens(c.compensation_paid),
            "under_compensation_events": len(c.under_compensation),
            "network_pool": fmt_tokens(lg.network_pool),
            "burned": fmt_tokens(lg.burn_sink),
            "confiscated_pool": fmt_tokens(lg.confiscated_pool),
            "minted": fmt_tokens(lg.minted),
        }
