"""Protocol state: parameters, sectors, file descriptors, allocation table,
pending list and token ledger, plus the global invariant validator and
canonical JSON snapshots.

Token amounts are exact rationals (:class:`fractions.Fraction`) so that
conservation holds bit-for-bit across every transfer.
"""

from __future__ import annotations

import copy
import heapq
import json
import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping, Optional

from .errors import InvalidParams, InvariantViolation

SectorRef = tuple[str, int]


def tokens(x) -> Fraction:
    """Coerce ints, decimal strings, floats or fractions to an exact amount."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(str(x).strip())


def fmt_tokens(x: Fraction) -> str:
    """Exact text form: plain decimal when it terminates, else ``n/d``."""
    x = Fraction(x)
    d = x.denominator
    if d == 1:
        return str(x.numerator)
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"{x.numerator}/{x.denominator}"
    places = max(twos, fives)
    scaled = x * 10**places
    sign = "-" if scaled < 0 else ""
    digits = str(abs(scaled.numerator)).rjust(places + 1, "0")
    return f"{sign}{digits[:-places]}.{digits[-places:]}"


class SectorState(str, Enum):
    NORMAL = "normal"
    DISABLED = "disabled"
    CORRUPTED = "corrupted"
    REMOVED = "removed"


class FileState(str, Enum):
    NORMAL = "normal"
    DISCARD = "discard"
    REMOVED = "removed"
    LOST = "lost"


class EntryState(str, Enum):
    ALLOC = "alloc"
    CONFIRM = "confirm"
    NORMAL = "normal"
    CORRUPTED = "corrupted"


LIVE_SECTOR = (SectorState.NORMAL, SectorState.DISABLED)
TASK_KINDS = ("CheckAlloc", "CheckProof", "CheckRefresh", "DistributeRent")


@dataclass(frozen=True)
class NetworkParams:
    min_capacity: int = 64 * 2**30
    min_value: Fraction = Fraction(1)
    k: int = 20
    cap_para: Fraction = Fraction(1000)
    gamma_deposit: Fraction = Fraction(46, 10000)
    delay_per_size: Fraction = Fraction(0)
    avg_refresh: float = 100.0
    proof_cycle: int = 10
    proof_due: int = 20
    proof_deadline: int = 40
    cr_size: Optional[int] = None
    size_limit: Optional[int] = None
    c: float = 1e-18
    penalty_fraction: Fraction = Fraction(1, 100)
    r_max: int = 1000

    def __post_init__(self):
        for name in ("min_value", "cap_para", "gamma_deposit", "delay_per_size", "penalty_fraction"):
            object.__setattr__(self, name, tokens(getattr(self, name)))
        if self.cr_size is None:
            object.__setattr__(self, "cr_size", max(1, int(self.min_capacity) // 64))
        if self.size_limit is None:
            object.__setattr__(self, "size_limit", int(self.min_capacity))

    def validate(self) -> None:
        problems = []
        if self.min_capacity <= 0:
            problems.append("min_capacity must be > 0")
        if self.min_value <= 0:
            problems.append("min_value must be > 0")
        if self.k < 1:
            problems.append("k must be >= 1")
        if self.cap_para <= 0:
            problems.append("cap_para must be > 0")
        if self.gamma_deposit < 0:
            problems.append("gamma_deposit must be >= 0")
        if self.cr_size <= 0:
            problems.append("cr_size must be > 0")
        if not 0 < self.size_limit <= self.min_capacity:
            problems.append("size_limit must lie in (0, min_capacity]")
        if not self.proof_due < self.proof_deadline:
            problems.append("proof_due must be < proof_deadline")
        if not 0 < self.proof_cycle <= self.proof_due:
            problems.append("proof_cycle must lie in (0, proof_due]")
        if not 0 < self.c < 1:
            problems.append("c must lie in (0, 1)")
        if not self.avg_refresh > 0:
            problems.append("avg_refresh must be > 0")
        if self.delay_per_size < 0:
            problems.append("delay_per_size must be >= 0")
        if not 0 <= self.penalty_fraction <= 1:
            problems.append("penalty_fraction must lie in [0, 1]")
        if self.r_max < 1:
            problems.append("r_max must be >= 1")
        if problems:
            raise InvalidParams("; ".join(problems))

    def replace(self, **changes) -> "NetworkParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = fmt_tokens(v) if isinstance(v, Fraction) else v
        return out


@dataclass(frozen=True)
class FeeSchedule:
    rent_per_byte_replica_cycle: Fraction = Fraction(0)
    gas_per_task: Mapping[str, Fraction] = field(default_factory=dict)
    traffic_per_byte: Fraction = Fraction(0)
    period_length: Optional[int] = None
    # piecewise-constant (start_time, rate) overrides of the rent rate
    rent_changes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "rent_per_byte_replica_cycle", tokens(self.rent_per_byte_replica_cycle))
        object.__setattr__(self, "traffic_per_byte", tokens(self.traffic_per_byte))
        object.__setattr__(self, "gas_per_task", {k: tokens(v) for k, v in dict(self.gas_per_task).items()})
        object.__setattr__(
            self, "rent_changes", tuple(sorted((int(t), tokens(r)) for t, r in self.rent_changes))
        )

    def validate(self, params: NetworkParams) -> None:
        problems = []
        if self.rent_per_byte_replica_cycle < 0 or self.traffic_per_byte < 0:
            problems.append("fee rates must be >= 0")
        if any(v < 0 for v in self.gas_per_task.values()):
            problems.append("gas costs must be >= 0")
        if any(k not in TASK_KINDS for k in self.gas_per_task):
            problems.append(f"unknown gas task kind in {sorted(self.gas_per_task)}")
        if any(r < 0 for _, r in self.rent_changes):
            problems.append("rent changes must be >= 0")
        period = self.period_for(params)
        if period <= 0 or period % params.proof_cycle:
            problems.append("period_length must be a positive multiple of proof_cycle")
        if problems:
            raise InvalidParams("; ".join(problems))

    def period_for(self, params: NetworkParams) -> int:
        return self.period_length if self.period_length is not None else 10 * params.proof_cycle

    def rent_rate(self, now: int) -> Fraction:
        rate = self.rent_per_byte_replica_cycle
        for start, r in self.rent_changes:
            if start <= now:
                rate = r
        return rate

    def gas(self, kind: str) -> Fraction:
        return self.gas_per_task.get(kind, Fraction(0))

    def to_dict(self) -> dict:
        return {
            "rent_per_byte_replica_cycle": fmt_tokens(self.rent_per_byte_replica_cycle),
            "gas_per_task": {k: fmt_tokens(v) for k, v in sorted(self.gas_per_task.items())},
            "traffic_per_byte": fmt_tokens(self.traffic_per_byte),
            "period_length": self.period_length,
            "rent_changes": [[t, fmt_tokens(r)] for t, r in self.rent_changes],
        }


@dataclass(slots=True)
class Sector:
    owner: str
    id: int
    capacity: int
    free_cap: int
    cr_count: int
    deposit: Fraction
    state: SectorState = SectorState.NORMAL
    registered_at: int = 0
    penalized: bool = False

    @property
    def ref(self) -> SectorRef:
        return (self.owner, self.id)

    def to_dict(self) -> dict:
        return {
            "owner": self.owner,
            "id": self.id,
            "capacity": self.capacity,
            "free_cap": self.free_cap,
            "cr_count": self.cr_count,
            "deposit": fmt_tokens(self.deposit),
            "state": self.state.value,
            "registered_at": self.registered_at,
            "penalized": self.penalized,
        }


@dataclass(slots=True)
class FileDescriptor:
    id: int
    size: int
    value: Fraction
    merkle_root: str
    cp: int
    cntdown: int = -1
    state: FileState = FileState.NORMAL
    owner: str = ""

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "size": self.size,
            "value": fmt_tokens(self.value),
            "merkle_root": self.merkle_root,
            "cp": self.cp,
            "cntdown": self.cntdown,
            "state": self.state.value,
            "owner": self.owner,
        }


@dataclass(slots=True)
class AllocEntry:
    prev: Optional[SectorRef] = None
    next: Optional[SectorRef] = None
    last: int = -1
    state: EntryState = EntryState.ALLOC

    def to_dict(self) -> dict:
        return {
            "prev": list(self.prev) if self.prev else None,
            "next": list(self.next) if self.next else None,
            "last": self.last,
            "state": self.state.value,
        }


@dataclass(order=True, slots=True)
class PendingTask:
    time: int
    seq: int
    kind: str = field(compare=False)
    file_id: Optional[int] = field(default=None, compare=False)
    index: Optional[int] = field(default=None, compare=False)

    def to_dict(self) -> dict:
        out = {"time": self.time, "seq": self.seq, "kind": self.kind}
        if self.file_id is not None:
            out["file"] = self.file_id
        if self.index is not None:
            out["index"] = self.index
        return out


@dataclass
class Escrow:
    payer: str
    provider: str
    amount: Fraction


@dataclass
class Ledger:
    accounts: dict[str, Fraction] = field(default_factory=dict)
    network_pool: Fraction = Fraction(0)
    burn_sink: Fraction = Fraction(0)
    confiscated_pool: Fraction = Fraction(0)
    escrow: dict[tuple[int, int], Escrow] = field(default_factory=dict)
    minted: Fraction = Fraction(0)

    def balance(self, account: str) -> Fraction:
        return self.accounts.get(account, Fraction(0))

    def mint(self, account: str, amount) -> None:
        amount = tokens(amount)
        if amount < 0:
            raise InvalidParams(f"cannot mint a negative amount to {account}")
        self.accounts[account] = self.balance(account) + amount
        self.minted += amount

    def to_dict(self) -> dict:
        return {
            "accounts": {k: fmt_tokens(v) for k, v in sorted(self.accounts.items())},
            "network_pool": fmt_tokens(self.network_pool),
            "burn_sink": fmt_tokens(self.burn_sink),
            "confiscated_pool": fmt_tokens(self.confiscated_pool),
            "escrow": [
                [fid, idx, e.payer, e.provider, fmt_tokens(e.amount)]
                for (fid, idx), e in sorted(self.escrow.items())
            ],
            "minted": fmt_tokens(self.minted),
        }


@dataclass
class Counters:
    collisions: int = 0
    penalties: int = 0
    confiscations: int = 0
    files_stored: int = 0
    files_lost: int = 0
    upload_failures: int = 0
    refreshes: int = 0
    failed_refreshes: int = 0
    compensation_paid: Fraction = Fraction(0)
    under_compensation: list = field(default_factory=list)


@dataclass
class NetworkState:
    params: NetworkParams
    fees: FeeSchedule
    clock: int = 0
    sectors: dict[SectorRef, Sector] = field(default_factory=dict)
    next_sector_id: dict[str, int] = field(default_factory=dict)
    files: dict[int, FileDescriptor] = field(default_factory=dict)
    alloc: dict[int, list[AllocEntry]] = field(default_factory=dict)
    pending: list[PendingTask] = field(default_factory=list)
    ledger: Ledger = field(default_factory=Ledger)
    counters: Counters = field(default_factory=Counters)
    next_file_id: int = 1
    task_seq: int = 0
    keep_tombstones: bool = True
    rent_task_scheduled: bool = False
    # sector -> {(file, index)} for every entry naming it as prev or next
    holders: dict[SectorRef, set] = field(default_factory=dict)
    _weights: Optional[tuple] = field(default=None, repr=False)

    # ---- allocation table access -------------------------------------
    def entry(self, file_id: int, index: int) -> AllocEntry:
        return self.alloc[file_id][index - 1]

    def alloc_table(self) -> dict[tuple[int, int], AllocEntry]:
        return {(fid, i + 1): e for fid, es in self.alloc.items() for i, e in enumerate(es)}

    def set_entry(self, file_id: int, index: int, *, prev=..., next=..., last=..., state=...) -> AllocEntry:
        """Update one entry and keep the sector->entry index in sync."""
        e = self.alloc[file_id][index - 1]
        key = (file_id, index)
        old = {e.prev, e.next} - {None}
        if prev is not ...:
            e.prev = prev
        if next is not ...:
            e.next = next
        if last is not ...:
            e.last = last
        if state is not ...:
            e.state = state
        new = {e.prev, e.next} - {None}
        for ref in old - new:
            bucket = self.holders.get(ref)
            if bucket is not None:
                bucket.discard(key)
        for ref in new - old:
            self.holders.setdefault(ref, set()).add(key)
        return e

    def add_entries(self, file_id: int, entries: list[AllocEntry]) -> None:
        self.alloc[file_id] = entries
        for i, e in enumerate(entries, start=1):
            for ref in {e.prev, e.next} - {None}:
                self.holders.setdefault(ref, set()).add((file_id, i))

    def drop_entries(self, file_id: int) -> list[AllocEntry]:
        entries = self.alloc.pop(file_id, [])
        for i, e in enumerate(entries, start=1):
            for ref in {e.prev, e.next} - {None}:
                bucket = self.holders.get(ref)
                if bucket is not None:
                    bucket.discard((file_id, i))
        return entries

    # ---- pending list -------------------------------------------------
    def schedule(self, time: int, kind: str, file_id=None, index=None) -> PendingTask:
        self.task_seq += 1
        task = PendingTask(int(time), self.task_seq, kind, file_id, index)
        heapq.heappush(self.pending, task)
        return task

    # ---- sector weights for capacity-proportional sampling -----------
    def invalidate_weights(self) -> None:
        self._weights = None

    def normal_weights(self) -> tuple[list[SectorRef], list[int]]:
        if self._weights is None:
            refs = sorted(r for r, s in self.sectors.items() if s.state is SectorState.NORMAL)
            cum, total = [], 0
            for r in refs:
                total += self.sectors[r].capacity
                cum.append(total)
            self._weights = (refs, cum)
        return self._weights

    def total_capacity(self, states=LIVE_SECTOR) -> int:
        return sum(s.capacity for s in self.sectors.values() if s.state in states)

    def live_files(self) -> list[FileDescriptor]:
        return [f for f in self.files.values() if f.state in (FileState.NORMAL, FileState.DISCARD)]

    def __deepcopy__(self, memo):
        cls = self.__class__
        out = cls.__new__(cls)
        memo[id(self)] = out
        for f in fields(self):
            setattr(out, f.name, copy.deepcopy(getattr(self, f.name), memo))
        return out


def unsealed_space(sector: Sector, params: NetworkParams) -> int:
    return sector.free_cap - sector.cr_count * params.cr_size


def required_deposit(capacity: int, params: NetworkParams) -> Fraction:
    return capacity * params.gamma_deposit * params.cap_para * params.min_value / params.min_capacity


def init_network(
    params: NetworkParams,
    initial_balances: Optional[Mapping[str, object]] = None,
    fees: Optional[FeeSchedule] = None,
    *,
    keep_tombstones: bool = True,
) -> NetworkState:
    """Create an empty network with the given accounts minted."""
    params.validate()
    fees = fees if fees is not None else FeeSchedule()
    fees.validate(params)
    state = NetworkState(params=params, fees=fees, keep_tombstones=keep_tombstones)
    for account, amount in sorted((initial_balances or {}).items()):
        state.ledger.mint(account, amount)
    return state


def refill_crs(sector: Sector, params: NetworkParams) -> Sector:
    """Fill the sector's free space with as many capacity replicas as fit."""
    if sector.state in LIVE_SECTOR:
        sector.cr_count = max(0, sector.free_cap) // params.cr_size
    return sector


def token_total(state: NetworkState) -> Fraction:
    lg = state.ledger
    return (
        sum(lg.accounts.values(), Fraction(0))
        + lg.network_pool
        + lg.burn_sink
        + lg.confiscated_pool
        + sum((e.amount for e in lg.escrow.values()), Fraction(0))
        + sum((s.deposit for s in state.sectors.values()), Fraction(0))
    )


def validate(state: NetworkState) -> list[str]:
    """Return a description of every violated invariant (empty if sound).

    Sector usage is recomputed directly from the allocation table, so this
    check is independent of the incremental ``holders`` index.
    """
    p = state.params
    out: list[str] = []

    used: dict[SectorRef, int] = {}
    refs_seen: dict[SectorRef, set] = {}
    for fid, entries in state.alloc.items():
        f = state.files.get(fid)
        if f is None or f.state in (FileState.REMOVED, FileState.LOST):
            out.append(f"entries exist for absent/removed file {fid}")
            continue
        if len(entries) != f.cp:
            out.append(f"file {fid}: {len(entries)} entries for cp={f.cp}")
        for i, e in enumerate(entries, start=1):
            st = e.state
            if st in (EntryState.ALLOC, EntryState.CONFIRM) and e.next is None:
                out.append(f"entry ({fid},{i}) {st.value} without next")
            if st is EntryState.NORMAL and (e.prev is None or e.next is not None):
                out.append(f"entry ({fid},{i}) normal needs prev and no next")
            if st is EntryState.CORRUPTED and (e.prev is not None or e.next is not None):
                out.append(f"entry ({fid},{i}) corrupted must have no sectors")
            if st is EntryState.NORMAL:
                s = state.sectors.get(e.prev)
                if s is None or s.state not in LIVE_SECTOR:
                    out.append(f"entry ({fid},{i}) normal on dead sector {e.prev}")
            for ref in {e.prev, e.next} - {None}:
                used[ref] = used.get(ref, 0) + f.size
                refs_seen.setdefault(ref, set()).add((fid, i))

    for ref, s in state.sectors.items():
        if s.state is SectorState.REMOVED:
            if used.get(ref):
                out.append(f"removed sector {ref} still referenced")
            continue
        if s.state is SectorState.CORRUPTED:
            if s.deposit != 0:
                out.append(f"corrupted sector {ref} retains deposit")
            continue
        if s.capacity <= 0 or s.capacity % p.min_capacity:
            out.append(f"sector {ref}: capacity {s.capacity} not a positive multiple")
        if not 0 <= s.free_cap <= s.capacity:
            out.append(f"sector {ref}: free_cap {s.free_cap} out of range")
        if s.free_cap != s.capacity - used.get(ref, 0):
            out.append(f"sector {ref}: free_cap {s.free_cap} != capacity - used {s.capacity - used.get(ref, 0)}")
        uns = unsealed_space(s, p)
        if not 0 <= uns < p.cr_size:
            out.append(f"sector {ref}: unsealed space {uns} outside [0, cr_size)")
        want = required_deposit(s.capacity, p)
        if s.penalized:
            if not 0 <= s.deposit <= want:
                out.append(f"sector {ref}: penalized deposit {s.deposit} above formula {want}")
        elif s.deposit != want:
            out.append(f"sector {ref}: deposit {s.deposit} != formula {want}")

    indexed = {r: k for r, k in state.holders.items() if k}
    if indexed != refs_seen:
        bad = sorted(set(indexed) ^ set(refs_seen) | {r for r in indexed if indexed[r] != refs_seen.get(r)})
        out.append(f"holder index out of sync for sectors {bad[:3]}")

    for fid, f in state.files.items():
        if f.state in (FileState.REMOVED, FileState.LOST):
            continue
        if f.value <= 0 or (f.value / p.min_value).denominator != 1:
            out.append(f"file {fid}: value {f.value} not a positive multiple of min_value")
        elif f.cp != p.k * int(f.value / p.min_value):
            out.append(f"file {fid}: cp {f.cp} != k*value/min_value")
        if f.size > p.size_limit:
            out.append(f"file {fid}: size above size_limit")
        if fid not in state.alloc:
            out.append(f"file {fid}: missing allocation entries")

    for task in state.pending:
        if task.time < state.clock:
            out.append(f"pending task {task.seq} scheduled in the past")

    total = token_total(state)
    if total != state.ledger.minted:
        out.append(f"token conservation broken: total {total} != minted {state.ledger.minted}")
    return out


def check_invariants(state: NetworkState) -> None:
    problems = validate(state)
    if problems:
        raise InvariantViolation(problems)


def snapshot(state: NetworkState) -> dict:
    """Plain-data view of the state with a stable ordering."""
    return {
        "clock": state.clock,
        "params": state.params.to_dict(),
        "fees": state.fees.to_dict(),
        "sectors": [state.sectors[r].to_dict() for r in sorted(state.sectors)],
        "files": [state.files[fid].to_dict() for fid in sorted(state.files)],
        "alloc_table": [
            {"file": fid, "index": i + 1, **e.to_dict()}
            for fid in sorted(state.alloc)
            for i, e in enumerate(state.alloc[fid])
        ],
        "pending": [t.to_dict() for t in sorted(state.pending)],
        "ledger": state.ledger.to_dict(),
    }


def snapshot_json(state: NetworkState) -> str:
    return json.dumps(snapshot(state), sort_keys=True, separators=(",", ":"))


def ceil_ticks(x: Fraction) -> int:
    return int(math.ceil(Fraction(x)))


def iter_live_sectors(state: NetworkState) -> Iterable[Sector]:
    return (s for s in state.sectors.values() if s.state in LIVE_SECTOR)
