"""One-shot corruption attacks: choose sectors, destroy them, measure the damage."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy import sparse

from .agents import HonestProviders
from .engine import Engine
from .errors import InvalidParams, TooLarge
from .rng import RngStream, child_seed
from .state import LIVE_SECTOR, FeeSchedule, NetworkParams, NetworkState, SectorRef, fmt_tokens, tokens

STRATEGIES = ("random", "greedy", "exhaustive")
EXHAUSTIVE_LIMIT = 20


@dataclass
class Placement:
    """Read-only view of where live replicas sit, indexed for vector math."""

    refs: list[SectorRef]
    caps: np.ndarray
    file_ids: list[int]
    values: np.ndarray  # in min_value units, float
    counts: sparse.csr_matrix  # files x sectors, replicas of f held by s

    @classmethod
    def from_state(cls, state: NetworkState) -> "Placement":
        refs = sorted(r for r, s in state.sectors.items() if s.state in LIVE_SECTOR)
        col = {r: j for j, r in enumerate(refs)}
        files = [f for f in sorted(state.live_files(), key=lambda f: f.id)]
        rows, cols = [], []
        for r, f in enumerate(files):
            for e in state.alloc[f.id]:
                if e.prev in col:
                    rows.append(r)
                    cols.append(col[e.prev])
        data = np.ones(len(rows))
        counts = sparse.csr_matrix((data, (rows, cols)), shape=(len(files), len(refs)))
        counts.sum_duplicates()
        caps = np.array([state.sectors[r].capacity for r in refs], dtype=np.int64)
        mv = state.params.min_value
        values = np.array([float(f.value / mv) for f in files])
        return cls(refs, caps, [f.id for f in files], values, counts)

    def budget(self, lam: float) -> int:
        return math.floor(lam * int(self.caps.sum()) + 1e-9)

    def lost_value(self, chosen: Sequence[int]) -> float:
        """Units of value whose every live replica sits in ``chosen`` sector columns."""
        mask = np.zeros(len(self.refs), dtype=bool)
        mask[list(chosen)] = True
        total = np.asarray(self.counts.sum(axis=1)).ravel()
        hit = self.counts @ mask.astype(float)
        lost = (total > 0) & (hit >= total)
        return float(self.values[lost].sum())


def _select_random(pl: Placement, budget: int, rng: RngStream) -> list[int]:
    # capacity-weighted random order (exponential race keys), then greedy fill
    keys = [rng.expovariate(1.0) / float(c) for c in pl.caps]
    order = sorted(range(len(keys)), key=lambda j: (keys[j], j))
    out, used = [], 0
    for j in order:
        if used + pl.caps[j] <= budget:
            out.append(j)
            used += int(pl.caps[j])
    return out


def _select_greedy(pl: Placement, budget: int) -> list[int]:
    n = len(pl.refs)
    weight = pl.counts.copy()
    weight.data = np.exp2(weight.data)
    weight_t = weight.T.tocsr()
    remaining = np.asarray(pl.counts.sum(axis=1)).ravel()
    counts_t = pl.counts.T.tocsr()
    picked = np.zeros(n, dtype=bool)
    out, used = [], 0
    while True:
        fits = (~picked) & (pl.caps <= budget - used)
        if not fits.any():
            break
        # value of each file times how close one more sector brings it to loss
        alive = remaining > 0
        pot = np.where(alive, pl.values * np.exp2(-np.minimum(remaining, 1000.0)), 0.0)
        score = weight_t @ pot
        score[~fits] = -1.0
        j = int(np.argmax(score))  # first maximum is the lowest ref
        picked[j] = True
        out.append(j)
        used += int(pl.caps[j])
        row = counts_t.getrow(j)
        remaining[row.indices] -= row.data
    return out


def _select_exhaustive(pl: Placement, budget: int) -> list[int]:
    n = len(pl.refs)
    if n > EXHAUSTIVE_LIMIT:
        raise TooLarge(f"exhaustive search over {n} sectors exceeds {EXHAUSTIVE_LIMIT}")
    masks = np.arange(1 << n, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(n, dtype=np.int64)) & 1
    cap = bits @ pl.caps
    lost = np.zeros(len(masks))
    # a file is lost iff its holder set is contained in the mask; group files by holder set
    by_holders: dict[int, float] = {}
    coo = pl.counts.tocoo()
    hold = np.zeros(len(pl.file_ids), dtype=np.int64)
    np.bitwise_or.at(hold, coo.row, np.left_shift(1, coo.col.astype(np.int64)))
    for h, v in zip(hold.tolist(), pl.values.tolist()):
        if h:
            by_holders[h] = by_holders.get(h, 0.0) + v
    for h, v in sorted(by_holders.items()):
        lost += np.where((masks & h) == h, v, 0.0)
    feasible = cap <= budget
    best = lost[feasible].max()
    tied = feasible & (lost == best)
    best_cap = cap[tied].max()
    cands = np.flatnonzero(tied & (cap == best_cap))
    chosen = min(cands.tolist(), key=lambda m: [j for j in range(n) if m >> j & 1])
    return [j for j in range(n) if chosen >> j & 1]


def adversary_select(state: NetworkState, lam: float, strategy: str, rng: Optional[RngStream] = None) -> list[SectorRef]:
    """Pick live sectors whose total capacity stays within ``lam`` of the network's."""
    if not 0 <= lam <= 1:
        raise InvalidParams(f"lambda={lam} outside [0, 1]")
    if strategy not in STRATEGIES:
        raise InvalidParams(f"unknown strategy {strategy!r}")
    pl = Placement.from_state(state)
    budget = pl.budget(lam)
    if strategy == "exhaustive":
        idx = _select_exhaustive(pl, budget)
    elif strategy == "greedy":
        idx = _select_greedy(pl, budget)
    else:
        idx = _select_random(pl, budget, rng or RngStream(0))
    return sorted(pl.refs[j] for j in idx)


def corrupt_sectors(engine: Engine, sectors, *, fast_forward: bool = True) -> list[int]:
    """Destroy ``sectors``; with ``fast_forward`` lost files are settled now
    rather than at their next CheckProof. Returns the ids of files lost."""
    engine.corrupt(sectors)
    return engine.settle_losses() if fast_forward else []


@dataclass
class AttackReport:
    strategy: str
    lam: float
    seed: int
    lambda_actual: float
    v_lost: Fraction
    gamma_lost: float
    confiscated: Fraction
    fully_compensated: bool
    lost_file_ids: list[int] = field(default_factory=list)
    corrupted: list[SectorRef] = field(default_factory=list)
    shortfall: Fraction = Fraction(0)

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "lambda": self.lam,
            "seed": self.seed,
            "lambda_actual": self.lambda_actual,
            "v_lost": fmt_tokens(self.v_lost),
            "gamma_lost": self.gamma_lost,
            "confiscated": fmt_tokens(self.confiscated),
            "fully_compensated": self.fully_compensated,
            "shortfall": fmt_tokens(self.shortfall),
            "lost_file_ids": self.lost_file_ids,
            "corrupted": [list(r) for r in self.corrupted],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


@dataclass
class AttackScenario:
    """Network shape for attack trials: equal sectors, one client, honest providers."""

    params: NetworkParams
    n_sectors: int = 16
    sector_units: int = 1
    n_files: int = 10
    file_size: int = 1
    file_value_units: Sequence[int] = (1,)
    fees: FeeSchedule = field(default_factory=FeeSchedule)
    # proof cycles to run before the attack; default covers one mean refresh interval
    warmup_cycles: Optional[int] = None

    def build(self, seed: int, *, test_mode: bool = False) -> tuple[Engine, HonestProviders]:
        p = self.params
        cap = self.sector_units * p.min_capacity
        deposit = cap * p.gamma_deposit * p.cap_para * p.min_value / p.min_capacity
        n_prov = self.n_sectors
        width = len(str(n_prov))
        balances = {f"p{j:0{width}d}": deposit for j in range(n_prov)}
        values = [tokens(self.file_value_units[i % len(self.file_value_units)]) * p.min_value for i in range(self.n_files)]
        balances["client"] = self._client_budget(values)
        eng = Engine(p, self.fees, balances, seed, test_mode=test_mode, keep_log=False)
        agent = HonestProviders(eng)
        for j in range(n_prov):
            eng.sector_register(f"p{j:0{width}d}", cap)
        for v in values:
            eng.file_add("client", self.file_size, v)
        cycles = self.warmup_cycles
        if cycles is None:
            cycles = math.ceil(p.avg_refresh) + 1
        delay = math.ceil(p.delay_per_size * self.file_size)
        agent.run_until(delay + cycles * p.proof_cycle)
        return eng, agent

    def _client_budget(self, values) -> Fraction:
        fees, p = self.fees, self.params
        cycles = (self.warmup_cycles or math.ceil(p.avg_refresh) + 1) + 2
        per = Fraction(0)
        for v in values:
            cp = p.k * int(v / p.min_value)
            per += fees.traffic_per_byte * self.file_size * cp * 2
            per += fees.rent_per_byte_replica_cycle * self.file_size * cp + sum(fees.gas_per_task.values(), Fraction(0))
        return per * cycles + 1


def attack_network(eng: Engine, lam: float, strategy: str, rng: RngStream, *, seed: int = 0) -> AttackReport:
    """Run one attack against an already populated engine."""
    st = eng.state
    live_cap = st.total_capacity()
    total_value = sum((f.value for f in st.live_files()), Fraction(0))
    short_before = len(st.counters.under_compensation)
    chosen = adversary_select(st, lam, strategy, rng)
    seized = sum((st.sectors[r].deposit for r in chosen), Fraction(0))
    values = {f.id: f.value for f in st.live_files()}
    lost = corrupt_sectors(eng, chosen) if chosen else []
    v_lost = sum((values[fid] for fid in lost), Fraction(0))
    shortfalls = st.counters.under_compensation[short_before:]
    return AttackReport(
        strategy=strategy,
        lam=lam,
        seed=seed,
        lambda_actual=sum(st.sectors[r].capacity for r in chosen) / live_cap if live_cap else 0.0,
        v_lost=v_lost,
        gamma_lost=float(v_lost / total_value) if total_value else 0.0,
        confiscated=seized,
        fully_compensated=not shortfalls,
        lost_file_ids=lost,
        corrupted=chosen,
        shortfall=sum((s for _, s in shortfalls), Fraction(0)),
    )


def run_attack_trial(scenario: AttackScenario, lam: float, strategy: str, seed: int, *, test_mode: bool = False) -> AttackReport:
    """Build the scenario's network, warm it up, attack once; deterministic per seed."""
    eng, _ = scenario.build(child_seed(seed, 0), test_mode=test_mode)
    return attack_network(eng, lam, strategy, RngStream(child_seed(seed, 1)), seed=seed)
