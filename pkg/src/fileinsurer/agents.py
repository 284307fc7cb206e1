"""Simulated storage providers that drive an :class:`Engine` forward."""

from __future__ import annotations

from typing import Iterable, Optional

from .engine import Engine, EngineEvent, Proof
from .state import LIVE_SECTOR


class HonestProviders:
    """Providers that confirm every transfer sent to them and keep proofs fresh.

    ``providers=None`` means every provider in the network behaves honestly;
    otherwise only the named ones do and the rest stay silent, which is how
    scripted scenarios produce missed confirmations and stale proofs.
    """

    def __init__(self, engine: Engine, providers: Optional[Iterable[str]] = None, *, min_age: Optional[int] = None):
        self.engine = engine
        self.providers = None if providers is None else set(providers)
        # a replica is re-proved once its last proof is at least this old
        self.min_age = engine.params.proof_cycle if min_age is None else min_age
        self.confirms = 0
        self.proofs = 0
        engine.subscribe(self._on_event)

    def _honest(self, owner: str) -> bool:
        return self.providers is None or owner in self.providers

    def _on_event(self, engine: Engine, ev: EngineEvent) -> None:
        for note in ev.notes:
            if note["kind"] != "transfer":
                continue
            ref = tuple(note["dst"])
            if self._honest(ref[0]):
                engine.file_confirm(ref[0], note["file"], note["index"], ref)
                self.confirms += 1

    def prove_all(self) -> int:
        eng = self.engine
        st = eng.state
        now = st.clock
        n = 0
        for fid in sorted(st.alloc):
            for i, e in enumerate(st.alloc[fid], start=1):
                ref = e.prev
                if ref is None or not self._honest(ref[0]) or now - e.last < self.min_age:
                    continue
                if st.sectors[ref].state not in LIVE_SECTOR:
                    continue
                eng.file_prove(ref[0], fid, i, ref, Proof(now))
                n += 1
        self.proofs += n
        return n

    def run_until(self, until: int, step: Optional[int] = None) -> None:
        """Advance in ``step``-tick strides (default one proof cycle), proving after each."""
        eng = self.engine
        step = step or eng.params.proof_cycle
        while eng.now < until:
            eng.advance_time(min(eng.now + step, until))
            self.prove_all()
