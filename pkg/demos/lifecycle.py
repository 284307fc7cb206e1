"""Walk one file through upload, proofs, refreshes and a provider going quiet.

Run:  python demos/lifecycle.py
"""

from fractions import Fraction

from fileinsurer.agents import HonestProviders
from fileinsurer.engine import Engine
from fileinsurer.state import FeeSchedule, NetworkParams, fmt_tokens

params = NetworkParams(
    min_capacity=4096, k=3, cap_para=4, gamma_deposit=1,
    proof_cycle=10, proof_due=20, proof_deadline=40, avg_refresh=3,
    delay_per_size=Fraction(1, 128), penalty_fraction=Fraction(1, 10),
)
fees = FeeSchedule(rent_per_byte_replica_cycle=Fraction(1, 1000), traffic_per_byte=Fraction(1, 10000))
providers = ["ann", "ben", "cat", "dan"]
eng = Engine(params, fees, {**{p: 100 for p in providers}, "zoe": 50}, seed=11, test_mode=True)
crew = HonestProviders(eng, providers)


def show(title):
    print(f"\n== t={eng.now}: {title}")
    for i, e in enumerate(eng.state.alloc.get(fid, []), start=1):
        print(f"   replica {i}: {e.state.value:<9} at {e.prev}  (moving to {e.next})" if e.next else
              f"   replica {i}: {e.state.value:<9} at {e.prev}")


for p in providers:
    eng.sector_register(p, 4096)
print("deposit per sector:", fmt_tokens(eng.state.sectors[("ann", 1)].deposit))

fid = eng.file_add("zoe", 256, 1)
show("upload requested; the chosen providers confirm as soon as the transfer lands")
crew.run_until(10)
show("upload checked, first cycle of rent prepaid")

crew.run_until(80)
print(f"\nrefreshes so far: {eng.state.counters.refreshes}, zoe balance {fmt_tokens(eng.state.ledger.balance('zoe'))}")
show("replicas have wandered between sectors")

quiet = eng.state.entry(fid, 1).prev[0]
crew.providers.discard(quiet)
print(f"\n{quiet} stops proving and stops confirming transfers")
crew.run_until(160)
for ev in eng.events:
    for n in ev.notes:
        if n["kind"] in ("penalized", "confiscated", "refresh_failed") and ev.time > 80:
            print(f"   t={ev.time:<4} {ev.kind:<12} {n['kind']}")
show("the file survives on the remaining providers")
print("\nsummary:")
for k, v in eng.summary().items():
    print(f"   {k:<26} {v}")
