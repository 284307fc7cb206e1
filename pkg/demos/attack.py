"""Corrupt half the network's capacity and see who pays.

Builds a few hundred equal sectors holding unit-value files, lets the
placements mix through one refresh interval, then lets each adversary
strategy pick sectors. Deposits are set to the full-compensation ratio.

Run:  python demos/attack.py
"""

from fileinsurer.adversary import AttackScenario, run_attack_trial
from fileinsurer.bounds import BoundInputs, thm3_robustness_bound, thm4_deposit_ratio
from fileinsurer.state import NetworkParams, fmt_tokens

N_S, K, CAP_PARA, LAM = 200, 4, 10, 0.5
inp = BoundInputs(k=K, n_s=N_S, cap_para=CAP_PARA, lam=LAM, gamma_vm=1 / N_S)
gamma = thm4_deposit_ratio(inp)
print(f"deposit ratio for full compensation: {gamma:.4f}")
print(f"loss-fraction bound: {thm3_robustness_bound(inp):.4f}")

params = NetworkParams(min_capacity=1 << 20, k=K, cap_para=CAP_PARA, gamma_deposit=gamma,
                       penalty_fraction=0, avg_refresh=2)
scenario = AttackScenario(params, n_sectors=N_S, n_files=N_S, file_size=(1 << 20) // 100)

print(f"\n{'strategy':<10} {'seed':>4} {'lost':>6} {'lost frac':>10} {'seized':>10}  compensated")
for strategy in ("random", "greedy"):
    for seed in range(3):
        r = run_attack_trial(scenario, LAM, strategy, seed)
        print(f"{strategy:<10} {seed:>4} {fmt_tokens(r.v_lost):>6} {r.gamma_lost:>10.3f} "
              f"{float(r.confiscated):>10.2f}  {r.fully_compensated}")
