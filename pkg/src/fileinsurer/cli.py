"""Command-line entry point: ``fileinsurer {simulate,attack,bounds,experiment,verify}``."""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .adversary import STRATEGIES, AttackScenario, run_attack_trial
from .bounds import BoundInputs, bounds_report, thm4_deposit_ratio
from .errors import FileInsurerError, InvariantViolation
from .experiments import DISTS, MODES, ExperimentConfig, published_value, run_table3
from .rng import child_seed
from .scenario import bundled_scenarios, execute_scenario, load_scenario, run_scenario
from .state import NetworkParams


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def cmd_simulate(args) -> int:
    if not args.scenario:
        print("simulate needs --scenario", file=sys.stderr)
        return 2
    test_mode = True if args.check else None
    return run_scenario(args.scenario, args.seed, args.out, test_mode=test_mode, as_json=args.json)


def _attack_one(job):
    scenario, lam, strategy, seed = job
    return run_attack_trial(scenario, lam, strategy, seed)


def cmd_attack(args) -> int:
    binp = BoundInputs(k=args.k, n_s=args.ns, cap_para=args.cap_para, lam=args.lam if 0 < args.lam < 1 else 0.5)
    gamma = args.gamma_deposit
    if gamma is None:
        gamma = thm4_deposit_ratio(binp)
    min_cap = 1 << 20
    params = NetworkParams(
        min_capacity=min_cap, k=args.k, cap_para=args.cap_para, gamma_deposit=gamma,
        penalty_fraction=args.penalty, avg_refresh=args.avg_refresh,
    )
    files = args.files if args.files is not None else args.ns
    scenario = AttackScenario(params, n_sectors=args.ns, n_files=files, file_size=max(1, int(min_cap * args.file_frac)))
    jobs = [(scenario, args.lam, args.strategy, child_seed(args.seed, t)) for t in range(args.trials)]
    if args.threads > 1:
        with ProcessPoolExecutor(args.threads) as pool:
            reports = list(pool.map(_attack_one, jobs))
    else:
        reports = [_attack_one(j) for j in jobs]
    if args.json:
        for r in reports:
            print(r.to_json())
    worst = max(r.gamma_lost for r in reports)
    mean = sum(r.gamma_lost for r in reports) / len(reports)
    failures = sum(not r.fully_compensated for r in reports)
    summary = {
        "trials": len(reports), "strategy": args.strategy, "lambda": args.lam, "gamma_deposit": float(gamma),
        "max_gamma_lost": worst, "mean_gamma_lost": mean, "compensation_failures": failures,
    }
    print(json.dumps(summary) if args.json else "\n".join(f"{k:<22} {v}" for k, v in summary.items()))
    return 0


def cmd_bounds(args) -> int:
    inp = BoundInputs(k=args.k, n_s=args.ns, cap_para=args.cap_para, lam=args.lam, c=args.c,
                      gamma_vm=args.gamma_vm, r1=args.r1, r2=args.r2)
    rep = bounds_report(inp, args.ratio)
    if args.json:
        print(json.dumps(rep, sort_keys=True))
        return 0
    t3, t4 = rep["thm3"], rep["thm4"]
    print(f"k={inp.k} N_s={inp.n_s:g} capPara={inp.cap_para:g} lambda={inp.lam} c={inp.c:g} gamma_vm={inp.gamma_vm}")
    print(f"thm1 capacity (bytes)       {rep['thm1_capacity_bytes']:.6g}")
    print(f"thm2 collision (ratio {args.ratio:g})  {rep['thm2_collision_bound']:.6g}")
    print(f"thm3 terms                  {t3['terms'][0]:.4g}  {t3['terms'][1]:.4g}  {t3['terms'][2]:.4g}")
    print(f"thm3 bound                  {t3['bound']:.4g}")
    if t3["discrepancy"]:
        print(f"  ! third term by formula {t3['terms'][2]:.4g} differs from the in-text form "
              f"(1/gamma_vm)*5*lambda^k = {t3['third_term_in_text_form']:.4g}; formula value is used")
    print(f"thm4 terms                  {t4['terms'][0]:.4g}  {t4['terms'][1]:.4g}  {t4['terms'][2]:.4g}")
    print(f"thm4 deposit ratio          {t4['deposit_ratio']:.4g}")
    return 0


def cmd_table3(args) -> int:
    dists = DISTS if args.dist == "all" else (args.dist,)
    modes = MODES if args.mode == "all" else (args.mode,)
    rows = []
    for mode in modes:
        for dist in dists:
            cfg = ExperimentConfig(args.ncp, args.ns, dist, mode, args.trials, args.seed, args.capacity_factor, args.threads)
            rows.append({"mode": mode, "n_cp": args.ncp, "n_s": args.ns, "dist": dist,
                         "max_usage": run_table3(cfg), "published": published_value(mode, args.ncp, args.ns, dist)})
    if args.json:
        for r in rows:
            print(json.dumps(r))
        return 0
    print(f"{'mode':<11}{'N_cp':>10}{'N_s':>7}  {'dist':<15}{'max usage':>10}{'published':>11}")
    for r in rows:
        pub = "-" if r["published"] is None else f"{r['published']:.3f}"
        print(f"{r['mode']:<11}{r['n_cp']:>10}{r['n_s']:>7}  {r['dist']:<15}{r['max_usage']:>10.3f}{pub:>11}")
    return 0


def cmd_verify(args) -> int:
    ok = True
    with tempfile.TemporaryDirectory() as tmp:
        for name, path in bundled_scenarios().items():
            scn = load_scenario(path)
            logs = []
            for run in range(2):
                try:
                    res = execute_scenario(scn, args.seed, test_mode=True)
                except InvariantViolation as exc:
                    print(f"FAIL {name}: invariant violation {exc}")
                    return 3
                out = Path(tmp) / f"{name}.{run}.jsonl"
                res.engine.write_log(out)
                logs.append(out.read_bytes())
            same = logs[0] == logs[1]
            ok &= same
            n_events = logs[0].count(b"\n")
            print(f"{'PASS' if same else 'FAIL'} {name}: {n_events} events, replay identical={same}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fileinsurer", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="run a scenario file through the engine")
    sp.add_argument("--scenario", type=Path)
    sp.add_argument("--seed", type=_u64, default=None, help="overrides the scenario's seed")
    sp.add_argument("--out", type=Path, help="write the JSON-Lines event log here")
    sp.add_argument("--json", action="store_true")
    sp.add_argument("--check", action="store_true", help="validate invariants after every event")
    sp.add_argument("--threads", type=int, default=1)
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("attack", help="corrupt a fraction of a populated network")
    sp.add_argument("--ns", type=int, default=100)
    sp.add_argument("--k", type=int, default=4)
    sp.add_argument("--cap-para", type=float, default=10)
    sp.add_argument("--files", type=int, default=None, help="unit-value files (default: one per sector)")
    sp.add_argument("--file-frac", type=float, default=0.01, help="file size as a fraction of min_capacity")
    sp.add_argument("--lambda", dest="lam", type=float, default=0.5)
    sp.add_argument("--strategy", choices=STRATEGIES, default="random")
    sp.add_argument("--gamma-deposit", type=float, default=None, help="default: the full-compensation ratio")
    sp.add_argument("--penalty", type=float, default=0.0)
    sp.add_argument("--avg-refresh", type=float, default=2.0)
    sp.add_argument("--trials", type=int, default=10)
    sp.add_argument("--seed", type=_u64, default=0)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--json", action="store_true", help="one report object per trial, then a summary")
    sp.set_defaults(fn=cmd_attack)

    sp = sub.add_parser("bounds", help="evaluate the capacity, collision, robustness and deposit bounds")
    sp.add_argument("--k", type=int, default=20)
    sp.add_argument("--ns", type=float, default=1e6)
    sp.add_argument("--cap-para", type=float, default=1000)
    sp.add_argument("--lambda", dest="lam", type=float, default=0.5)
    sp.add_argument("--c", type=float, default=1e-18)
    sp.add_argument("--gamma-vm", type=float, default=0.005)
    sp.add_argument("--r1", type=float, default=1.0)
    sp.add_argument("--r2", type=float, default=1.0)
    sp.add_argument("--ratio", type=float, default=1000.0, help="sector capacity over file size")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(fn=cmd_bounds)

    sp = sub.add_parser("experiment", help="load experiments")
    esub = sp.add_subparsers(dest="experiment", required=True)
    tp = esub.add_parser("table3", help="maximum sector usage under random placement")
    tp.add_argument("--ncp", type=int, default=10**5)
    tp.add_argument("--ns", type=int, default=20)
    tp.add_argument("--dist", choices=DISTS + ("all",), default="all")
    tp.add_argument("--mode", choices=MODES + ("all",), default="all")
    tp.add_argument("--trials", type=int, default=100)
    tp.add_argument("--seed", type=_u64, default=0)
    tp.add_argument("--capacity-factor", type=float, default=2.0)
    tp.add_argument("--threads", type=int, default=1)
    tp.add_argument("--json", action="store_true")
    tp.set_defaults(fn=cmd_table3)

    sp = sub.add_parser("verify", help="replay the bundled scenarios twice and compare logs")
    sp.add_argument("--seed", type=_u64, default=None)
    sp.set_defaults(fn=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except FileInsurerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
