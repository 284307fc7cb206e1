"""YAML scenario files and their scripted execution.

A scenario names the network parameters, fee schedule, actors and a
timeline of requests. Honest providers (the default) confirm every
transfer and prove every replica once per proof cycle; providers marked
``honest: false`` act only through explicit script steps.

Minimal example::

    version: 1
    params: {min_capacity: 1024, k: 2, cap_para: 10, gamma_deposit: 1}
    actors:
      clients: {alice: 100}
      providers: {bob: {balance: 1000}}
    duration: 200
    script:
      - {at: 0, op: sector_register, provider: bob, capacity: 1024}
      - {at: 5, op: file_add, client: alice, size: 64, value: 1}
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field, fields
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Optional

import yaml

from .agents import HonestProviders
from .engine import Engine, Proof
from .errors import FileInsurerError, InvalidParams, InvariantViolation, ParseError, ProtocolError, ValidationError
from .state import FeeSchedule, NetworkParams, tokens

SCHEMA_VERSION = 1

# op name -> (required fields, optional fields)
OPS = {
    "sector_register": ({"provider", "capacity"}, set()),
    "sector_disable": ({"provider", "sector"}, set()),
    "file_add": ({"client", "size", "value"}, {"merkle_root"}),
    "file_add_large": ({"client", "size", "value"}, {"merkle_root"}),
    "file_discard": ({"client", "file"}, set()),
    "file_get": ({"client", "file"}, set()),
    "file_confirm": ({"provider", "file", "index", "sector"}, set()),
    "file_prove": ({"provider", "file", "index", "sector"}, {"t", "valid"}),
    "corrupt": ({"sectors"}, set()),
    "settle_losses": (set(), set()),
    "set_honest": ({"provider", "honest"}, set()),
}
COMMON = {"at", "op", "expect"}

_PARAM_FIELDS = {f.name for f in fields(NetworkParams)}
_FEE_FIELDS = {f.name for f in fields(FeeSchedule)}


@dataclass
class Step:
    at: int
    op: str
    args: dict
    expect: Optional[str] = None  # "ok" or "rejected"


@dataclass
class Scenario:
    params: NetworkParams
    fees: FeeSchedule
    clients: dict[str, Fraction]
    providers: dict[str, Fraction]
    honest: set[str]
    script: list[Step]
    duration: int
    seed: int = 0
    name: str = ""

    def balances(self) -> dict[str, Fraction]:
        return {**self.clients, **self.providers}


@dataclass
class ScenarioResult:
    engine: Engine
    rejected: list[tuple[int, str, str]] = field(default_factory=list)
    unexpected: list[tuple[int, str, str]] = field(default_factory=list)


def parse_scenario_text(text: str, name: str = "<scenario>") -> dict:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        col = mark.column + 1 if mark is not None else None
        raise ParseError(f"{name}: {getattr(exc, 'problem', None) or exc}", line, col) from None
    if not isinstance(doc, dict):
        raise ParseError(f"{name}: top level must be a mapping", 1, 1)
    return doc


def _fail(msg: str):
    raise ValidationError(msg)


def _ref(x, what: str) -> tuple[str, int]:
    if not (isinstance(x, (list, tuple)) and len(x) == 2 and isinstance(x[0], str) and isinstance(x[1], int)):
        _fail(f"{what}: sector must be [owner, id], got {x!r}")
    return (x[0], x[1])


def build_scenario(doc: dict, name: str = "") -> Scenario:
    """Check a parsed document against the schema and network invariants."""
    if doc.get("version") != SCHEMA_VERSION:
        _fail(f"version must be {SCHEMA_VERSION}, got {doc.get('version')!r}")
    unknown = set(doc) - {"version", "name", "params", "fees", "actors", "script", "duration", "seed"}
    if unknown:
        _fail(f"unknown top-level keys {sorted(unknown)}")
    raw_p = dict(doc.get("params") or {})
    bad = set(raw_p) - _PARAM_FIELDS
    if bad:
        _fail(f"unknown params {sorted(bad)}")
    raw_f = dict(doc.get("fees") or {})
    bad = set(raw_f) - _FEE_FIELDS
    if bad:
        _fail(f"unknown fee fields {sorted(bad)}")
    try:
        params = NetworkParams(**raw_p)
        params.validate()
        fees = FeeSchedule(**raw_f)
        fees.validate(params)
    except (InvalidParams, TypeError, ValueError, ZeroDivisionError) as exc:
        _fail(f"params: {exc}")

    actors = doc.get("actors") or {}
    clients = {str(k): tokens(v) for k, v in (actors.get("clients") or {}).items()}
    providers, honest = {}, set()
    for pid, spec in (actors.get("providers") or {}).items():
        spec = spec if isinstance(spec, dict) else {"balance": spec}
        providers[str(pid)] = tokens(spec.get("balance", 0))
        if spec.get("honest", True):
            honest.add(str(pid))
    overlap = set(clients) & set(providers)
    if overlap:
        _fail(f"actors declared as both client and provider: {sorted(overlap)}")
    if any(v < 0 for v in (*clients.values(), *providers.values())):
        _fail("balances must be >= 0")

    duration = doc.get("duration", 0)
    if not isinstance(duration, int) or duration < 0:
        _fail("duration must be a non-negative integer")

    script, last = [], 0
    for n, item in enumerate(doc.get("script") or [], start=1):
        where = f"script step {n}"
        if not isinstance(item, dict) or "op" not in item:
            _fail(f"{where}: needs an op")
        op = item["op"]
        if op not in OPS:
            _fail(f"{where}: unknown op {op!r}")
        req, opt = OPS[op]
        keys = set(item) - COMMON
        if req - keys:
            _fail(f"{where}: {op} missing {sorted(req - keys)}")
        if keys - req - opt:
            _fail(f"{where}: {op} has unknown fields {sorted(keys - req - opt)}")
        at = item.get("at", last)
        if not isinstance(at, int) or at < last:
            _fail(f"{where}: times must be non-decreasing integers")
        if at > duration:
            _fail(f"{where}: at={at} is past duration {duration}")
        last = at
        expect = item.get("expect")
        if expect not in (None, "ok", "rejected"):
            _fail(f"{where}: expect must be ok or rejected")
        args = {k: item[k] for k in keys}
        if "client" in args and args["client"] not in clients:
            _fail(f"{where}: unknown client {args['client']!r}")
        if "provider" in args and args["provider"] not in providers:
            _fail(f"{where}: unknown provider {args['provider']!r}")
        if "sector" in args:
            args["sector"] = _ref(args["sector"], where)
            if args["sector"][0] not in providers:
                _fail(f"{where}: sector owner {args['sector'][0]!r} is not a provider")
        if "sectors" in args:
            args["sectors"] = [_ref(s, where) for s in args["sectors"]]
        if op in ("file_add", "file_add_large"):
            value = tokens(args["value"])
            if value <= 0 or (value / params.min_value).denominator != 1:
                _fail(f"{where}: value {args['value']} is not a positive multiple of min_value {params.min_value}")
            if op == "file_add" and not 0 < int(args["size"]) <= params.size_limit:
                _fail(f"{where}: size {args['size']} outside (0, size_limit]")
        if op == "sector_register":
            cap = args["capacity"]
            if not isinstance(cap, int) or cap <= 0 or cap % params.min_capacity:
                _fail(f"{where}: capacity {cap} is not a positive multiple of min_capacity")
        script.append(Step(at, op, args, expect))
    return Scenario(params, fees, clients, providers, honest, script, duration, int(doc.get("seed", 0)), name or str(doc.get("name", "")))


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return build_scenario(parse_scenario_text(text, str(path)), path.stem)


def bundled_scenarios() -> dict[str, Path]:
    root = resources.files("fileinsurer") / "scenarios"
    return {Path(str(p)).stem: Path(str(p)) for p in sorted(root.iterdir(), key=lambda p: p.name) if p.name.endswith(".yaml")}


def _apply(eng: Engine, agent: HonestProviders, step: Step):
    a = step.args
    op = step.op
    if op == "sector_register":
        return eng.sector_register(a["provider"], a["capacity"])
    if op == "sector_disable":
        return eng.sector_disable(a["provider"], a["sector"])
    if op == "file_add":
        return eng.file_add(a["client"], int(a["size"]), a["value"], a.get("merkle_root"))
    if op == "file_add_large":
        return eng.file_add_large(a["client"], int(a["size"]), a["value"], a.get("merkle_root"))
    if op == "file_discard":
        return eng.file_discard(a["client"], a["file"])
    if op == "file_get":
        return eng.file_get(a["client"], a["file"])
    if op == "file_confirm":
        return eng.file_confirm(a["provider"], a["file"], a["index"], a["sector"])
    if op == "file_prove":
        proof = Proof(int(a.get("t", eng.now)), bool(a.get("valid", True)))
        return eng.file_prove(a["provider"], a["file"], a["index"], a["sector"], proof)
    if op == "corrupt":
        return eng.corrupt(a["sectors"])
    if op == "settle_losses":
        return eng.settle_losses()
    if op == "set_honest":
        if a["honest"]:
            agent.providers.add(a["provider"])
        else:
            agent.providers.discard(a["provider"])
        return None
    raise ValidationError(f"unknown op {op!r}")


def execute_scenario(scn: Scenario, seed: Optional[int] = None, *, test_mode: Optional[bool] = None) -> ScenarioResult:
    """Run a validated scenario to its duration and return the engine and outcomes."""
    eng = Engine(scn.params, scn.fees, scn.balances(), scn.seed if seed is None else seed, test_mode=test_mode)
    agent = HonestProviders(eng, set(scn.honest))
    res = ScenarioResult(eng)
    for n, step in enumerate(scn.script, start=1):
        agent.run_until(step.at)
        try:
            _apply(eng, agent, step)
            outcome = "ok"
        except ProtocolError as exc:
            outcome = "rejected"
            res.rejected.append((n, step.op, f"{type(exc).__name__}: {exc}"))
        if step.expect and step.expect != outcome:
            res.unexpected.append((n, step.op, outcome))
    agent.run_until(scn.duration)
    eng.advance_time(scn.duration, record=True)
    return res


def run_scenario(path, seed: Optional[int] = None, out_path=None, *, test_mode: Optional[bool] = None,
                 as_json: bool = False, stdout=None) -> int:
    """CLI entry: 0 clean run, 2 parse/validation failure, 3 invariant violation."""
    stdout = stdout or sys.stdout
    try:
        scn = load_scenario(path)
    except ParseError as exc:
        loc = f" (line {exc.line}, column {exc.column})" if exc.line else ""
        print(f"parse error{loc}: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    try:
        res = execute_scenario(scn, seed, test_mode=test_mode)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 3
    except FileInsurerError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 2
    if out_path:
        res.engine.write_log(out_path)
    summary = res.engine.summary()
    summary["rejected_requests"] = len(res.rejected)
    summary["unexpected_outcomes"] = [list(u) for u in res.unexpected]
    if as_json:
        print(json.dumps(summary, sort_keys=True), file=stdout)
    else:
        print(f"scenario {scn.name or path}: seed {scn.seed if seed is None else seed}", file=stdout)
        for k, v in summary.items():
            print(f"  {k:<26} {v}", file=stdout)
    return 0
