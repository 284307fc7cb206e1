import pytest
from hypothesis import HealthCheck, settings

from fileinsurer.agents import HonestProviders
from fileinsurer.engine import Engine
from fileinsurer.state import FeeSchedule, NetworkParams

settings.register_profile("ci", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")

MIN_CAP = 1024


def small_params(**kw) -> NetworkParams:
    base = dict(
        min_capacity=MIN_CAP, k=2, cap_para=4, gamma_deposit=1, proof_cycle=10,
        proof_due=20, proof_deadline=40, avg_refresh=3, delay_per_size=0,
    )
    base.update(kw)
    return NetworkParams(**base)


def build(n_sectors=4, *, params=None, fees=None, honest=True, seed=0, client_balance=1000, units=1, test_mode=True):
    """Engine with providers p0..p{n-1}, one sector each, and client alice."""
    params = params or small_params()
    balances = {f"p{j}": 1000 for j in range(n_sectors)}
    balances["alice"] = client_balance
    eng = Engine(params, fees or FeeSchedule(), balances, seed, test_mode=test_mode)
    agent = HonestProviders(eng) if honest else None
    for j in range(n_sectors):
        eng.sector_register(f"p{j}", units * params.min_capacity)
    return eng, agent


def confirm_all(eng):
    """Confirm every entry currently waiting in alloc state."""
    for (fid, i), e in sorted(eng.state.alloc_table().items()):
        if e.state.value == "alloc":
            eng.file_confirm(e.next[0], fid, i, e.next)


@pytest.fixture
def params():
    return small_params()


# acceptance criteria report one line each in the terminal summary
CRITERIA: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
