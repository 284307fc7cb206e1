"""Closed-form capacity, collision, robustness and deposit bounds.

All logarithms are natural. Terms containing a power of ``N_s`` are
evaluated in log space so that ``N_s = 10**6`` and beyond never overflow.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Iterable, Optional

from scipy.special import xlogy

from .errors import DomainError, EmptyFileSet, InvalidParams, NonIntegralCount
from .state import NetworkParams, tokens

LOG_E_OVER_2PI = 1.0 - math.log(2.0 * math.pi)


@dataclass(frozen=True)
class BoundInputs:
    k: int = 20
    n_s: float = 1e6
    cap_para: float = 1000.0
    lam: float = 0.5
    c: float = 1e-18
    gamma_vm: float = 0.005
    min_capacity: int = 64 * 2**30
    min_value: float = 1.0
    r1: float = 1.0
    r2: float = 1.0

    def validate(self) -> "BoundInputs":
        problems = []
        if not 0 < self.lam < 1:
            problems.append("lam must lie in (0, 1)")
        if not 0 < self.c < 1:
            problems.append("c must lie in (0, 1)")
        if self.k < 1:
            problems.append("k must be >= 1")
        if not 0 < self.gamma_vm <= 1:
            problems.append("gamma_vm must lie in (0, 1]")
        if self.r1 < 1:
            problems.append("r1 must be >= 1")
        if self.r2 <= 0:
            problems.append("r2 must be > 0")
        if self.n_s < 1 or self.cap_para <= 0:
            problems.append("n_s must be >= 1 and cap_para > 0")
        if problems:
            raise InvalidParams("; ".join(problems))
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def compute_r1_r2(files: Iterable[tuple[int, object]], params: NetworkParams) -> tuple[Fraction, Fraction]:
    """Size-weighted mean value per ``min_value`` (r1) and the ratio of carried
    value to stored bytes relative to the network design point (r2)."""
    files = [(int(s), tokens(v)) for s, v in files]
    if not files:
        raise EmptyFileSet("need at least one file")
    if any(s <= 0 for s, _ in files):
        raise EmptyFileSet("file sizes must be positive")
    total_size = sum(s for s, _ in files)
    total_value = sum((v for _, v in files), Fraction(0))
    r1 = sum((s * v for s, v in files), Fraction(0)) / (params.min_value * total_size)
    r2 = params.min_capacity * total_value / (params.min_value * total_size * params.cap_para)
    return r1, r2


def thm1_capacity_bound(inp: BoundInputs) -> float:
    """Total bytes of files the network can hold."""
    raw = inp.n_s * inp.min_capacity
    return min(raw / (2 * inp.r1 * inp.k), raw / inp.r2)


def thm2_log_bound(n_s: float, ratio: float) -> float:
    return math.log(n_s) - 0.144 * ratio


def thm2_collision_bound(n_s: float, ratio: float) -> float:
    """Probability that some sector ever drops to an eighth of its capacity free."""
    if ratio <= 0:
        return 1.0
    lb = thm2_log_bound(n_s, ratio)
    return 1.0 if lb >= 0 else math.exp(lb)


def _log_mix(lam: float) -> float:
    # log(lam**lam * (1-lam)**(1-lam)), always <= 0
    return lam * math.log(lam) + (1 - lam) * math.log1p(-lam)


def thm3_terms(inp: BoundInputs) -> tuple[float, float, float]:
    log_lam = math.log(inp.lam)
    t1 = 5.0 * math.exp(inp.k * log_lam)
    t2 = math.exp(0.5 * inp.k * log_lam)
    num = (LOG_E_OVER_2PI - math.log(inp.c)) / inp.n_s - _log_mix(inp.lam)
    t3 = 4.0 * num / (inp.gamma_vm * inp.k * -log_lam * inp.cap_para)
    return t1, t2, t3


def thm3_robustness_bound(inp: BoundInputs) -> float:
    """Upper bound on the fraction of stored value lost, clamped to [0, 1]."""
    return min(1.0, max(0.0, *thm3_terms(inp)))


def thm3_in_text_form(inp: BoundInputs) -> float:
    # the worked example writes the third term as (1/gamma_vm) * 5 * lam**k;
    # reported next to the formula value, never substituted for it
    return thm3_terms(inp)[0] / inp.gamma_vm


def thm4_terms(inp: BoundInputs) -> tuple[float, float, float]:
    if inp.n_s < 2:
        raise DomainError("deposit ratio needs n_s >= 2")
    log_lam = math.log(inp.lam)
    log_n = math.log(inp.n_s)
    t1 = 5.0 * math.exp((inp.k - 1) * log_lam)
    t2 = math.exp((0.5 * inp.k - 1) * log_lam)
    t3 = 4.0 / (inp.k * inp.cap_para) * (log_n / -log_lam + -math.log(inp.c) / log_n)
    return t1, t2, t3


def thm4_deposit_ratio(inp: BoundInputs) -> float:
    """Deposit ratio that guarantees full compensation.

    Not clamped: this is a ratio of deposit to carried value, and values
    above 1 at small scale are meaningful.
    """
    return max(thm4_terms(inp))


@dataclass(frozen=True)
class KLCheck:
    dkl: float
    half_bound: float
    holds: bool


def kl_lemma_check(p: float, x: float) -> KLCheck:
    if not 0 < p <= 0.2:
        raise DomainError(f"p={p} outside (0, 0.2]")
    # allow one ulp of slack so grids built as x = 5p land inside
    if not 5 * p * (1 - 1e-12) <= x <= 1:
        raise DomainError(f"x={x} outside [5p, 1] for p={p}")
    dkl = float(xlogy(x, x / p) + xlogy(1 - x, (1 - x) / (1 - p)))
    half = 0.5 * x * math.log(x / p)
    return KLCheck(dkl, half, dkl >= half)


@dataclass(frozen=True)
class StirlingBound:
    log_value: float
    value: Optional[float]
    # same bound with the sqrt(1/(N lam (1-lam))) factor kept; valid for every N
    log_value_sqrt: float


def binom_stirling_upper(n_s: int, lam: float) -> StirlingBound:
    """Upper bound e/(2 pi) * (lam^lam (1-lam)^(1-lam))^(-N) on C(N, lam N)."""
    m = lam * n_s
    if not 0 < lam < 1:
        raise DomainError(f"lam={lam} outside (0, 1)")
    if abs(m - round(m)) > 1e-9:
        raise NonIntegralCount(f"lam * N_s = {m} is not an integer")
    log_v = LOG_E_OVER_2PI - n_s * _log_mix(lam)
    value = math.exp(log_v) if log_v < 709.0 else None
    log_sqrt = log_v - 0.5 * math.log(n_s * lam * (1 - lam))
    return StirlingBound(log_v, value, log_sqrt)


def bounds_report(inp: BoundInputs, capacity_over_file_size: float = 1000.0) -> dict:
    """Every bound for one set of inputs, as plain numbers."""
    inp.validate()
    t3 = thm3_terms(inp)
    t4 = thm4_terms(inp)
    third = t3[2]
    in_text = thm3_in_text_form(inp)
    return {
        "inputs": inp.to_dict(),
        "thm1_capacity_bytes": thm1_capacity_bound(inp),
        "thm2_collision_bound": thm2_collision_bound(inp.n_s, capacity_over_file_size),
        "thm3": {
            "terms": list(t3),
            "bound": thm3_robustness_bound(inp),
            "third_term_in_text_form": in_text,
            "discrepancy": not math.isclose(third, in_text, rel_tol=0.05),
        },
        "thm4": {"terms": list(t4), "deposit_ratio": thm4_deposit_ratio(inp)},
    }
