"""Monte-Carlo harness for sums of adaptively chosen variables with exponential conditional tails.

Each adversary draws a_k so that Pr[a_k >= x | a_1..a_{k-1}] <= exp(-zeta*x);
the quantity of interest is Pr[a_1 + ... + a_n >= 4n/zeta] against exp(-n).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import gammaincc

from .cnf import InvalidConfig
from .util import make_rng, wilson_interval

ADVERSARIES = ("iid-exponential", "sum-adaptive", "worst-shift", "zero")
CHUNK = 250_000


@dataclass(frozen=True)
class ConcentrationConfig:
    n: int
    zeta: float
    adversary: str = "iid-exponential"
    trials: int = 1_000_000
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.zeta <= 0 or self.trials < 1:
            raise InvalidConfig("need n >= 1, zeta > 0, trials >= 1")
        if self.adversary not in ADVERSARIES:
            raise InvalidConfig(f"unknown adversary {self.adversary!r}")

    @property
    def threshold(self) -> float:
        return 4 * self.n / self.zeta


def _draw(cfg: ConcentrationConfig, rng: np.random.Generator, size: int) -> np.ndarray:
    """Row sums of ``size`` independent runs of the adversary."""
    n, z = cfg.n, cfg.zeta
    if cfg.adversary == "zero":
        return np.zeros(size)
    if cfg.adversary == "iid-exponential":
        return rng.exponential(1 / z, size=(size, n)).sum(axis=1)
    if cfg.adversary == "worst-shift":
        # tight law through the inverse transform: Pr[a >= x] = exp(-zeta*x) exactly
        return (-np.log1p(-rng.random((size, n))) / z).sum(axis=1)
    # sum-adaptive: rate zeta while at or behind the 4/zeta per-step pace, 2*zeta when ahead
    s = np.zeros(size)
    for k in range(n):
        ahead = s > 4 * k / z
        rate = np.where(ahead, 2 * z, z)
        s += rng.exponential(1.0, size=size) / rate
    return s


@dataclass
class ConcentrationResult:
    config: ConcentrationConfig
    hits: int
    estimate: float
    interval: tuple[float, float]
    bound: float
    exact: float | None
    passed: bool
    matches_exact: bool | None

    @property
    def half_width(self) -> float:
        return (self.interval[1] - self.interval[0]) / 2

    def as_dict(self) -> dict:
        return {"check": "concentration", "params": asdict(self.config), "bound": self.bound,
                "measured": self.estimate, "hits": self.hits, "interval": list(self.interval),
                "exact": self.exact, "matches_exact": self.matches_exact, "pass": self.passed}


def gamma_tail(n: int, zeta: float) -> float:
    """Pr[Gamma(n, 1/zeta) >= 4n/zeta] = Q(n, 4n)."""
    return float(gammaincc(n, 4 * n))


def concentration_experiment(cfg: ConcentrationConfig) -> ConcentrationResult:
    """Pass iff the estimate is at most exp(-n) plus three Wilson half-widths.

    For the i.i.d. adversary the exact Gamma tail must also lie within three
    half-widths of the estimate.
    """
    rng = make_rng(cfg.seed, cfg.n, int(round(cfg.zeta * 1e6)), ADVERSARIES.index(cfg.adversary))
    hits, left = 0, cfg.trials
    while left:
        k = min(CHUNK, left)
        hits += int((_draw(cfg, rng, k) >= cfg.threshold).sum())
        left -= k
    est = hits / cfg.trials
    lo, hi = wilson_interval(hits, cfg.trials)
    hw = (hi - lo) / 2
    bound = math.exp(-cfg.n)
    exact = matches = None
    if cfg.adversary == "iid-exponential":
        exact = gamma_tail(cfg.n, cfg.zeta)
        matches = abs(est - exact) <= 3 * hw
    passed = est <= bound + 3 * hw and matches is not False
    return ConcentrationResult(cfg, hits, est, (lo, hi), bound, exact, passed, matches)
