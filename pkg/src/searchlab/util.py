"""Shared helpers: seeding, bitmask utilities, exact rationals, intervals."""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from itertools import combinations, islice

import numpy as np

MASK64 = (1 << 64) - 1


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """PCG64 generator keyed by ``(seed, *keys)``.

    Extra keys derive independent child streams (trial index, stage id, ...)
    without the collisions a plain ``seed + k`` would produce.
    """
    entropy = [int(seed) & MASK64] + [int(k) & MASK64 for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def to_fraction(x) -> Fraction:
    """Exact rational from int, Fraction, decimal string or float (via its repr)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(str(x))


def fmt_frac(q) -> str:
    q = to_fraction(q)
    return f"{q.numerator}/{q.denominator}"


def log2q(q) -> float:
    """log2 of a positive rational without overflowing floats."""
    q = to_fraction(q)
    if q <= 0:
        raise ValueError("log2 of non-positive rational")
    return math.log2(q.numerator) - math.log2(q.denominator)


def bits(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def to_mask(idx) -> int:
    m = 0
    for i in idx:
        m |= 1 << int(i)
    return m


def popcount(mask: int) -> int:
    return int(mask).bit_count()


def lex_key(mask: int) -> tuple[int, ...]:
    """Sort key putting equal-size sets in lexicographic order of sorted members."""
    return tuple(bits(mask))


def dyadic_pow_le(p: Fraction, e: Fraction) -> bool:
    """Exact test of ``p <= 2**(-e)`` for rational ``p >= 0`` and rational ``e``."""
    if p <= 0:
        return True
    a, b = e.numerator, e.denominator
    # p**b * 2**a <= 1
    lhs = p ** b
    if a >= 0:
        return lhs * (1 << a) <= 1
    return lhs <= Fraction(1 << (-a))


def max_int_below(total: int, gamma: Fraction, size: int) -> int:
    """Largest integer c with ``c <= total * 2**(-gamma*size)`` (exact)."""
    p, q = gamma.numerator, gamma.denominator
    if p < 0:
        raise ValueError("gamma must be non-negative")
    rhs = total ** q
    shift = p * size

    def ok(c: int) -> bool:
        return (c ** q) << shift <= rhs

    c = int(math.floor(total * 2.0 ** (-float(gamma) * size)))
    c = max(c, 0)
    while c > 0 and not ok(c):
        c -= 1
    while ok(c + 1):
        c += 1
    return c


@lru_cache(maxsize=64)
def _combo_block(m: int, s: int) -> np.ndarray:
    flat = np.fromiter(
        (i for c in combinations(range(m), s) for i in c), dtype=np.int64, count=math.comb(m, s) * s
    )
    return flat.reshape(-1, s)


def combo_chunks(m: int, s: int, chunk: int = 1 << 16):
    """Yield ``(k, s)`` index arrays covering all s-subsets of range(m) in lexicographic order."""
    total = math.comb(m, s)
    if total <= 1 << 18:
        yield _combo_block(m, s)
        return
    it = combinations(range(m), s)
    while True:
        block = list(islice(it, chunk))
        if not block:
            return
        yield np.asarray(block, dtype=np.int64)


def wilson_interval(successes: int, trials: int, alpha: float = 0.05) -> tuple[float, float]:
    from statsmodels.stats.proportion import proportion_confint

    lo, hi = proportion_confint(successes, trials, alpha=alpha, method="wilson")
    # the closed form leaves rounding residue at the endpoints
    lo = 0.0 if successes == 0 else min(float(lo), successes / trials)
    hi = 1.0 if successes == trials else max(float(hi), successes / trials)
    return lo, hi
