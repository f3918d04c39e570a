"""
Cube-partition combinatorics.

Censuses of subcube doubling indices on aligned candidate tables, the exact
binomial tail claim, and the saturating iteration process in exact arithmetic.
"""
import logging
import math
from fractions import Fraction
from typing import List, Optional, Tuple, Union

import numpy as np

from nodal_lab.config import settings
from nodal_lab.errors import BudgetExceeded, ClaimSearchError, PreconditionError
from nodal_lab.field import FieldOracle
from nodal_lab.growth import CandidateTable
from nodal_lab.models.field import CubeSpec
from nodal_lab.models.subdivision import (
    IterationDistribution,
    IterationOutcome,
    SubdivisionCensus,
    TailParams,
)

logger = logging.getLogger(__name__)

Rational = Union[Fraction, str, int]

THRESHOLD_RULES = ("blogb", "log-power", "fixed")
EXACT_EXPONENT_DENOMINATOR = 64


def as_fraction(p: Rational) -> Fraction:
    """Parse 'num/den', an int or a Fraction."""
    try:
        value = Fraction(p)
    except (ValueError, ZeroDivisionError) as e:
        raise PreconditionError(f"not a rational number: {p!r}") from e
    return value


def _check_budget(B: int, n: int, budget: Optional[int]):
    budget = budget or settings.PARTITION_BUDGET
    if B**n > budget:
        raise BudgetExceeded(f"partition into {B}^{n} = {B**n} subcubes exceeds budget {budget}")


def grid_index(flat: int, B: int, n: int) -> Tuple[int, ...]:
    """Integer grid coordinates of subcube ``flat``, first coordinate varying fastest."""
    return tuple(int(i) for i in np.unravel_index(flat, (B,) * n, order="F"))


def partition_cube(Q: CubeSpec, B: int, budget: Optional[int] = None) -> List[CubeSpec]:
    """B^n equal subcubes tiling Q, ordered by grid coordinates (first fastest)."""
    if B < 1:
        raise PreconditionError(f"partition parameter must be >= 1, got {B}")
    n = Q.dim
    _check_budget(B, n, budget)
    if B == 1:
        return [Q.model_copy(deep=True)]
    axes = np.eye(n) if Q.axes is None else np.asarray(Q.axes, dtype=float)
    corner = np.asarray(Q.min_corner, dtype=float)
    side = Q.side / B
    cubes = []
    for flat in range(B**n):
        idx = np.asarray(grid_index(flat, B, n), dtype=float)
        cubes.append(CubeSpec(min_corner=(corner + side * (idx @ axes)).tolist(), side=side, axes=Q.axes))
    return cubes


def census_from_table(
    table: CandidateTable,
    B: int,
    threshold: float,
    rule: str = "fixed",
    count_bound: Optional[float] = None,
) -> SubdivisionCensus:
    """Census of the B^n subcubes read off a table aligned with B."""
    if table.align != B:
        raise PreconditionError(f"candidate table aligned with {table.align}, census needs {B}")
    n = table.n
    indices = [table.subcube_index(grid_index(flat, B, n)) for flat in range(B**n)]
    count = sum(1 for v in indices if v > threshold)
    return SubdivisionCensus(
        parent=table.cube,
        B=B,
        threshold=threshold,
        parent_index=table.index(),
        indices=indices,
        count_above=count,
        fraction=count / B ** (n - 1),
        rule=rule,
        count_bound=count_bound,
    )


def census_high_index(
    f: FieldOracle,
    Q: CubeSpec,
    B: int,
    threshold: Optional[float] = None,
    centers_per_side: Optional[int] = None,
    radii_count: Optional[int] = None,
    resolution: Optional[int] = None,
    budget: Optional[int] = None,
    c: Optional[float] = None,
    N0: Optional[float] = None,
) -> SubdivisionCensus:
    """Doubling indices N(q) of the B^n subcubes of Q and the count above ``threshold``.

    Without a threshold the default max(N(Q)/(1+c), N0) is used.
    """
    if B < 1:
        raise PreconditionError(f"partition parameter must be >= 1, got {B}")
    _check_budget(B, Q.dim, budget)
    table = CandidateTable(
        f,
        Q,
        centers_per_side or settings.CUBE_CENTERS_PER_SIDE,
        radii_count or settings.CUBE_RADII_COUNT,
        align=B,
        resolution=resolution,
    )
    if threshold is None:
        threshold = default_threshold(table.index(), c, N0)
    census = census_from_table(table, B, threshold)
    logger.info(f"Census B={B}: {census.count_above} of {B ** Q.dim} subcubes above {threshold:.4g}")
    return census


def default_threshold(parent_index: float, c: Optional[float] = None, N0: Optional[float] = None) -> float:
    """max(N(Q)/(1+c), N0)."""
    c = settings.SUBDIVISION_C if c is None else c
    N0 = settings.SUBDIVISION_N0 if N0 is None else N0
    return max(parent_index / (1 + c), N0)


def reduced_threshold(
    rule: str,
    parent_index: float,
    B: int,
    n: int,
    c1: Optional[float] = None,
    N0: Optional[float] = None,
    kappa: Optional[float] = None,
    fixed: Optional[float] = None,
) -> Tuple[float, Optional[float]]:
    """(threshold, companion count bound) of a level with B^n subcubes."""
    c1 = settings.SUBDIVISION_C1 if c1 is None else c1
    N0 = settings.SUBDIVISION_N0 if N0 is None else N0
    kappa = settings.SUBDIVISION_KAPPA if kappa is None else kappa
    log_b = math.log(B)
    if rule == "blogb":
        exponent = c1 * log_b / max(math.log(log_b), 1.0) if log_b > 0 else 0.0
        return max(parent_index * 2.0 ** (-exponent), N0), None
    if rule == "log-power":
        if log_b <= 0:
            raise PreconditionError("log-power rule needs B >= 2")
        return max(parent_index / log_b**kappa, N0), B ** (n - 1) / log_b**kappa
    if rule == "fixed":
        if fixed is None:
            raise PreconditionError("fixed rule needs a threshold value")
        return fixed, None
    raise PreconditionError(f"unknown threshold rule {rule!r}; expected one of {THRESHOLD_RULES}")


def iterated_census(
    f: FieldOracle,
    Q: CubeSpec,
    A: int,
    k: int,
    rule: str = "blogb",
    c1: Optional[float] = None,
    N0: Optional[float] = None,
    kappa: Optional[float] = None,
    fixed: Optional[float] = None,
    centers_per_side: Optional[int] = None,
    radii_count: Optional[int] = None,
    resolution: Optional[int] = None,
    budget: Optional[int] = None,
) -> List[SubdivisionCensus]:
    """Censuses at B = A, A^2, ..., A^k with the rule's reduced threshold per level."""
    if A < 2 or k < 1:
        raise PreconditionError(f"need A >= 2 and k >= 1, got A={A}, k={k}")
    _check_budget(A**k, Q.dim, budget)
    levels = []
    for j in range(1, k + 1):
        B = A**j
        table = CandidateTable(
            f,
            Q,
            centers_per_side or settings.CUBE_CENTERS_PER_SIDE,
            radii_count or settings.CUBE_RADII_COUNT,
            align=B,
            resolution=resolution,
        )
        threshold, bound = reduced_threshold(rule, table.index(), B, Q.dim, c1, N0, kappa, fixed)
        census = census_from_table(table, B, threshold, rule, bound)
        logger.info(
            f"Level {j} (B={B}): threshold {threshold:.4g}, {census.count_above} above, "
            f"fraction {census.fraction:.4g}"
        )
        levels.append(census)
    return levels


# ---- exact combinatorics --------------------------------------------


def binomial_tail_exact(p: Rational, k: int, l: int) -> Fraction:
    """sum_{i < l} C(k, i) p^(k-i) (1-p)^i in exact rational arithmetic."""
    p = as_fraction(p)
    if not 0 <= l <= k:
        raise PreconditionError(f"need 0 <= l <= k, got l={l}, k={k}")
    q = 1 - p
    return sum((math.comb(k, i) * p ** (k - i) * q**i for i in range(l)), Fraction(0))


def _rhs_exponent(k: int, epsilon: float) -> Fraction:
    """k(1 - eps) as an exact rational when eps has a small denominator, else its ceiling."""
    eps = Fraction(epsilon).limit_denominator(EXACT_EXPONENT_DENOMINATOR)
    if float(eps) == epsilon:
        return k * (1 - eps)
    return Fraction(math.ceil(k * (1 - epsilon)))


def tail_within_claim(tail: Fraction, p: Fraction, exponent: Fraction) -> bool:
    """tail <= p^exponent, compared as tail^b <= p^a for exponent = a/b."""
    a, b = exponent.numerator, exponent.denominator
    return tail**b <= p**a


def claim_k0_search(p: Rational, epsilon: float, sigma: float, k_max: int) -> TailParams:
    """Smallest k0 with tail(p, k, l) <= p^(k(1-eps)) for all k0 <= k <= k_max, l <= sigma k / ln k."""
    p = as_fraction(p)
    if not 0 < p < 1:
        raise PreconditionError(f"p must lie in (0, 1), got {p}")
    if not 0 < epsilon < 1:
        raise PreconditionError(f"epsilon must lie in (0, 1), got {epsilon}")
    if sigma <= 0 or sigma >= epsilon / 3 * math.log(1 / p):
        raise PreconditionError(
            f"need 0 < sigma < (eps/3) ln(1/p) = {epsilon / 3 * math.log(1 / p):.6g}, got {sigma}"
        )
    if k_max < 10:
        raise PreconditionError(f"k_max must be >= 10, got {k_max}")

    q = 1 - p
    largest_violation = 1
    checked = 0
    for k in range(2, k_max + 1):
        l_max = min(int(math.floor(sigma * k / math.log(k))), k)
        exponent = _rhs_exponent(k, epsilon)
        tail = Fraction(0)
        for l in range(0, l_max + 1):
            if l > 0:
                i = l - 1
                tail += math.comb(k, i) * p ** (k - i) * q**i
            checked += 1
            if not tail_within_claim(tail, p, exponent):
                largest_violation = k
                break
    k0 = largest_violation + 1
    if k0 > k_max:
        raise ClaimSearchError(largest_violation, k_max)
    logger.info(f"Tail claim holds for k in [{k0}, {k_max}] ({checked} pairs checked)")
    return TailParams(p=str(p), epsilon=epsilon, sigma=sigma, k0=k0, k_max=k_max, checked=checked)


def iteration_keep_probability(A: int) -> Fraction:
    """1/(2A), the largest keep probability the iteration hypothesis allows."""
    if A < 1:
        raise PreconditionError(f"A must be >= 1, got {A}")
    return Fraction(1, 2 * A)


def exact_reduction_distribution(p: Rational, k: int) -> List[Fraction]:
    """P(#reductions = i), i = 0..k, by dynamic programming over the steps."""
    p = as_fraction(p)
    dist = [Fraction(1)]
    for _ in range(k):
        nxt = [Fraction(0)] * (len(dist) + 1)
        for i, mass in enumerate(dist):
            nxt[i] += mass * p
            nxt[i + 1] += mass * (1 - p)
        dist = nxt
    return dist


def reduction_tail(dist: IterationDistribution, l: int) -> Fraction:
    """P(#reductions >= l), the mass with N_final <= max(N_start/(1+c)^l, N0)."""
    return sum((Fraction(o.probability) for o in dist.exact if o.reductions >= l), Fraction(0))


def simulate_iteration_process(
    p: Rational,
    c: float,
    N_start: float,
    N0: float,
    k: int,
    trials: int,
    seed: int,
) -> IterationDistribution:
    """Keep N with probability p, else divide by (1+c), floored at N0; exact and Monte Carlo."""
    p = as_fraction(p)
    if not 0 <= p <= 1:
        raise PreconditionError(f"p must lie in [0, 1], got {p}")
    if trials < 1 or k < 0 or c <= 0:
        raise PreconditionError("need trials >= 1, k >= 0 and c > 0")
    exact = [
        IterationOutcome(
            reductions=i,
            value=max(N_start / (1 + c) ** i, N0),
            probability=str(mass),
        )
        for i, mass in enumerate(exact_reduction_distribution(p, k))
    ]
    rng = np.random.default_rng(seed)
    reductions = (rng.random((trials, k)) >= float(p)).sum(axis=1) if k else np.zeros(trials, dtype=int)
    empirical = (np.bincount(reductions, minlength=k + 1) / trials).tolist()
    return IterationDistribution(
        p=str(p), c=c, N_start=N_start, N0=N0, k=k, trials=trials, seed=seed, exact=exact, empirical=empirical
    )
