"""Energy-allocation tree species: exact census tables and growth rates.

Each tree carries a fixed gene-number g in [0, 1]: the fraction of its
daily 2 energy units banked for survival, the rest going to reproduction.
The daily schedule (one canonical intra-day ordering, validated against
the 31-day two-species reference census in the tests) is:

    1. morning: births scheduled yesterday materialize with accounts
       (survival=3, reproduction=0) and participate fully today;
    2. collection: +g to survival, +(2-g) to reproduction;
    3. reproduction: while reproduction >= 3, withdraw 3 and schedule one
       birth for tomorrow morning;
    4. survival check: if survival < 1 the tree dies -- it is still
       counted in today's census and removed before tomorrow; otherwise
       withdraw 1;
    5. census recorded.

A birth scheduled in step 3 is honored even if the parent dies in step 4
the same day, so for some g < 1/2 the last birth materializes the morning
after the parent's death day.

Gene-numbers and accounts are exact rationals and census counts are exact
unbounded integers: no threshold comparison is ever decided by float
rounding.  Floating point appears only inside growth-rate root finding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Sequence

__all__ = [
    "TreeSpecies",
    "Tree",
    "LifeTable",
    "CohortState",
    "CensusTable",
    "IndividualRunResult",
    "GrowthRate",
    "SweepResult",
    "life_table",
    "simulate_census",
    "simulate_individuals",
    "growth_rate",
    "optimality_sweep",
    "roi_series",
]

NEWBORN_SURVIVAL = Fraction(3)
DAILY_INCOME = Fraction(2)
BIRTH_COST = Fraction(3)
SUSTENANCE = Fraction(1)


def _as_exact(value) -> Fraction:
    """Coerce to an exact rational, rejecting floats outright."""
    if isinstance(value, float):
        raise TypeError(
            "gene_number must be exact (int, Fraction, or 'p/q' string), not float"
        )
    return Fraction(value)


@dataclass(frozen=True)
class TreeSpecies:
    """A species is its gene-number: the survival share of daily energy."""

    gene_number: Fraction

    def __post_init__(self):
        g = _as_exact(self.gene_number)
        if not 0 <= g <= 1:
            raise ValueError(f"gene_number must lie in [0, 1], got {g}")
        object.__setattr__(self, "gene_number", g)

    @property
    def label(self) -> str:
        return str(self.gene_number)


@dataclass
class Tree:
    """One tree with its two exact energy accounts."""

    species: TreeSpecies
    survival: Fraction
    reproduction: Fraction
    birth_day: int

    @classmethod
    def newborn(cls, species: TreeSpecies, birth_day: int) -> "Tree":
        return cls(species, NEWBORN_SURVIVAL, Fraction(0), birth_day)


@dataclass(frozen=True)
class LifeTable:
    """Reproduction ages and death age implied by a gene-number.

    birth_ages are the ages (days since birth) at which one child
    materializes.  Mortal species have a finite tuple and an integer
    death_age; an immortal species has death_age None and an arithmetic
    tail (first_age, step) after the finite prefix.  Honoring posthumous
    births means a final birth age may equal death_age + 1.
    """

    birth_ages: tuple[int, ...]
    death_age: Optional[int]
    periodic: Optional[tuple[int, int]] = None

    def __post_init__(self):
        ages = self.birth_ages
        if any(a <= 0 for a in ages):
            raise ValueError("birth ages must be positive")
        if list(ages) != sorted(set(ages)):
            raise ValueError("birth ages must be strictly increasing")
        if self.death_age is None:
            if self.periodic is None:
                raise ValueError("immortal life table needs a periodic tail")
            first, step = self.periodic
            if step <= 0 or first <= 0:
                raise ValueError("periodic tail must have positive first age and step")
            if ages and ages[-1] >= first:
                raise ValueError("periodic tail must start after the finite prefix")
        else:
            if self.periodic is not None:
                raise ValueError("mortal life table cannot have a periodic tail")
            if any(a > self.death_age + 1 for a in ages):
                raise ValueError("birth ages may exceed death_age by at most 1 (posthumous)")

    @property
    def is_immortal(self) -> bool:
        return self.death_age is None

    def ages_up_to(self, limit: int) -> Iterator[int]:
        """All birth ages <= limit, in increasing order."""
        for a in self.birth_ages:
            if a > limit:
                return
            yield a
        if self.periodic is not None:
            first, step = self.periodic
            a = first
            while a <= limit:
                yield a
                a += step

    def alive_at_age(self, age: int) -> bool:
        """Census window: a tree is counted at ages 0 .. death_age inclusive."""
        if age < 0:
            return False
        return self.death_age is None or age <= self.death_age

    def lattice_period(self) -> int:
        """gcd of all birth ages: the census-ratio period of the schedule."""
        ages = list(self.birth_ages)
        if self.periodic is not None:
            first, step = self.periodic
            ages.extend([first, first + step])
        return math.gcd(*ages) if ages else 0


def life_table(species: TreeSpecies) -> LifeTable:
    """Derive the life table by simulating one tree under the daily schedule.

    Mortal species (g < 1) run until death.  For g = 1 the survival account
    is a fixed point of the daily update, so the tree never dies; the
    reproduction account is then simulated until its state repeats, which
    proves the birth schedule periodic from that point on.
    """
    g = species.gene_number
    survival_delta = g - SUSTENANCE  # applied after each survived day

    if g == 1:
        # Immortal: survival is constant, so the whole daily state is the
        # reproduction account; a repeated value proves periodicity.
        ages: list[int] = []
        seen: dict[Fraction, int] = {}
        reproduction = Fraction(0)
        day = 0
        while reproduction not in seen:
            seen[reproduction] = day
            reproduction += DAILY_INCOME - g
            births_today = 0
            while reproduction >= BIRTH_COST:
                reproduction -= BIRTH_COST
                births_today += 1
            if births_today:
                # one birth per cycle is all this model produces (income < cost)
                ages.append(day + 1)
            day += 1
        cycle_start = seen[reproduction]
        cycle_len = day - cycle_start
        in_cycle = [a for a in ages if a - 1 >= cycle_start]
        if len(in_cycle) != 1:
            raise AssertionError("immortal schedule should produce one birth per cycle")
        prefix = tuple(a for a in ages if a - 1 < cycle_start)
        return LifeTable(prefix, None, periodic=(in_cycle[0], cycle_len))

    ages = []
    survival = NEWBORN_SURVIVAL
    reproduction = Fraction(0)
    age = 0
    while True:
        survival += g
        reproduction += DAILY_INCOME - g
        while reproduction >= BIRTH_COST:
            reproduction -= BIRTH_COST
            ages.append(age + 1)  # materializes tomorrow morning
        if survival < 1:
            return LifeTable(tuple(ages), age)
        survival -= SUSTENANCE
        age += 1


@dataclass
class CohortState:
    """Per-species birth bookkeeping for the cohort recurrence.

    births_by_day[d] counts trees materializing on day d (the founder is a
    birth on day 0).  Each day's births follow from the life table:
    births(d) = sum over birth ages a of births(d - a).
    """

    table: LifeTable
    births_by_day: list[int] = field(default_factory=lambda: [1])
    current_day: int = 0

    def step(self) -> None:
        d = self.current_day + 1
        total = sum(
            self.births_by_day[d - a] for a in self.table.ages_up_to(d) if d - a >= 0
        )
        self.births_by_day.append(total)
        self.current_day = d

    def census(self, day: int) -> int:
        if not 0 <= day <= self.current_day:
            raise ValueError(f"day {day} outside simulated range")
        return sum(
            n
            for born, n in enumerate(self.births_by_day[: day + 1])
            if self.table.alive_at_age(day - born)
        )


@dataclass
class CensusTable:
    """Exact per-day, per-species alive counts."""

    species: tuple[TreeSpecies, ...]
    days: int
    counts: tuple[tuple[int, ...], ...]  # counts[species_index][day]

    def row(self, day: int) -> tuple[int, ...]:
        return tuple(c[day] for c in self.counts)

    def series(self, species_index: int) -> tuple[int, ...]:
        return self.counts[species_index]

    def csv_rows(self) -> Iterator[tuple[int, str, int]]:
        for day in range(self.days + 1):
            for sp, series in zip(self.species, self.counts):
                yield day, sp.label, series[day]


def simulate_census(species_list: Sequence[TreeSpecies], days: int) -> CensusTable:
    """Cohort recurrence: one newborn founder per species, exact counts."""
    if days < 0:
        raise ValueError("days must be >= 0")
    columns = []
    for sp in species_list:
        cohort = CohortState(life_table(sp))
        for _ in range(days):
            cohort.step()
        columns.append(tuple(cohort.census(d) for d in range(days + 1)))
    return CensusTable(tuple(species_list), days, tuple(columns))


@dataclass
class IndividualRunResult:
    census: CensusTable
    final_trees: list[Tree]
    cap_exceeded: bool
    completed_days: int


def simulate_individuals(
    species_list: Sequence[TreeSpecies],
    days: int,
    cap: Optional[int] = None,
) -> IndividualRunResult:
    """Tree-by-tree reference simulation (the oracle for simulate_census).

    Every tree's accounts are stepped individually through the daily
    schedule.  If the living population would exceed `cap`, the run stops
    with cap_exceeded set and the census truncated to the completed days --
    never silently.
    """
    if days < 0:
        raise ValueError("days must be >= 0")
    trees: list[list[Tree]] = [[Tree.newborn(sp, 0)] for sp in species_list]
    pending: list[int] = [0 for _ in species_list]  # births for tomorrow
    columns: list[list[int]] = [[] for _ in species_list]
    cap_exceeded = False
    completed = -1

    for day in range(days + 1):
        if day > 0:
            for idx, sp in enumerate(species_list):
                trees[idx].extend(
                    Tree.newborn(sp, day) for _ in range(pending[idx])
                )
        if cap is not None and sum(len(t) for t in trees) > cap:
            cap_exceeded = True
            break
        for idx, sp in enumerate(species_list):
            g = sp.gene_number
            alive_after_today = []
            births_tomorrow = 0
            censused = 0
            for tree in trees[idx]:
                tree.survival += g
                tree.reproduction += DAILY_INCOME - g
                while tree.reproduction >= BIRTH_COST:
                    tree.reproduction -= BIRTH_COST
                    births_tomorrow += 1
                censused += 1  # dying trees are still counted today
                if tree.survival < 1:
                    continue
                tree.survival -= SUSTENANCE
                alive_after_today.append(tree)
            trees[idx] = alive_after_today
            pending[idx] = births_tomorrow
            columns[idx].append(censused)
        completed = day

    table = CensusTable(
        tuple(species_list),
        completed,
        tuple(tuple(col[: completed + 1]) for col in columns),
    )
    return IndividualRunResult(table, [t for group in trees for t in group], cap_exceeded, completed)


@dataclass(frozen=True)
class GrowthRate:
    """Asymptotic per-day growth factor and the equation residual at it."""

    lambda_per_day: float
    residual: float


def _schedule_sum(table: LifeTable, lam: float) -> float:
    """sum over birth ages a of lam**(-a), closed form for the periodic tail."""
    total = sum(lam ** -a for a in table.birth_ages)
    if table.periodic is not None:
        first, step = table.periodic
        if lam <= 1.0:
            return math.inf
        total += lam**-first / (1.0 - lam**-step)
    return total


def growth_rate(table: LifeTable) -> GrowthRate:
    """Root of  sum over birth ages a of lambda**(-a) = 1  by bisection.

    The left side is strictly decreasing in lambda, so a sign-changing
    bracket is preserved at every step; bisection runs to float
    convergence, far below the 1e-12 contract.  An empty schedule has no
    root: the species dies out and lambda is reported as 0.
    """
    if not table.birth_ages and table.periodic is None:
        return GrowthRate(0.0, 0.0)
    if table.periodic is None and len(table.birth_ages) == 1:
        return GrowthRate(1.0, 0.0)  # replacement only, root is exact

    def f(lam: float) -> float:
        return _schedule_sum(table, lam) - 1.0

    lo = 1.0 + 1e-9 if table.periodic is not None else 1.0
    hi = 2.0
    while f(hi) > 0.0:
        hi *= 2.0
    for _ in range(200):
        mid = (lo + hi) / 2.0
        if mid == lo or mid == hi:
            break
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    lam = (lo + hi) / 2.0
    return GrowthRate(lam, f(lam))


@dataclass
class SweepResult:
    rows: list[tuple[TreeSpecies, LifeTable, GrowthRate]]
    argmax: list[TreeSpecies]


def optimality_sweep(
    g_grid: Iterable, threads: int = 1
) -> SweepResult:
    """lambda(g) over a grid, with exact tie reporting in the argmax set.

    lambda is piecewise constant in g (schedules only change at integer-day
    thresholds), so grid points sharing a schedule tie exactly; the rates
    are memoized per schedule to make those ties bit-identical.  Grid
    points are independent pure computations and may be evaluated in
    parallel.
    """
    species = [g if isinstance(g, TreeSpecies) else TreeSpecies(_as_exact(g)) for g in g_grid]
    if not species:
        raise ValueError("empty sweep grid")

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            tables = list(pool.map(life_table, species))
    else:
        tables = [life_table(sp) for sp in species]

    rate_by_schedule: dict[tuple, GrowthRate] = {}
    rows = []
    for sp, table in zip(species, tables):
        key = (table.birth_ages, table.periodic)
        if key not in rate_by_schedule:
            rate_by_schedule[key] = growth_rate(table)
        rows.append((sp, table, rate_by_schedule[key]))

    best = max(r.lambda_per_day for _, _, r in rows)
    argmax = [sp for sp, _, r in rows if r.lambda_per_day == best]
    return SweepResult(rows, argmax)


def roi_series(values: Sequence[int], lag: int = 1) -> list[Optional[Fraction]]:
    """Copies-this-generation over copies-lag-generations-ago, exactly.

    Entry d is values[d] / values[d - lag] for d >= lag; a zero denominator
    yields None (absent), never a number.
    """
    if lag < 1:
        raise ValueError("lag must be >= 1")
    if len(values) < 2:
        raise ValueError("need at least 2 census rows")
    out: list[Optional[Fraction]] = []
    for d in range(lag, len(values)):
        prev = values[d - lag]
        out.append(Fraction(values[d], prev) if prev != 0 else None)
    return out
