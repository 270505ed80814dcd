"""Sequence replication with per-site error profiles and immune escape.

Genomes are strands over {A, C, G, U} with named regions (coat,
polymerase, ...).  Replication copies a strand site by site; each site
independently substitutes to one of the three other letters with a
per-site probability from a MutationProfile.  An immune system posts
"kill on sight" posters keyed to exact coat subsequences after a delay;
populations escape by mutating the coat faster than posters appear.

The daily population cycle is: replicate (each virion is replaced by R
mutated offspring), immune step (new posters for unseen coats, active
posters kill), capacity cull (uniform random).  Everything is driven by
one per-run RNG stream, so a (config, seed) pair fixes the full event
trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import rng as rng_mod
from .kernels import mutate_sites

__all__ = [
    "LETTERS",
    "Genome",
    "MutationProfile",
    "Poster",
    "Virion",
    "PopulationState",
    "Antibody",
    "EscapeConfig",
    "PairOutcome",
    "EscapeReport",
    "ProfileLengthMismatch",
    "MissingRegion",
    "RegionMapMismatch",
    "SpaceExhausted",
    "ExperimentConfigError",
    "replicate",
    "replicate_batch",
    "mutant_fraction",
    "coat_signature",
    "immune_step",
    "cull_to_capacity",
    "run_population_day",
    "run_escape_experiment",
    "sign_test_p",
    "vdj_generate",
    "happiness",
]

LETTERS = "ACGU"
_CODE_TO_ASCII = bytes.maketrans(bytes([0, 1, 2, 3]), LETTERS.encode())
_ASCII_TO_CODE = bytes.maketrans(LETTERS.encode(), bytes([0, 1, 2, 3]))

DEFAULT_IMMUNE_DELAY = 3
DEFAULT_KILL_PROBABILITY = 0.5


class ProfileLengthMismatch(ValueError):
    """Mutation profile length differs from genome length."""


class MissingRegion(KeyError):
    """A named region is absent from the genome's region map."""


class RegionMapMismatch(ValueError):
    """Two genomes that must share a region map do not."""


class SpaceExhausted(ValueError):
    """More distinct variable regions requested than the alphabet allows."""


class ExperimentConfigError(ValueError):
    """Invalid experiment configuration; names the offending field."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field_name = field_name


def _codes_to_str(codes: np.ndarray) -> str:
    return bytes(codes).translate(_CODE_TO_ASCII).decode("ascii")


def _str_to_codes(seq: str) -> np.ndarray:
    if not set(seq) <= set(LETTERS):
        raise ValueError(f"sequence letters must be drawn from {LETTERS}")
    return np.frombuffer(seq.encode("ascii").translate(_ASCII_TO_CODE), dtype=np.uint8).copy()


def _check_regions(regions: dict, length: int) -> dict:
    """Regions must sit inside the strand and be pairwise disjoint."""
    clean = {}
    for name, (start, stop) in sorted(regions.items()):
        start, stop = int(start), int(stop)
        if not (0 <= start < stop <= length):
            raise ValueError(f"region {name!r} [{start},{stop}) outside strand of length {length}")
        clean[name] = (start, stop)
    spans = sorted(clean.values())
    for (_, prev_stop), (next_start, _) in zip(spans, spans[1:]):
        if next_start < prev_stop:
            raise ValueError("regions must be pairwise disjoint")
    return clean


class Genome:
    """A strand of letter codes plus an immutable named-region map."""

    __slots__ = ("codes", "regions")

    def __init__(self, codes: np.ndarray, regions: Optional[dict] = None):
        codes = np.asarray(codes, dtype=np.uint8)
        if codes.ndim != 1:
            raise ValueError("a genome is a 1-d strand")
        if codes.size and codes.max() > 3:
            raise ValueError("letter codes must be 0..3")
        self.codes = codes
        self.regions = _check_regions(regions or {}, codes.size)

    @classmethod
    def from_string(cls, seq: str, regions: Optional[dict] = None) -> "Genome":
        return cls(_str_to_codes(seq), regions)

    @property
    def seq(self) -> str:
        return _codes_to_str(self.codes)

    def __len__(self) -> int:
        return self.codes.size

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Genome)
            and np.array_equal(self.codes, other.codes)
            and self.regions == other.regions
        )

    def __repr__(self) -> str:
        head = self.seq if len(self) <= 24 else self.seq[:21] + "..."
        return f"Genome({head!r}, regions={self.regions})"

    def region_slice(self, name: str) -> np.ndarray:
        if name not in self.regions:
            raise MissingRegion(name)
        start, stop = self.regions[name]
        return self.codes[start:stop]


class MutationProfile:
    """Per-site substitution probabilities, all in [0, 1)."""

    __slots__ = ("site_prob", "kind")

    def __init__(self, site_prob: np.ndarray, kind: str = "custom"):
        p = np.asarray(site_prob, dtype=np.float64)
        if p.ndim != 1:
            raise ValueError("site probabilities must be a 1-d vector")
        if p.size and (p.min() < 0.0 or p.max() >= 1.0):
            raise ValueError("site probabilities must lie in [0, 1)")
        self.site_prob = p
        self.kind = kind

    def __len__(self) -> int:
        return self.site_prob.size

    @classmethod
    def uniform(cls, rate: float, length: int) -> "MutationProfile":
        return cls(np.full(length, float(rate)), kind="uniform")

    @classmethod
    def region_multiplier(
        cls, base: float, length: int, regions: dict, factors: dict
    ) -> "MutationProfile":
        """Base rate everywhere, multiplied inside named hot or cold regions."""
        regions = _check_regions(regions, length)
        p = np.full(length, float(base))
        for name, factor in factors.items():
            if name not in regions:
                raise MissingRegion(name)
            start, stop = regions[name]
            p[start:stop] *= float(factor)
        return cls(p, kind="region_multiplier")

    @classmethod
    def shells(cls, boundaries: Sequence[int], rates: Sequence[float], length: int) -> "MutationProfile":
        """Concentric tiers: sites [0,b0) are the core, then [b0,b1), ...

        Tier rates must be non-decreasing from core outward: the innermost
        shell is copied most faithfully, each shell outward tolerates more
        error.
        """
        bounds = [int(b) for b in boundaries]
        if list(bounds) != sorted(bounds) or (bounds and not 0 < bounds[0]):
            raise ValueError("shell boundaries must be positive and increasing")
        if bounds and bounds[-1] > length:
            raise ValueError("shell boundaries must not exceed the strand length")
        if len(rates) != len(bounds) + 1:
            raise ValueError("need exactly one rate per tier (boundaries + 1)")
        rr = [float(r) for r in rates]
        if any(b > a for a, b in zip(rr[1:], rr)):
            raise ValueError("tier rates must be non-decreasing from core to boundary")
        p = np.empty(length, dtype=np.float64)
        edges = [0, *bounds, length]
        for (start, stop), rate in zip(zip(edges, edges[1:]), rr):
            p[start:stop] = rate
        return cls(p, kind="shells")


def replicate(genome: Genome, profile: MutationProfile, gen: np.random.Generator) -> Genome:
    """One offspring strand; each site flips with its profile probability."""
    if len(profile) != len(genome):
        raise ProfileLengthMismatch(
            f"profile length {len(profile)} != genome length {len(genome)}"
        )
    child = genome.codes.copy().reshape(1, -1)
    mutate_sites(child, profile.site_prob, gen)
    return Genome(child[0], genome.regions)


def replicate_batch(
    parent_codes: np.ndarray, profile: MutationProfile, gen: np.random.Generator
):
    """Mutate a whole matrix of offspring strands in place.

    parent_codes has one row per offspring (already repeated per parent).
    Returns the kernel's flip report (rows, cols, old, new) in row-major
    order.
    """
    if parent_codes.shape[1] != len(profile):
        raise ProfileLengthMismatch(
            f"profile length {len(profile)} != strand length {parent_codes.shape[1]}"
        )
    return mutate_sites(parent_codes, profile.site_prob, gen)


def mutant_fraction(
    genome: Genome, profile: MutationProfile, n: int, gen: np.random.Generator
) -> float:
    """Fraction of n offspring carrying at least one substitution."""
    if n <= 0:
        raise ValueError("n must be positive")
    batch = np.repeat(genome.codes.reshape(1, -1), n, axis=0)
    rows, _, _, _ = replicate_batch(batch, profile, gen)
    return np.unique(rows).size / n


def coat_signature(genome: Genome, region: str = "coat") -> str:
    """The exact coat subsequence: what an immune poster matches against."""
    return _codes_to_str(genome.region_slice(region))


@dataclass(frozen=True)
class Poster:
    """Kill-on-sight notice for one exact coat subsequence."""

    signature: str
    creation_day: int
    activation_day: int
    kill_probability: float

    def __post_init__(self):
        if not 0.0 <= self.kill_probability <= 1.0:
            raise ValueError("kill probability must lie in [0, 1]")
        if self.activation_day < self.creation_day:
            raise ValueError("a poster cannot activate before it is created")

    def active(self, day: int) -> bool:
        return day >= self.activation_day


@dataclass(frozen=True)
class Virion:
    genome: Genome
    id: int
    parent_id: Optional[int]


class PopulationState:
    """A day-indexed virion population with its immune poster board.

    Virions live in parallel arrays (one codes row per virion) so the
    mutation kernel can run on the whole population at once; the
    `virions` property materializes object views for inspection.
    """

    def __init__(
        self,
        founder: Genome,
        n_founders: int,
        capacity: int,
        gen: np.random.Generator,
        immune_delay: int = DEFAULT_IMMUNE_DELAY,
        kill_probability: float = DEFAULT_KILL_PROBABILITY,
        coat_region: str = "coat",
        record_events: bool = False,
    ):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if n_founders < 1:
            raise ValueError("need at least one founder")
        if immune_delay < 0:
            raise ValueError("immune delay must be >= 0")
        founder.region_slice(coat_region)  # raises MissingRegion early
        self.regions = founder.regions
        self.coat_span = founder.regions[coat_region]
        self.codes = np.repeat(founder.codes.reshape(1, -1), n_founders, axis=0)
        self.ids = np.arange(n_founders, dtype=np.int64)
        self.parent_ids = np.full(n_founders, -1, dtype=np.int64)  # -1: founder
        self.next_id = n_founders
        self.day = 0
        self.capacity = capacity
        self.gen = gen
        self.immune_delay = immune_delay
        self.kill_probability = kill_probability
        self.posters: dict[str, Poster] = {}
        self.record_events = record_events
        self.events: list[dict] = []
        self.peak_population = n_founders

    @property
    def population(self) -> int:
        return self.codes.shape[0]

    @property
    def virions(self) -> list[Virion]:
        out = []
        for row, vid, pid in zip(self.codes, self.ids, self.parent_ids):
            out.append(
                Virion(Genome(row.copy(), self.regions), int(vid), None if pid < 0 else int(pid))
            )
        return out

    def _signatures(self) -> list[str]:
        start, stop = self.coat_span
        coat = np.ascontiguousarray(self.codes[:, start:stop])
        return [_codes_to_str(row) for row in coat]

    def _log(self, **event) -> None:
        if self.record_events:
            self.events.append(event)


def replicate_population(state: PopulationState, profile: MutationProfile, offspring_per_virion: int) -> None:
    """Generational replacement: every virion is replaced by R offspring."""
    if offspring_per_virion < 1:
        raise ValueError("offspring_per_virion must be >= 1")
    if state.population == 0:
        return
    parents = np.repeat(state.ids, offspring_per_virion)
    batch = np.repeat(state.codes, offspring_per_virion, axis=0)
    rows, cols, old, new = replicate_batch(batch, profile, state.gen)
    n = batch.shape[0]
    child_ids = np.arange(state.next_id, state.next_id + n, dtype=np.int64)
    state.next_id += n
    if state.record_events:
        sites_by_row: dict[int, list] = {}
        for r, c in zip(rows.tolist(), cols.tolist()):
            sites_by_row.setdefault(r, []).append(c)
        for i in range(n):
            state._log(
                kind="birth",
                day=state.day,
                id=int(child_ids[i]),
                parent=int(parents[i]),
                sites=sites_by_row.get(i, []),
            )
    state.codes = batch
    state.ids = child_ids
    state.parent_ids = parents


def immune_step(state: PopulationState) -> PopulationState:
    """Post unseen coats, then let every active poster take its shots.

    A virion is killable only by the poster whose signature equals its
    current coat; poster creation this day precedes kills, so with zero
    delay a poster can fire the day it appears.
    """
    sigs = state._signatures()
    for sig in dict.fromkeys(sigs):  # first-seen order, deduplicated
        if sig not in state.posters:
            poster = Poster(
                sig,
                state.day,
                state.day + state.immune_delay,
                state.kill_probability,
            )
            state.posters[sig] = poster
            state._log(
                kind="poster", day=state.day, signature=sig,
                activation=poster.activation_day,
            )
    if state.population == 0:
        return state
    keep = np.ones(state.population, dtype=bool)
    for i, sig in enumerate(sigs):
        poster = state.posters[sig]
        if poster.active(state.day) and state.gen.random() < poster.kill_probability:
            keep[i] = False
            state._log(kind="kill", day=state.day, id=int(state.ids[i]), signature=sig)
    state.codes = state.codes[keep]
    state.ids = state.ids[keep]
    state.parent_ids = state.parent_ids[keep]
    return state


def cull_to_capacity(state: PopulationState) -> None:
    """Uniform random bottleneck down to carrying capacity."""
    n = state.population
    if n <= state.capacity:
        return
    keep = np.sort(state.gen.choice(n, size=state.capacity, replace=False))
    removed = np.setdiff1d(np.arange(n), keep)
    state._log(kind="cull", day=state.day, removed=[int(state.ids[i]) for i in removed])
    state.codes = state.codes[keep]
    state.ids = state.ids[keep]
    state.parent_ids = state.parent_ids[keep]


def run_population_day(
    state: PopulationState, profile: MutationProfile, offspring_per_virion: int
) -> None:
    """One full day: replicate, immune step, capacity cull."""
    state.day += 1
    replicate_population(state, profile, offspring_per_virion)
    immune_step(state)
    cull_to_capacity(state)
    state.peak_population = max(state.peak_population, state.population)


@dataclass(frozen=True)
class EscapeConfig:
    """Paired hot-coat vs high-fidelity escape experiment parameters."""

    genome_length: int = 300
    coat_span: tuple[int, int] = (0, 60)
    base_rate: float = 1.0 / 2000.0
    hot_factor: float = 10.0
    fidelity_rate: float = 1e-9
    offspring_per_virion: int = 2
    capacity: int = 150
    immune_delay: int = 3
    kill_probability: float = 0.75
    horizon: int = 40
    n_founders: int = 10
    n_pairs: int = 100
    master_seed: int = 0

    def __post_init__(self):
        def bad(name, msg):
            raise ExperimentConfigError(name, msg)

        if self.genome_length < 1:
            bad("genome_length", "must be >= 1")
        lo, hi = self.coat_span
        if not (0 <= lo < hi <= self.genome_length):
            bad("coat_span", "must be a non-empty interval inside the genome")
        if not 0.0 <= self.base_rate < 1.0:
            bad("base_rate", "must lie in [0, 1)")
        if self.hot_factor < 0 or self.base_rate * self.hot_factor >= 1.0:
            bad("hot_factor", "hot-region rate must stay in [0, 1)")
        if not 0.0 <= self.fidelity_rate < 1.0:
            bad("fidelity_rate", "must lie in [0, 1)")
        if self.offspring_per_virion < 1:
            bad("offspring_per_virion", "must be >= 1")
        if self.capacity < 1:
            bad("capacity", "must be >= 1")
        if self.immune_delay < 0:
            bad("immune_delay", "must be >= 0")
        if not 0.0 <= self.kill_probability <= 1.0:
            bad("kill_probability", "must lie in [0, 1]")
        if self.horizon < 1:
            bad("horizon", "must be >= 1")
        if self.n_founders < 1:
            bad("n_founders", "must be >= 1")
        if self.n_pairs < 1:
            bad("n_pairs", "must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            bad("master_seed", "must be an unsigned 64-bit integer")

    def founder(self) -> Genome:
        return Genome(
            np.zeros(self.genome_length, dtype=np.uint8),
            {"coat": self.coat_span},
        )

    def hot_profile(self) -> MutationProfile:
        return MutationProfile.region_multiplier(
            self.base_rate,
            self.genome_length,
            {"coat": self.coat_span},
            {"coat": self.hot_factor},
        )

    def fidelity_profile(self) -> MutationProfile:
        return MutationProfile.uniform(self.fidelity_rate, self.genome_length)


@dataclass(frozen=True)
class PairOutcome:
    pair_index: int
    hot_extinction_day: Optional[int]
    fidelity_extinction_day: Optional[int]
    hot_peak: int
    fidelity_peak: int


@dataclass(frozen=True)
class EscapeReport:
    config: EscapeConfig
    outcomes: tuple[PairOutcome, ...]
    hot_wins: int
    fidelity_wins: int
    ties: int
    p_value: float


def _run_arm(
    config: EscapeConfig, profile: MutationProfile, gen: np.random.Generator,
    record_events: bool = False,
) -> PopulationState:
    state = PopulationState(
        config.founder(),
        config.n_founders,
        config.capacity,
        gen,
        immune_delay=config.immune_delay,
        kill_probability=config.kill_probability,
        record_events=record_events,
    )
    for _ in range(config.horizon):
        run_population_day(state, profile, config.offspring_per_virion)
        if state.population == 0:
            break
    return state


def _survival_time(state: PopulationState, horizon: int) -> int:
    # horizon + 1 ranks survival-to-horizon above any extinction day
    return state.day if state.population == 0 else horizon + 1


def sign_test_p(wins: int, losses: int) -> float:
    """One-sided sign test: P[X >= wins] for X ~ Binomial(wins+losses, 1/2)."""
    n = wins + losses
    if n == 0:
        return 1.0
    tail = sum(math.comb(n, k) for k in range(wins, n + 1))
    return tail / 2**n


def run_escape_experiment(config: EscapeConfig) -> EscapeReport:
    """Paired comparison: hot-coat mutator vs high-fidelity copier.

    Both arms of pair i consume identical RNG streams derived from
    (master_seed, i), so differences are attributable to the profile.
    """
    hot_profile = config.hot_profile()
    fid_profile = config.fidelity_profile()
    outcomes = []
    hot_wins = fidelity_wins = ties = 0
    for i in range(config.n_pairs):
        hot = _run_arm(config, hot_profile, rng_mod.stream(config.master_seed, i))
        fid = _run_arm(config, fid_profile, rng_mod.stream(config.master_seed, i))
        outcomes.append(
            PairOutcome(
                i,
                None if hot.population > 0 else hot.day,
                None if fid.population > 0 else fid.day,
                hot.peak_population,
                fid.peak_population,
            )
        )
        h, f = _survival_time(hot, config.horizon), _survival_time(fid, config.horizon)
        if h > f:
            hot_wins += 1
        elif f > h:
            fidelity_wins += 1
        else:
            ties += 1
    return EscapeReport(
        config,
        tuple(outcomes),
        hot_wins,
        fidelity_wins,
        ties,
        sign_test_p(hot_wins, fidelity_wins),
    )


@dataclass(frozen=True)
class Antibody:
    """One antibody: a generated variable region on a shared constant region."""

    variable: str
    constant: str

    @property
    def seq(self) -> str:
        return self.variable + self.constant


def vdj_generate(
    constant_region: str,
    n: int,
    gen: np.random.Generator,
    variable_length: int = 8,
) -> list[Antibody]:
    """n antibodies with pairwise distinct variable regions.

    The variable space holds 4**variable_length sequences; asking for more
    raises SpaceExhausted.  Dense requests enumerate and shuffle the whole
    space; sparse requests sample with rejection.
    """
    _str_to_codes(constant_region)  # validates the alphabet
    if n < 0:
        raise ValueError("n must be >= 0")
    if variable_length < 1:
        raise ValueError("variable_length must be >= 1")
    space = 4**variable_length
    if n > space:
        raise SpaceExhausted(
            f"{n} distinct variable regions requested from a space of {space}"
        )

    chosen: list[int] = []
    if n > space // 2:
        order = gen.permutation(space)
        chosen = [int(x) for x in order[:n]]
    else:
        seen = set()
        while len(chosen) < n:
            x = int(gen.integers(0, space))
            if x not in seen:
                seen.add(x)
                chosen.append(x)

    out = []
    for x in chosen:
        codes = [(x >> (2 * k)) & 3 for k in range(variable_length)]
        out.append(Antibody("".join(LETTERS[c] for c in codes), constant_region))
    return out


def happiness(parent: Genome, offspring: Sequence[Genome]) -> dict[str, int]:
    """Per-region count of offspring whose region copies the parent exactly.

    A region is happy in an offspring when the copy left its subsequence
    untouched, raising that subsequence's copy number by one.
    """
    counts = {name: 0 for name in parent.regions}
    for child in offspring:
        if child.regions != parent.regions:
            raise RegionMapMismatch(
                f"offspring regions {child.regions} != parent regions {parent.regions}"
            )
        for name, (start, stop) in parent.regions.items():
            if np.array_equal(child.codes[start:stop], parent.codes[start:stop]):
                counts[name] += 1
    return counts
