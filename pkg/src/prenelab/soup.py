"""Well-mixed stochastic reactor for monomers and linear polymers.

Four monomer letters (A, C, G, U) float free in solution.  A free
monomer can attach to the designated (right) end of a strand, the
terminal letter can detach, and catalyst strands (the P-polymers: any
strand containing the configured motif and not ending in AAA) chop the
terminal A off strands ending in AAA, returning it to solution.

Dimerization treats each free monomer as a length-1 seed: Extend(seed x,
letter y) consumes one x and one y and creates the dimer xy.  For x == y
both reagents come from the same pool, so the pair count is
free(x)*(free(x)-1) rather than the mass-action product of two
independent pools.

The integrator is the exact Gillespie direct method; per-letter mass
(free + bound) is recomputed and asserted after every event.  A fixed
step tau-leap variant exists for speed; it approximates event counts but
applies the same exact per-event bookkeeping, so it too conserves mass
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from . import rng as rng_mod

__all__ = [
    "SOUP_LETTERS",
    "CatalystRule",
    "Reaction",
    "ReactorState",
    "Quiescent",
    "ConservationError",
    "SoupConfigError",
    "SoupConfig",
    "ReplicateOutcome",
    "CatalysisReport",
    "enumerate_reactions",
    "step",
    "run_events",
    "run_until",
    "tau_leap_step",
    "run_catalysis_experiment",
]

SOUP_LETTERS = "ACGU"
_LETTER_INDEX = {c: i for i, c in enumerate(SOUP_LETTERS)}


class Quiescent(RuntimeError):
    """Total propensity is zero: nothing can ever happen again."""


class ConservationError(AssertionError):
    """Per-letter mass accounting broke; the reactor state is corrupt."""


class SoupConfigError(ValueError):
    """Invalid scenario configuration; names the offending field."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field_name = field_name


@dataclass(frozen=True)
class CatalystRule:
    """P-predicate: contains the motif and does not end in AAA."""

    motif: str = "GAAG"

    def __post_init__(self):
        if not self.motif or not set(self.motif) <= set(SOUP_LETTERS):
            raise ValueError(f"motif must be a non-empty string over {SOUP_LETTERS}")

    def __call__(self, seq: str) -> bool:
        return self.motif in seq and not seq.endswith("AAA")


@dataclass(frozen=True)
class Reaction:
    """One reaction channel with its current propensity.

    kind "extend": species (a strand, or a single letter acting as seed)
    gains `letter` at its end.  kind "detach": the terminal letter of
    `species` returns to solution.  kind "catalyze": `species` (the
    catalyst) chops the terminal A off `target`.
    """

    kind: str
    species: str
    propensity: float
    letter: Optional[str] = None
    target: Optional[str] = None


def _letter_counts(seq: str) -> np.ndarray:
    row = np.zeros(4, dtype=np.int64)
    for c in seq:
        row[_LETTER_INDEX[c]] += 1
    return row


class ReactorState:
    """Free monomer pools plus a canonical polymer species table.

    Species rows are stored in parallel arrays; rows whose count reaches
    zero are removed immediately, so two states with the same contents
    compare equal regardless of the order reactions happened to run in.
    """

    def __init__(
        self,
        free: dict[str, int],
        polymers: dict[str, int],
        k_on: float,
        k_off: float,
        k_cat: float,
        catalyst_rule: CatalystRule = CatalystRule(),
    ):
        if min(k_on, k_off, k_cat) < 0:
            raise ValueError("rate constants must be >= 0")
        self.free = np.zeros(4, dtype=np.int64)
        for letter, n in free.items():
            if letter not in _LETTER_INDEX:
                raise ValueError(f"unknown monomer letter {letter!r}")
            if n < 0:
                raise ValueError("counts must be >= 0")
            self.free[_LETTER_INDEX[letter]] = n
        self.k_on = float(k_on)
        self.k_off = float(k_off)
        self.k_cat = float(k_cat)
        self.catalyst_rule = catalyst_rule
        self.time = 0.0
        self.n_events = 0

        self.seqs: list[str] = []
        self.counts = np.zeros(0, dtype=np.int64)
        self.letters = np.zeros((0, 4), dtype=np.int64)
        self.ends_aaa = np.zeros(0, dtype=bool)
        self.is_catalyst = np.zeros(0, dtype=bool)
        self._row: dict[str, int] = {}
        for seq, n in sorted(polymers.items()):
            if len(seq) < 2:
                raise ValueError(f"polymer {seq!r} shorter than 2; monomers go in free")
            if not set(seq) <= set(SOUP_LETTERS):
                raise ValueError(f"polymer {seq!r} uses letters outside {SOUP_LETTERS}")
            if n < 0:
                raise ValueError("counts must be >= 0")
            if n > 0:
                self._add(seq, n)
        self.conserved = self.mass_by_letter()

    # species table bookkeeping

    def _add(self, seq: str, n: int = 1) -> None:
        row = self._row.get(seq)
        if row is None:
            row = len(self.seqs)
            self.seqs.append(seq)
            self.counts = np.append(self.counts, 0)
            self.letters = np.vstack([self.letters, _letter_counts(seq)])
            self.ends_aaa = np.append(self.ends_aaa, seq.endswith("AAA"))
            self.is_catalyst = np.append(self.is_catalyst, self.catalyst_rule(seq))
            self._row[seq] = row
        self.counts[row] += n

    def _remove(self, seq: str, n: int = 1) -> None:
        row = self._row[seq]
        if self.counts[row] < n:
            raise ValueError(f"cannot remove {n} of {seq!r}, only {self.counts[row]} present")
        self.counts[row] -= n
        if self.counts[row] == 0:
            last = len(self.seqs) - 1
            if row != last:
                moved = self.seqs[last]
                self.seqs[row] = moved
                self.counts[row] = self.counts[last]
                self.letters[row] = self.letters[last]
                self.ends_aaa[row] = self.ends_aaa[last]
                self.is_catalyst[row] = self.is_catalyst[last]
                self._row[moved] = row
            self.seqs.pop()
            self.counts = self.counts[:last]
            self.letters = self.letters[:last]
            self.ends_aaa = self.ends_aaa[:last]
            self.is_catalyst = self.is_catalyst[:last]
            del self._row[seq]

    # views

    @property
    def species(self) -> dict[str, int]:
        return {s: int(self.counts[self._row[s]]) for s in self.seqs}

    def count_of(self, seq: str) -> int:
        row = self._row.get(seq)
        return 0 if row is None else int(self.counts[row])

    def free_of(self, letter: str) -> int:
        return int(self.free[_LETTER_INDEX[letter]])

    def mass_by_letter(self) -> np.ndarray:
        """free + bound occurrences, per letter; the conserved quantity."""
        return self.free + self.counts @ self.letters

    def total_strands(self) -> int:
        return int(self.counts.sum())

    def n_catalysts(self) -> int:
        return int(self.counts[self.is_catalyst].sum())

    def n_aaa_enders(self) -> int:
        return int(self.counts[self.ends_aaa].sum())

    def audit(self) -> None:
        if not np.array_equal(self.mass_by_letter(), self.conserved):
            raise ConservationError(
                f"mass drifted: {self.mass_by_letter()} != {self.conserved}"
            )

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ReactorState)
            and np.array_equal(self.free, other.free)
            and self.species == other.species
            and (self.k_on, self.k_off, self.k_cat) == (other.k_on, other.k_off, other.k_cat)
            and self.catalyst_rule == other.catalyst_rule
            and self.time == other.time
        )

    # propensity channel totals

    def _extend_total(self) -> float:
        f = int(self.free.sum())
        return self.k_on * f * (f + self.total_strands() - 1) if f else 0.0

    def _detach_total(self) -> float:
        return self.k_off * self.total_strands()

    def _catalyze_total(self) -> float:
        return self.k_cat * self.n_catalysts() * self.n_aaa_enders()


def enumerate_reactions(state: ReactorState) -> list[Reaction]:
    """Every possible reaction with its propensity, in a stable order."""
    out: list[Reaction] = []
    k_on, k_off, k_cat = state.k_on, state.k_off, state.k_cat
    if k_on > 0:
        for i, seed in enumerate(SOUP_LETTERS):
            for j, letter in enumerate(SOUP_LETTERS):
                pairs = (
                    int(state.free[i]) * (int(state.free[i]) - 1)
                    if i == j
                    else int(state.free[i]) * int(state.free[j])
                )
                if pairs > 0:
                    out.append(Reaction("extend", seed, k_on * pairs, letter=letter))
        for seq in state.seqs:
            n = state.count_of(seq)
            for j, letter in enumerate(SOUP_LETTERS):
                if n > 0 and state.free[j] > 0:
                    out.append(
                        Reaction("extend", seq, k_on * n * int(state.free[j]), letter=letter)
                    )
    if k_off > 0:
        for seq in state.seqs:
            n = state.count_of(seq)
            if n > 0:
                out.append(Reaction("detach", seq, k_off * n))
    if k_cat > 0:
        for cat in state.seqs:
            nc = state.count_of(cat)
            if not (state.is_catalyst[state._row[cat]] and nc > 0):
                continue
            for target in state.seqs:
                nt = state.count_of(target)
                if state.ends_aaa[state._row[target]] and nt > 0:
                    out.append(
                        Reaction("catalyze", cat, k_cat * nc * nt, target=target)
                    )
    return out


def _apply_extend(state: ReactorState, seed: str, letter: str) -> None:
    j = _LETTER_INDEX[letter]
    if len(seed) == 1:
        state.free[_LETTER_INDEX[seed]] -= 1
        state.free[j] -= 1
        state._add(seed + letter)
    else:
        state._remove(seed)
        state.free[j] -= 1
        state._add(seed + letter)
    if state.free.min() < 0:
        raise ConservationError("free pool went negative")


def _apply_detach(state: ReactorState, seq: str) -> None:
    state._remove(seq)
    state.free[_LETTER_INDEX[seq[-1]]] += 1
    if len(seq) == 2:
        state.free[_LETTER_INDEX[seq[0]]] += 1
    else:
        state._add(seq[:-1])


def _apply_catalyze(state: ReactorState, catalyst: str, target: str) -> None:
    # the catalyst is consulted, not consumed
    if catalyst.endswith("AAA"):
        raise AssertionError("catalyst selection produced an AAA-ender")
    if not target.endswith("AAA"):
        raise AssertionError("catalyze target does not end in AAA")
    state._remove(target)
    state._add(target[:-1])
    state.free[_LETTER_INDEX["A"]] += 1


def _weighted_pick(weights: np.ndarray, u: float) -> int:
    """Index i with probability weights[i]/sum, u uniform in [0,1)."""
    cum = np.cumsum(weights, dtype=np.float64)
    return int(np.searchsorted(cum, u * cum[-1], side="right"))


def _sample_extend(state: ReactorState, gen: np.random.Generator) -> tuple[str, str]:
    free = state.free.astype(np.float64)
    seed_weights = np.concatenate([free, state.counts.astype(np.float64)])
    while True:
        si = _weighted_pick(seed_weights, gen.random())
        li = _weighted_pick(free, gen.random())
        if si < 4:
            if si == li:
                # same-pool pair: thin free*free down to free*(free-1)
                if gen.random() >= (state.free[si] - 1) / state.free[si]:
                    continue
            return SOUP_LETTERS[si], SOUP_LETTERS[li]
        return state.seqs[si - 4], SOUP_LETTERS[li]


def step(state: ReactorState, gen: np.random.Generator) -> ReactorState:
    """One exact stochastic event (Gillespie direct method), in place."""
    _apply_peeked(state, _peek_next_time(state, gen))
    return state


def run_events(state: ReactorState, n: int, gen: np.random.Generator) -> ReactorState:
    for _ in range(n):
        step(state, gen)
    return state


def run_until(
    state: ReactorState,
    horizon: float,
    gen: np.random.Generator,
    sample_times: Sequence[float] = (),
    on_sample=None,
) -> ReactorState:
    """Advance to `horizon`, reporting state at each requested sample time.

    on_sample(t, state) fires once per sample time, with the state as of
    that time (the state is piecewise constant between events).  Stops
    early if the reactor goes quiescent, still flushing sample times.
    """
    pending = sorted(sample_times)
    pos = 0
    while state.time < horizon:
        try:
            a = _peek_next_time(state, gen)
        except Quiescent:
            break
        while pos < len(pending) and pending[pos] < min(a.next_time, horizon):
            if on_sample is not None:
                on_sample(pending[pos], state)
            pos += 1
        if a.next_time >= horizon:
            state.time = horizon
            break
        _apply_peeked(state, a)
    while pos < len(pending) and pending[pos] <= horizon:
        if on_sample is not None:
            on_sample(pending[pos], state)
        pos += 1
    return state


@dataclass
class _Peeked:
    next_time: float
    kind: str
    args: tuple


def _peek_next_time(state: ReactorState, gen: np.random.Generator) -> _Peeked:
    a_extend = state._extend_total()
    a_detach = state._detach_total()
    a_cat = state._catalyze_total()
    a_total = a_extend + a_detach + a_cat
    if a_total <= 0.0:
        raise Quiescent("total propensity is zero")
    next_time = state.time + gen.standard_exponential() / a_total
    u = gen.random() * a_total
    if u < a_extend:
        return _Peeked(next_time, "extend", _sample_extend(state, gen))
    if u < a_extend + a_detach:
        row = _weighted_pick(state.counts.astype(np.float64), gen.random())
        return _Peeked(next_time, "detach", (state.seqs[row],))
    cat_weights = np.where(state.is_catalyst, state.counts, 0).astype(np.float64)
    tgt_weights = np.where(state.ends_aaa, state.counts, 0).astype(np.float64)
    cat = state.seqs[_weighted_pick(cat_weights, gen.random())]
    tgt = state.seqs[_weighted_pick(tgt_weights, gen.random())]
    return _Peeked(next_time, "catalyze", (cat, tgt))


def _apply_peeked(state: ReactorState, peeked: _Peeked) -> None:
    state.time = peeked.next_time
    if peeked.kind == "extend":
        _apply_extend(state, *peeked.args)
    elif peeked.kind == "detach":
        _apply_detach(state, *peeked.args)
    else:
        _apply_catalyze(state, *peeked.args)
    state.n_events += 1
    state.audit()


def tau_leap_step(state: ReactorState, tau: float, gen: np.random.Generator) -> ReactorState:
    """Fixed-step approximate leap: Poisson event counts per channel.

    Event counts are approximate (that is the speed trade); every applied
    event uses the same exact bookkeeping as step(), and events that the
    depleted state can no longer support are dropped, so mass conservation
    holds exactly.  Raises Quiescent when nothing can fire.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    reactions = enumerate_reactions(state)
    if not reactions:
        raise Quiescent("total propensity is zero")
    counts = gen.poisson([r.propensity * tau for r in reactions])
    for reaction, n in zip(reactions, counts):
        for _ in range(int(n)):
            try:
                if reaction.kind == "extend":
                    if len(reaction.species) == 1:
                        i = _LETTER_INDEX[reaction.species]
                        j = _LETTER_INDEX[reaction.letter]
                        have = (
                            state.free[i] >= 2 if i == j
                            else state.free[i] >= 1 and state.free[j] >= 1
                        )
                        if not have:
                            break
                    elif state.count_of(reaction.species) == 0 or state.free[
                        _LETTER_INDEX[reaction.letter]
                    ] == 0:
                        break
                    _apply_extend(state, reaction.species, reaction.letter)
                elif reaction.kind == "detach":
                    if state.count_of(reaction.species) == 0:
                        break
                    _apply_detach(state, reaction.species)
                else:
                    if (
                        state.count_of(reaction.species) == 0
                        or state.count_of(reaction.target) == 0
                    ):
                        break
                    _apply_catalyze(state, reaction.species, reaction.target)
            except ValueError:
                break
            state.n_events += 1
    state.time += tau
    state.audit()
    return state


@dataclass(frozen=True)
class SoupConfig:
    """Catalysis experiment scenario: shared by treatment and control."""

    initial_free: tuple[tuple[str, int], ...] = (("A", 40), ("C", 40), ("G", 40), ("U", 40))
    initial_polymers: tuple[tuple[str, int], ...] = (("GAAG", 10), ("GGAAA", 40))
    k_on: float = 0.0005
    k_off: float = 0.05
    k_cat: float = 0.1
    motif: str = "GAAG"
    horizon: float = 10.0
    n_replicates: int = 30
    master_seed: int = 0

    def __post_init__(self):
        def bad(name, msg):
            raise SoupConfigError(name, msg)

        free = dict(self.initial_free)
        if set(free) - set(SOUP_LETTERS):
            bad("initial_free", f"letters must be among {SOUP_LETTERS}")
        if any(v < 0 for v in free.values()):
            bad("initial_free", "counts must be >= 0")
        for seq, n in self.initial_polymers:
            if len(seq) < 2 or not set(seq) <= set(SOUP_LETTERS):
                bad("initial_polymers", f"bad polymer {seq!r}")
            if n < 0:
                bad("initial_polymers", "counts must be >= 0")
        if self.k_on < 0:
            bad("k_on", "must be >= 0")
        if self.k_off < 0:
            bad("k_off", "must be >= 0")
        if self.k_cat < 0:
            bad("k_cat", "must be >= 0")
        if not self.motif or not set(self.motif) <= set(SOUP_LETTERS):
            bad("motif", f"must be a non-empty string over {SOUP_LETTERS}")
        if self.horizon <= 0:
            bad("horizon", "must be > 0")
        if self.n_replicates < 1:
            bad("n_replicates", "must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            bad("master_seed", "must be an unsigned 64-bit integer")

    def build_state(self, k_cat: Optional[float] = None) -> ReactorState:
        return ReactorState(
            dict(self.initial_free),
            dict(self.initial_polymers),
            self.k_on,
            self.k_off,
            self.k_cat if k_cat is None else k_cat,
            CatalystRule(self.motif),
        )


@dataclass(frozen=True)
class ReplicateOutcome:
    replicate: int
    treatment_free_a: int
    control_free_a: int
    treatment_p_count: int
    control_p_count: int


@dataclass(frozen=True)
class CatalysisReport:
    config: SoupConfig
    outcomes: tuple[ReplicateOutcome, ...]
    treatment_wins: int
    control_wins: int
    ties: int
    p_value: float


def run_catalysis_experiment(config: SoupConfig) -> CatalysisReport:
    """Treatment (catalysis on) vs control (k_cat = 0) on shared seeds.

    Replicate i of both arms consumes an identical RNG stream derived
    from (master_seed, i): with k_cat = 0 in both arms the traces are
    identical event for event.
    """
    from .replicator import sign_test_p

    outcomes = []
    t_wins = c_wins = ties = 0
    for i in range(config.n_replicates):
        treatment = config.build_state()
        run_until(treatment, config.horizon, rng_mod.stream(config.master_seed, i))
        control = config.build_state(k_cat=0.0)
        run_until(control, config.horizon, rng_mod.stream(config.master_seed, i))
        outcomes.append(
            ReplicateOutcome(
                i,
                treatment.free_of("A"),
                control.free_of("A"),
                treatment.n_catalysts(),
                control.n_catalysts(),
            )
        )
        if outcomes[-1].treatment_free_a > outcomes[-1].control_free_a:
            t_wins += 1
        elif outcomes[-1].control_free_a > outcomes[-1].treatment_free_a:
            c_wins += 1
        else:
            ties += 1
    return CatalysisReport(
        config, tuple(outcomes), t_wins, c_wins, ties, sign_test_p(t_wins, c_wins)
    )
