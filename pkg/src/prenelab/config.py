"""Line-oriented `key = value` scenario configs with typed schemas.

Grammar: UTF-8 text; blank lines and full-line `#` comments are ignored;
every other line is `key = value` with exactly one `=`.  Keys are dotted
identifiers; two dotted families are open-ended (`free.<LETTER>` and
`polymer.<SEQUENCE>`), everything else must be declared by the active
schema.  Unknown keys, bad types, and out-of-range values are rejected
with the line number and key named.  The parser never raises anything
but ConfigError, no matter the input bytes.

Accepted configs round-trip: parse -> serialize -> parse gives the same
typed values, and serialize is canonical (sorted keys, one space around
`=`), so equal configs produce byte-identical files.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Callable, Optional

from .replicator import EscapeConfig, ExperimentConfigError
from .soup import SOUP_LETTERS, SoupConfig, SoupConfigError

__all__ = [
    "ConfigError",
    "parse_pairs",
    "parse_fraction",
    "escape_config_from_text",
    "soup_config_from_text",
    "serialize_escape_config",
    "serialize_soup_config",
]

_KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z0-9_]+)*$")


class ConfigError(ValueError):
    """Config rejected; carries the offending line number and key."""

    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        full = f"{', '.join(where)}: {message}" if where else message
        super().__init__(full)
        self.line = line
        self.key = key


def parse_pairs(text) -> list[tuple[int, str, str]]:
    """Raw (line_number, key, value) triples, syntax checked only."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ConfigError(f"config is not valid UTF-8 ({exc.reason})") from None
    if not isinstance(text, str):
        raise ConfigError("config must be text")
    out = []
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("expected `key = value`", line=lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not _KEY_RE.match(key):
            raise ConfigError(f"bad key {key!r}", line=lineno)
        if not value:
            raise ConfigError("empty value", line=lineno, key=key)
        if key in seen:
            raise ConfigError(
                f"duplicate key (first on line {seen[key]})", line=lineno, key=key
            )
        seen[key] = lineno
        out.append((lineno, key, value))
    return out


def parse_fraction(value: str) -> Fraction:
    """Exact rational from `p/q` or a bare integer literal."""
    value = value.strip()
    if re.fullmatch(r"-?\d+(\s*/\s*\d+)?", value) is None:
        raise ValueError(f"not a fraction: {value!r}")
    try:
        return Fraction(value.replace(" ", ""))
    except ZeroDivisionError:
        raise ValueError(f"zero denominator: {value!r}") from None


def _typed(value: str, kind: str, line: int, key: str):
    try:
        if kind == "int":
            return int(value, 10)
        if kind == "float":
            out = float(value)
            if out != out or out in (float("inf"), float("-inf")):
                raise ValueError("must be finite")
            return out
        if kind == "fraction":
            return parse_fraction(value)
        if kind == "str":
            return value
        raise AssertionError(f"unknown schema kind {kind}")
    except ValueError as exc:
        raise ConfigError(f"bad {kind} value {value!r} ({exc})", line=line, key=key) from None


# subcommand schemas: key -> (kind, attribute on the target config)

_ESCAPE_SCHEMA = {
    "genome_length": ("int", "genome_length"),
    "coat_start": ("int", None),
    "coat_stop": ("int", None),
    "base_rate": ("float", "base_rate"),
    "hot_factor": ("float", "hot_factor"),
    "fidelity_rate": ("float", "fidelity_rate"),
    "offspring_per_virion": ("int", "offspring_per_virion"),
    "capacity": ("int", "capacity"),
    "immune_delay": ("int", "immune_delay"),
    "kill_probability": ("float", "kill_probability"),
    "horizon": ("int", "horizon"),
    "n_founders": ("int", "n_founders"),
    "n_pairs": ("int", "n_pairs"),
}

_SOUP_SCHEMA = {
    "k_on": ("float", "k_on"),
    "k_off": ("float", "k_off"),
    "k_cat": ("float", "k_cat"),
    "motif": ("str", "motif"),
    "horizon": ("float", "horizon"),
    "n_replicates": ("int", "n_replicates"),
}


def escape_config_from_text(text, master_seed: int = 0) -> EscapeConfig:
    """EscapeConfig from config text; field validation errors become ConfigError."""
    kwargs = {}
    coat = {}
    for lineno, key, value in parse_pairs(text):
        if key in ("coat_start", "coat_stop"):
            coat[key] = _typed(value, "int", lineno, key)
        elif key in _ESCAPE_SCHEMA:
            kind, attr = _ESCAPE_SCHEMA[key]
            kwargs[attr] = _typed(value, kind, lineno, key)
        else:
            raise ConfigError("unknown key", line=lineno, key=key)
    if coat:
        if set(coat) != {"coat_start", "coat_stop"}:
            raise ConfigError("coat_start and coat_stop must be given together")
        kwargs["coat_span"] = (coat["coat_start"], coat["coat_stop"])
    try:
        return EscapeConfig(master_seed=master_seed, **kwargs)
    except ExperimentConfigError as exc:
        raise ConfigError(str(exc), key=exc.field_name) from None


def soup_config_from_text(text, master_seed: int = 0) -> SoupConfig:
    """SoupConfig from config text, including free.<L> and polymer.<SEQ> keys."""
    kwargs = {}
    free = dict(SoupConfig().initial_free)
    polymers: dict[str, int] = {}
    saw_polymer = False
    for lineno, key, value in parse_pairs(text):
        if key.startswith("free."):
            letter = key[len("free."):]
            if letter not in SOUP_LETTERS:
                raise ConfigError(
                    f"free monomer letter must be one of {SOUP_LETTERS}", line=lineno, key=key
                )
            free[letter] = _typed(value, "int", lineno, key)
        elif key.startswith("polymer."):
            seq = key[len("polymer."):]
            saw_polymer = True
            polymers[seq] = _typed(value, "int", lineno, key)
        elif key in _SOUP_SCHEMA:
            kind, attr = _SOUP_SCHEMA[key]
            kwargs[attr] = _typed(value, kind, lineno, key)
        else:
            raise ConfigError("unknown key", line=lineno, key=key)
    kwargs["initial_free"] = tuple(sorted(free.items()))
    if saw_polymer:
        kwargs["initial_polymers"] = tuple(sorted(polymers.items()))
    try:
        return SoupConfig(master_seed=master_seed, **kwargs)
    except SoupConfigError as exc:
        raise ConfigError(str(exc), key=exc.field_name) from None


def _fmt(value) -> str:
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    return repr(value) if isinstance(value, float) else str(value)


def serialize_escape_config(config: EscapeConfig) -> str:
    """Canonical text form; master_seed is a flag, not a config key."""
    pairs = {
        "genome_length": config.genome_length,
        "coat_start": config.coat_span[0],
        "coat_stop": config.coat_span[1],
        "base_rate": config.base_rate,
        "hot_factor": config.hot_factor,
        "fidelity_rate": config.fidelity_rate,
        "offspring_per_virion": config.offspring_per_virion,
        "capacity": config.capacity,
        "immune_delay": config.immune_delay,
        "kill_probability": config.kill_probability,
        "horizon": config.horizon,
        "n_founders": config.n_founders,
        "n_pairs": config.n_pairs,
    }
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in sorted(pairs.items()))


def serialize_soup_config(config: SoupConfig) -> str:
    pairs: dict[str, object] = {
        "k_on": config.k_on,
        "k_off": config.k_off,
        "k_cat": config.k_cat,
        "motif": config.motif,
        "horizon": config.horizon,
        "n_replicates": config.n_replicates,
    }
    for letter, n in config.initial_free:
        pairs[f"free.{letter}"] = n
    for seq, n in config.initial_polymers:
        pairs[f"polymer.{seq}"] = n
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in sorted(pairs.items()))
