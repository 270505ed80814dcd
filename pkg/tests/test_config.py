"""Config grammar: parsing, typing, rejection, and round-trip identity."""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prenelab.config import (
    ConfigError,
    escape_config_from_text,
    parse_fraction,
    parse_pairs,
    serialize_escape_config,
    serialize_soup_config,
    soup_config_from_text,
)
from prenelab.replicator import EscapeConfig
from prenelab.soup import SoupConfig


class TestParsePairs:
    def test_basic_pairs_with_line_numbers(self):
        text = "a = 1\n\n# comment\nb.c = two words\n"
        assert parse_pairs(text) == [(1, "a", "1"), (4, "b.c", "two words")]

    def test_whitespace_is_forgiven(self):
        assert parse_pairs("  key   =   7  \n") == [(1, "key", "7")]

    @pytest.mark.parametrize(
        "text,fragment",
        [
            ("just words\n", "expected `key = value`"),
            ("3bad = 1\n", "bad key"),
            ("-lead = 1\n", "bad key"),
            ("k =\n", "empty value"),
            ("k = 1\nk = 2\n", "duplicate key"),
        ],
    )
    def test_syntax_errors_name_the_line(self, text, fragment):
        with pytest.raises(ConfigError, match=fragment) as err:
            parse_pairs(text)
        assert "line" in str(err.value)

    def test_duplicate_error_points_at_both_lines(self):
        with pytest.raises(ConfigError, match=r"line 3.*first on line 1"):
            parse_pairs("k = 1\n\nk = 2\n")

    def test_bad_utf8_bytes_rejected(self):
        with pytest.raises(ConfigError, match="UTF-8"):
            parse_pairs(b"\xff\xfe = 1")

    def test_non_text_rejected(self):
        with pytest.raises(ConfigError, match="must be text"):
            parse_pairs(123)

    @given(st.one_of(st.text(max_size=200), st.binary(max_size=200)))
    @settings(max_examples=300, deadline=None)
    def test_parser_is_total(self, blob):
        # any input either parses or raises ConfigError, nothing else
        try:
            out = parse_pairs(blob)
        except ConfigError:
            return
        assert isinstance(out, list)
        for lineno, key, value in out:
            assert isinstance(lineno, int) and lineno >= 1
            assert key and value


class TestParseFraction:
    @pytest.mark.parametrize(
        "text,expected",
        [("1/2", Fraction(1, 2)), ("3", Fraction(3)), ("9/20", Fraction(9, 20)), ("0", Fraction(0))],
    )
    def test_accepts(self, text, expected):
        assert parse_fraction(text) == expected

    @pytest.mark.parametrize("text", ["0.5", "a/b", "1/0", "1/2/3", "", "1e-3"])
    def test_rejects(self, text):
        with pytest.raises(ValueError):
            parse_fraction(text)


class TestEscapeConfig:
    def test_empty_text_gives_defaults(self):
        assert escape_config_from_text("") == EscapeConfig()

    def test_seed_comes_from_caller_not_file(self):
        assert escape_config_from_text("", master_seed=9).master_seed == 9

    def test_overrides_apply(self):
        cfg = escape_config_from_text(
            "capacity = 17\nkill_probability = 0.25\ncoat_start = 3\ncoat_stop = 9\n"
        )
        assert cfg.capacity == 17
        assert cfg.kill_probability == 0.25
        assert cfg.coat_span == (3, 9)

    def test_unknown_key_named_with_line(self):
        with pytest.raises(ConfigError, match=r"line 2.*'speed'.*unknown key"):
            escape_config_from_text("capacity = 3\nspeed = 11\n")

    def test_bad_int_value_named(self):
        with pytest.raises(ConfigError, match=r"'capacity'.*bad int"):
            escape_config_from_text("capacity = many\n")

    def test_coat_keys_must_pair_up(self):
        with pytest.raises(ConfigError, match="together"):
            escape_config_from_text("coat_start = 0\n")

    def test_domain_validation_names_field(self):
        with pytest.raises(ConfigError, match="kill_probability") as err:
            escape_config_from_text("kill_probability = 1.5\n")
        assert err.value.key == "kill_probability"

    def test_round_trip_identity(self):
        text = "capacity = 17\nhot_factor = 12.5\nn_pairs = 3\n"
        once = escape_config_from_text(text, master_seed=4)
        twice = escape_config_from_text(serialize_escape_config(once), master_seed=4)
        assert once == twice

    def test_serialize_is_canonical(self):
        text = serialize_escape_config(EscapeConfig())
        keys = [line.split(" = ")[0] for line in text.splitlines()]
        assert keys == sorted(keys)
        assert all(" = " in line for line in text.splitlines())


class TestSoupConfigText:
    def test_empty_text_gives_defaults(self):
        assert soup_config_from_text("") == SoupConfig()

    def test_free_and_polymer_keys(self):
        cfg = soup_config_from_text("free.A = 7\npolymer.GGAAA = 2\npolymer.CC = 1\n")
        assert dict(cfg.initial_free)["A"] == 7
        assert dict(cfg.initial_free)["C"] == 40  # untouched default
        # any polymer key replaces the default polymer set wholesale
        assert dict(cfg.initial_polymers) == {"GGAAA": 2, "CC": 1}

    def test_bad_free_letter(self):
        with pytest.raises(ConfigError, match=r"'free\.X'"):
            soup_config_from_text("free.X = 3\n")

    def test_bad_polymer_sequence_names_field(self):
        with pytest.raises(ConfigError, match="initial_polymers"):
            soup_config_from_text("polymer.AXA = 3\n")

    def test_domain_validation_names_field(self):
        with pytest.raises(ConfigError, match="k_on") as err:
            soup_config_from_text("k_on = -1.0\n")
        assert err.value.key == "k_on"

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            soup_config_from_text("kon = 1.0\n")

    def test_round_trip_identity(self):
        text = "k_cat = 0.25\nfree.G = 11\npolymer.GAAG = 4\nmotif = GA\n"
        once = soup_config_from_text(text, master_seed=2)
        twice = soup_config_from_text(serialize_soup_config(once), master_seed=2)
        assert once == twice

    def test_float_values_survive_round_trip_exactly(self):
        once = soup_config_from_text("k_on = 0.1\nk_off = 3.0000000000000004\n")
        twice = soup_config_from_text(serialize_soup_config(once))
        assert twice.k_on == once.k_on
        assert twice.k_off == once.k_off

    @given(
        st.floats(min_value=0.0, max_value=1e6, allow_nan=False, allow_infinity=False),
        st.integers(min_value=0, max_value=10**6),
    )
    @settings(max_examples=60, deadline=None)
    def test_round_trip_identity_generated(self, k_on, free_a):
        text = f"k_on = {k_on!r}\nfree.A = {free_a}\n"
        once = soup_config_from_text(text)
        assert soup_config_from_text(serialize_soup_config(once)) == once
