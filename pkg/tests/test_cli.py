"""Command line contract: artifacts, formats, exit codes, determinism."""

import json
import subprocess
import sys

import pytest

from prenelab.cli import main

GOLDEN_LOG = "tests/data/registry_golden.jsonl"


def run_cli(args, tmp_path, check=True):
    """In-process invocation; returns (exit_code, report_dict_or_None)."""
    import io
    from contextlib import redirect_stdout

    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main(args)
    if check:
        assert code == 0, buf.getvalue()
    lines = [l for l in buf.getvalue().splitlines() if l.strip()]
    report = None
    for line in reversed(lines):
        try:
            candidate = json.loads(line)
        except json.JSONDecodeError:
            continue
        if isinstance(candidate, dict) and candidate.get("tool") == "prene-lab":
            report = candidate
            break
    return code, report


def run_proc(args):
    return subprocess.run(
        [sys.executable, "-m", "prenelab", *args],
        capture_output=True,
        text=True,
        cwd="/root/pkg",
    )


class TestLifespanTable:
    def test_default_species_and_days(self, tmp_path):
        out = tmp_path / "census.csv"
        code, report = run_cli(["lifespan", "table", "--out", str(out)], tmp_path)
        lines = out.read_text().splitlines()
        assert lines[0] == "day,species_g,alive"
        assert lines[1] == "0,1,1"
        assert lines[2] == "0,1/2,1"
        # 30 days, two species: header + 31 * 2 rows
        assert len(lines) == 1 + 31 * 2
        assert lines[-1] == "30,1/2,11536"
        assert report["config"]["g"] == ["1", "1/2"]
        assert report["rng_algorithm"] == "philox4x64-10"
        assert report["artifacts"] == [str(out)]

    def test_days_zero_is_header_plus_founders(self, tmp_path):
        out = tmp_path / "census.csv"
        run_cli(["lifespan", "table", "--days", "0", "--out", str(out)], tmp_path)
        assert out.read_text() == "day,species_g,alive\n0,1,1\n0,1/2,1\n"

    def test_explicit_g_list(self, tmp_path):
        out = tmp_path / "census.csv"
        run_cli(
            ["lifespan", "table", "--days", "3", "--g", "2/5", "--g", "0", "--out", str(out)],
            tmp_path,
        )
        lines = out.read_text().splitlines()
        assert lines[1] == "0,2/5,1"
        assert lines[2] == "0,0,1"

    def test_jsonl_format(self, tmp_path):
        out = tmp_path / "census.jsonl"
        run_cli(
            ["lifespan", "table", "--days", "2", "--g", "1/2", "--format", "jsonl", "--out", str(out)],
            tmp_path,
        )
        rows = [json.loads(l) for l in out.read_text().splitlines()]
        assert rows[0] == {"day": 0, "species_g": "1/2", "alive": 1}
        assert rows[-1] == {"day": 2, "species_g": "1/2", "alive": 2}

    def test_lf_endings_no_crlf(self, tmp_path):
        out = tmp_path / "census.csv"
        run_cli(["lifespan", "table", "--days", "2", "--out", str(out)], tmp_path)
        raw = out.read_bytes()
        assert b"\r" not in raw
        assert raw.endswith(b"\n")


class TestLifespanSweepAndGrowth:
    def test_sweep_columns_and_argmax(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code, report = run_cli(
            ["lifespan", "sweep", "--steps", "10", "--out", str(out)], tmp_path
        )
        lines = out.read_text().splitlines()
        assert lines[0] == "g_num,g_den,lambda,birth_ages,death_age"
        assert len(lines) == 12
        assert report["config"]["argmax_g"] == ["2/5", "1/2"]
        # immortal row renders a periodic tail and an infinite death age
        last = lines[-1].split(",")
        assert last[0:2] == ["1", "1"]
        assert last[3] == "3+3k"
        assert last[4] == "inf"

    def test_growth_row(self, tmp_path):
        out = tmp_path / "growth.csv"
        run_cli(["lifespan", "growth", "--g", "1/2", "--out", str(out)], tmp_path)
        lines = out.read_text().splitlines()
        assert lines[0] == "g_num,g_den,lambda,residual,birth_ages,death_age"
        cells = lines[1].split(",")
        assert cells[0:2] == ["1", "2"]
        assert abs(float(cells[2]) - 1.356203065626295) < 1e-12
        assert cells[4] == "2;4;6"
        assert cells[5] == "6"

    def test_threads_env_does_not_change_artifact(self, tmp_path, monkeypatch):
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        monkeypatch.delenv("PRENELAB_THREADS", raising=False)
        run_cli(["lifespan", "sweep", "--steps", "12", "--out", str(out1)], tmp_path)
        monkeypatch.setenv("PRENELAB_THREADS", "4")
        run_cli(["lifespan", "sweep", "--steps", "12", "--out", str(out2)], tmp_path)
        assert out1.read_bytes() == out2.read_bytes()

    def test_bad_threads_env_is_usage_error(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PRENELAB_THREADS", "zero")
        code, _ = run_cli(
            ["lifespan", "sweep", "--out", str(tmp_path / "s.csv")], tmp_path, check=False
        )
        assert code == 2


class TestReplicatorRun:
    def test_summary_and_events(self, tmp_path):
        cfg = tmp_path / "rep.cfg"
        cfg.write_text(
            "genome_length = 40\ncoat_start = 0\ncoat_stop = 8\ncapacity = 20\n"
            "horizon = 6\nn_pairs = 3\nn_founders = 2\n"
        )
        out = tmp_path / "summary.csv"
        events = tmp_path / "events.jsonl"
        code, report = run_cli(
            [
                "replicator", "run", "--seed", "5", "--config", str(cfg),
                "--out", str(out), "--events", str(events),
            ],
            tmp_path,
        )
        lines = out.read_text().splitlines()
        assert lines[0] == "seed,profile,extinction_day,peak_pop"
        assert len(lines) == 1 + 2 * 3  # hot and fidelity row per pair
        profiles = [l.split(",")[1] for l in lines[1:]]
        assert profiles == ["hot", "fidelity"] * 3
        for line in events.read_text().splitlines():
            event = json.loads(line)
            assert event["pair"] == 0
            assert event["profile"] in ("hot", "fidelity")
            assert event["kind"] in ("birth", "poster", "kill", "cull")
        assert report["config"]["capacity"] == "20"
        assert set(report["artifacts"]) == {str(out), str(events)}

    def test_survivors_marked_none_in_csv(self, tmp_path):
        # kill probability zero: nothing ever dies inside the horizon
        cfg = tmp_path / "rep.cfg"
        cfg.write_text(
            "genome_length = 40\ncoat_start = 0\ncoat_stop = 8\ncapacity = 10\n"
            "horizon = 4\nn_pairs = 2\nn_founders = 2\nkill_probability = 0.0\n"
        )
        out = tmp_path / "summary.csv"
        run_cli(
            ["replicator", "run", "--config", str(cfg), "--out", str(out)], tmp_path
        )
        for line in out.read_text().splitlines()[1:]:
            assert line.split(",")[2] == "none"

    def test_unknown_config_key_exits_2(self, tmp_path):
        cfg = tmp_path / "rep.cfg"
        cfg.write_text("virulence = 11\n")
        code, _ = run_cli(
            ["replicator", "run", "--config", str(cfg), "--out", str(tmp_path / "o.csv")],
            tmp_path,
            check=False,
        )
        assert code == 2


class TestSoupRun:
    def test_time_series_shape(self, tmp_path):
        out = tmp_path / "soup.csv"
        code, report = run_cli(
            ["soup", "run", "--seed", "3", "--samples", "4", "--out", str(out)], tmp_path
        )
        lines = out.read_text().splitlines()
        assert lines[0] == "t,free_A,free_C,free_G,free_U,n_species,n_P,n_AAA_enders"
        assert len(lines) == 1 + 5  # samples + 1 grid points
        first = lines[1].split(",")
        assert float(first[0]) == 0.0
        assert first[1:5] == ["40", "40", "40", "40"]
        assert first[6] == "10"  # catalyst strands at t = 0
        assert first[7] == "40"  # AAA enders at t = 0

    def test_experiment_mode(self, tmp_path):
        cfg = tmp_path / "soup.cfg"
        cfg.write_text("n_replicates = 4\nhorizon = 2.0\n")
        out = tmp_path / "exp.csv"
        code, report = run_cli(
            ["soup", "run", "--config", str(cfg), "--experiment", "--out", str(out)],
            tmp_path,
        )
        lines = out.read_text().splitlines()
        assert (
            lines[0]
            == "replicate,treatment_free_a,control_free_a,treatment_p_count,control_p_count"
        )
        assert len(lines) == 5
        assert "treatment_wins" in report["config"]

    def test_bad_config_value_exits_2(self, tmp_path):
        cfg = tmp_path / "soup.cfg"
        cfg.write_text("k_cat = -2.0\n")
        code, _ = run_cli(
            ["soup", "run", "--config", str(cfg), "--out", str(tmp_path / "o.csv")],
            tmp_path,
            check=False,
        )
        assert code == 2


class TestRegistryCli:
    def test_ingest_golden_is_canonical_fixed_point(self, tmp_path):
        out = tmp_path / "canon.jsonl"
        run_cli(["registry", "ingest", "--log", GOLDEN_LOG, "--out", str(out)], tmp_path)
        assert out.read_bytes() == open(GOLDEN_LOG, "rb").read()

    @pytest.mark.parametrize(
        "what,extra,expected",
        [
            ("copy-number", ["--content", "POX", "--at", "3"], {"copy_number": 3}),
            ("copy-number", ["--content", "POX"], {"copy_number": 1}),
            (
                "classify",
                ["--content", "POX", "--at", "3"],
                {"gene": True, "meme": True, "turene": True},
            ),
            ("extinct", ["--content", "POX", "--at", "3"], {"extinct": False}),
            (
                "lineage",
                ["--content", "POX"],
                {"nodes": [1, 3, 4, 6], "edges": [[3, 1], [6, 3]]},
            ),
        ],
    )
    def test_queries_match_frozen_golden_answers(self, tmp_path, what, extra, expected):
        out = tmp_path / "q.json"
        run_cli(
            ["registry", "query", "--log", GOLDEN_LOG, "--what", what, *extra, "--out", str(out)],
            tmp_path,
        )
        assert json.loads(out.read_text()) == expected

    def test_longest_shared_of_two_documents(self, tmp_path):
        log = tmp_path / "log.jsonl"
        from prenelab.registry import World

        world = World()
        world.create(1, "document", b"The Origin of Species")
        world.create(2, "document", b"origin stories")
        log.write_text(world.to_jsonl())
        out = tmp_path / "q.json"
        run_cli(
            ["registry", "query", "--log", str(log), "--what", "longest-shared", "--out", str(out)],
            tmp_path,
        )
        got = json.loads(out.read_text())
        assert got["length"] == len("origin ")
        import base64

        assert base64.b64decode(got["longest_shared_b64"]) == b"origin "

    def test_query_without_content_exits_2(self, tmp_path):
        code, _ = run_cli(
            ["registry", "query", "--log", GOLDEN_LOG, "--what", "copy-number"],
            tmp_path,
            check=False,
        )
        assert code == 2

    def test_at_out_of_range_exits_2(self, tmp_path):
        code, _ = run_cli(
            ["registry", "query", "--log", GOLDEN_LOG, "--what", "extinct",
             "--content", "POX", "--at", "99"],
            tmp_path,
            check=False,
        )
        assert code == 2

    def test_missing_log_exits_1(self, tmp_path):
        code, _ = run_cli(
            ["registry", "ingest", "--log", str(tmp_path / "nope.jsonl"),
             "--out", str(tmp_path / "o.jsonl")],
            tmp_path,
            check=False,
        )
        assert code == 1

    def test_corrupt_log_exits_1(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("not json\n")
        code, _ = run_cli(
            ["registry", "ingest", "--log", str(bad), "--out", str(tmp_path / "o.jsonl")],
            tmp_path,
            check=False,
        )
        assert code == 1


class TestUsageErrors:
    @pytest.mark.parametrize(
        "args",
        [
            ["lifespan", "table", "--days", "nope", "--out", "x.csv"],
            ["lifespan", "table", "--days", "-3", "--out", "x.csv"],
            ["lifespan", "table"],  # --out is required
            ["lifespan", "growth", "--g", "3/2", "--out", "x.csv"],  # g > 1
            ["lifespan", "growth", "--g", "0.5", "--out", "x.csv"],  # not a fraction
            ["replicator", "run", "--seed", "-1", "--out", "x.csv"],
            ["soup", "run", "--format", "xml", "--out", "x.csv"],
            ["bogus"],
        ],
    )
    def test_argparse_usage_exits_2(self, args, capsys):
        with pytest.raises(SystemExit) as err:
            main(args)
        assert err.value.code == 2
        message = capsys.readouterr().err
        assert "usage" in message or "error" in message

    def test_flag_is_named_in_message(self, capsys):
        with pytest.raises(SystemExit):
            main(["lifespan", "table", "--days", "nope", "--out", "x.csv"])
        assert "--days" in capsys.readouterr().err


class TestDeterminism:
    """Same command line twice gives byte-identical artifacts."""

    def test_all_subcommands_rerun_identically(self, tmp_path):
        rep_cfg = tmp_path / "rep.cfg"
        rep_cfg.write_text(
            "genome_length = 40\ncoat_start = 0\ncoat_stop = 8\ncapacity = 15\n"
            "horizon = 5\nn_pairs = 2\nn_founders = 2\n"
        )
        soup_cfg = tmp_path / "soup.cfg"
        soup_cfg.write_text("n_replicates = 3\nhorizon = 2.0\n")
        commands = [
            ["lifespan", "table", "--days", "20", "--out", "OUT/census.csv"],
            ["lifespan", "sweep", "--steps", "8", "--out", "OUT/sweep.csv"],
            ["lifespan", "growth", "--g", "2/5", "--out", "OUT/growth.csv"],
            [
                "replicator", "run", "--seed", "7", "--config", str(rep_cfg),
                "--out", "OUT/rep.csv", "--events", "OUT/rep_events.jsonl",
            ],
            ["soup", "run", "--seed", "7", "--samples", "6", "--out", "OUT/soup.csv"],
            [
                "soup", "run", "--seed", "7", "--config", str(soup_cfg),
                "--experiment", "--out", "OUT/soup_exp.csv",
            ],
            ["registry", "ingest", "--log", GOLDEN_LOG, "--out", "OUT/canon.jsonl"],
            [
                "registry", "query", "--log", GOLDEN_LOG, "--what", "classify",
                "--content", "POX", "--at", "3", "--out", "OUT/query.json",
            ],
        ]
        for run_dir in ("first", "second"):
            base = tmp_path / run_dir
            for command in commands:
                concrete = [c.replace("OUT", str(base)) for c in command]
                proc = run_proc(concrete)
                assert proc.returncode == 0, proc.stderr
        first, second = tmp_path / "first", tmp_path / "second"
        names = sorted(p.name for p in first.iterdir())
        assert names == sorted(p.name for p in second.iterdir())
        assert len(names) == 9  # replicator writes two artifacts
        for name in names:
            assert (first / name).read_bytes() == (second / name).read_bytes(), name

    def test_seed_changes_replicator_events(self, tmp_path):
        cfg = tmp_path / "rep.cfg"
        cfg.write_text(
            "genome_length = 40\ncoat_start = 0\ncoat_stop = 8\ncapacity = 15\n"
            "horizon = 5\nn_pairs = 2\nn_founders = 2\n"
        )
        traces = []
        for seed in ("1", "2"):
            events = tmp_path / f"events{seed}.jsonl"
            run_cli(
                ["replicator", "run", "--seed", seed, "--config", str(cfg),
                 "--out", str(tmp_path / f"rep{seed}.csv"), "--events", str(events)],
                tmp_path,
            )
            traces.append(events.read_bytes())
        assert traces[0] != traces[1]


class TestConsoleScript:
    def test_entry_point_reports_version(self):
        proc = subprocess.run(
            ["prene-lab", "--version"], capture_output=True, text=True
        )
        assert proc.returncode == 0
        assert "prene-lab" in proc.stdout
