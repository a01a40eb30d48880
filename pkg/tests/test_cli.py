"""Command-line interface: subcommands, exit codes, and outputs."""

import json
import os

import pytest

from vmsim import cli
from vmsim.config import RunConfig, from_dict

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib


def run_cli(*argv):
    return cli.main(list(argv))


class TestParseSize:
    def test_suffixes(self):
        assert cli.parse_size("4096") == 4096
        assert cli.parse_size("32KiB") == 32 * 1024
        assert cli.parse_size("1GiB") == 1 << 30
        assert cli.parse_size("2MB") == 2_000_000
        assert cli.parse_size("1.5m") == int(1.5 * (1 << 20))

    def test_garbage_rejected(self):
        import argparse
        with pytest.raises(argparse.ArgumentTypeError):
            cli.parse_size("lots")


class TestGen:
    def test_writes_trace(self, tmp_path, capsys):
        out = str(tmp_path / "t.vmt")
        rc = run_cli("gen", "--kind", "uniform", "--footprint", "1MiB",
                     "--records", "100", "--seed", "3", "-o", out)
        assert rc == 0
        assert os.path.getsize(out) == 16 + 100 * 16
        assert "100 records" in capsys.readouterr().out

    def test_zero_footprint_is_usage_error(self, tmp_path, capsys):
        rc = run_cli("gen", "--footprint", "0",
                     "-o", str(tmp_path / "t.vmt"))
        assert rc == 2


class TestRun:
    def test_run_writes_stats(self, tmp_path, capsys):
        out = str(tmp_path)
        rc = run_cli("run", "-b", "radix", "--kind", "uniform",
                     "--records", "500", "--footprint", "1MiB", "-o", out)
        assert rc == 0
        stats = json.load(open(os.path.join(out, "stats.json")))
        assert stats["backend"] == "radix"
        assert stats["records"] == 500
        assert os.path.exists(os.path.join(out, "stats.csv"))
        text = capsys.readouterr().out
        assert "config=" in text and "seed=" in text

    def test_missing_trace_is_io_error(self, tmp_path, capsys):
        rc = run_cli("run", "-t", str(tmp_path / "nope.vmt"))
        assert rc == 4

    def test_corrupt_trace_is_parse_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.vmt"
        bad.write_bytes(b"XXXX" + b"\0" * 12)
        rc = run_cli("run", "-t", str(bad), "-o", str(tmp_path))
        assert rc == 5

    def test_dump_defaults_reproduces_baseline(self, capsys):
        rc = run_cli("run", "--dump-defaults")
        assert rc == 0
        text = capsys.readouterr().out
        cfg = from_dict(tomllib.loads(text))
        assert cfg.to_dict() == RunConfig().to_dict()


class TestCompare:
    def test_self_comparison_is_unity(self, tmp_path, capsys):
        rc = run_cli("compare", "--records", "500", "--footprint", "1MiB",
                     "radix", "radix")
        assert rc == 0
        text = capsys.readouterr().out
        row = [l for l in text.splitlines() if l.startswith("radix")][1]
        cells = row.split()
        assert cells[2] == "0.0"       # ptw reduction vs itself
        assert cells[4] == "1.000"     # latency ratio

    def test_unknown_backend_is_usage_error(self, capsys):
        assert run_cli("compare", "radix", "hypercache") == 2

    def test_single_backend_is_usage_error(self, capsys):
        assert run_cli("compare", "radix") == 2

    def test_virt_backend_adds_host_column(self, tmp_path, capsys):
        rc = run_cli("compare", "--records", "300", "--footprint", "1MiB",
                     "nested-paging", "victima-virt")
        assert rc == 0
        text = capsys.readouterr().out
        assert "host_pt_reduction_%" in text

    def test_out_writes_per_backend_json(self, tmp_path, capsys):
        out = str(tmp_path)
        rc = run_cli("compare", "--records", "300", "--footprint", "1MiB",
                     "-o", out, "radix", "victima")
        assert rc == 0
        assert os.path.exists(os.path.join(out, "stats-radix.json"))
        assert os.path.exists(os.path.join(out, "stats-victima.json"))


class TestReport:
    def test_emits_gnuplot_files(self, tmp_path, capsys):
        out = str(tmp_path)
        run_cli("run", "-b", "victima", "--kind", "uniform",
                "--records", "2000", "--footprint", "16MiB", "-o", out)
        capsys.readouterr()
        rc = run_cli("report", os.path.join(out, "stats.json"), "-o", out)
        assert rc == 0
        for name in ("ptw_latency.dat", "data_block_reuse.dat",
                     "tlb_block_reuse.dat", "reach_timeline.dat",
                     "tlb_block_occupancy.dat"):
            path = os.path.join(out, name)
            assert os.path.exists(path)
            header = open(path).readline()
            assert header.startswith("#") and "config=" in header \
                and "seed=" in header

    def test_invalid_stats_json_is_parse_error(self, tmp_path, capsys):
        bad = tmp_path / "stats.json"
        bad.write_text("{not json")
        assert run_cli("report", str(bad), "-o", str(tmp_path)) == 5

    def test_missing_stats_is_io_error(self, tmp_path, capsys):
        assert run_cli("report", str(tmp_path / "none.json")) == 4


def test_help_on_every_subcommand(capsys):
    for sub in ("gen", "run", "compare", "report"):
        with pytest.raises(SystemExit) as e:
            cli.build_parser().parse_args([sub, "--help"])
        assert e.value.code == 0
        assert "--help" not in capsys.readouterr().err
