"""Command-line front end: trace generation, simulation runs, backend
comparisons and report emission.

Exit codes: 0 success, 2 usage error, 3 configuration error, 4 I/O error,
5 trace parse error.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import config as configmod
from . import simkit
from .config import BACKENDS, VIRT_BACKENDS, RunConfig
from .errors import ConfigError, TraceError
from .stats import Stats

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_IO = 4
EXIT_PARSE = 5

_SIZE_SUFFIXES = {
    "kib": 1 << 10, "mib": 1 << 20, "gib": 1 << 30, "tib": 1 << 40,
    "kb": 10 ** 3, "mb": 10 ** 6, "gb": 10 ** 9, "tb": 10 ** 12,
    "k": 1 << 10, "m": 1 << 20, "g": 1 << 30, "b": 1,
}


def parse_size(text):
    """'4096', '32KiB', '1GiB' -> bytes."""
    t = str(text).strip().lower().replace(" ", "")
    for suffix in sorted(_SIZE_SUFFIXES, key=len, reverse=True):
        if t.endswith(suffix):
            number = t[: -len(suffix)]
            break
    else:
        suffix, number = "b", t
    try:
        value = float(number)
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse size '{text}'")
    return int(value * _SIZE_SUFFIXES[suffix])


def _load_config(args):
    cfg = configmod.load(args.config) if getattr(args, "config", None) \
        else RunConfig()
    if getattr(args, "backend", None):
        cfg.backend = args.backend
    if getattr(args, "trace", None):
        cfg.trace_path = args.trace
    for flag, field in (("kind", "trace_kind"), ("records", "record_count"),
                        ("footprint", "footprint_bytes"), ("seed", "seed"),
                        ("stride", "trace_stride"), ("zipf_s", "trace_zipf_s")):
        v = getattr(args, flag, None)
        if v is not None:
            setattr(cfg, field, v)
    cfg.validate()
    return cfg


def _outdir(args):
    out = getattr(args, "out", None) or "."
    os.makedirs(out, exist_ok=True)
    return out


# ---------------------------------------------------------------- subcommands

def cmd_gen(args):
    if args.footprint <= 0:
        raise UsageError("footprint must be positive")
    records = simkit.generate(args.kind, args.footprint, args.records,
                              seed=args.seed, stride=args.stride,
                              zipf_s=args.zipf_s)
    simkit.write_trace(args.output, records)
    print(f"wrote {args.output}: {len(records)} records, "
          f"kind={args.kind}, footprint={args.footprint} bytes, "
          f"seed={args.seed}")
    return EXIT_OK


def cmd_run(args):
    if args.dump_defaults:
        sys.stdout.write(default_config_toml())
        return EXIT_OK
    cfg = _load_config(args)
    if cfg.trace_path and not os.path.exists(cfg.trace_path):
        raise FileNotFoundError(cfg.trace_path)
    stats = simkit.run(cfg)
    out = _outdir(args)
    json_path = os.path.join(out, "stats.json")
    with open(json_path, "w") as f:
        f.write(stats.to_json())
        f.write("\n")
    with open(os.path.join(out, "stats.csv"), "w") as f:
        f.write(stats.to_csv())
    print(f"backend={cfg.backend} config={stats.config_hash} seed={stats.seed}")
    print(f"instructions={stats.instructions} ptw={stats.ptw_count} "
          f"l2_tlb_mpki={stats.l2_tlb_mpki:.3f} "
          f"avg_ptw_latency={stats.avg_ptw_latency:.1f}")
    print(f"wrote {json_path}")
    return EXIT_OK


def _run_one(cfg_dict):
    cfg = RunConfig(**cfg_dict)
    return simkit.run(cfg).to_dict()


def cmd_compare(args):
    for b in args.backends:
        if b not in BACKENDS:
            raise UsageError(f"unknown backend '{b}'")
    if len(args.backends) < 2:
        raise UsageError("compare needs at least two backends")
    base_cfg = _load_config(args)
    cfg_dicts = []
    for b in args.backends:
        d = dict(base_cfg.to_dict())
        d["backend"] = b
        cfg_dicts.append(d)
    threads = int(os.environ.get("VMSIM_THREADS", "1"))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_one, cfg_dicts))
    else:
        results = [_run_one(d) for d in cfg_dicts]
    stats = [Stats.from_dict(d) for d in results]

    base = stats[0]
    show_host = any(b in VIRT_BACKENDS for b in args.backends)
    header = ["backend", "ptw", "ptw_reduction_%", "avg_l2_miss_lat",
              "lat_ratio", "reach_bytes", "l2_cache_tlb_hit_share"]
    if show_host:
        header.insert(3, "host_pt_reduction_%")
    rows = [header]
    for st in stats:
        red = (100.0 * (base.ptw_count - st.ptw_count) / base.ptw_count
               if base.ptw_count else 0.0)
        ratio = (st.avg_l2_tlb_miss_latency / base.avg_l2_tlb_miss_latency
                 if base.avg_l2_tlb_miss_latency else 0.0)
        share = (st.l2_cache_tlb_hit_count / st.l2_tlb_misses
                 if st.l2_tlb_misses else 0.0)
        row = [st.backend, str(st.ptw_count), f"{red:.1f}",
               f"{st.avg_l2_tlb_miss_latency:.1f}", f"{ratio:.3f}",
               str(st.translation_reach_bytes), f"{share:.3f}"]
        if show_host:
            hred = (100.0 * (base.host_pt_accesses - st.host_pt_accesses)
                    / base.host_pt_accesses if base.host_pt_accesses else 0.0)
            row.insert(3, f"{hred:.1f}")
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    for r in rows:
        print("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    print(f"config={base.config_hash} seed={base.seed} "
          f"(ratios normalized to {stats[0].backend})")

    out = getattr(args, "out", None)
    if out:
        os.makedirs(out, exist_ok=True)
        for b, d in zip(args.backends, results):
            with open(os.path.join(out, f"stats-{b}.json"), "w") as f:
                json.dump(d, f, indent=2, sort_keys=True)
                f.write("\n")
    return EXIT_OK


def cmd_report(args):
    try:
        with open(args.stats) as f:
            stats = Stats.from_dict(json.load(f))
    except json.JSONDecodeError as e:
        raise TraceError(f"{args.stats}: {e}") from None
    out = _outdir(args)

    def write_hist(name, hist):
        path = os.path.join(out, name)
        with open(path, "w") as f:
            f.write(f"# backend={stats.backend} config={stats.config_hash} "
                    f"seed={stats.seed}\n")
            f.write("# bucket count\n")
            for k, v in hist.items():
                f.write(f"\"{k}\" {v}\n")
        return path

    def write_series(name, values):
        path = os.path.join(out, name)
        with open(path, "w") as f:
            f.write(f"# backend={stats.backend} config={stats.config_hash} "
                    f"seed={stats.seed}\n")
            f.write("# sample value\n")
            for i, v in enumerate(values):
                f.write(f"{i} {v}\n")
        return path

    written = [
        write_hist("ptw_latency.dat", stats.ptw_latency_histogram),
        write_hist("data_block_reuse.dat", stats.data_block_reuse_histogram),
        write_hist("tlb_block_reuse.dat", stats.tlb_block_reuse_histogram),
        write_series("reach_timeline.dat", stats.translation_reach_timeline),
        write_series("tlb_block_occupancy.dat",
                     stats.tlb_block_occupancy_timeline),
    ]
    print(f"backend={stats.backend} config={stats.config_hash} "
          f"seed={stats.seed}")
    print(f"instructions={stats.instructions} ptw={stats.ptw_count} "
          f"l1_tlb_mpki={stats.l1_tlb_mpki:.3f} "
          f"l2_tlb_mpki={stats.l2_tlb_mpki:.3f}")
    print(f"avg_ptw_latency={stats.avg_ptw_latency:.1f} "
          f"avg_l2_tlb_miss_latency={stats.avg_l2_tlb_miss_latency:.1f} "
          f"reach={stats.translation_reach_bytes}")
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


def default_config_toml():
    """The checked-in baseline configuration as a TOML document."""
    cfg = RunConfig()
    sections = {
        "machine": ("va_bits", "pa_bits", "clock_ghz"),
        "tlb": ("l1i_tlb_entries", "l1i_tlb_ways", "l1i_tlb_latency",
                "l1d_tlb_4k_entries", "l1d_tlb_4k_ways", "l1d_tlb_2m_entries",
                "l1d_tlb_2m_ways", "l1d_tlb_latency", "l2_tlb_entries",
                "l2_tlb_ways", "l2_tlb_latency", "nested_tlb_entries",
                "nested_tlb_latency", "pwc_entries", "pwc_ways", "pwc_latency",
                "mpki_epoch_instructions"),
        "cache": ("l1_cache_bytes", "l1_cache_ways", "l1_cache_latency",
                  "l2_cache_bytes", "l2_cache_ways", "l2_cache_latency",
                  "l3_cache_bytes", "l3_cache_ways", "l3_cache_latency",
                  "cache_line_bytes", "dram_latency", "maintenance_latency_ns"),
        "predictor": ("predictor_freq_lo", "predictor_freq_hi",
                      "predictor_cost_lo", "predictor_cost_hi",
                      "bypass_mpki_threshold", "tlb_mpki_threshold",
                      "background_walk_slots"),
        "backend": ("backend", "backend_tlb_entries", "backend_tlb_latency",
                    "l3_tlb_latency", "pom_tlb_entries", "pom_tlb_ways",
                    "victima_nested_blocks"),
        "trace": ("trace_path", "trace_kind", "trace_stride", "trace_zipf_s",
                  "footprint_bytes", "record_count", "seed",
                  "large_page_fraction", "reach_sample_instructions"),
    }
    lines = []
    for section, keys in sections.items():
        lines.append(f"[{section}]")
        for key in keys:
            value = getattr(cfg, key)
            name = "name" if key == "backend" else key
            if isinstance(value, bool):
                rendered = "true" if value else "false"
            elif isinstance(value, str):
                rendered = f'"{value}"'
            else:
                rendered = repr(value)
            lines.append(f"{name} = {rendered}")
        lines.append("")
    return "\n".join(lines)


class UsageError(Exception):
    pass


# --------------------------------------------------------------------- parser

def build_parser():
    p = argparse.ArgumentParser(
        prog="vmsim",
        description="Deterministic trace-driven simulator of CPU address "
                    "translation: TLBs, page walks, and PTE caching inside "
                    "the L2 data cache.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic binary trace")
    g.add_argument("--kind", default="uniform", choices=simkit.GENERATOR_KINDS,
                   help="access pattern (default: uniform)")
    g.add_argument("--footprint", type=parse_size, default=1 << 30,
                   help="working-set size, e.g. 1GiB (default: 1GiB)")
    g.add_argument("--records", type=int, default=1_000_000,
                   help="number of trace records (default: 1000000)")
    g.add_argument("--seed", type=int, default=1, help="RNG seed (default: 1)")
    g.add_argument("--stride", type=parse_size, default=4096,
                   help="stride for the strided pattern (default: 4096)")
    g.add_argument("--zipf-s", type=float, default=1.0, dest="zipf_s",
                   help="zipfian exponent (default: 1.0)")
    g.add_argument("-o", "--output", required=True, help="output trace file")
    g.set_defaults(func=cmd_gen)

    common = dict(add_help=True)
    r = sub.add_parser("run", help="simulate one backend over a trace",
                       **common)
    _add_run_flags(r)
    r.add_argument("--dump-defaults", action="store_true",
                   help="print the baseline configuration as TOML and exit")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare",
                       help="run several backends on the same trace and "
                            "tabulate reductions", **common)
    _add_run_flags(c, backend_flag=False)
    c.add_argument("backends", nargs="*", help="two or more backend names")
    c.set_defaults(func=cmd_compare)

    rep = sub.add_parser("report",
                         help="emit gnuplot-ready histograms from a stats "
                              "file", **common)
    rep.add_argument("stats", help="stats.json produced by `run`")
    rep.add_argument("-o", "--out", default=".", help="output directory")
    rep.set_defaults(func=cmd_report)
    return p


def _add_run_flags(sp, backend_flag=True):
    sp.add_argument("-c", "--config", help="TOML configuration file")
    sp.add_argument("-t", "--trace", help="trace file (.vmt binary or .txt)")
    if backend_flag:
        sp.add_argument("-b", "--backend", choices=BACKENDS,
                        help="translation backend (overrides config)")
    sp.add_argument("--kind", choices=simkit.GENERATOR_KINDS, default=None,
                    help="generator kind when no trace file is given")
    sp.add_argument("--records", type=int, default=None,
                    help="generated record count")
    sp.add_argument("--footprint", type=parse_size, default=None,
                    help="generated working-set size, e.g. 4GiB")
    sp.add_argument("--seed", type=int, default=None, help="RNG seed")
    sp.add_argument("--stride", type=parse_size, default=None,
                    help="stride for the strided pattern")
    sp.add_argument("--zipf-s", type=float, default=None, dest="zipf_s",
                    help="zipfian exponent")
    sp.add_argument("-o", "--out", default=None, help="output directory")


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if e.code is not None else EXIT_OK
    try:
        return args.func(args)
    except UsageError as e:
        print(f"vmsim: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as e:
        print(f"vmsim: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except TraceError as e:
        print(f"vmsim: trace error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except (OSError, FileNotFoundError) as e:
        print(f"vmsim: I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
