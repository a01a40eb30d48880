"""Trace ingestion and generation, the simulation loop, and metric assembly."""

import gc
from collections import namedtuple

import numpy as np

from .errors import ConfigError, TraceError
from .maintenance import FlushAll, FlushAsid, FlushPage, FlushRange
from .mmu import Mmu
from .stats import Stats

# Record opcodes.
OP_IFETCH = 0
OP_LOAD = 1
OP_STORE = 2
OP_MAINT = 3
OP_ASID = 4

# Maintenance sub-opcodes (stored in the record's pad field).
M_FLUSH_ALL = 0
M_FLUSH_ASID = 1
M_SHOOTDOWN = 2
M_RANGE_LO = 3   # followed by an M_RANGE_HI record carrying the upper bound
M_RANGE_HI = 4

TRACE_MAGIC = b"VMT1"
TRACE_VERSION = 1

RECORD_DTYPE = np.dtype([
    ("op", "u1"), ("asid", "u1"), ("sub", "<u2"),
    ("icount", "<u4"), ("va", "<u8"),
])

TraceRecord = namedtuple("TraceRecord", "op asid sub icount va")

_OP_NAMES = {OP_IFETCH: "I", OP_LOAD: "L", OP_STORE: "S"}
_OP_CODES = {v: k for k, v in _OP_NAMES.items()}


# --------------------------------------------------------------------- traces

def write_trace(path, records):
    """Write the binary trace format: a 16-byte header (magic, version,
    record count) followed by 16-byte little-endian records."""
    arr = np.asarray(records, dtype=RECORD_DTYPE)
    with open(path, "wb") as f:
        f.write(TRACE_MAGIC)
        f.write(np.uint32(TRACE_VERSION).tobytes())
        f.write(np.uint64(len(arr)).tobytes())
        f.write(arr.tobytes())


def read_trace(path):
    """Read a binary (.vmt) or line-oriented text trace into a record array."""
    if str(path).endswith(".txt"):
        with open(path) as f:
            return parse_text_trace(f)
    with open(path, "rb") as f:
        header = f.read(16)
        if len(header) < 16 or header[:4] != TRACE_MAGIC:
            raise TraceError(f"{path}: bad trace magic")
        version = int(np.frombuffer(header[4:8], "<u4")[0])
        if version != TRACE_VERSION:
            raise TraceError(f"{path}: unsupported trace version {version}")
        count = int(np.frombuffer(header[8:16], "<u8")[0])
        data = f.read()
    arr = np.frombuffer(data, dtype=RECORD_DTYPE)
    if len(arr) != count:
        raise TraceError(
            f"{path}: header promises {count} records, file has {len(arr)}")
    return arr


def parse_text_trace(lines):
    """Hand-written text form, one record per line:

        I|L|S <hex-va> [icount] [asid]     memory access
        AS <asid>                          ASID switch
        F                                  flush all
        FA <asid>                          flush by ASID
        SD <hex-va> [asid]                 shootdown one page
        SR <hex-lo> <hex-hi> [asid]        shootdown a VA range
    """
    out = []
    for lineno, line in enumerate(lines, 1):
        parts = line.split("#")[0].split()
        if not parts:
            continue
        try:
            tok = parts[0].upper()
            if tok in _OP_CODES:
                va = int(parts[1], 16)
                icount = int(parts[2]) if len(parts) > 2 else 1
                asid = int(parts[3]) if len(parts) > 3 else 0
                out.append((_OP_CODES[tok], asid, 0, icount, va))
            elif tok == "AS":
                out.append((OP_ASID, int(parts[1]), 0, 0, 0))
            elif tok == "F":
                out.append((OP_MAINT, 0, M_FLUSH_ALL, 0, 0))
            elif tok == "FA":
                out.append((OP_MAINT, int(parts[1]), M_FLUSH_ASID, 0, 0))
            elif tok == "SD":
                asid = int(parts[2]) if len(parts) > 2 else 0
                out.append((OP_MAINT, asid, M_SHOOTDOWN, 0, int(parts[1], 16)))
            elif tok == "SR":
                asid = int(parts[3]) if len(parts) > 3 else 0
                out.append((OP_MAINT, asid, M_RANGE_LO, 0, int(parts[1], 16)))
                out.append((OP_MAINT, asid, M_RANGE_HI, 0, int(parts[2], 16)))
            else:
                raise ValueError(f"unknown op '{parts[0]}'")
        except (ValueError, IndexError) as e:
            raise TraceError(f"trace line {lineno}: {e}") from None
    return np.array(out, dtype=RECORD_DTYPE)


# ----------------------------------------------------------------- generators

GENERATOR_KINDS = ("uniform", "strided", "zipfian", "pointer-chase")


def generate(kind, footprint_bytes, record_count, seed=1, stride=4096,
             zipf_s=1.0, asid=0, page_bytes=4096):
    """Deterministic synthetic trace; same arguments -> byte-identical records.

    uniform        page-aligned addresses drawn uniformly over the footprint
    strided        sequential walk with a fixed stride, wrapping
    zipfian        pages ranked by a power law with exponent zipf_s
    pointer-chase  dependent chain following a seeded page permutation
    """
    if footprint_bytes <= 0:
        raise ConfigError("footprint must be positive")
    if kind not in GENERATOR_KINDS:
        raise ConfigError(f"unknown generator kind '{kind}'")
    npages = max(1, footprint_bytes // page_bytes)
    rng = np.random.default_rng(seed)
    if kind == "uniform":
        pages = rng.integers(0, npages, size=record_count, dtype=np.uint64)
        vas = pages * page_bytes
    elif kind == "strided":
        offs = (np.arange(record_count, dtype=np.uint64) * stride) % footprint_bytes
        vas = offs
    elif kind == "zipfian":
        ranks = np.arange(1, npages + 1, dtype=np.float64)
        probs = ranks ** -zipf_s
        probs /= probs.sum()
        # Rank r is assigned to a shuffled page so hot pages spread out.
        perm = rng.permutation(npages).astype(np.uint64)
        idx = rng.choice(npages, size=record_count, p=probs)
        vas = perm[idx] * page_bytes
    else:  # pointer-chase
        # A single cycle through every page in shuffled order: each access
        # depends on the previous page's pointer.
        order = rng.permutation(npages).astype(np.uint64)
        vas = order[np.arange(record_count) % npages] * page_bytes
    arr = np.zeros(record_count, dtype=RECORD_DTYPE)
    arr["op"] = OP_LOAD
    arr["asid"] = asid
    arr["icount"] = 1
    arr["va"] = vas
    return arr


def generate_from_config(cfg):
    return generate(cfg.trace_kind, cfg.footprint_bytes, cfg.record_count,
                    seed=cfg.seed, stride=cfg.trace_stride,
                    zipf_s=cfg.trace_zipf_s)


# ------------------------------------------------------------------- run loop

def run(cfg, records=None) -> Stats:
    """Drive one backend over a trace; deterministic for fixed (cfg, trace).

    A record's asid byte of 0 means "the current ASID context", which starts
    at 0 and is changed by ASID-switch records; a nonzero byte overrides it.
    """
    cfg.validate()
    if records is None:
        records = read_trace(cfg.trace_path) if cfg.trace_path \
            else generate_from_config(cfg)
    stats = Stats()
    stats.backend = cfg.backend
    stats.seed = cfg.seed
    stats.config_hash = cfg.config_hash()
    mmu = Mmu(cfg, stats)
    mem = mmu.mem

    sample_every = max(1, cfg.reach_sample_instructions)
    next_sample = sample_every
    instructions = 0
    current_asid = 0
    pending_range = None  # (lo, asid) awaiting its M_RANGE_HI record

    if isinstance(records, np.ndarray):
        ops = records["op"].tolist()
        asids = records["asid"].tolist()
        subs = records["sub"].tolist()
        icounts = records["icount"].tolist()
        vas = records["va"].tolist()
        rows = zip(ops, asids, subs, icounts, vas)
    else:
        rows = ((r[0], r[1], r[2], r[3], r[4]) for r in records)

    translate = mmu.translate
    access_data = mem.access_data
    n = 0
    # The simulation state is acyclic; cyclic collection only adds overhead.
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for op, asid, sub, icount, va in rows:
            n += 1
            if op <= OP_STORE:
                if asid == 0:
                    asid = current_asid
                res = translate(va, asid,
                                "ifetch" if op == OP_IFETCH else "load")
                access_data(res.pa, write=(op == OP_STORE),
                            ifetch=(op == OP_IFETCH))
            elif op == OP_MAINT:
                if pending_range is not None:
                    if sub != M_RANGE_HI:
                        raise TraceError(f"record {n}: expected range upper bound")
                    lo, rasid = pending_range
                    pending_range = None
                    mmu.maintenance(FlushRange(lo, va, rasid))
                elif sub == M_FLUSH_ALL:
                    mmu.maintenance(FlushAll())
                elif sub == M_FLUSH_ASID:
                    mmu.maintenance(FlushAsid(asid))
                elif sub == M_SHOOTDOWN:
                    mmu.maintenance(FlushPage(va, asid))
                elif sub == M_RANGE_LO:
                    pending_range = (va, asid)
                else:
                    raise TraceError(f"record {n}: bad maintenance sub-op {sub}")
            elif op == OP_ASID:
                current_asid = asid
            else:
                raise TraceError(f"record {n}: bad opcode {op}")
            if icount:
                mmu.retire(icount)
                instructions += icount
                while instructions >= next_sample:
                    stats.translation_reach_timeline.append(mem.reach_bytes)
                    stats.tlb_block_occupancy_timeline.append(mem.tlb_block_count)
                    next_sample += sample_every
    finally:
        if gc_was_enabled:
            gc.enable()

    stats.records = n
    stats.instructions = instructions
    stats.translation_reach_bytes = mem.translation_reach()
    stats.data_block_reuse_histogram = dict(mem.data_reuse)
    stats.tlb_block_reuse_histogram = dict(mem.tlb_reuse)
    stats.l2_cache_mpki = mem.l2_miss_tracker.current
    stats.writebacks = mem.writebacks
    stats.finalize()
    return stats
