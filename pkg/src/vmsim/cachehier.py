"""Data cache hierarchy (L1 I/D, L2, L3, flat DRAM) where the L2 can also hold
TLB blocks and nested TLB blocks: tag-width derivation, the TLB-aware SRRIP
replacement policy, block transformation, dual virtual probes and TLB-block
invalidation commands."""

from dataclasses import dataclass

from . import addrspace
from .addrspace import GROUP_SHIFT, GROUP_SIZE, PAGE_4K, PAGE_2M
from .errors import ConfigError
from .maintenance import FlushAll, FlushAsid, FlushPage, FlushRange
from .tlbhier import MpkiTracker

# Block kinds
DATA = 0
TLB_BLOCK = 1
NESTED_TLB_BLOCK = 2

RRIP_MAX = 3  # 2-bit RRPV, standard SRRIP configuration

# Reuse histogram buckets: 0, 1, 2-20, >20 hits before eviction.
REUSE_BUCKETS = ("0", "1", "2-20", ">20")


def reuse_bucket(hits):
    if hits == 0:
        return "0"
    if hits == 1:
        return "1"
    if hits <= 20:
        return "2-20"
    return ">20"


@dataclass(frozen=True)
class TagWidths:
    data_tag_bits: int
    tlb_tag_bits: int
    asid_bits: int
    page_size_bits: int

    @property
    def spare_bits(self):
        return self.data_tag_bits - self.tlb_tag_bits


def derive_tag_widths(va_bits, pa_bits, cache_bytes, ways, line_bytes=64,
                      required_asid_bits=4):
    """Tag widths of data blocks vs TLB blocks for an L2 geometry.

    The TLB tag must fit inside the data tag with room left for the ASID and
    a page-size bit; otherwise the configuration cannot tag TLB blocks
    uniquely and fewer PTEs per line would be needed.
    """
    num_sets = cache_bytes // (line_bytes * ways)
    data = addrspace.data_tag_bits(pa_bits, num_sets, line_bytes)
    tlb = addrspace.tlb_tag_bits(va_bits, num_sets)
    spare = data - tlb
    if spare < required_asid_bits:
        raise ConfigError(
            f"TLB-block tag needs {tlb} bits + {required_asid_bits} ASID bits "
            f"but the data tag has only {data}; reduce PTEs per line")
    # Up to 11 spare bits go to the ASID/VMID; one more, when available,
    # records the page size.  Any remainder is unused.
    page_size_bits = 1 if spare > 11 else 0
    asid_bits = min(11, spare - page_size_bits)
    return TagWidths(data, tlb, asid_bits, page_size_bits)


class Block:
    __slots__ = ("key", "kind", "asid", "page_size", "rrpv", "dirty", "hits",
                 "payload", "lru")

    def __init__(self, key, kind, asid=0, page_size=0, rrpv=0, payload=None):
        self.key = key
        self.kind = kind
        self.asid = asid
        self.page_size = page_size
        self.rrpv = rrpv
        self.dirty = False
        self.hits = 0
        self.payload = payload
        self.lru = 0


def srrip_insert_rrpv(kind, l2_tlb_mpki, high_mpki_threshold=5.0):
    """Insertion RRPV: TLB blocks under translation pressure come in at 0,
    everything else at the long re-reference interval."""
    if kind != DATA and l2_tlb_mpki > high_mpki_threshold:
        return 0
    return RRIP_MAX - 1


def srrip_on_hit(block, l2_tlb_mpki, high_mpki_threshold=5.0):
    """Hit promotion: TLB blocks under pressure step down by 3, others by 1."""
    step = 3 if (block.kind != DATA and l2_tlb_mpki > high_mpki_threshold) else 1
    block.rrpv = max(0, block.rrpv - step)


def choose_replacement_victim(blocks, l2_tlb_mpki, high_mpki_threshold=5.0):
    """SRRIP victim selection over a full set (list of Blocks), reference
    formulation.

    Scans for a block at RRIP_MAX, ageing the whole set by one per failed
    round.  If the chosen victim is a TLB block and translation pressure is
    high, one more attempt is made to find a non-TLB block at the same RRPV
    level; if none exists the TLB block is evicted anyway.
    Mutates the blocks' rrpv fields (ageing); returns the victim index.
    """
    pressure = l2_tlb_mpki > high_mpki_threshold
    for _ in range(RRIP_MAX + 1):
        victim = -1
        for i, b in enumerate(blocks):
            if b.rrpv >= RRIP_MAX:
                victim = i
                break
        if victim >= 0:
            if pressure and blocks[victim].kind != DATA:
                for i, b in enumerate(blocks):
                    if b.rrpv >= RRIP_MAX and b.kind == DATA:
                        return i
            return victim
        for b in blocks:
            b.rrpv = min(RRIP_MAX, b.rrpv + 1)
    raise AssertionError("victim scan did not terminate")


def srrip_select(blocks, pressure):
    """Single-scan equivalent of choose_replacement_victim.

    The repeated ageing rounds terminate exactly when the block(s) with the
    maximal RRPV reach RRIP_MAX, so the victim is the first block with the
    maximal RRPV; the whole set then ages by the same deficit.  Takes any
    iterable re-iterable in a stable order (e.g. dict values); returns the
    victim Block.
    """
    maxr = -1
    victim = None
    for b in blocks:
        if b.rrpv > maxr:
            maxr = b.rrpv
            victim = b
            if maxr >= RRIP_MAX:
                break
    if maxr < RRIP_MAX:
        delta = RRIP_MAX - maxr
        for b in blocks:
            r = b.rrpv + delta
            b.rrpv = RRIP_MAX if r > RRIP_MAX else r
    if pressure and victim.kind != DATA:
        for b in blocks:
            if b.kind == DATA and b.rrpv >= RRIP_MAX:
                return b
    return victim


class CacheLevel:
    """One set-associative cache level.

    Sets are dicts keyed by the block key; for the LRU policy the dict's
    insertion order is the LRU order.  Data keys are integer line addresses;
    TLB-block keys are (kind, group, asid, page_size) tuples, so a physical
    probe can never match a TLB block and vice versa.
    """

    def __init__(self, cache_bytes, ways, latency, line_bytes=64, policy="lru",
                 name=""):
        self.num_sets = cache_bytes // (line_bytes * ways)
        if self.num_sets & (self.num_sets - 1):
            raise ConfigError(f"{name}: number of sets must be a power of two")
        self.ways = ways
        self.latency = latency
        self.line_bytes = line_bytes
        self.policy = policy
        self.name = name
        self.sets = [dict() for _ in range(self.num_sets)]
        self.evict_hook = None  # called with the evicted Block

    # -- internals ---------------------------------------------------------

    def _evict(self, s, key):
        block = s.pop(key)
        if self.evict_hook:
            self.evict_hook(block)
        return block

    def _make_room(self, s, tlb_mpki):
        if len(s) < self.ways:
            return None
        if self.policy == "lru":
            key = next(iter(s))
            return self._evict(s, key)
        victim = srrip_select(s.values(), tlb_mpki > 5.0)
        return self._evict(s, victim.key)

    # -- public ------------------------------------------------------------

    def lookup(self, set_index, key, tlb_mpki=0.0):
        s = self.sets[set_index]
        block = s.get(key)
        if block is None:
            return None
        block.hits += 1
        if self.policy == "lru":
            del s[key]
            s[key] = block
        else:
            srrip_on_hit(block, tlb_mpki)
        return block

    def insert(self, set_index, block, tlb_mpki=0.0):
        """Insert a block, evicting if necessary; returns the evicted block."""
        s = self.sets[set_index]
        if block.key in s:
            self._evict(s, block.key)
        evicted = self._make_room(s, tlb_mpki)
        if self.policy != "lru":
            block.rrpv = srrip_insert_rrpv(block.kind, tlb_mpki)
        s[block.key] = block
        return evicted

    def remove(self, set_index, key):
        return self.sets[set_index].pop(key, None)

    def contains(self, set_index, key):
        return key in self.sets[set_index]

    def valid_count(self):
        return sum(len(s) for s in self.sets)


class LruLevel:
    """Plain LRU cache level holding line presence only (no per-block state);
    used for the L1s and L3, whose blocks carry no TLB metadata.  Sets are
    dicts whose insertion order is the LRU order."""

    def __init__(self, cache_bytes, ways, latency, line_bytes=64, name=""):
        self.num_sets = cache_bytes // (line_bytes * ways)
        if self.num_sets & (self.num_sets - 1):
            raise ConfigError(f"{name}: number of sets must be a power of two")
        self.ways = ways
        self.latency = latency
        self.name = name
        self.sets = [dict() for _ in range(self.num_sets)]

    def valid_count(self):
        return sum(len(s) for s in self.sets)


def tlb_block_key(vpn_base, asid, page_size, nested=False):
    kind = NESTED_TLB_BLOCK if nested else TLB_BLOCK
    return (kind, vpn_base >> GROUP_SHIFT, asid, page_size)


@dataclass
class CacheGeometry:
    l1_bytes: int = 32 * 1024
    l1_ways: int = 8
    l1_latency: int = 4
    l2_bytes: int = 2 * 1024 * 1024
    l2_ways: int = 16
    l2_latency: int = 16
    l3_bytes: int = 2 * 1024 * 1024
    l3_ways: int = 16
    l3_latency: int = 35
    line_bytes: int = 64
    dram_latency: int = 150


class CacheHierarchy:
    """L1 I/D, shared L2/L3 and flat-latency DRAM.

    Data accesses probe L1 -> L2 -> L3 -> DRAM and fill upward.  Page-table
    accesses bypass the L1s (the hardware walker sits next to the L2).  Only
    the L2 ever holds TLB-kind blocks.
    """

    def __init__(self, geom: CacheGeometry = None, tlb_mpki_fn=None,
                 l2_policy="tlb_srrip"):
        g = geom or CacheGeometry()
        self.geom = g
        self.l1d = LruLevel(g.l1_bytes, g.l1_ways, g.l1_latency,
                            g.line_bytes, "l1d")
        self.l1i = LruLevel(g.l1_bytes, g.l1_ways, g.l1_latency,
                            g.line_bytes, "l1i")
        self.l2 = CacheLevel(g.l2_bytes, g.l2_ways, g.l2_latency,
                             g.line_bytes, l2_policy, "l2")
        self.l3 = LruLevel(g.l3_bytes, g.l3_ways, g.l3_latency,
                           g.line_bytes, "l3")
        self.dram_latency = g.dram_latency
        self.line_shift = g.line_bytes.bit_length() - 1
        if (1 << self.line_shift) != g.line_bytes:
            raise ConfigError("line size must be a power of two")
        self.tlb_mpki_fn = tlb_mpki_fn or (lambda: 0.0)
        self.tlb_mpki_threshold = 5.0
        # L2 cache data-miss pressure (feeds the predictor bypass rule).
        self.l2_miss_tracker = MpkiTracker()
        self.reach_bytes = 0
        self.tlb_block_count = 0
        self.data_reuse = {b: 0 for b in REUSE_BUCKETS}
        self.tlb_reuse = {b: 0 for b in REUSE_BUCKETS}
        self.writebacks = 0
        self.l2.evict_hook = self._on_l2_evict

    # -- bookkeeping -------------------------------------------------------

    def _on_l2_evict(self, block):
        if block.kind == DATA:
            self.data_reuse[reuse_bucket(block.hits)] += 1
            if block.dirty:
                self.writebacks += 1
        else:
            # TLB blocks are dropped, never written back.
            self.tlb_reuse[reuse_bucket(block.hits)] += 1
            self.reach_bytes -= GROUP_SIZE * block.page_size
            self.tlb_block_count -= 1

    def _data_coords(self, level, pa):
        line = pa // level.line_bytes
        return line & (level.num_sets - 1), line

    # -- data path ---------------------------------------------------------

    def _l2_data_fill(self, line, write, mpki):
        """Insert a data line into the L2, running SRRIP replacement inline."""
        l2 = self.l2
        s2 = l2.sets[line & (l2.num_sets - 1)]
        if len(s2) >= l2.ways:
            victim = srrip_select(s2.values(), mpki > self.tlb_mpki_threshold)
            del s2[victim.key]
            self._on_l2_evict(victim)
        nb = Block(line, DATA, rrpv=RRIP_MAX - 1)
        nb.dirty = write
        s2[line] = nb

    @staticmethod
    def _lru_touch(level, line):
        """Probe + LRU refresh; fills (with eviction) on miss.  True on hit."""
        s = level.sets[line & (level.num_sets - 1)]
        if line in s:
            del s[line]
            s[line] = True
            return True
        if len(s) >= level.ways:
            del s[next(iter(s))]
        s[line] = True
        return False

    def access_data(self, pa, write=False, ifetch=False):
        """Demand access through the full hierarchy.

        Returns (service_level_name, cycles); cycles is the sum of latencies
        on the taken path.
        """
        line = pa >> self.line_shift
        l1 = self.l1i if ifetch else self.l1d
        s1 = l1.sets[line & (l1.num_sets - 1)]
        if line in s1:
            del s1[line]
            s1[line] = True
            return "L1", l1.latency
        if len(s1) >= l1.ways:
            del s1[next(iter(s1))]
        s1[line] = True
        cycles = l1.latency + self.l2.latency
        l2 = self.l2
        s2 = l2.sets[line & (l2.num_sets - 1)]
        b2 = s2.get(line)
        if b2 is not None:
            b2.hits += 1
            if b2.rrpv:
                b2.rrpv -= 1
            if write:
                b2.dirty = True
            return "L2", cycles
        self.l2_miss_tracker.record_miss()
        cycles += self.l3.latency
        if self._lru_touch(self.l3, line):
            service = "L3"
        else:
            cycles += self.dram_latency
            service = "DRAM"
        self._l2_data_fill(line, write, self.tlb_mpki_fn())
        return service, cycles

    def pt_access(self, pa):
        """Page-walker access: probes L2 -> L3 -> DRAM, filling L2 and L3
        (the walker sits next to the L2; the L1s are bypassed)."""
        line = pa >> self.line_shift
        cycles = self.l2.latency
        l2 = self.l2
        s2 = l2.sets[line & (l2.num_sets - 1)]
        b2 = s2.get(line)
        if b2 is not None:
            b2.hits += 1
            if b2.rrpv:
                b2.rrpv -= 1
            return "L2", cycles
        cycles += self.l3.latency
        if self._lru_touch(self.l3, line):
            service = "L3"
        else:
            cycles += self.dram_latency
            service = "DRAM"
        self._l2_data_fill(line, False, self.tlb_mpki_fn())
        return service, cycles

    # -- TLB blocks --------------------------------------------------------

    def probe_tlb_block(self, vpn_4k, vpn_2m, asid, nested=False):
        """Dual virtual probe of the L2 (4KiB and 2MiB hypotheses in parallel).

        Returns (block, page_size, cycles); block is None on miss.  One L2
        latency is charged regardless of outcome.
        """
        mpki = self.tlb_mpki_fn()
        cycles = self.l2.latency
        key4 = tlb_block_key(vpn_4k, asid, PAGE_4K, nested)
        si4 = (vpn_4k >> GROUP_SHIFT) & (self.l2.num_sets - 1)
        block = self.l2.lookup(si4, key4, mpki)
        if block is not None:
            return block, PAGE_4K, cycles
        key2 = tlb_block_key(vpn_2m, asid, PAGE_2M, nested)
        si2 = (vpn_2m >> GROUP_SHIFT) & (self.l2.num_sets - 1)
        block = self.l2.lookup(si2, key2, mpki)
        if block is not None:
            return block, PAGE_2M, cycles
        return None, None, cycles

    def has_tlb_block(self, vpn, asid, page_size, nested=False):
        si = (vpn >> GROUP_SHIFT) & (self.l2.num_sets - 1)
        return self.l2.contains(si, tlb_block_key(vpn, asid, page_size, nested))

    def transform_to_tlb_block(self, leaf_line_pa, vpn_base, asid, page_size,
                               payload, nested=False):
        """Turn the cache block holding a leaf PTE group into a TLB block.

        The data copy of the line (if still in L2) is dropped and the block
        reappears under its virtual-region tag in the VPN-indexed set; it is
        no longer reachable by physical address.  If the line was evicted
        between the walk and the transform, a fresh TLB block is allocated
        through normal replacement instead.  No-op if the block already
        exists.  Returns True if a block is present afterwards.
        """
        if vpn_base & (GROUP_SIZE - 1):
            raise ValueError("vpn_base must be 8-page aligned")
        mpki = self.tlb_mpki_fn()
        si_pa, key_pa = self._data_coords(self.l2, leaf_line_pa)
        # Rewriting metadata in place: the data copy vanishes without counting
        # as an eviction.
        self.l2.remove(si_pa, key_pa)
        key = tlb_block_key(vpn_base, asid, page_size, nested)
        si = (vpn_base >> GROUP_SHIFT) & (self.l2.num_sets - 1)
        existing = self.l2.sets[si].get(key)
        if existing is not None:
            # The walk refetched the whole leaf line: rewrite the payload so
            # PTEs installed since the first transform become visible.
            existing.payload = payload
            return True
        kind = NESTED_TLB_BLOCK if nested else TLB_BLOCK
        block = Block(key, kind, asid=asid, page_size=page_size, payload=payload)
        self.l2.insert(si, block, mpki)
        self.reach_bytes += GROUP_SIZE * page_size
        self.tlb_block_count += 1
        return True

    def invalidate_tlb_blocks(self, scope):
        """Apply a TLB invalidation command to the L2's TLB-kind blocks.

        Invalidating any single VPN kills its whole 8-entry block.  Returns
        the number of blocks invalidated.  Latency is charged by the caller.
        """
        count = 0
        if isinstance(scope, (FlushAll, FlushAsid)):
            for s in self.l2.sets:
                doomed = [k for k, b in s.items()
                          if b.kind != DATA
                          and (isinstance(scope, FlushAll) or b.asid == scope.asid)]
                for k in doomed:
                    self._drop_tlb_block(s, k)
                count += len(doomed)
            return count
        if isinstance(scope, FlushPage):
            lo = hi = scope.va
        elif isinstance(scope, FlushRange):
            lo, hi = scope.lo, scope.hi
        else:
            raise TypeError(f"unknown scope {scope!r}")
        for page_size in (PAGE_4K, PAGE_2M):
            group_span = GROUP_SIZE * page_size
            g = lo // group_span
            while g * group_span <= hi:
                vpn_base = g * GROUP_SIZE
                for nested in (False, True):
                    key = tlb_block_key(vpn_base, scope.asid, page_size, nested)
                    si = (vpn_base >> GROUP_SHIFT) & (self.l2.num_sets - 1)
                    s = self.l2.sets[si]
                    if key in s:
                        self._drop_tlb_block(s, key)
                        count += 1
                g += 1
        return count

    def _drop_tlb_block(self, s, key):
        block = s.pop(key)
        self.reach_bytes -= GROUP_SIZE * block.page_size
        self.tlb_block_count -= 1

    def translation_reach(self):
        """Bytes covered by resident TLB blocks (recomputed by scan)."""
        total = 0
        for s in self.l2.sets:
            for b in s.values():
                if b.kind != DATA:
                    total += GROUP_SIZE * b.page_size
        return total
