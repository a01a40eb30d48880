"""Four-level radix page table with per-PTE walk counters, page walk caches,
and the three walkers: native, nested (two-dimensional) and shadow."""

from .addrspace import MachineSpec, PAGE_4K, PAGE_2M
from .errors import MappingError

FREQ_MAX = 7
COST_MAX = 15

LEAF_LEVEL_4K = 3
LEAF_LEVEL_2M = 2


class PageTableEntry:
    __slots__ = ("pfn", "page_size", "ptw_freq", "ptw_cost")

    def __init__(self, pfn, page_size):
        self.pfn = pfn
        self.page_size = page_size
        self.ptw_freq = 0
        self.ptw_cost = 0


def update_ptw_counters(pte, dram_access_count):
    """Saturating counter update after a completed walk that fetched this PTE.

    Frequency bumps on every walk; cost bumps once per walk that needed at
    least one DRAM access.  Saturated counters stay at their maximum.
    """
    if pte.ptw_freq < FREQ_MAX:
        pte.ptw_freq += 1
    if dram_access_count >= 1 and pte.ptw_cost < COST_MAX:
        pte.ptw_cost += 1


class _Node:
    __slots__ = ("level", "entries", "base_pa")

    def __init__(self, level, base_pa):
        self.level = level
        self.entries = {}
        self.base_pa = base_pa


class FrameAllocator:
    """Hands out 4KiB frames from a base address, sequentially."""

    def __init__(self, base_pa):
        self.next = base_pa >> 12

    def alloc(self):
        pa = self.next << 12
        self.next += 1
        return pa


class RadixPageTable:
    """Four-level radix tree.  Interior nodes get simulated physical frames
    so that walk accesses contend with data in the cache hierarchy."""

    def __init__(self, spec: MachineSpec = None, node_allocator=None,
                 node_base=1 << 44):
        self.spec = spec or MachineSpec()
        self.alloc = node_allocator or FrameAllocator(node_base)
        self.root = _Node(0, self.alloc.alloc())

    def _indices(self, va, levels):
        bpl = self.spec.bits_per_level
        top = self.spec.va_bits
        return [(va >> (top - bpl * (i + 1))) & ((1 << bpl) - 1)
                for i in range(levels)]

    def map(self, vpn, pfn, page_size=PAGE_4K):
        """Install vpn -> pfn.  vpn and pfn are in units of page_size."""
        shift = self.spec.page_shift(page_size)
        leaf_level = LEAF_LEVEL_2M if page_size == PAGE_2M else LEAF_LEVEL_4K
        indices = self._indices(vpn << shift, leaf_level + 1)
        node = self.root
        for level, idx in enumerate(indices):
            if level == leaf_level:
                existing = node.entries.get(idx)
                if isinstance(existing, _Node):
                    raise MappingError(
                        f"large page at vpn {vpn:#x} overlaps existing small mappings")
                node.entries[idx] = PageTableEntry(pfn, page_size)
                return
            child = node.entries.get(idx)
            if child is None:
                child = _Node(level + 1, self.alloc.alloc())
                node.entries[idx] = child
            elif isinstance(child, PageTableEntry):
                raise MappingError(
                    f"mapping under existing large page (vpn {vpn:#x})")
            node = child

    def lookup_pte(self, va):
        """Leaf PTE covering va, or None.  No timing, no side effects."""
        node = self.root
        bpl = self.spec.bits_per_level
        top = self.spec.va_bits
        for level in range(self.spec.radix_levels):
            idx = (va >> (top - bpl * (level + 1))) & ((1 << bpl) - 1)
            entry = node.entries.get(idx)
            if entry is None:
                return None
            if isinstance(entry, PageTableEntry):
                return entry
            node = entry
        return None

    def translate_oracle(self, va):
        """Flat-map reference translation: physical address for va, or None."""
        pte = self.lookup_pte(va)
        if pte is None:
            return None
        return (pte.pfn * pte.page_size) + (va & (pte.page_size - 1))

    def leaf_group(self, va):
        """The 8 PTE slots of the leaf line holding va's PTE.

        Returns (vpn_base, line_pa, ptes) where ptes is a list of 8
        PageTableEntry-or-None sharing one 64-byte line, and vpn_base is the
        first VPN of the group (in units of the leaf page size).
        """
        node = self.root
        bpl = self.spec.bits_per_level
        top = self.spec.va_bits
        for level in range(self.spec.radix_levels):
            idx = (va >> (top - bpl * (level + 1))) & ((1 << bpl) - 1)
            entry = node.entries.get(idx)
            if entry is None:
                return None
            if isinstance(entry, PageTableEntry):
                base_idx = idx & ~7
                line_pa = node.base_pa + base_idx * 8
                ptes = [e if isinstance(e, PageTableEntry) else None
                        for e in (node.entries.get(base_idx + i) for i in range(8))]
                shift = self.spec.page_shift(entry.page_size)
                vpn_base = (va >> shift) & ~7
                return vpn_base, line_pa, ptes
            node = entry
        return None


class PageWalkCache:
    """One small LRU cache per non-leaf level, keyed by the VPN prefix for
    that level; a hit yields the next-level node without a memory access."""

    def __init__(self, entries=32, ways=4, latency=2):
        self.num_sets = entries // ways
        self.ways = ways
        self.latency = latency
        self.sets = [dict() for _ in range(self.num_sets)]

    def _set(self, key):
        return self.sets[hash(key) & (self.num_sets - 1)]

    def lookup(self, key):
        s = self._set(key)
        v = s.get(key)
        if v is not None:
            del s[key]
            s[key] = v
        return v

    def fill(self, key, value):
        s = self._set(key)
        if key in s:
            del s[key]
        elif len(s) >= self.ways:
            del s[next(iter(s))]
        s[key] = value

    def flush(self):
        for s in self.sets:
            s.clear()


def make_pwcs(entries=32, ways=4, latency=2):
    """The three split page walk caches (one per non-leaf level)."""
    return [PageWalkCache(entries, ways, latency) for _ in range(3)]


class DirectMemory:
    """Stand-in memory with a flat access latency, for walker-only tests."""

    def __init__(self, latency=150):
        self.latency = latency

    def pt_access(self, pa):
        return "DRAM", self.latency


class WalkResult:
    __slots__ = ("pa", "pte", "leaf_line_pa", "vpn_base", "accesses",
                 "total_cycles", "dram_access_count", "pt_access_count",
                 "guest_accesses", "host_accesses")

    def __init__(self):
        self.pa = None
        self.pte = None
        self.leaf_line_pa = None
        self.vpn_base = None
        self.accesses = None        # (level, pa, service, cycles) if recorded
        self.total_cycles = 0
        self.dram_access_count = 0
        self.pt_access_count = 0    # memory accesses made (PWC hits excluded)
        self.guest_accesses = 0
        self.host_accesses = 0


def walk(pt: RadixPageTable, va, pwcs=None, memory=None,
         record_accesses=False) -> WalkResult:
    """Native four-level walk (three levels for a 2MiB leaf).

    Each non-leaf step first probes its page walk cache; the leaf access
    always goes through the cache hierarchy.  Returns None for unmapped VAs
    (page-fault signal); counter updates are the caller's job.  With
    record_accesses the result carries the sequential access list
    (level, line physical address, service point, cycles).
    """
    memory = memory or DirectMemory()
    pt_access = memory.pt_access
    node = pt.root
    spec = pt.spec
    bpl = spec.bits_per_level
    shift = spec.va_bits
    idx_mask = (1 << bpl) - 1
    # PWC keys carry the table's root frame so concurrently walked tables
    # (one per address space) never alias.
    pwc_tag = pt.root.base_pa << 39
    total = 0
    naccess = 0
    ndram = 0
    accesses = [] if record_accesses else None
    for level in range(spec.radix_levels):
        shift -= bpl
        prefix = pwc_tag | (va >> shift)
        idx = prefix & idx_mask
        entry = node.entries.get(idx)
        if entry is None:
            return None
        if entry.__class__ is PageTableEntry:
            line_pa = node.base_pa + (idx & ~7) * 8
            svc, cyc = pt_access(line_pa)
            res = WalkResult()
            if accesses is not None:
                accesses.append((level, line_pa, svc, cyc))
                res.accesses = accesses
            res.total_cycles = total + cyc
            res.pt_access_count = naccess + 1
            res.dram_access_count = ndram + (1 if svc == "DRAM" else 0)
            res.pte = entry
            res.leaf_line_pa = line_pa
            pshift = spec.page_shift(entry.page_size)
            res.vpn_base = (va >> pshift) & ~7
            res.pa = entry.pfn * entry.page_size + (va & (entry.page_size - 1))
            return res
        if pwcs is not None:
            pwc = pwcs[level]
            cached = pwc.lookup(prefix)
            if cached is not None:
                total += pwc.latency
                if accesses is not None:
                    accesses.append((level, None, "PWC", pwc.latency))
                node = cached
                continue
        line_pa = (node.base_pa + idx * 8) & ~63
        svc, cyc = pt_access(line_pa)
        total += cyc
        naccess += 1
        if svc == "DRAM":
            ndram += 1
        if accesses is not None:
            accesses.append((level, line_pa, svc, cyc))
        if pwcs is not None:
            pwcs[level].fill(prefix, entry)
        node = entry
    return None


def shadow_walk(shadow_pt: RadixPageTable, gva, pwcs=None, memory=None):
    """One-dimensional walk of a pre-merged shadow table; identical cost
    structure to a native walk."""
    return walk(shadow_pt, gva, pwcs, memory)


def nested_walk(guest_pt: RadixPageTable, host_pt: RadixPageTable, gva,
                nested_tlb=None, pwcs=None, memory=None, host_pwcs=None,
                nested_probe=None, on_host_walk=None, ensure_host=None,
                on_nested_evict=None) -> WalkResult:
    """Two-dimensional walk: every guest-physical address touched by the
    guest walk (table pointers and the final guest PA) is translated through
    the nested TLB, the optional nested-block probe, or a host walk.

    With the nested TLB, both PWC sets and the probe disabled, a 4-level
    guest walk performs exactly (4+1)*(4+1)-1 = 24 page-table accesses.

    nested_probe(gfn) may return a host pfn resolved from an L2 nested TLB
    block (latency charged by the probe's owner via its return, see mmu).
    on_host_walk(gfn, host_walk_result) fires after each completed host walk.
    """
    from .tlbhier import TlbEntry

    memory = memory or DirectMemory()
    res = WalkResult()

    def nested_fill(gfn, pfn):
        evicted = nested_tlb.fill(TlbEntry(gfn, pfn, PAGE_4K, 0))
        if evicted is not None and on_nested_evict is not None:
            on_nested_evict(evicted)

    def host_translate(gpa):
        gfn = gpa >> 12
        if nested_tlb is not None:
            e = nested_tlb.lookup(gfn, 0, PAGE_4K)
            if e is not None:
                res.total_cycles += nested_tlb.latency
                return e.pfn * PAGE_4K + (gpa & (PAGE_4K - 1))
        if nested_probe is not None:
            pfn, cycles = nested_probe(gfn)
            res.total_cycles += cycles
            if pfn is not None:
                if nested_tlb is not None:
                    nested_fill(gfn, pfn)
                return pfn * PAGE_4K + (gpa & (PAGE_4K - 1))
        if ensure_host is not None:
            ensure_host(gpa)
        hres = walk(host_pt, gpa, host_pwcs, memory)
        if hres is None:
            return None
        res.host_accesses += hres.pt_access_count
        res.pt_access_count += hres.pt_access_count
        res.total_cycles += hres.total_cycles
        res.dram_access_count += hres.dram_access_count
        if on_host_walk is not None:
            on_host_walk(gfn, hres)
        if nested_tlb is not None:
            nested_fill(gfn, hres.pte.pfn)
        return hres.pa

    node = guest_pt.root
    bpl = guest_pt.spec.bits_per_level
    top = guest_pt.spec.va_bits
    pwc_tag = guest_pt.root.base_pa << 39
    for level in range(guest_pt.spec.radix_levels):
        idx = (gva >> (top - bpl * (level + 1))) & ((1 << bpl) - 1)
        entry = node.entries.get(idx)
        if entry is None:
            return None
        if isinstance(entry, PageTableEntry):
            line_gpa = node.base_pa + (idx & ~7) * 8
            line_hpa = host_translate(line_gpa)
            if line_hpa is None:
                return None
            svc, cyc = memory.pt_access(line_hpa)
            res.total_cycles += cyc
            res.guest_accesses += 1
            res.pt_access_count += 1
            if svc == "DRAM":
                res.dram_access_count += 1
            res.pte = entry
            res.leaf_line_pa = line_hpa
            shift = guest_pt.spec.page_shift(entry.page_size)
            res.vpn_base = (gva >> shift) & ~7
            gpa = entry.pfn * entry.page_size + (gva & (entry.page_size - 1))
            res.pa = host_translate(gpa)
            if res.pa is None:
                return None
            return res
        prefix = pwc_tag | (gva >> (top - bpl * (level + 1)))
        if pwcs is not None:
            cached = pwcs[level].lookup(prefix)
            if cached is not None:
                res.total_cycles += pwcs[level].latency
                node = cached
                continue
        entry_gpa = node.base_pa + idx * 8
        line_hpa = host_translate(entry_gpa & ~63)
        if line_hpa is None:
            return None
        svc, cyc = memory.pt_access(line_hpa)
        res.total_cycles += cyc
        res.guest_accesses += 1
        res.pt_access_count += 1
        if svc == "DRAM":
            res.dram_access_count += 1
        if pwcs is not None:
            pwcs[level].fill(prefix, entry)
        node = entry
    return None
