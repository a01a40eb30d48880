"""TLB arrays of the MMU: L1 I-TLB, split L1 D-TLBs, unified L2 TLB and the
nested TLB, plus the epoch-based MPKI tracker."""

from dataclasses import dataclass

from .addrspace import PAGE_4K, PAGE_2M
from .maintenance import matches


class TlbEntry:
    __slots__ = ("vpn", "pfn", "page_size", "asid")

    def __init__(self, vpn, pfn, page_size, asid):
        self.vpn = vpn
        self.pfn = pfn
        self.page_size = page_size
        self.asid = asid

    def __repr__(self):
        return (f"TlbEntry(vpn={self.vpn:#x}, pfn={self.pfn:#x}, "
                f"size={self.page_size}, asid={self.asid})")


class SetAssocTlb:
    """Set-associative TLB with LRU replacement.

    Each set is a dict keyed by an integer packing (vpn, asid, page size);
    dict insertion order doubles as the LRU order (hits reinsert the key at
    the back).
    """

    def __init__(self, entries, ways, latency, name=""):
        if entries % ways:
            raise ValueError(f"{entries} entries not divisible by {ways} ways")
        self.num_sets = entries // ways
        self.ways = ways
        self.latency = latency
        self.name = name
        self.sets = [dict() for _ in range(self.num_sets)]

    def _set_index(self, vpn):
        return vpn & (self.num_sets - 1)

    @staticmethod
    def _key(vpn, asid, page_size):
        # 16 bits of ASID and one page-size bit below the VPN.
        return (vpn << 17) | (asid << 1) | (page_size == PAGE_2M)

    def lookup(self, vpn, asid, page_size):
        s = self.sets[vpn & (self.num_sets - 1)]
        key = (vpn << 17) | (asid << 1) | (page_size == PAGE_2M)
        entry = s.get(key)
        if entry is not None:
            del s[key]          # refresh LRU position
            s[key] = entry
        return entry

    def fill(self, entry):
        """Insert an entry; returns the evicted entry or None.

        Refilling an existing (vpn, asid, page_size) updates in place and
        never evicts.
        """
        s = self.sets[entry.vpn & (self.num_sets - 1)]
        key = (entry.vpn << 17) | (entry.asid << 1) | (entry.page_size == PAGE_2M)
        if key in s:
            del s[key]
            s[key] = entry
            return None
        evicted = None
        if len(s) >= self.ways:
            k, evicted = next(iter(s.items()))
            del s[k]
        s[key] = entry
        return evicted

    def invalidate(self, scope):
        count = 0
        for s in self.sets:
            doomed = [k for k, e in s.items()
                      if matches(scope, e.vpn, e.page_size, e.asid)]
            for k in doomed:
                del s[k]
            count += len(doomed)
        return count

    def valid_count(self):
        return sum(len(s) for s in self.sets)


class MpkiTracker:
    """Misses per kilo-instruction over fixed instruction epochs.

    current is the value of the last completed epoch; 0.0 before the first
    epoch completes.
    """

    def __init__(self, epoch_instructions=100_000):
        self.epoch_instructions = epoch_instructions
        self.misses = 0
        self.instructions = 0
        self.current = 0.0
        self.total_misses = 0
        self.total_instructions = 0

    def record_miss(self, n=1):
        self.misses += n
        self.total_misses += n

    def on_retire(self, delta):
        if delta < 0:
            raise ValueError("instruction delta must be >= 0")
        self.total_instructions += delta
        self.instructions += delta
        while self.instructions >= self.epoch_instructions:
            # Misses are attributed to the epoch in which they were recorded;
            # a retire burst spanning epochs closes each epoch in turn.
            self.current = 1000.0 * self.misses / self.epoch_instructions
            self.instructions -= self.epoch_instructions
            self.misses = 0


@dataclass
class TlbGeometry:
    l1i_entries: int = 128
    l1i_ways: int = 8
    l1i_latency: int = 1
    l1d4k_entries: int = 64
    l1d4k_ways: int = 4
    l1d2m_entries: int = 32
    l1d2m_ways: int = 4
    l1d_latency: int = 1
    l2_entries: int = 1536
    l2_ways: int = 12
    l2_latency: int = 12
    nested_entries: int = 64
    nested_latency: int = 1


class TlbHierarchy:
    """Two-level TLB hierarchy with a unified L2 and split, dual-probed L1 D-TLBs."""

    def __init__(self, geom: TlbGeometry = None, mpki_epoch=100_000):
        geom = geom or TlbGeometry()
        self.geom = geom
        self.l1i = SetAssocTlb(geom.l1i_entries, geom.l1i_ways, geom.l1i_latency, "l1i")
        self.l1d_4k = SetAssocTlb(geom.l1d4k_entries, geom.l1d4k_ways, geom.l1d_latency, "l1d4k")
        self.l1d_2m = SetAssocTlb(geom.l1d2m_entries, geom.l1d2m_ways, geom.l1d_latency, "l1d2m")
        self.l2 = SetAssocTlb(geom.l2_entries, geom.l2_ways, geom.l2_latency, "l2")
        self.mpki = MpkiTracker(mpki_epoch)

    def lookup(self, va, asid, kind="load"):
        """Probe L1 then L2.  Returns (hit_level, entry, cycles).

        hit_level is "l1", "l2" or None.  Both L1 D sub-TLBs (and both page
        size hypotheses at L2) are probed in parallel, so one latency charge
        per level.  An L2 miss is recorded in the MPKI tracker.
        """
        vpn4k = va >> 12
        vpn2m = va >> 21
        if kind == "ifetch":
            cycles = self.l1i.latency
            entry = (self.l1i.lookup(vpn4k, asid, PAGE_4K)
                     or self.l1i.lookup(vpn2m, asid, PAGE_2M))
        else:
            cycles = self.l1d_4k.latency
            entry = self.l1d_4k.lookup(vpn4k, asid, PAGE_4K)
            if entry is None:
                entry = self.l1d_2m.lookup(vpn2m, asid, PAGE_2M)
        if entry is not None:
            return "l1", entry, cycles
        cycles += self.l2.latency
        entry = (self.l2.lookup(vpn4k, asid, PAGE_4K)
                 or self.l2.lookup(vpn2m, asid, PAGE_2M))
        if entry is not None:
            return "l2", entry, cycles
        self.mpki.record_miss()
        return None, None, cycles

    def fill(self, entry, kind="load"):
        """Fill L1 and L2 with a resolved translation.

        Returns the entry displaced from the L2 TLB, if any; L1 evictions
        trigger nothing and are discarded.
        """
        # The L1 copy shares the entry object; the arrays stay independent
        # because each keeps its own keyed set.
        if kind == "ifetch":
            self.l1i.fill(entry)
        elif entry.page_size == PAGE_2M:
            self.l1d_2m.fill(entry)
        else:
            self.l1d_4k.fill(entry)
        return self.l2.fill(entry)

    def invalidate(self, scope):
        return (self.l1i.invalidate(scope) + self.l1d_4k.invalidate(scope)
                + self.l1d_2m.invalidate(scope) + self.l2.invalidate(scope))
