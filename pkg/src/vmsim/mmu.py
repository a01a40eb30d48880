"""End-to-end translation for every simulated backend: baseline radix,
enlarged/extra TLBs, the software-managed L3 TLB, the L2-cache TLB-block
design (native and virtualized), nested paging and ideal shadow paging.
Owns the insertion/eviction flows and TLB maintenance."""

from .addrspace import MachineSpec, PAGE_4K, PAGE_2M
from .cachehier import CacheGeometry, CacheHierarchy, derive_tag_widths
from .config import RunConfig, VIRT_BACKENDS
from .maintenance import FlushAll, FlushAsid, FlushPage, FlushRange
from .pagetable import (FrameAllocator, RadixPageTable, make_pwcs, nested_walk,
                        update_ptw_counters, walk)
from .predictor import PredictorBox, consult
from .stats import (PTW_LATENCY_BUCKETS, PTW_LATENCY_EDGES, Stats)
from bisect import bisect_right
from .tlbhier import SetAssocTlb, TlbEntry, TlbGeometry, TlbHierarchy

_MASK64 = (1 << 64) - 1

# Simulated physical memory map (byte addresses).
DATA_4K_BASE = 0
DATA_2M_BASE = 1 << 41
PT_NODE_BASE = 1 << 44
HOST_PT_NODE_BASE = 1 << 45
SHADOW_PT_NODE_BASE = 1 << 46
POM_TABLE_BASE = 1 << 47
GUEST_PT_NODE_BASE = 1 << 40  # guest-physical


class TranslationResult:
    __slots__ = ("pa", "total_cycles", "resolution", "walk_performed",
                 "dram_accesses", "guest_pt_accesses", "host_pt_accesses",
                 "miss_cycles")

    def __init__(self, pa, total_cycles, resolution):
        self.pa = pa
        self.total_cycles = total_cycles
        self.resolution = resolution  # l1 | l2tlb | l2-cache-block | l3tlb | pom | walk
        self.walk_performed = resolution == "walk"
        self.dram_accesses = 0
        self.guest_pt_accesses = 0
        self.host_pt_accesses = 0
        self.miss_cycles = 0


class PomTlb:
    """Software-managed L3 TLB resident in simulated physical memory; every
    probe and every fill is one physical access through the cache hierarchy."""

    def __init__(self, entries, ways, base_pa=POM_TABLE_BASE):
        self.table = SetAssocTlb(entries, ways, 0, "pom")
        self.base_pa = base_pa
        self.ways = ways

    def _set_pa(self, vpn):
        set_index = vpn & (self.table.num_sets - 1)
        return self.base_pa + set_index * self.ways * 8

    def lookup(self, va, asid, mem):
        """Returns (entry_or_None, cycles)."""
        vpn4k = va >> 12
        _, cycles = mem.access_data(self._set_pa(vpn4k))
        entry = self.table.lookup(vpn4k, asid, PAGE_4K)
        if entry is None:
            entry = self.table.lookup(va >> 21, asid, PAGE_2M)
        return entry, cycles

    def fill(self, entry, mem):
        _, cycles = mem.access_data(self._set_pa(entry.vpn), write=True)
        self.table.fill(entry)
        return cycles

    def invalidate(self, scope):
        return self.table.invalidate(scope)


class Mmu:
    def __init__(self, cfg: RunConfig = None, stats: Stats = None):
        cfg = cfg or RunConfig()
        cfg.validate()
        self.cfg = cfg
        self.spec = MachineSpec(va_bits=cfg.va_bits, pa_bits=cfg.pa_bits,
                                cache_line_bytes=cfg.cache_line_bytes)
        self.stats = stats or Stats()
        self.stats.backend = cfg.backend
        self.virt = cfg.backend in VIRT_BACKENDS

        tg = TlbGeometry(
            l1i_entries=cfg.l1i_tlb_entries, l1i_ways=cfg.l1i_tlb_ways,
            l1i_latency=cfg.l1i_tlb_latency,
            l1d4k_entries=cfg.l1d_tlb_4k_entries, l1d4k_ways=cfg.l1d_tlb_4k_ways,
            l1d2m_entries=cfg.l1d_tlb_2m_entries, l1d2m_ways=cfg.l1d_tlb_2m_ways,
            l1d_latency=cfg.l1d_tlb_latency,
            l2_entries=cfg.l2_tlb_entries, l2_ways=cfg.l2_tlb_ways,
            l2_latency=cfg.l2_tlb_latency,
        )
        if cfg.backend == "large-l2-tlb":
            tg.l2_entries = cfg.backend_tlb_entries
            tg.l2_ways = 16
            tg.l2_latency = cfg.backend_tlb_latency
        self.tlbs = TlbHierarchy(tg, cfg.mpki_epoch_instructions)

        cg = CacheGeometry(
            l1_bytes=cfg.l1_cache_bytes, l1_ways=cfg.l1_cache_ways,
            l1_latency=cfg.l1_cache_latency,
            l2_bytes=cfg.l2_cache_bytes, l2_ways=cfg.l2_cache_ways,
            l2_latency=cfg.l2_cache_latency,
            l3_bytes=cfg.l3_cache_bytes, l3_ways=cfg.l3_cache_ways,
            l3_latency=cfg.l3_cache_latency,
            line_bytes=cfg.cache_line_bytes, dram_latency=cfg.dram_latency,
        )
        self.mem = CacheHierarchy(cg, tlb_mpki_fn=lambda: self.tlbs.mpki.current)
        self.mem.l2_miss_tracker.epoch_instructions = cfg.mpki_epoch_instructions

        self.pwcs = make_pwcs(cfg.pwc_entries, cfg.pwc_ways, cfg.pwc_latency)
        self.box = PredictorBox(cfg.predictor_freq_lo, cfg.predictor_freq_hi,
                                cfg.predictor_cost_lo, cfg.predictor_cost_hi)
        self.asid_bits = derive_tag_widths(
            cfg.va_bits, cfg.pa_bits, cfg.l2_cache_bytes, cfg.l2_cache_ways,
            cfg.cache_line_bytes).asid_bits

        self.mem.tlb_mpki_threshold = cfg.tlb_mpki_threshold

        # Address-space state: one radix table per ASID.
        self.tables = {}
        self._mapped_small = set()   # (asid << 37) | 4KiB vpn
        self._mapped_large = set()   # (asid << 37) | 2MiB region
        self.pt_alloc = FrameAllocator(GUEST_PT_NODE_BASE if self.virt
                                       else PT_NODE_BASE)
        self.next_4k_frame = 0
        self.next_2m_frame = DATA_2M_BASE >> 21

        # Virtualized state.
        if self.virt:
            self.host_pt = RadixPageTable(
                self.spec, FrameAllocator(HOST_PT_NODE_BASE))
            self.host_pwcs = make_pwcs(cfg.pwc_entries, cfg.pwc_ways,
                                       cfg.pwc_latency)
            self.next_host_frame = 0
            self._host_mapped = set()
            self.nested_tlb = SetAssocTlb(cfg.nested_tlb_entries,
                                          cfg.nested_tlb_entries,
                                          cfg.nested_tlb_latency, "nested")
            self.shadow_tables = {}
            self.shadow_alloc = FrameAllocator(SHADOW_PT_NODE_BASE)

        if cfg.backend == "l3-tlb":
            self.l3_tlb = SetAssocTlb(cfg.backend_tlb_entries, 16,
                                      cfg.l3_tlb_latency, "l3tlb")
        if cfg.backend in ("pom-tlb", "pom-tlb-virt"):
            self.pom = PomTlb(cfg.pom_tlb_entries, cfg.pom_tlb_ways)

        # victima-virt with block storage disabled degenerates to plain
        # nested paging (feature-flag bisection).
        self._victima_active = (cfg.backend == "victima"
                                or (cfg.backend == "victima-virt"
                                    and cfg.victima_nested_blocks))

        self.clock = 0
        self._bg_busy_until = []

    # ------------------------------------------------------------------ maps

    def _table(self, asid):
        pt = self.tables.get(asid)
        if pt is None:
            pt = RadixPageTable(self.spec, self.pt_alloc)
            self.tables[asid] = pt
        return pt

    def _region_is_large(self, region, asid):
        if self.cfg.large_page_fraction <= 0.0:
            return False
        h = (region * 0x9E3779B97F4A7C15
             + (asid + 1) * 0xBF58476D1CE4E5B9
             + (self.cfg.seed + 1) * 0xD6E8FEB86659FD93) & _MASK64
        h ^= h >> 33
        h = (h * 0xFF51AFD7ED558CCD) & _MASK64
        h ^= h >> 29
        return (h & 0xFFFFFFFF) < int(self.cfg.large_page_fraction * (1 << 32))

    def ensure_mapped(self, va, asid):
        """First-touch auto-map: the page covering va gets a frame; page size
        chosen per aligned 2MiB region by seeded hash."""
        region_key = (asid << 37) | (va >> 21)
        if region_key in self._mapped_large:
            return self.tables[asid]
        small_key = (asid << 37) | (va >> 12)
        if small_key in self._mapped_small:
            return self.tables[asid]
        pt = self._table(asid)
        if PAGE_2M in self.spec.page_sizes and self._region_is_large(va >> 21, asid):
            pt.map(va >> 21, self.next_2m_frame, PAGE_2M)
            self.next_2m_frame += 1
            self._mapped_large.add(region_key)
        else:
            pt.map(va >> 12, self.next_4k_frame, PAGE_4K)
            self.next_4k_frame += 1
            self._mapped_small.add(small_key)
        return pt

    def _ensure_host(self, gpa):
        gfn = gpa >> 12
        if gfn not in self._host_mapped:
            self.host_pt.map(gfn, self.next_host_frame, PAGE_4K)
            self.next_host_frame += 1
            self._host_mapped.add(gfn)

    def oracle_pa(self, va, asid=0):
        """Flat-map reference translation (maps on first touch, no timing)."""
        pt = self.ensure_mapped(va, asid)
        gpa = pt.translate_oracle(va)
        if not self.virt:
            return gpa
        self._ensure_host(gpa)
        return self.host_pt.translate_oracle(gpa)

    # ------------------------------------------------------------- translate

    def translate(self, va, asid=0, kind="load"):
        level, entry, cycles = self.tlbs.lookup(va, asid, kind)
        if level == "l1":
            res = TranslationResult(self._entry_pa(entry, va), cycles, "l1")
            self.clock += cycles
            self.stats.translation_cycles_total += cycles
            return res
        self.stats.l1_tlb_misses += 1
        if level == "l2":
            self.tlbs.fill(entry, kind)
            res = TranslationResult(self._entry_pa(entry, va), cycles, "l2tlb")
            self.clock += cycles
            self.stats.translation_cycles_total += cycles
            return res

        self.stats.l2_tlb_misses += 1
        if self.virt:
            entry, miss_cycles, resolution, extra = self._resolve_virt(va, asid)
        else:
            entry, miss_cycles, resolution, extra = self._resolve_native(va, asid)
        cycles += miss_cycles
        self.stats.l2_tlb_miss_cycles_total += miss_cycles

        evicted = self.tlbs.fill(entry, kind)
        if evicted is not None and self._victima_active:
            self._l2_tlb_eviction_flow(evicted)

        res = TranslationResult(self._entry_pa(entry, va), cycles, resolution)
        res.miss_cycles = miss_cycles
        res.dram_accesses = extra.get("dram", 0)
        res.guest_pt_accesses = extra.get("guest", 0)
        res.host_pt_accesses = extra.get("host", 0)
        self.clock += cycles
        self.stats.translation_cycles_total += cycles
        return res

    @staticmethod
    def _entry_pa(entry, va):
        return entry.pfn * entry.page_size + (va & (entry.page_size - 1))

    # ----------------------------------------------------------- native path

    def _record_walk(self, wres, foreground=True):
        st = self.stats
        if foreground:
            st.ptw_count += 1
            cyc = wres.total_cycles
            st.ptw_cycles_total += cyc
            st.ptw_latency_histogram[
                PTW_LATENCY_BUCKETS[bisect_right(PTW_LATENCY_EDGES, cyc)]] += 1
            st.pt_accesses += wres.pt_access_count
            st.dram_pt_accesses += wres.dram_access_count
            if self.virt:
                st.guest_pt_accesses += wres.guest_accesses
                st.host_pt_accesses += wres.host_accesses
        else:
            st.background_ptw_count += 1

    def _resolve_native(self, va, asid):
        cfg = self.cfg
        pt = self.ensure_mapped(va, asid)
        vpn4k = va >> 12

        if cfg.backend == "victima":
            block, psize, pcycles = self.mem.probe_tlb_block(vpn4k, va >> 21, asid)
            if block is not None:
                slot = (va >> self.spec.page_shift(psize)) & 7
                pte = block.payload[slot]
                if pte is not None and pte.page_size == psize:
                    # Probe hit: the parallel walk is aborted with no side
                    # effects; resolution costs one L2 cache access.
                    self.stats.l2_cache_tlb_hit_count += 1
                    vpn = va >> self.spec.page_shift(psize)
                    return (TlbEntry(vpn, pte.pfn, psize, asid), pcycles,
                            "l2-cache-block", {})

        extra_cycles = 0
        resolution = "walk"
        if cfg.backend == "l3-tlb":
            extra_cycles += self.l3_tlb.latency
            entry = (self.l3_tlb.lookup(vpn4k, asid, PAGE_4K)
                     or self.l3_tlb.lookup(va >> 21, asid, PAGE_2M))
            if entry is not None:
                self.stats.l3_tlb_hit_count += 1
                return entry, extra_cycles, "l3tlb", {}
        elif cfg.backend == "pom-tlb":
            entry, pom_cycles = self.pom.lookup(va, asid, self.mem)
            extra_cycles += pom_cycles
            if entry is not None:
                self.stats.pom_tlb_hit_count += 1
                return entry, extra_cycles, "pom", {}

        wres = walk(pt, va, self.pwcs, self.mem)
        self._record_walk(wres)
        if cfg.backend == "victima":
            self._l2_tlb_miss_flow(wres, asid, pt, va)
        else:
            update_ptw_counters(wres.pte, wres.dram_access_count)
        psize = wres.pte.page_size
        entry = TlbEntry(va >> self.spec.page_shift(psize), wres.pte.pfn,
                         psize, asid)
        if cfg.backend == "l3-tlb":
            self.l3_tlb.fill(TlbEntry(entry.vpn, entry.pfn, psize, asid))
        elif cfg.backend == "pom-tlb":
            extra_cycles += self.pom.fill(
                TlbEntry(entry.vpn, entry.pfn, psize, asid), self.mem)
        return entry, extra_cycles + wres.total_cycles, resolution, {
            "dram": wres.dram_access_count}

    # ------------------------------------------------------- insertion flows

    def _l2_tlb_miss_flow(self, wres, asid, pt, va):
        """TLB-block insertion upon an L2 TLB miss whose walk completed.

        The predictor sees the counters as fetched (before this walk's
        update); the update itself happens for every completed walk."""
        pte = wres.pte
        insert = consult(self.mem.l2_miss_tracker.current, pte.ptw_freq,
                         pte.ptw_cost, self.box, self.cfg.bypass_mpki_threshold)
        update_ptw_counters(pte, wres.dram_access_count)
        if not insert:
            return
        grp = pt.leaf_group(va)
        if grp is None:
            return
        vpn_base, _, ptes = grp
        self.mem.transform_to_tlb_block(wres.leaf_line_pa, vpn_base, asid,
                                        pte.page_size, ptes)

    def _l2_tlb_eviction_flow(self, evicted):
        """Background walk + TLB-block insertion upon an L2 TLB eviction."""
        pt = self.tables.get(evicted.asid)
        if pt is None:
            return
        va = evicted.vpn * evicted.page_size
        pte = pt.lookup_pte(va)
        if pte is None:
            return
        if not consult(self.mem.l2_miss_tracker.current, pte.ptw_freq,
                       pte.ptw_cost, self.box, self.cfg.bypass_mpki_threshold):
            return
        vpn_base = (va >> self.spec.page_shift(pte.page_size)) & ~7
        if self.mem.has_tlb_block(vpn_base, evicted.asid, pte.page_size):
            return
        if not self._bg_slot_free():
            self.stats.background_ptw_dropped += 1
            return
        if self.virt:
            wres = nested_walk(pt, self.host_pt, va, self.nested_tlb,
                               self.pwcs, self.mem, self.host_pwcs,
                               nested_probe=self._nested_probe_or_none(),
                               on_host_walk=self._nested_miss_flow,
                               ensure_host=self._ensure_host,
                               on_nested_evict=self._on_nested_evict)
        else:
            wres = walk(pt, va, self.pwcs, self.mem)
        if wres is None:
            return
        self._record_walk(wres, foreground=False)
        self._bg_start(wres.total_cycles)
        update_ptw_counters(wres.pte, wres.dram_access_count)
        grp = pt.leaf_group(va)
        if grp is not None:
            vpn_base, _, ptes = grp
            self.mem.transform_to_tlb_block(wres.leaf_line_pa, vpn_base,
                                            evicted.asid, pte.page_size, ptes)

    def _bg_slot_free(self):
        busy = [t for t in self._bg_busy_until if t > self.clock]
        self._bg_busy_until = busy
        return len(busy) < self.cfg.background_walk_slots

    def _bg_start(self, cycles):
        self._bg_busy_until.append(self.clock + cycles)

    # ------------------------------------------------------- virtualized path

    def _nested_probe_or_none(self):
        if self.cfg.backend == "victima-virt" and self.cfg.victima_nested_blocks:
            return self._nested_block_probe
        return None

    def _nested_block_probe(self, gfn):
        """Probe the L2 cache for a nested TLB block covering gfn.

        Returns (host_pfn_or_None, cycles); one L2 latency either way."""
        block, psize, cycles = self.mem.probe_tlb_block(gfn, gfn >> 9, 0,
                                                        nested=True)
        if block is not None and psize == PAGE_4K:
            pte = block.payload[gfn & 7]
            if pte is not None:
                return pte.pfn, cycles
        return None, cycles

    def _nested_miss_flow(self, gfn, hres):
        """Nested-TLB-block insertion after a completed host walk."""
        update = True
        pte = hres.pte
        if self.cfg.backend == "victima-virt" and self.cfg.victima_nested_blocks:
            insert = consult(self.mem.l2_miss_tracker.current, pte.ptw_freq,
                             pte.ptw_cost, self.box,
                             self.cfg.bypass_mpki_threshold)
            if insert:
                grp = self.host_pt.leaf_group(gfn << 12)
                if grp is not None:
                    vpn_base, _, ptes = grp
                    self.mem.transform_to_tlb_block(hres.leaf_line_pa, vpn_base,
                                                    0, PAGE_4K, ptes,
                                                    nested=True)
        if update:
            update_ptw_counters(pte, hres.dram_access_count)

    def _on_nested_evict(self, evicted):
        """Background host walk + nested-block insertion on nested TLB eviction."""
        if self.cfg.backend != "victima-virt" or not self.cfg.victima_nested_blocks:
            return
        gpa = evicted.vpn << 12
        pte = self.host_pt.lookup_pte(gpa)
        if pte is None:
            return
        if not consult(self.mem.l2_miss_tracker.current, pte.ptw_freq,
                       pte.ptw_cost, self.box, self.cfg.bypass_mpki_threshold):
            return
        if self.mem.has_tlb_block(evicted.vpn & ~7, 0, PAGE_4K, nested=True):
            return
        if not self._bg_slot_free():
            self.stats.background_ptw_dropped += 1
            return
        hres = walk(self.host_pt, gpa, self.host_pwcs, self.mem)
        if hres is None:
            return
        self._record_walk(hres, foreground=False)
        self._bg_start(hres.total_cycles)
        update_ptw_counters(hres.pte, hres.dram_access_count)
        grp = self.host_pt.leaf_group(gpa)
        if grp is not None:
            vpn_base, _, ptes = grp
            self.mem.transform_to_tlb_block(hres.leaf_line_pa, vpn_base, 0,
                                            PAGE_4K, ptes, nested=True)

    def _host_resolve(self, gpa):
        """Foreground guest-physical -> host-physical translation, outside a
        guest walk (used after a guest-TLB-block probe hit)."""
        gfn = gpa >> 12
        cycles = self.nested_tlb.latency
        e = self.nested_tlb.lookup(gfn, 0, PAGE_4K)
        if e is not None:
            return e.pfn * PAGE_4K + (gpa & (PAGE_4K - 1)), cycles
        probe = self._nested_probe_or_none()
        if probe is not None:
            pfn, pcycles = probe(gfn)
            cycles += pcycles
            if pfn is not None:
                ev = self.nested_tlb.fill(TlbEntry(gfn, pfn, PAGE_4K, 0))
                if ev is not None:
                    self._on_nested_evict(ev)
                return pfn * PAGE_4K + (gpa & (PAGE_4K - 1)), cycles
        self._ensure_host(gpa)
        hres = walk(self.host_pt, gpa, self.host_pwcs, self.mem)
        cycles += hres.total_cycles
        self.stats.host_pt_accesses += hres.pt_access_count
        self.stats.dram_pt_accesses += hres.dram_access_count
        self._nested_miss_flow(gfn, hres)
        ev = self.nested_tlb.fill(TlbEntry(gfn, hres.pte.pfn, PAGE_4K, 0))
        if ev is not None:
            self._on_nested_evict(ev)
        return hres.pa, cycles

    def _shadow_table(self, asid):
        spt = self.shadow_tables.get(asid)
        if spt is None:
            spt = RadixPageTable(self.spec, self.shadow_alloc)
            self.shadow_tables[asid] = spt
        return spt

    def _resolve_virt(self, gva, asid):
        cfg = self.cfg
        pt = self.ensure_mapped(gva, asid)
        backend = cfg.backend

        if backend == "ideal-shadow":
            spt = self._shadow_table(asid)
            if spt.lookup_pte(gva) is None:
                gpa = pt.translate_oracle(gva)
                self._ensure_host(gpa)
                hpa = self.host_pt.translate_oracle(gpa)
                # Shadow table updates cost nothing.
                spt.map(gva >> 12, hpa >> 12, PAGE_4K)
            wres = walk(spt, gva, self.pwcs, self.mem)
            self._record_walk(wres)
            update_ptw_counters(wres.pte, wres.dram_access_count)
            entry = TlbEntry(gva >> 12, wres.pte.pfn, PAGE_4K, asid)
            return entry, wres.total_cycles, "walk", {"dram": wres.dram_access_count}

        if backend == "victima-virt" and self._victima_active:
            block, psize, pcycles = self.mem.probe_tlb_block(gva >> 12,
                                                             gva >> 21, asid)
            if block is not None:
                slot = (gva >> self.spec.page_shift(psize)) & 7
                gpte = block.payload[slot]
                if gpte is not None and gpte.page_size == psize:
                    self.stats.l2_cache_tlb_hit_count += 1
                    gpa = gpte.pfn * psize + (gva & (psize - 1))
                    hpa, hcycles = self._host_resolve(gpa)
                    entry = TlbEntry(gva >> 12, hpa >> 12, PAGE_4K, asid)
                    return entry, pcycles + hcycles, "l2-cache-block", {}

        extra_cycles = 0
        if backend == "pom-tlb-virt":
            entry, pom_cycles = self.pom.lookup(gva, asid, self.mem)
            extra_cycles += pom_cycles
            if entry is not None:
                self.stats.pom_tlb_hit_count += 1
                return entry, extra_cycles, "pom", {}

        wres = nested_walk(pt, self.host_pt, gva, self.nested_tlb, self.pwcs,
                           self.mem, self.host_pwcs,
                           nested_probe=self._nested_probe_or_none(),
                           on_host_walk=self._nested_miss_flow,
                           ensure_host=self._ensure_host,
                           on_nested_evict=self._on_nested_evict)
        self._record_walk(wres)
        if backend == "victima-virt" and self._victima_active:
            self._virt_guest_miss_flow(wres, asid, pt, gva)
        else:
            update_ptw_counters(wres.pte, wres.dram_access_count)
        entry = TlbEntry(gva >> 12, wres.pa >> 12, PAGE_4K, asid)
        if backend == "pom-tlb-virt":
            extra_cycles += self.pom.fill(
                TlbEntry(entry.vpn, entry.pfn, PAGE_4K, asid), self.mem)
        return entry, extra_cycles + wres.total_cycles, "walk", {
            "dram": wres.dram_access_count,
            "guest": wres.guest_accesses, "host": wres.host_accesses}

    def _virt_guest_miss_flow(self, wres, asid, pt, gva):
        pte = wres.pte
        insert = consult(self.mem.l2_miss_tracker.current, pte.ptw_freq,
                         pte.ptw_cost, self.box, self.cfg.bypass_mpki_threshold)
        update_ptw_counters(pte, wres.dram_access_count)
        if not insert:
            return
        grp = pt.leaf_group(gva)
        if grp is None:
            return
        vpn_base, _, ptes = grp
        self.mem.transform_to_tlb_block(wres.leaf_line_pa, vpn_base, asid,
                                        pte.page_size, ptes)

    # ------------------------------------------------------------ maintenance

    def maintenance(self, scope):
        """TLB invalidation: flushes the TLB hierarchy and dispatches the
        matching TLB-block invalidation command to the L2 cache."""
        n = self.tlbs.invalidate(scope)
        if self.virt:
            n += self.nested_tlb.invalidate(
                scope if isinstance(scope, FlushAll) else _NEVER)
        if self.cfg.backend in ("pom-tlb", "pom-tlb-virt"):
            n += self.pom.invalidate(scope)
        block_scope = scope
        asid = getattr(scope, "asid", None)
        if asid is not None and asid >= (1 << self.asid_bits):
            # Stored ASID width cannot represent the command: every TLB block
            # in the L2 cache is invalidated (TLB arrays still filter by ASID).
            block_scope = FlushAll()
        b = self.mem.invalidate_tlb_blocks(block_scope)
        if isinstance(scope, (FlushAll, FlushAsid)):
            for pwc in self.pwcs:
                pwc.flush()
            if self.virt:
                for pwc in self.host_pwcs:
                    pwc.flush()
        cycles = self.cfg.maintenance_latency_cycles
        self.clock += cycles
        self.stats.maintenance_cycles += cycles
        self.stats.invalidated_tlb_entries += n
        self.stats.invalidated_tlb_blocks += b
        return n, b

    # --------------------------------------------------------------- retiring

    def retire(self, instruction_delta):
        self.tlbs.mpki.on_retire(instruction_delta)
        self.mem.l2_miss_tracker.on_retire(instruction_delta)


# Scope matching nothing: nested TLB entries carry no guest ASID, so only a
# full flush touches them.
_NEVER = FlushAsid(-1)
