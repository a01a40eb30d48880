"""Acceptance suite: twelve structural and directional properties of the
simulator, one pass/fail line each (printed on success; a failed criterion
fails its test and prints nothing).

The heavyweight directional experiments (criteria 8 and 9) run multi-minute
simulations and sit at the end of the file.
"""

import random

import pytest

from vmsim.addrspace import PAGE_4K, PAGE_2M, MachineSpec
from vmsim.cachehier import (Block, CacheHierarchy, DATA, RRIP_MAX, TLB_BLOCK,
                             choose_replacement_victim, derive_tag_widths,
                             srrip_insert_rrpv, srrip_on_hit)
from vmsim.config import BACKENDS, RunConfig
from vmsim.maintenance import FlushPage
from vmsim.mmu import Mmu
from vmsim.pagetable import (COST_MAX, DirectMemory, FrameAllocator, FREQ_MAX,
                             PageTableEntry, RadixPageTable, make_pwcs,
                             nested_walk, update_ptw_counters)
from vmsim.predictor import PredictorBox, predict
from vmsim.simkit import generate, run
from vmsim.tlbhier import SetAssocTlb


def ok(n, text):
    print(f"criterion {n:2d} PASS: {text}")


# --------------------------------------------------------------- criterion 1

def test_criterion_1_tag_arithmetic():
    tw = derive_tag_widths(48, 52, 1 << 20, 16, 64)
    assert tw.data_tag_bits == 36
    assert tw.tlb_tag_bits == 23
    assert tw.asid_bits == 11
    ok(1, "tag widths for 1MiB/16-way/64B at VA48/PA52 are 36/23/11")


# --------------------------------------------------------------- criterion 2

def test_criterion_2_nested_walk_access_bound():
    spec = MachineSpec()
    guest = RadixPageTable(spec, FrameAllocator(1 << 40))
    host = RadixPageTable(spec, FrameAllocator(1 << 45))
    frames = {"next": 0}

    def ensure_host(gpa):
        if host.lookup_pte(gpa & ~0xFFF) is None:
            host.map(gpa >> 12, frames["next"], PAGE_4K)
            frames["next"] += 1

    rng = random.Random(2024)
    gvas = []
    for _ in range(1000):
        vpn = rng.getrandbits(28)
        guest.map(vpn, rng.getrandbits(20), PAGE_4K)
        gvas.append(vpn * 4096 + rng.getrandbits(12))

    mem = DirectMemory()
    for gva in gvas:
        res = nested_walk(guest, host, gva, nested_tlb=None, pwcs=None,
                          memory=mem, ensure_host=ensure_host)
        assert res.pt_access_count == 24

    ntlb = SetAssocTlb(64, 64, 1)
    pwcs, host_pwcs = make_pwcs(), make_pwcs()
    for gva in gvas:
        res = nested_walk(guest, host, gva, ntlb, pwcs, mem,
                          host_pwcs=host_pwcs, ensure_host=ensure_host)
        assert res.pt_access_count <= 24
    ok(2, "nested walk: exactly 24 PT accesses bare, <=24 with caches")


# --------------------------------------------------------------- criterion 3

def test_criterion_3_predictor_oracle():
    box = PredictorBox()
    for freq in range(FREQ_MAX + 1):
        for cost in range(COST_MAX + 1):
            member = (box.freq_lo <= freq <= box.freq_hi
                      and box.cost_lo <= cost <= box.cost_hi)
            assert predict(freq, cost, box) == member
    assert predict(1, 1, box)
    assert predict(7, 12, box)      # max frequency, max in-box cost
    ok(3, "predictor matches box membership on all 128 counter pairs")


# --------------------------------------------------------------- criterion 4

def test_criterion_4_counter_saturation():
    rng = random.Random(4)
    for _ in range(10_000):
        pte = PageTableEntry(0, PAGE_4K)
        prev_f, prev_c = 0, 0
        for _ in range(rng.randint(1, 25)):
            update_ptw_counters(pte, rng.randint(0, 3))
            assert prev_f <= pte.ptw_freq <= FREQ_MAX
            assert prev_c <= pte.ptw_cost <= COST_MAX
            prev_f, prev_c = pte.ptw_freq, pte.ptw_cost
    pte = PageTableEntry(0, PAGE_4K)
    for _ in range(30):
        update_ptw_counters(pte, 1)
    assert (pte.ptw_freq, pte.ptw_cost) == (FREQ_MAX, COST_MAX) == (7, 15)
    ok(4, "walk counters saturate at 7/15 and never decrease")


# --------------------------------------------------------------- criterion 5

def test_criterion_5_tlb_block_semantics():
    for doomed in range(8):
        mem = CacheHierarchy()
        payload = [PageTableEntry(100 + i, PAGE_4K) for i in range(8)]
        mem.transform_to_tlb_block(0x9000, 0x500, 0, PAGE_4K, payload)
        for i in range(8):
            block, _, _ = mem.probe_tlb_block(0x500 + i, 0, 0)
            assert block is not None and block.payload[i].pfn == 100 + i
        mem.invalidate_tlb_blocks(FlushPage((0x500 + doomed) * PAGE_4K, 0))
        for i in range(8):
            block, _, _ = mem.probe_tlb_block(0x500 + i, 0, 0)
            assert block is None
    ok(5, "all 8 group VPNs hit after transform; shootdown of any one "
          "VPN invalidates all 8")


# --------------------------------------------------------------- criterion 6

def test_criterion_6_replacement_policy():
    # TLB blocks insert at rrpv 0 under translation pressure.
    assert srrip_insert_rrpv(TLB_BLOCK, l2_tlb_mpki=5.1) == 0
    assert srrip_insert_rrpv(TLB_BLOCK, l2_tlb_mpki=4.9) == RRIP_MAX - 1
    # Hit promotion: decrement of 3 for TLB blocks under pressure, else 1.
    b = Block(0, TLB_BLOCK, rrpv=3)
    srrip_on_hit(b, 6.0)
    assert b.rrpv == 0
    b = Block(0, DATA, rrpv=3)
    srrip_on_hit(b, 6.0)
    assert b.rrpv == 2
    # Victim skip prefers a non-TLB block exactly once.
    blocks = [Block(0, TLB_BLOCK, rrpv=3), Block(1, TLB_BLOCK, rrpv=3),
              Block(2, DATA, rrpv=3), Block(3, DATA, rrpv=3)]
    assert choose_replacement_victim(blocks, 6.0) == 2
    # All-TLB set still evicts.
    blocks = [Block(i, TLB_BLOCK, rrpv=1) for i in range(4)]
    assert choose_replacement_victim(blocks, 6.0) == 0
    ok(6, "TLB-aware SRRIP: pressure insertion, promotion steps, one-shot "
          "victim skip, all-TLB eviction")


# --------------------------------------------------------------- criterion 7

def test_criterion_7_backend_oracle_equivalence():
    records = generate("uniform", 1 << 30, 100_000, seed=77)
    vas = records["va"].tolist()
    for backend in BACKENDS:
        cfg = RunConfig(backend=backend, large_page_fraction=0.3, seed=77)
        mmu = Mmu(cfg)
        for va in vas:
            expected = mmu.oracle_pa(va)
            assert mmu.translate(va).pa == expected, backend
            mmu.retire(1)
    ok(7, "all 9 backends reproduce the flat-map oracle PA on a "
          "100K-record random trace")


# -------------------------------------------------------------- criterion 10

def test_criterion_10_translation_reach():
    mem = CacheHierarchy()
    payload = [PageTableEntry(i, PAGE_4K) for i in range(8)]
    for i in range(32_768):
        mem.transform_to_tlb_block(0, i * 8, 0, PAGE_4K, payload)
    assert mem.tlb_block_count == 32_768
    assert mem.translation_reach() == 1 << 30
    assert mem.reach_bytes == 32_768 * 32 * 1024
    ok(10, "fully TLB-populated 2MiB L2 with 4KiB groups reaches "
           "exactly 1 GiB")


# -------------------------------------------------------------- criterion 11

def test_criterion_11_bypass_rule():
    outside_box = 0x600 * 4096     # first-touch page: freq 0, outside the box

    def fresh(mpki):
        mmu = Mmu(RunConfig(backend="victima", large_page_fraction=0.0))
        mmu.mem.l2_miss_tracker.current = mpki
        return mmu

    mmu = fresh(5.0)
    mmu.translate(outside_box)
    assert mmu.mem.tlb_block_count == 1        # bypass: inserted anyway

    mmu = fresh(4.99)
    mmu.translate(outside_box)
    assert mmu.mem.tlb_block_count == 0        # predictor consulted: freq 0
    ok(11, "L2-cache MPKI >= 5 bypasses the predictor; below it the "
           "box decides")


# -------------------------------------------------------------- criterion 12

def test_criterion_12_determinism():
    cfg = RunConfig(backend="victima", trace_kind="uniform",
                    footprint_bytes=64 << 20, record_count=100_000, seed=12)
    a = run(cfg)
    b = run(cfg)
    assert a.to_json() == b.to_json()
    assert a.to_csv() == b.to_csv()
    assert a.to_json().encode() == b.to_json().encode()
    ok(12, "two identical runs produce byte-identical statistics")


# ------------------------------------------------- criteria 8 and 9 (heavy)

def test_criterion_8_ptw_reduction():
    records = generate("uniform", 4 << 30, 5_000_000, seed=7)
    results = {}
    for backend in ("radix", "victima"):
        cfg = RunConfig(backend=backend, trace_kind="uniform",
                        footprint_bytes=4 << 30, record_count=5_000_000,
                        seed=7)
        results[backend] = run(cfg, records=records)
    r, v = results["radix"].ptw_count, results["victima"].ptw_count
    assert v <= r
    reduction = (r - v) / r
    assert reduction >= 0.30, f"PTW reduction {reduction:.1%}"
    ok(8, f"uniform 5M/4GiB: foreground PTWs {r} -> {v} "
          f"({reduction:.1%} reduction, >= 30%)")


def test_criterion_9_virtualized_direction():
    records = generate("uniform", 256 << 20, 1_000_000, seed=11)
    results = {}
    for backend in ("nested-paging", "victima-virt"):
        cfg = RunConfig(backend=backend, trace_kind="uniform",
                        footprint_bytes=256 << 20, record_count=1_000_000,
                        seed=11, large_page_fraction=0.0)
        results[backend] = run(cfg, records=records)
    np_st, vv_st = results["nested-paging"], results["victima-virt"]
    host_reduction = (np_st.host_pt_accesses - vv_st.host_pt_accesses) \
        / np_st.host_pt_accesses
    lat_reduction = (np_st.avg_l2_tlb_miss_latency
                     - vv_st.avg_l2_tlb_miss_latency) \
        / np_st.avg_l2_tlb_miss_latency
    assert host_reduction >= 0.90, f"host PT reduction {host_reduction:.1%}"
    assert lat_reduction >= 0.40, f"miss latency reduction {lat_reduction:.1%}"
    ok(9, f"uniform 1M/256MiB virtualized: host PT accesses -{host_reduction:.1%}, "
          f"avg L2 TLB miss latency -{lat_reduction:.1%}")
