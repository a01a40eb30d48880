"""Metric collection: MPKIs, walk counts, latency histograms, translation
reach and block reuse, with lossless JSON/CSV serialization."""

import json

# Walk-latency histogram bucket upper bounds (cycles); last bucket is open.
PTW_LATENCY_EDGES = (25, 50, 75, 100, 150, 200, 300, 500)


def ptw_latency_bucket(cycles):
    for edge in PTW_LATENCY_EDGES:
        if cycles < edge:
            return f"<{edge}"
    return f">={PTW_LATENCY_EDGES[-1]}"


PTW_LATENCY_BUCKETS = tuple(f"<{e}" for e in PTW_LATENCY_EDGES) + (
    f">={PTW_LATENCY_EDGES[-1]}",)


class Stats:
    """Per-run counter set.  All fields are plain numbers, lists or dicts so
    the object serializes losslessly."""

    def __init__(self):
        self.backend = ""
        self.config_hash = ""
        self.seed = 0
        self.records = 0
        self.instructions = 0
        self.l1_tlb_misses = 0
        self.l2_tlb_misses = 0
        self.l1_tlb_mpki = 0.0
        self.l2_tlb_mpki = 0.0
        self.ptw_count = 0
        self.background_ptw_count = 0
        self.background_ptw_dropped = 0
        self.guest_pt_accesses = 0
        self.host_pt_accesses = 0
        self.pt_accesses = 0
        self.dram_pt_accesses = 0
        self.l2_cache_tlb_hit_count = 0
        self.pom_tlb_hit_count = 0
        self.l3_tlb_hit_count = 0
        self.ptw_latency_histogram = {b: 0 for b in PTW_LATENCY_BUCKETS}
        self.ptw_cycles_total = 0
        self.l2_tlb_miss_cycles_total = 0
        self.avg_ptw_latency = 0.0
        self.avg_l2_tlb_miss_latency = 0.0
        self.translation_cycles_total = 0
        self.maintenance_cycles = 0
        self.invalidated_tlb_entries = 0
        self.invalidated_tlb_blocks = 0
        self.data_block_reuse_histogram = {}
        self.tlb_block_reuse_histogram = {}
        self.translation_reach_bytes = 0
        self.translation_reach_timeline = []
        self.tlb_block_occupancy_timeline = []
        self.l2_cache_mpki = 0.0
        self.writebacks = 0

    def finalize(self):
        kilo = self.instructions / 1000.0
        if kilo > 0:
            self.l1_tlb_mpki = self.l1_tlb_misses / kilo
            self.l2_tlb_mpki = self.l2_tlb_misses / kilo
        if self.ptw_count:
            self.avg_ptw_latency = self.ptw_cycles_total / self.ptw_count
        if self.l2_tlb_misses:
            self.avg_l2_tlb_miss_latency = (
                self.l2_tlb_miss_cycles_total / self.l2_tlb_misses)

    def check_conservation(self):
        """Every L2 TLB miss is resolved by exactly one source."""
        resolved = (self.ptw_count + self.l2_cache_tlb_hit_count
                    + self.pom_tlb_hit_count + self.l3_tlb_hit_count)
        return self.l2_tlb_misses == resolved

    def to_dict(self):
        return {k: v for k, v in sorted(vars(self).items())}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        s = cls()
        for k, v in d.items():
            setattr(s, k, v)
        return s

    def to_csv(self):
        lines = ["metric,value"]
        for k, v in sorted(vars(self).items()):
            if isinstance(v, dict):
                for bk, bv in v.items():
                    lines.append(f"{k}[{bk}],{bv}")
            elif isinstance(v, list):
                lines.append(f"{k},\"{' '.join(str(x) for x in v)}\"")
            else:
                lines.append(f"{k},{v}")
        return "\n".join(lines) + "\n"
