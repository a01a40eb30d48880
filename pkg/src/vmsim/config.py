"""Run configuration: every knob of the simulated machine with the baseline
defaults checked in, TOML loading with unknown-key rejection, and a stable
config hash for reproducible reports."""

import hashlib
import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, fields, asdict

from .errors import ConfigError

BACKENDS = (
    "radix", "large-l2-tlb", "l3-tlb", "pom-tlb", "victima",
    "nested-paging", "ideal-shadow", "victima-virt", "pom-tlb-virt",
)

VIRT_BACKENDS = ("nested-paging", "ideal-shadow", "victima-virt", "pom-tlb-virt")


@dataclass
class RunConfig:
    # machine
    va_bits: int = 48
    pa_bits: int = 52
    clock_ghz: float = 2.6

    # tlb (baseline geometries)
    l1i_tlb_entries: int = 128
    l1i_tlb_ways: int = 8
    l1i_tlb_latency: int = 1
    l1d_tlb_4k_entries: int = 64
    l1d_tlb_4k_ways: int = 4
    l1d_tlb_2m_entries: int = 32
    l1d_tlb_2m_ways: int = 4
    l1d_tlb_latency: int = 1
    l2_tlb_entries: int = 1536
    l2_tlb_ways: int = 12
    l2_tlb_latency: int = 12
    nested_tlb_entries: int = 64
    nested_tlb_latency: int = 1
    pwc_entries: int = 32
    pwc_ways: int = 4
    pwc_latency: int = 2
    mpki_epoch_instructions: int = 100_000

    # cache
    l1_cache_bytes: int = 32 * 1024
    l1_cache_ways: int = 8
    l1_cache_latency: int = 4
    l2_cache_bytes: int = 2 * 1024 * 1024
    l2_cache_ways: int = 16
    l2_cache_latency: int = 16
    l3_cache_bytes: int = 2 * 1024 * 1024
    l3_cache_ways: int = 16
    l3_cache_latency: int = 35
    cache_line_bytes: int = 64
    dram_latency: int = 150
    maintenance_latency_ns: float = 100.0

    # predictor
    predictor_freq_lo: int = 1
    predictor_freq_hi: int = 7
    predictor_cost_lo: int = 1
    predictor_cost_hi: int = 12
    bypass_mpki_threshold: float = 5.0
    tlb_mpki_threshold: float = 5.0
    background_walk_slots: int = 8

    # backend
    backend: str = "radix"
    backend_tlb_entries: int = 65536      # large-l2-tlb / l3-tlb size
    backend_tlb_latency: int = 12         # large-l2-tlb latency (l3-tlb: 15)
    l3_tlb_latency: int = 15
    pom_tlb_entries: int = 65536
    pom_tlb_ways: int = 16
    victima_nested_blocks: bool = True    # victima-virt: probe nested blocks

    # trace / workload
    trace_path: str = ""
    trace_kind: str = "uniform"           # uniform | strided | zipfian | pointer-chase
    trace_stride: int = 4096
    trace_zipf_s: float = 1.0
    footprint_bytes: int = 1 << 30
    record_count: int = 1_000_000
    seed: int = 1
    large_page_fraction: float = 0.3
    reach_sample_instructions: int = 1000

    @property
    def maintenance_latency_cycles(self):
        return int(round(self.maintenance_latency_ns * self.clock_ghz))

    def validate(self):
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown backend '{self.backend}'")
        if self.footprint_bytes <= 0:
            raise ConfigError("footprint must be positive")
        if self.record_count < 0:
            raise ConfigError("record_count must be >= 0")
        if not 0.0 <= self.large_page_fraction <= 1.0:
            raise ConfigError("large_page_fraction must be in [0, 1]")
        return self

    def to_dict(self):
        return asdict(self)

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# TOML sections -> config field prefixes.  Keys inside a section map directly
# to RunConfig fields (section is informational; uniqueness is global).
_SECTIONS = ("machine", "tlb", "cache", "predictor", "backend", "trace")


def from_dict(data: dict) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    cfg = RunConfig()
    for section, body in data.items():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section '{section}'")
        if not isinstance(body, dict):
            raise ConfigError(f"section '{section}' must be a table")
        for key, value in body.items():
            name = "backend" if (section == "backend" and key == "name") else key
            if name not in known:
                raise ConfigError(f"unknown config key '{section}.{key}'")
            setattr(cfg, name, value)
    return cfg.validate()


def load(path: str) -> RunConfig:
    with open(path, "rb") as f:
        try:
            data = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from None
    return from_dict(data)
