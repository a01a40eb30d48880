"""Address arithmetic: virtual/physical address decomposition, radix indices,
TLB-block indexing and the aliasing feasibility check.

Everything here is a pure function of the machine description; no simulation
state is involved.
"""

from dataclasses import dataclass, field

from .errors import ConfigError

PAGE_4K = 4096
PAGE_2M = 2 * 1024 * 1024

# PTEs per 64B line; a TLB block always covers an aligned group of this many pages.
GROUP_SHIFT = 3
GROUP_SIZE = 1 << GROUP_SHIFT


def _log2(n: int) -> int:
    if n <= 0 or n & (n - 1):
        raise ConfigError(f"{n} is not a power of two")
    return n.bit_length() - 1


@dataclass(frozen=True)
class MachineSpec:
    """Bit widths and page-table shape of the simulated machine."""

    va_bits: int = 48
    pa_bits: int = 52
    page_sizes: tuple = (PAGE_4K, PAGE_2M)
    radix_levels: int = 4
    bits_per_level: int = 9
    cache_line_bytes: int = 64

    def __post_init__(self):
        if self.bits_per_level * self.radix_levels + 12 != self.va_bits:
            raise ConfigError(
                f"va_bits {self.va_bits} inconsistent with "
                f"{self.radix_levels} levels x {self.bits_per_level} bits + 12"
            )
        if self.cache_line_bytes % 8:
            raise ConfigError("cache line must hold whole 8-byte PTEs")

    @property
    def ptes_per_line(self) -> int:
        return self.cache_line_bytes // 8

    def page_shift(self, page_size: int) -> int:
        if page_size not in self.page_sizes:
            raise ConfigError(f"unsupported page size {page_size}")
        return _log2(page_size)

    def levels_for(self, page_size: int) -> int:
        """Number of radix levels walked for a page of this size.

        A 2MiB leaf sits one level above a 4KiB leaf, so its walk is one
        level shorter.
        """
        shift = self.page_shift(page_size)
        return self.radix_levels - (shift - 12) // self.bits_per_level


@dataclass(frozen=True)
class VaParts:
    vpn: int
    page_offset: int
    radix_indices: tuple


def decompose_va(spec: MachineSpec, va: int, page_size: int) -> VaParts:
    """Split a virtual address into VPN, page offset and per-level radix indices."""
    if va >> spec.va_bits:
        raise ConfigError(f"va {va:#x} exceeds {spec.va_bits} bits")
    shift = spec.page_shift(page_size)
    levels = spec.levels_for(page_size)
    mask = (1 << spec.bits_per_level) - 1
    indices = tuple(
        (va >> (spec.va_bits - spec.bits_per_level * (i + 1))) & mask
        for i in range(levels)
    )
    return VaParts(vpn=va >> shift, page_offset=va & (page_size - 1),
                   radix_indices=indices)


def reassemble_va(spec: MachineSpec, parts: VaParts, page_size: int) -> int:
    """Inverse of decompose_va; used as the round-trip oracle."""
    shift = spec.page_shift(page_size)
    va = 0
    for i, idx in enumerate(parts.radix_indices):
        va |= idx << (spec.va_bits - spec.bits_per_level * (i + 1))
    return va | (parts.page_offset & (page_size - 1))


def tlb_block_coords(vpn: int, num_sets: int):
    """Locate the TLB block for a VPN inside a cache with num_sets sets.

    Returns (pte_slot, set_index, block_tag).  The low 3 VPN bits select the
    PTE slot inside the block; all 8 VPNs of an aligned group share the same
    (set_index, block_tag).
    """
    set_bits = _log2(num_sets)
    pte_slot = vpn & (GROUP_SIZE - 1)
    set_index = (vpn >> GROUP_SHIFT) & (num_sets - 1)
    block_tag = vpn >> (GROUP_SHIFT + set_bits)
    return pte_slot, set_index, block_tag


@dataclass(frozen=True)
class AliasReport:
    feasible: bool
    spare_bits: int


def data_tag_bits(pa_bits: int, num_sets: int, line_bytes: int) -> int:
    return pa_bits - _log2(num_sets) - _log2(line_bytes)


def tlb_tag_bits(va_bits: int, num_sets: int) -> int:
    return va_bits - 12 - _log2(num_sets) - GROUP_SHIFT


def alias_feasibility(va_bits: int, pa_bits: int,
                      num_sets: int = 1024, line_bytes: int = 64) -> AliasReport:
    """Check whether a TLB-block tag fits in the hardware tag of the L2.

    Unique tagging is possible only if pa_bits > va_bits - 9 for 64-byte
    lines; the spare bits (data tag width minus TLB tag width) are available
    for ASID/VMID and page-size information.
    """
    feasible = pa_bits > va_bits - 9
    spare = data_tag_bits(pa_bits, num_sets, line_bytes) - tlb_tag_bits(va_bits, num_sets)
    return AliasReport(feasible=feasible, spare_bits=spare)
