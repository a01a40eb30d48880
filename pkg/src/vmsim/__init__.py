"""Deterministic trace-driven simulator of CPU address translation.

Models a two-level TLB hierarchy backed by a four-level radix page table,
and a design that stores clusters of translations inside L2 data cache
blocks, guarded by a cost-of-translation predictor and a TLB-aware SRRIP
replacement policy.  Native and virtualized (nested paging) machines are
supported, along with baseline systems for comparison: enlarged L2 TLB, a
dedicated L3 TLB, an in-memory software TLB, and ideal shadow paging.
"""

from .addrspace import (MachineSpec, AliasReport, PAGE_4K, PAGE_2M,
                        GROUP_SIZE, alias_feasibility, decompose_va,
                        reassemble_va, tlb_block_coords)
from .cachehier import (CacheGeometry, CacheHierarchy, CacheLevel, Block,
                        TagWidths, derive_tag_widths, RRIP_MAX,
                        srrip_insert_rrpv, srrip_on_hit,
                        choose_replacement_victim, srrip_select,
                        DATA, TLB_BLOCK, NESTED_TLB_BLOCK)
from .config import BACKENDS, VIRT_BACKENDS, RunConfig
from .errors import ConfigError, MappingError, SimError, TraceError
from .maintenance import FlushAll, FlushAsid, FlushPage, FlushRange, matches
from .mmu import Mmu, TranslationResult
from .pagetable import (FrameAllocator, PageTableEntry, PageWalkCache,
                        RadixPageTable, WalkResult, make_pwcs, nested_walk,
                        shadow_walk, update_ptw_counters, walk,
                        FREQ_MAX, COST_MAX)
from .predictor import PredictorBox, consult, predict
from .simkit import (generate, parse_text_trace, read_trace, run, write_trace,
                     TraceRecord)
from .stats import Stats
from .tlbhier import (MpkiTracker, SetAssocTlb, TlbEntry, TlbGeometry,
                      TlbHierarchy)

__version__ = "1.0.0"
