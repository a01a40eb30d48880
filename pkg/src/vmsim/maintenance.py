"""TLB invalidation scopes, shared by the TLB hierarchy, the L2 cache and the MMU."""

from dataclasses import dataclass


@dataclass(frozen=True)
class FlushAll:
    pass


@dataclass(frozen=True)
class FlushAsid:
    asid: int


@dataclass(frozen=True)
class FlushPage:
    va: int
    asid: int


@dataclass(frozen=True)
class FlushRange:
    lo: int
    hi: int  # inclusive byte address
    asid: int


Scope = (FlushAll, FlushAsid, FlushPage, FlushRange)


def matches(scope, vpn: int, page_size: int, asid: int) -> bool:
    """True if a translation entry for (vpn, page_size, asid) falls under scope."""
    if isinstance(scope, FlushAll):
        return True
    if isinstance(scope, FlushAsid):
        return asid == scope.asid
    base = vpn * page_size
    if isinstance(scope, FlushPage):
        return asid == scope.asid and base <= scope.va < base + page_size
    if isinstance(scope, FlushRange):
        return asid == scope.asid and base <= scope.hi and scope.lo < base + page_size
    raise TypeError(f"unknown scope {scope!r}")
