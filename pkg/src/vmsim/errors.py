"""Exception types shared across the simulator."""


class SimError(Exception):
    """Base class for all simulator errors."""


class ConfigError(SimError):
    """Invalid or infeasible configuration."""


class MappingError(SimError):
    """Conflicting or invalid page table mapping."""


class TraceError(SimError):
    """Malformed trace file or record."""
