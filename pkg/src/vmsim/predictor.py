"""Page-table-walk cost predictor: a four-comparator bounding box over the
per-PTE frequency/cost counters, plus the L2-cache-MPKI bypass rule."""

from dataclasses import dataclass

FREQ_MAX = 7   # 3-bit counter
COST_MAX = 15  # 4-bit counter


@dataclass(frozen=True)
class PredictorBox:
    """Counter pairs inside [freq_lo, freq_hi] x [cost_lo, cost_hi] are
    classified as costly-to-translate."""

    freq_lo: int = 1
    freq_hi: int = 7
    cost_lo: int = 1
    cost_hi: int = 12

    def __post_init__(self):
        if not (0 <= self.freq_lo <= self.freq_hi <= FREQ_MAX):
            raise ValueError("bad frequency bounds")
        if not (0 <= self.cost_lo <= self.cost_hi <= COST_MAX):
            raise ValueError("bad cost bounds")


DEFAULT_BOX = PredictorBox()

# Above this L2 cache MPKI, data locality is low and the predictor is bypassed.
BYPASS_MPKI_THRESHOLD = 5.0


def predict(freq: int, cost: int, box: PredictorBox = DEFAULT_BOX) -> bool:
    """Costly-to-translate iff the counter pair lies inside the box."""
    if not 0 <= freq <= FREQ_MAX:
        raise ValueError(f"freq {freq} out of range")
    if not 0 <= cost <= COST_MAX:
        raise ValueError(f"cost {cost} out of range")
    return (box.freq_lo <= freq <= box.freq_hi
            and box.cost_lo <= cost <= box.cost_hi)


def consult(l2_cache_mpki: float, freq: int, cost: int,
            box: PredictorBox = DEFAULT_BOX,
            threshold: float = BYPASS_MPKI_THRESHOLD) -> bool:
    """Insertion decision for a TLB block.

    When the L2 cache MPKI is at or above the threshold, caching data is not
    beneficial, so the predictor is bypassed and the entry is always inserted.
    """
    if l2_cache_mpki >= threshold:
        return True
    return predict(freq, cost, box)
