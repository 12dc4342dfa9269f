"""SplitMix64: the portable 64-bit PRNG used for scripted scenario payloads.

Chosen because it is tiny, well specified, and trivially reimplementable, so
scenario outputs stay structurally comparable across builds. Sub-streams are
derived per scripted item index, never shared, so inserting an item into a
script does not perturb the randomness of the others.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        return _mix(self._state)

    def next_float(self) -> float:
        """Uniform in [0, 1) with 53-bit resolution."""
        return (self.next_u64() >> 11) * (2.0**-53)

    def next_unit(self, digits: int = 6) -> float:
        """Uniform in [0, 1) rounded for readable scenario payloads."""
        return round(self.next_float(), digits)


def substream(seed: int, index: int) -> SplitMix64:
    """Independent generator for scripted item `index` under `seed`."""
    return SplitMix64(_mix((seed ^ ((index + 1) * _GAMMA)) & _MASK))
