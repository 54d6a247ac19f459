"""Counter-based deterministic RNG (splitmix64 finalizer).

Every stochastic stage derives the i-th random value purely from
(seed, counter=i), so results are identical across platforms, runs and
worker counts regardless of evaluation order.
"""

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def _mix(x: int) -> int:
    x &= _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def random_u64(seed: int, counter: int) -> int:
    """64-bit value for stream `seed` at position `counter`."""
    return _mix(((seed & _MASK) + (counter + 1) * _GAMMA) & _MASK)


def random_unit(seed: int, counter: int) -> float:
    """Uniform float in [0, 1) with 53 bits of precision."""
    return (random_u64(seed, counter) >> 11) * (2.0 ** -53)


def random_uniform(seed: int, counter: int, lo: float, hi: float) -> float:
    """Uniform float in [lo, hi)."""
    return lo + (hi - lo) * random_unit(seed, counter)
