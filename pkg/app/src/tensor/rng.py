"""
Counter-based, splittable random number generator.

Value ``k`` (1-based) of a stream with seed ``s`` is
``mix64(s + k * 0x9E3779B97F4A7C15)`` where ``mix64`` is the SplitMix64
finaliser.  Because every value is a pure function of ``(seed, k)`` the stream
is identical on every platform and can be evaluated vectorised.  Test vectors
live in ``tests/fixtures/splitmix64_vectors.txt``.
"""

import hashlib
from typing import Sequence, Tuple, Union

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

Shape = Union[int, Sequence[int]]


def mix64(z: int) -> int:
    """SplitMix64 finaliser on a Python int"""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


def _stream_id(stream: Union[int, str]) -> int:
    if isinstance(stream, str):
        return int.from_bytes(hashlib.sha256(stream.encode("utf-8")).digest()[:8], "little")
    return int(stream) & MASK64


def derive_seed(seed: int, *streams: Union[int, str]) -> int:
    """Child seed reached by splitting ``seed`` along ``streams`` in order"""
    for stream in streams:
        seed = mix64((seed & MASK64) ^ mix64(_stream_id(stream) + 1))
    return seed


class SeededRng:
    """
    Deterministic generator over one 64-bit seed.

    Draws advance an internal counter, so two generators with the same seed
    and the same sequence of calls return bitwise-identical arrays.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self.counter = 0

    def split(self, stream: Union[int, str]) -> "SeededRng":
        """Independent child generator; does not advance this one"""
        return SeededRng(derive_seed(self.seed, stream))

    def next_u64(self, n: int) -> np.ndarray:
        k = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            state = np.uint64(self.seed) + k * np.uint64(GOLDEN_GAMMA)
        return _mix64_array(state)

    def uniform(self, size: Shape, low: float = 0.0, high: float = 1.0, dtype=np.float64) -> np.ndarray:
        shape = _as_shape(size)
        n = int(np.prod(shape, dtype=np.int64))
        bits = self.next_u64(n) >> np.uint64(11)
        unit = bits.astype(np.float64) * (1.0 / (1 << 53))
        return (low + (high - low) * unit).reshape(shape).astype(dtype)

    def normal(self, size: Shape, mean: float = 0.0, std: float = 1.0, dtype=np.float64) -> np.ndarray:
        shape = _as_shape(size)
        n = int(np.prod(shape, dtype=np.int64))
        half = (n + 1) // 2
        u1 = self.uniform(half)
        u2 = self.uniform(half)
        radius = np.sqrt(-2.0 * np.log1p(-u1))
        angle = 2.0 * np.pi * u2
        z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:n]
        return (mean + std * z).reshape(shape).astype(dtype)

    def integers(self, low: int, high: int, size: Shape) -> np.ndarray:
        """Uniform integers in ``[low, high)``"""
        if high <= low:
            raise ValueError(f"empty range [{low}, {high})")
        u = self.uniform(size)
        return np.minimum(low + np.floor(u * (high - low)).astype(np.int64), high - 1)

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.uniform(n), kind="stable")

    def choice(self, n: int, k: int) -> np.ndarray:
        """``k`` distinct indices out of ``range(n)``, in draw order"""
        if k > n:
            raise ValueError(f"cannot draw {k} items from {n}")
        return self.permutation(n)[:k]


def _as_shape(size: Shape) -> Tuple[int, ...]:
    if isinstance(size, (int, np.integer)):
        return (int(size),)
    return tuple(int(s) for s in size)
