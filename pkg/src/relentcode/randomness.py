"""Reproducible shared randomness.

Encoder and decoder must see the same variates, so every draw is a pure
function of ``(seed, substream_id, counter)``.  The generator is counter
based: the raw 64-bit word for draw ``i`` is obtained by hashing the counter
with a per-substream key, so a stream can be repositioned in O(1) (the
selection decoders rely on this to jump straight to the N-th proposal).

Non-uniform variates are produced by inverting a CDF with arithmetic
implemented here, never by a platform sampler.
"""

from __future__ import annotations

import math

__all__ = [
    "DeterministicStream",
    "new_stream",
    "next_uniform",
    "next_exponential",
    "next_gaussian",
    "uniform_from_bits",
    "exponential_from_uniform",
    "gaussian_from_uniform",
]

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_KEY_SALT = 0xD1B54A32D192ED03
_OUT_SALT = 0x8CB92BA72F3D8DD7


def _mix64(z: int) -> int:
    # SplitMix64 finaliser; a bijection on 64-bit words.
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _check_u64(name: str, value: int) -> int:
    value = int(value)
    if not 0 <= value <= MASK64:
        raise ValueError(f"{name} must be a 64-bit unsigned integer, got {value}")
    return value


class DeterministicStream:
    """Seeded, substream-indexed source of reproducible variates.

    Every variate consumes exactly one raw 64-bit draw, so ``counter`` is also
    the number of variates produced so far.  Not thread safe; give each
    independent unit of work its own ``substream_id``.
    """

    __slots__ = ("seed", "substream_id", "counter", "_k0", "_k1")

    def __init__(self, seed: int, substream_id: int = 0, counter: int = 0):
        self.seed = _check_u64("seed", seed)
        self.substream_id = _check_u64("substream_id", substream_id)
        self.counter = _check_u64("counter", counter)
        k = _mix64((self.seed * _GOLDEN + _mix64(self.substream_id ^ _KEY_SALT)) & MASK64)
        self._k0 = k
        self._k1 = _mix64(k ^ _OUT_SALT)

    def __repr__(self) -> str:
        return (f"DeterministicStream(seed={self.seed}, "
                f"substream_id={self.substream_id}, counter={self.counter})")

    def raw_at(self, index: int) -> int:
        """The raw 64-bit word at position ``index`` (does not move the stream)."""
        return _mix64(_mix64((self._k0 + (index + 1) * _GOLDEN) & MASK64) ^ self._k1)

    def next_u64(self) -> int:
        word = self.raw_at(self.counter)
        self.counter += 1
        return word

    def seek(self, counter: int) -> None:
        self.counter = _check_u64("counter", counter)

    def fork(self) -> "DeterministicStream":
        """An independent copy positioned at the same counter."""
        return DeterministicStream(self.seed, self.substream_id, self.counter)

    def next_uniform(self) -> float:
        return uniform_from_bits(self.next_u64())

    def next_exponential(self) -> float:
        return exponential_from_uniform(self.next_uniform())

    def next_gaussian(self) -> float:
        return gaussian_from_uniform(self.next_uniform())


def new_stream(seed: int, substream_id: int = 0) -> DeterministicStream:
    return DeterministicStream(seed, substream_id)


def next_uniform(stream: DeterministicStream) -> float:
    return stream.next_uniform()


def next_exponential(stream: DeterministicStream) -> float:
    return stream.next_exponential()


def next_gaussian(stream: DeterministicStream) -> float:
    return stream.next_gaussian()


def uniform_from_bits(bits: int) -> float:
    """Map a 64-bit word to the open interval (0, 1).

    Only the top 52 bits are used: ``(m + 1/2) * 2**-52`` is exactly
    representable for every 52-bit ``m`` (with 53 bits the top value would
    round up to 1.0), so neither endpoint can be hit.
    """
    return ((bits >> 12) + 0.5) * 2.0**-52


def exponential_from_uniform(u: float) -> float:
    """Inverse CDF of Exp(1)."""
    return -math.log1p(-u)


# Wichura's AS 241 (PPND16), accurate to about 1e-16.
_A = (3.387132872796366608, 133.14166789178437745, 1971.5909503065514427,
      13731.693765509461125, 45921.953931549871457, 67265.770927008700853,
      33430.575583588128105, 2509.0809287301226727)
_B = (1.0, 42.313330701600911252, 687.1870074920579083, 5394.1960214247511077,
      21213.794301586595867, 39307.89580009271061, 28729.085735721942674,
      5226.495278852545925)
_C = (1.42343711074968357734, 4.6303378461565452959, 5.7694972214606914055,
      3.64784832476320460504, 1.27045825245236838258, 0.24178072517745061177,
      0.0227238449892691845833, 7.7454501427834140764e-4)
_D = (1.0, 2.05319162663775882187, 1.6763848301838038494, 0.68976733498510000455,
      0.14810397642748007459, 0.0151986665636164571966, 5.475938084995344946e-4,
      1.05075007164441684324e-9)
_E = (6.6579046435011037772, 5.4637849111641143699, 1.7848265399172913358,
      0.29656057182850489123, 0.026532189526576123093, 0.0012426609473880784386,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 0.59983220655588793769, 0.13692988092273580531, 0.0148753612908506148525,
      7.868691311456132591e-4, 1.8463183175100546818e-5, 1.4215117583164458887e-7,
      2.04426310338993978564e-15)


def _poly(coeffs: tuple, x: float) -> float:
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def gaussian_from_uniform(u: float) -> float:
    """Inverse standard normal CDF for ``u`` in (0, 1)."""
    if not 0.0 < u < 1.0:
        raise ValueError(f"u must lie in (0, 1), got {u}")
    q = u - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _poly(_A, r) / _poly(_B, r)
    r = u if q < 0 else 1.0 - u
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        val = _poly(_C, r) / _poly(_D, r)
    else:
        r -= 5.0
        val = _poly(_E, r) / _poly(_F, r)
    return -val if q < 0 else val
