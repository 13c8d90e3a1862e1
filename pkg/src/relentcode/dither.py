"""Dithered and layered quantiser codes.

The quantised index ``N`` is entropy coded one record at a time with a
Shannon-Fano-Elias code driven by the conditional CDF of ``N`` given the
shared dither (and scale).  Cumulative probabilities are snapped to integers
on a 2**80 grid so that encoder and decoder agree bit for bit; symbols with
less than 2**-64 of mass are refused.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .codes import BitCursor, BitString
from .errors import MalformedCodeword, TruncatedError, ZeroProbabilityError
from .models import Laplace, Normal, Uniform
from .randomness import DeterministicStream

__all__ = [
    "round_half_up", "IntegerCdf", "DitherRecord", "SmsuRepresentation",
    "sfe_encode", "sfe_decode", "sfe_codeword",
    "dq_index_cdf", "dq_quantise", "dq_encode", "dq_decode",
    "lq_index_cdf", "lq_quantise", "lq_encode", "lq_decode",
    "gaussian_smsu", "laplace_smsu", "uniform_smsu", "smsu_for_noise",
]

PRECISION = 80
ONE = 1 << PRECISION
MIN_MASS = 1 << (PRECISION - 64)
_MAX_SPAN = 1 << 64
_HALF_ONE = 2.0 ** PRECISION


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


class _CallableSource:
    def __init__(self, cdf):
        self.cdf = cdf

    def sf(self, t):
        return 1.0 - self.cdf(t)

    def support_hint(self):
        return (0.0, 0.0)


def _as_source(source):
    return source if hasattr(source, "cdf") else _CallableSource(source)


class IntegerCdf:
    """CDF of an integer random variable, evaluated on demand.

    ``cdf(n)`` is P[N <= n]; the optional ``sf(n)`` gives P[N > n] and is used
    in the upper half where ``1 - cdf`` would lose precision.  ``support`` is
    a hint of where the mass lives; decoding widens it as needed.
    """

    def __init__(self, cdf: Callable[[int], float], sf: Callable[[int], float] | None = None,
                 support: tuple[int, int] = (0, 0)):
        self._cdf = cdf
        self._sf = sf
        low, high = support
        self.support = (int(low), max(int(low), int(high)))

    def cdf(self, n: int) -> float:
        return self.boundary(n) / ONE

    def pmf(self, n: int) -> float:
        return max(self.boundary(n) - self.boundary(n - 1), 0) / ONE

    def boundary(self, n: int) -> int:
        """P[N <= n] as an integer multiple of 2**-80."""
        c = self._cdf(n)
        if c < 0.5:
            q = math.floor(c * _HALF_ONE) if c > 0 else 0
        else:
            s = self._sf(n) if self._sf is not None else 1.0 - c
            q = ONE - (math.floor(s * _HALF_ONE) if s > 0 else 0)
        return min(max(q, 0), ONE)


def sfe_codeword(cdf: IntegerCdf, n: int) -> tuple[int, int]:
    """Codeword for ``n`` as ``(value, length)``.

    The length is ``ceil(-lb p) + 1`` and the value is the binary expansion of
    ``P[N < n] + p/2`` truncated to that many bits.
    """
    low = cdf.boundary(n - 1)
    mass = cdf.boundary(n) - low
    if mass < MIN_MASS:
        raise ZeroProbabilityError(f"symbol {n} has probability below 2**-64")
    length = PRECISION + 1 - (mass.bit_length() - 1)
    return ((2 * low + mass) << length) >> (PRECISION + 1), length


def sfe_encode(cdf: IntegerCdf, n: int) -> BitString:
    value, length = sfe_codeword(cdf, int(n))
    return BitString.from_int(value, length)


def _locate(cdf: IntegerCdf, target: int) -> int:
    """Smallest n with 2 * boundary(n) > target."""
    low, high = cdf.support
    span = max(high - low, 1)
    while 2 * cdf.boundary(low - 1) > target:
        low -= span
        span *= 2
        if span > _MAX_SPAN:
            raise MalformedCodeword("cannot bracket the codeword (lower side)")
    span = max(high - low, 1)
    while 2 * cdf.boundary(high) <= target:
        high += span
        span *= 2
        if span > _MAX_SPAN:
            raise MalformedCodeword("cannot bracket the codeword (upper side)")
    # invariant: boundary(low - 1) is small enough, boundary(high) is large enough
    while low < high:
        mid = (low + high) // 2
        if 2 * cdf.boundary(mid) > target:
            high = mid
        else:
            low = mid + 1
    return low


def sfe_decode(cdf: IntegerCdf, bits: BitString, cursor: BitCursor) -> int:
    if cursor.remaining == 0:
        raise TruncatedError("no bits left")
    n = _locate(cdf, cursor.peek(PRECISION + 1))
    try:
        value, length = sfe_codeword(cdf, n)
    except ZeroProbabilityError:
        raise MalformedCodeword("bits point at a zero-probability symbol") from None
    if length > cursor.remaining:
        raise TruncatedError(f"codeword needs {length} bits, {cursor.remaining} left")
    if cursor.peek(length) != value:
        raise MalformedCodeword("bits do not match any codeword")
    cursor.skip(length)
    return n


# -- dithered quantisation -----------------------------------------------------

@dataclass(frozen=True)
class DitherRecord:
    index: int
    dither: float
    scale: float = 1.0
    offset: float = 0.0

    def reconstruction(self) -> float:
        return self.scale * (self.index - self.dither)


def _next_dither(stream: DeterministicStream) -> float:
    return stream.next_uniform() - 0.5


def dq_index_cdf(source_cdf, u: float, n: int) -> float:
    """P[N <= n | U = u] for N = round(X + u)."""
    return _as_source(source_cdf).cdf(n - u + 0.5)


def _dq_coding_cdf(source, u: float) -> IntegerCdf:
    lo, hi = source.support_hint()
    return IntegerCdf(lambda n: source.cdf(n - u + 0.5),
                      lambda n: source.sf(n - u + 0.5),
                      (round_half_up(lo + u) - 1, round_half_up(hi + u) + 1))


def dq_quantise(x: float, stream: DeterministicStream) -> DitherRecord:
    u = _next_dither(stream)
    return DitherRecord(round_half_up(x + u), u)


def dq_encode(source_cdf, x: float, seed: int, substream: int) -> BitString:
    source = _as_source(source_cdf)
    record = dq_quantise(x, DeterministicStream(seed, substream))
    return sfe_encode(_dq_coding_cdf(source, record.dither), record.index)


def dq_decode(source_cdf, bits: BitString, cursor: BitCursor, seed: int, substream: int) -> float:
    source = _as_source(source_cdf)
    u = _next_dither(DeterministicStream(seed, substream))
    n = sfe_decode(_dq_coding_cdf(source, u), bits, cursor)
    return n - u


# -- layered quantisation ------------------------------------------------------

@dataclass(frozen=True)
class SmsuRepresentation:
    """Noise written as S * (U + b(S)) with U ~ Unif(-1/2, 1/2) independent of S."""

    scale_sampler: Callable[[DeterministicStream], float]
    offset: Callable[[float], float]
    noise_cdf: Callable[[float], float]
    name: str = "custom"

    def sample_noise(self, stream: DeterministicStream) -> float:
        s = self.scale_sampler(stream)
        return s * (_next_dither(stream) + self.offset(s))


def _zero(_s: float) -> float:
    return 0.0


def gaussian_smsu(std: float = 1.0, mean: float = 0.0) -> SmsuRepresentation:
    """N(mean, std^2) noise: S = 2 * std * chi(3), b(s) = mean / s."""
    noise = Normal(mean, std)

    def scale(stream):
        g1, g2, g3 = stream.next_gaussian(), stream.next_gaussian(), stream.next_gaussian()
        return 2.0 * std * math.sqrt(g1 * g1 + g2 * g2 + g3 * g3)

    offset = _zero if mean == 0 else (lambda s: mean / s)
    return SmsuRepresentation(scale, offset, noise.cdf, "gaussian")


def laplace_smsu(scale: float = 1.0, loc: float = 0.0) -> SmsuRepresentation:
    """Laplace(loc, scale) noise: S ~ Gamma(2, 2 * scale), b(s) = loc / s."""
    noise = Laplace(loc, scale)

    def sampler(stream):
        return 2.0 * scale * (stream.next_exponential() + stream.next_exponential())

    offset = _zero if loc == 0 else (lambda s: loc / s)
    return SmsuRepresentation(sampler, offset, noise.cdf, "laplace")


def uniform_smsu(low: float = -0.5, high: float = 0.5) -> SmsuRepresentation:
    """Unif(low, high) noise: constant scale, no mixing needed."""
    width = high - low
    centre = 0.5 * (low + high) / width
    return SmsuRepresentation(lambda stream: width, lambda s: centre,
                              Uniform(low, high).cdf, "uniform")


def smsu_for_noise(noise) -> SmsuRepresentation:
    if isinstance(noise, Normal):
        return gaussian_smsu(noise.std, noise.mean)
    if isinstance(noise, Laplace):
        return laplace_smsu(noise.scale, noise.loc)
    if isinstance(noise, Uniform):
        return uniform_smsu(noise.low, noise.high)
    raise ValueError(f"no SMSU representation available for {noise!r}")


def lq_index_cdf(source_cdf, u: float, s: float, b_of_s: float, n: int) -> float:
    """P[N <= n | U = u, S = s] for N = round(X / s + b(s) + u)."""
    if not s > 0:
        raise ValueError("scale must be positive")
    return _as_source(source_cdf).cdf(s * (n - b_of_s - u + 0.5))


def _lq_coding_cdf(source, u: float, s: float, b: float) -> IntegerCdf:
    lo, hi = source.support_hint()
    return IntegerCdf(lambda n: source.cdf(s * (n - b - u + 0.5)),
                      lambda n: source.sf(s * (n - b - u + 0.5)),
                      (round_half_up(lo / s + b + u) - 1, round_half_up(hi / s + b + u) + 1))


def _lq_randomness(smsu: SmsuRepresentation, stream: DeterministicStream) -> tuple[float, float, float]:
    s = smsu.scale_sampler(stream)
    u = _next_dither(stream)
    return u, s, smsu.offset(s)


def lq_quantise(x: float, smsu: SmsuRepresentation, stream: DeterministicStream) -> DitherRecord:
    u, s, b = _lq_randomness(smsu, stream)
    return DitherRecord(round_half_up(x / s + b + u), u, s, b)


def lq_encode(source_cdf, smsu: SmsuRepresentation, x: float, seed: int, substream: int) -> BitString:
    source = _as_source(source_cdf)
    rec = lq_quantise(x, smsu, DeterministicStream(seed, substream))
    return sfe_encode(_lq_coding_cdf(source, rec.dither, rec.scale, rec.offset), rec.index)


def lq_decode(source_cdf, smsu: SmsuRepresentation, bits: BitString, cursor: BitCursor,
              seed: int, substream: int) -> float:
    source = _as_source(source_cdf)
    u, s, b = _lq_randomness(smsu, DeterministicStream(seed, substream))
    n = sfe_decode(_lq_coding_cdf(source, u, s, b), bits, cursor)
    return s * (n - u)
