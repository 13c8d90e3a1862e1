"""Coding problems: a source P_X together with a channel P_{Y|X}.

Every mechanism uses its output marginal P_Y as the proposal distribution,
so the density ratio is ``r_x(y) = p(y | x) / p(y)``.  Samplers only need
``marginal_sample``, ``density_ratio`` and ``ratio_sup``; the remaining
methods exist for verification.
"""

from __future__ import annotations

import abc
import bisect
import math
from typing import Sequence

from .errors import MutualInformationUnavailable, UnboundedRatioError, UndefinedRatioError
from .randomness import DeterministicStream

LOG2E = math.log2(math.e)
_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


# -- scalar distributions ----------------------------------------------------

class Normal:
    kind = 0
    discrete = False
    unimodal = True

    def __init__(self, mean: float = 0.0, std: float = 1.0):
        if not std > 0:
            raise ValueError("std must be positive")
        self.mean = float(mean)
        self.std = float(std)

    def __repr__(self):
        return f"Normal({self.mean}, {self.std})"

    @property
    def params(self) -> tuple[float, float]:
        return (self.mean, self.std)

    def cdf(self, t: float) -> float:
        return 0.5 * math.erfc(-(t - self.mean) / (self.std * _SQRT2))

    def sf(self, t: float) -> float:
        return 0.5 * math.erfc((t - self.mean) / (self.std * _SQRT2))

    def pdf(self, t: float) -> float:
        z = (t - self.mean) / self.std
        return math.exp(-0.5 * z * z) / (self.std * _SQRT2PI)

    def sample(self, stream: DeterministicStream) -> float:
        return self.mean + self.std * stream.next_gaussian()

    def support_hint(self) -> tuple[float, float]:
        return (self.mean - 40.0 * self.std, self.mean + 40.0 * self.std)

    def entropy_bits(self) -> float:
        return 0.5 * math.log2(2.0 * math.pi * math.e * self.std ** 2)


class Laplace:
    kind = 2
    discrete = False
    unimodal = True

    def __init__(self, loc: float = 0.0, scale: float = 1.0):
        if not scale > 0:
            raise ValueError("scale must be positive")
        self.loc = float(loc)
        self.scale = float(scale)

    def __repr__(self):
        return f"Laplace({self.loc}, {self.scale})"

    @property
    def params(self) -> tuple[float, float]:
        return (self.loc, self.scale)

    def cdf(self, t: float) -> float:
        z = (t - self.loc) / self.scale
        return 0.5 * math.exp(z) if z < 0 else 1.0 - 0.5 * math.exp(-z)

    def sf(self, t: float) -> float:
        z = (t - self.loc) / self.scale
        return 0.5 * math.exp(-z) if z > 0 else 1.0 - 0.5 * math.exp(z)

    def pdf(self, t: float) -> float:
        return 0.5 * math.exp(-abs(t - self.loc) / self.scale) / self.scale

    def sample(self, stream: DeterministicStream) -> float:
        u = stream.next_uniform() - 0.5
        return self.loc - self.scale * math.copysign(math.log1p(-2.0 * abs(u)), u)

    def support_hint(self) -> tuple[float, float]:
        return (self.loc - 60.0 * self.scale, self.loc + 60.0 * self.scale)

    def entropy_bits(self) -> float:
        return math.log2(2.0 * math.e * self.scale)


class Uniform:
    kind = 3
    discrete = False
    unimodal = True

    def __init__(self, low: float = -0.5, high: float = 0.5):
        if not high > low:
            raise ValueError("need high > low")
        self.low = float(low)
        self.high = float(high)

    def __repr__(self):
        return f"Uniform({self.low}, {self.high})"

    @property
    def params(self) -> tuple[float, float]:
        return (self.low, self.high)

    def cdf(self, t: float) -> float:
        return min(max((t - self.low) / (self.high - self.low), 0.0), 1.0)

    def sf(self, t: float) -> float:
        return min(max((self.high - t) / (self.high - self.low), 0.0), 1.0)

    def pdf(self, t: float) -> float:
        return 1.0 / (self.high - self.low) if self.low <= t <= self.high else 0.0

    def sample(self, stream: DeterministicStream) -> float:
        return self.low + (self.high - self.low) * stream.next_uniform()

    def support_hint(self) -> tuple[float, float]:
        return (self.low, self.high)

    def entropy_bits(self) -> float:
        return math.log2(self.high - self.low)


class DiscreteUniform:
    """Equiprobable integer levels ``0, 1, ..., levels - 1``."""

    kind = 1
    discrete = True

    def __init__(self, levels: int):
        levels = int(levels)
        if levels < 1:
            raise ValueError("levels must be positive")
        self.levels = levels

    def __repr__(self):
        return f"DiscreteUniform({self.levels})"

    @property
    def params(self) -> tuple[float, float]:
        return (float(self.levels), 0.0)

    def _count_le(self, t: float) -> int:
        if t < 0:
            return 0
        if t >= self.levels - 1:
            return self.levels
        return math.floor(t) + 1

    def cdf(self, t: float) -> float:
        return self._count_le(t) / self.levels

    def sf(self, t: float) -> float:
        return (self.levels - self._count_le(t)) / self.levels

    def pmf(self, k: int) -> float:
        return 1.0 / self.levels if 0 <= k < self.levels else 0.0

    def sample(self, stream: DeterministicStream) -> int:
        return min(int(stream.next_uniform() * self.levels), self.levels - 1)

    def support_hint(self) -> tuple[float, float]:
        return (0.0, float(self.levels - 1))


DISTRIBUTIONS = {cls.kind: cls for cls in (Normal, DiscreteUniform, Laplace, Uniform)}


def distribution_from_params(kind: int, a: float, b: float):
    kind = int(kind)
    if kind == DiscreteUniform.kind:
        return DiscreteUniform(int(a))
    try:
        return DISTRIBUTIONS[kind](a, b)
    except KeyError:
        raise ValueError(f"unknown distribution kind {kind}") from None


# -- mechanisms ----------------------------------------------------------------

class Mechanism(abc.ABC):
    """Source law, channel law and the marginal used as proposal.

    ``marginal_draws`` is the fixed number of raw stream draws consumed by
    one call to ``marginal_sample``; decoders use it to seek.
    """

    mechanism_id: int
    marginal_draws: int = 1
    discrete_output: bool = False
    # Expected rejection runtime E||r_X|| is infinite; samplers need a budget.
    needs_budget: bool = False

    @abc.abstractmethod
    def source_cdf(self, t: float) -> float: ...

    @abc.abstractmethod
    def source_sample(self, stream: DeterministicStream): ...

    @abc.abstractmethod
    def marginal_sample(self, stream: DeterministicStream): ...

    @abc.abstractmethod
    def density_ratio(self, x, y) -> float: ...

    @abc.abstractmethod
    def ratio_sup(self, x) -> float: ...

    @abc.abstractmethod
    def conditional_cdf(self, x, y) -> float: ...

    def mutual_information(self) -> float:
        raise MutualInformationUnavailable(f"{type(self).__name__} has no closed form")

    @abc.abstractmethod
    def params(self) -> list[float]:
        """Flat parameter list, the inverse of ``from_params``."""

    @classmethod
    @abc.abstractmethod
    def from_params(cls, params: Sequence[float]) -> "Mechanism": ...


class CategoricalMechanism(Mechanism):
    """Finite input and output alphabets with an explicit channel matrix."""

    mechanism_id = 1
    discrete_output = True

    def __init__(self, source_pmf: Sequence[float], channel_rows: Sequence[Sequence[float]]):
        pmf = tuple(float(p) for p in source_pmf)
        rows = tuple(tuple(float(q) for q in row) for row in channel_rows)
        if len(rows) != len(pmf) or not rows:
            raise ValueError("need one channel row per source symbol")
        m = len(rows[0])
        if any(len(r) != m for r in rows):
            raise ValueError("channel rows must share one alphabet size")
        if abs(sum(pmf) - 1.0) > 1e-12 or min(pmf) < 0:
            raise ValueError("source_pmf must be a probability vector")
        for r in rows:
            if abs(sum(r) - 1.0) > 1e-12 or min(r) < 0:
                raise ValueError("each channel row must be a probability vector")
        self.source_pmf = pmf
        self.channel_rows = rows
        self.alphabet_size = m
        self.marginal = tuple(sum(pmf[i] * rows[i][j] for i in range(len(pmf))) for j in range(m))
        self._source_cum = _cumulative(pmf)
        self._marginal_cum = _cumulative(self.marginal)

    @classmethod
    def independent(cls, output_pmf: Sequence[float], n_inputs: int = 2) -> "CategoricalMechanism":
        """Degenerate channel whose output ignores the input."""
        return cls([1.0 / n_inputs] * n_inputs, [list(output_pmf)] * n_inputs)

    def __repr__(self):
        return f"CategoricalMechanism({list(self.source_pmf)}, {[list(r) for r in self.channel_rows]})"

    def source_cdf(self, t):
        if t < 0:
            return 0.0
        return self._source_cum[min(math.floor(t), len(self.source_pmf) - 1)]

    def source_sample(self, stream):
        return _inverse_cdf_index(self._source_cum, stream.next_uniform())

    def marginal_sample(self, stream):
        return _inverse_cdf_index(self._marginal_cum, stream.next_uniform())

    def conditional_pmf(self, x: int) -> tuple[float, ...]:
        return self.channel_rows[x]

    def density_ratio(self, x, y):
        py = self.marginal[y]
        if py <= 0.0:
            raise UndefinedRatioError(f"marginal mass of output {y} is zero")
        return self.channel_rows[x][y] / py

    def ratio_sup(self, x):
        row = self.channel_rows[x]
        return max(row[j] / p for j, p in enumerate(self.marginal) if p > 0)

    def conditional_cdf(self, x, y):
        if y < 0:
            return 0.0
        row = self.channel_rows[x]
        return min(1.0, sum(row[: min(math.floor(y), len(row) - 1) + 1]))

    def mutual_information(self):
        total = 0.0
        for px, row in zip(self.source_pmf, self.channel_rows):
            for q, p in zip(row, self.marginal):
                if px > 0 and q > 0:
                    total += px * q * math.log2(q / p)
        return max(total, 0.0)

    def params(self):
        out = [float(len(self.source_pmf)), float(self.alphabet_size), *self.source_pmf]
        for row in self.channel_rows:
            out.extend(row)
        return out

    @classmethod
    def from_params(cls, params):
        n, m = int(params[0]), int(params[1])
        if len(params) != 2 + n + n * m:
            raise ValueError("categorical parameter block has the wrong length")
        pmf = params[2:2 + n]
        rows = [params[2 + n + i * m: 2 + n + (i + 1) * m] for i in range(n)]
        return cls(pmf, rows)


class GaussianGaussianMechanism(Mechanism):
    """X ~ N(0, sigma^2), Y | X=x ~ N(x, rho^2)."""

    mechanism_id = 2
    needs_budget = True

    def __init__(self, sigma: float = 1.0, rho: float = 0.5):
        if not (sigma > 0 and rho > 0):
            raise ValueError("sigma and rho must be positive")
        self.sigma = float(sigma)
        self.rho = float(rho)
        self.marginal_std = math.hypot(self.sigma, self.rho)

    def __repr__(self):
        return f"GaussianGaussianMechanism(sigma={self.sigma}, rho={self.rho})"

    def source_cdf(self, t):
        return 0.5 * math.erfc(-t / (self.sigma * _SQRT2))

    def source_sample(self, stream):
        return self.sigma * stream.next_gaussian()

    def marginal_sample(self, stream):
        return self.marginal_std * stream.next_gaussian()

    def log_ratio(self, x: float, y: float) -> float:
        s, r = self.marginal_std, self.rho
        return math.log(s / r) - (y - x) ** 2 / (2 * r * r) + y * y / (2 * s * s)

    def density_ratio(self, x, y):
        return math.exp(self.log_ratio(x, y))

    def log_ratio_sup(self, x: float) -> float:
        # The log-ratio is a concave quadratic in y, maximised at x * s^2 / sigma^2.
        return math.log(self.marginal_std / self.rho) + x * x / (2 * self.sigma ** 2)

    def ratio_argmax(self, x: float) -> float:
        return x * self.marginal_std ** 2 / self.sigma ** 2

    def ratio_sup(self, x):
        try:
            return math.exp(self.log_ratio_sup(x))
        except OverflowError:
            raise UnboundedRatioError(f"ratio bound overflows at x={x}") from None

    def conditional_cdf(self, x, y):
        return 0.5 * math.erfc(-(y - x) / (self.rho * _SQRT2))

    def mutual_information(self):
        return 0.5 * math.log2(1.0 + self.sigma ** 2 / self.rho ** 2)

    def params(self):
        return [self.sigma, self.rho]

    @classmethod
    def from_params(cls, params):
        return cls(*params)


class UniformAdditiveMechanism(Mechanism):
    """X uniform on ``0..levels-1``, Y = X + U with U ~ Unif(-1/2, 1/2)."""

    mechanism_id = 3

    def __init__(self, levels: int = 16):
        self.source = DiscreteUniform(levels)
        self.levels = self.source.levels

    def __repr__(self):
        return f"UniformAdditiveMechanism(levels={self.levels})"

    def source_cdf(self, t):
        return self.source.cdf(t)

    def source_sample(self, stream):
        return self.source.sample(stream)

    def marginal_sample(self, stream):
        return self.levels * stream.next_uniform() - 0.5

    def density_ratio(self, x, y):
        if not -0.5 <= y <= self.levels - 0.5:
            raise UndefinedRatioError(f"y={y} is outside the marginal support")
        return float(self.levels) if -0.5 < y - x <= 0.5 else 0.0

    def ratio_sup(self, x):
        return float(self.levels)

    def conditional_cdf(self, x, y):
        return min(max(y - x + 0.5, 0.0), 1.0)

    def mutual_information(self):
        return math.log2(self.levels)

    def params(self):
        return [float(self.levels)]

    @classmethod
    def from_params(cls, params):
        return cls(int(params[0]))


class AdditiveUnimodalMechanism(Mechanism):
    """Y = X + eps with eps independent of X and unimodal.

    ``smsu`` is an explicitly supplied scale-mixture representation of the
    noise, used by the layered quantiser; it may be ``None`` when only the
    distributional methods are needed.
    """

    mechanism_id = 4

    def __init__(self, source, noise, smsu=None):
        if not getattr(noise, "unimodal", False):
            raise ValueError("noise must have a unimodal density")
        self.source = source
        self.noise = noise
        self.smsu = smsu
        self.marginal_draws = 2

    def __repr__(self):
        return f"AdditiveUnimodalMechanism({self.source!r}, {self.noise!r})"

    def _gaussian_pair(self) -> bool:
        return isinstance(self.source, Normal) and isinstance(self.noise, Normal)

    def source_cdf(self, t):
        return self.source.cdf(t)

    def source_sample(self, stream):
        return self.source.sample(stream)

    def marginal_sample(self, stream):
        return self.source.sample(stream) + self.noise.sample(stream)

    def marginal_pdf(self, y: float) -> float:
        if self._gaussian_pair():
            return Normal(self.source.mean + self.noise.mean,
                          math.hypot(self.source.std, self.noise.std)).pdf(y)
        if self.source.discrete:
            lo, hi = self.source.support_hint()
            return sum(self.source.pmf(k) * self.noise.pdf(y - k)
                       for k in range(int(lo), int(hi) + 1))
        from scipy.integrate import quad

        lo, hi = self.source.support_hint()
        return quad(lambda t: self.source.pdf(t) * self.noise.pdf(y - t), lo, hi,
                    points=[y - self.noise.support_hint()[0]], limit=200)[0]

    def density_ratio(self, x, y):
        p = self.marginal_pdf(y)
        if p <= 0.0:
            raise UndefinedRatioError(f"marginal density vanishes at y={y}")
        return self.noise.pdf(y - x) / p

    def ratio_sup(self, x):
        if self._gaussian_pair() and self.source.mean == 0 and self.noise.mean == 0:
            return GaussianGaussianMechanism(self.source.std, self.noise.std).ratio_sup(x)
        raise UnboundedRatioError("no analytic ratio bound for this source/noise pair")

    def conditional_cdf(self, x, y):
        return self.noise.cdf(y - x)

    def mutual_information(self):
        if self._gaussian_pair():
            return 0.5 * math.log2(1.0 + (self.source.std / self.noise.std) ** 2)
        raise MutualInformationUnavailable("no closed form for this source/noise pair")

    def params(self):
        return [float(self.source.kind), *self.source.params,
                float(self.noise.kind), *self.noise.params]

    @classmethod
    def from_params(cls, params):
        from .dither import smsu_for_noise

        source = distribution_from_params(*params[0:3])
        noise = distribution_from_params(*params[3:6])
        return cls(source, noise, smsu_for_noise(noise))


MECHANISMS = {cls.mechanism_id: cls for cls in (
    CategoricalMechanism, GaussianGaussianMechanism,
    UniformAdditiveMechanism, AdditiveUnimodalMechanism)}


def mechanism_from_params(mechanism_id: int, params: Sequence[float]) -> Mechanism:
    try:
        cls = MECHANISMS[mechanism_id]
    except KeyError:
        raise ValueError(f"unknown mechanism id {mechanism_id}") from None
    return cls.from_params(list(params))


def density_ratio(mech: Mechanism, x, y) -> float:
    return mech.density_ratio(x, y)


def ratio_sup(mech: Mechanism, x) -> float:
    return mech.ratio_sup(x)


def mutual_information(mech: Mechanism) -> float:
    return mech.mutual_information()


def expected_log_ratio_sup(mech: Mechanism, stream: DeterministicStream,
                           n_samples: int) -> tuple[float, float]:
    """Monte Carlo estimate of E[lb ||r_X||] in bits, with its standard error."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    log_sup = getattr(mech, "log_ratio_sup", None)
    total = total_sq = 0.0
    for _ in range(n_samples):
        x = mech.source_sample(stream)
        v = log_sup(x) * LOG2E if log_sup else math.log2(mech.ratio_sup(x))
        total += v
        total_sq += v * v
    mean = total / n_samples
    if n_samples == 1:
        return mean, 0.0
    var = max(total_sq - n_samples * mean * mean, 0.0) / (n_samples - 1)
    return mean, math.sqrt(var / n_samples)


def _cumulative(pmf: Sequence[float]) -> tuple[float, ...]:
    acc, out = 0.0, []
    for p in pmf:
        acc += p
        out.append(acc)
    return tuple(out)


def _inverse_cdf_index(cum: Sequence[float], u: float) -> int:
    return min(bisect.bisect_right(cum, u), len(cum) - 1)

