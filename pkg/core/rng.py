"""
Seedable random streams.

An ``RngStream`` is a value: (seed, stream_id). Sequential draws come from a
numpy ``Generator`` over the counter-based Philox bit generator keyed by both
numbers. Per-site draws inside a Gibbs sweep come from ``site_normals``, a pure
function of (seed, stream_id, iteration, site, draw), so results never depend on
how sites are scheduled across threads.
"""
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np
from scipy.special import ndtri

from .errors import InvalidArgumentError

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
# Separates the site-normal key space from other hashed uses of the same stream
_SITE_DOMAIN = np.uint64(0x5EED0F51DE000001)

Size = Optional[Union[int, Tuple[int, ...]]]


def _splitmix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finaliser over uint64 arrays (wrapping arithmetic)."""
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


@dataclass
class RngStream:
    """Random stream identified by a 64-bit seed and a 64-bit substream selector."""

    seed: int
    stream_id: int = 0
    _generator: Optional[np.random.Generator] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.seed = int(self.seed) & _MASK64
        self.stream_id = int(self.stream_id) & _MASK64

    @property
    def generator(self) -> np.random.Generator:
        if self._generator is None:
            key = (self.seed << 64) | self.stream_id
            self._generator = np.random.Generator(np.random.Philox(key=key))
        return self._generator

    def spawn(self, stream_id: int) -> "RngStream":
        """Independent stream with the same seed; does not disturb this one."""
        return RngStream(self.seed, stream_id)

    def site_normals(self, iteration: int, sites, draw: int = 0) -> np.ndarray:
        """Standard normals keyed by (iteration, site, draw); independent of call order."""
        sites = np.asarray(sites, dtype=np.uint64)
        base = _splitmix64(np.array([self.seed], dtype=np.uint64) ^ _SITE_DOMAIN)[0]
        base = _splitmix64(np.array([base ^ np.uint64(self.stream_id)], dtype=np.uint64))[0]
        base = _splitmix64(np.array([base ^ np.uint64(int(iteration) & _MASK64)], dtype=np.uint64))[0]
        base = _splitmix64(np.array([base ^ np.uint64(int(draw) & _MASK64)], dtype=np.uint64))[0]
        bits = _splitmix64(_splitmix64(sites ^ base))
        # top 53 bits, shifted half an ulp off zero
        u = ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)
        return ndtri(u)


def draw_normal(s: RngStream, mean=0.0, sd=1.0, size: Size = None):
    """Gaussian variate(s) N(mean, sd^2)."""
    if np.any(np.asarray(sd) <= 0):
        raise InvalidArgumentError(f"Normal standard deviation must be positive, got {sd}")
    return s.generator.normal(mean, sd, size)


def draw_uniform(s: RngStream, size: Size = None):
    return s.generator.random(size)


def draw_exponential(s: RngStream, rate=1.0, size: Size = None):
    if np.any(np.asarray(rate) <= 0):
        raise InvalidArgumentError(f"Exponential rate must be positive, got {rate}")
    return s.generator.standard_exponential(size) / rate


def draw_gamma(s: RngStream, shape, rate=1.0, size: Size = None):
    """Gamma(shape, rate); numpy's sampler is Marsaglia-Tsang with the shape < 1 boost."""
    if np.any(np.asarray(shape) <= 0) or np.any(np.asarray(rate) <= 0):
        raise InvalidArgumentError(f"Gamma parameters must be positive, got shape={shape}, rate={rate}")
    return s.generator.standard_gamma(shape, size) / rate


def draw_inverse_gamma(s: RngStream, shape, rate, size: Size = None):
    """InvGam(shape, rate) as rate / Gamma(shape, 1)."""
    if np.any(np.asarray(shape) <= 0) or np.any(np.asarray(rate) <= 0):
        raise InvalidArgumentError(f"Inverse-gamma parameters must be positive, got shape={shape}, rate={rate}")
    return rate / s.generator.standard_gamma(shape, size)
