"""
Polya-Gamma PG(b, z) variates.

PG(1, z) is J*(1, z/2)/4, drawn with Devroye's alternating-series rejection
sampler (exponential proposal right of the truncation point, truncated
inverse-Gaussian proposal left of it). The sampler is vectorised: every round
proposes for all pending variates at once and re-proposes only the rejected ones.

PG(b, z) for integer b <= PG_EXACT_SUM_MAX is the sum of b PG(1, z) draws; larger b
uses a normal approximation with the exact mean and variance.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr

from config.settings import PG_EXACT_SUM_MAX, PG_SERIES_TOL, PG_TRUNCATION
from .errors import InvalidArgumentError
from .rng import RngStream

logger = logging.getLogger(__name__)

_PI2_8 = math.pi ** 2 / 8.0


@dataclass(frozen=True)
class PgParams:
    b: int
    z: float = 0.0

    def __post_init__(self):
        if int(self.b) != self.b or self.b < 1:
            raise InvalidArgumentError(f"Polya-Gamma shape b must be a positive integer, got {self.b}")


def pg_mean(b, z) -> np.ndarray:
    """E PG(b, z) = b/(2z) tanh(z/2), b/4 at z = 0."""
    b = np.asarray(b, dtype=np.float64)
    z = np.abs(np.asarray(z, dtype=np.float64))
    safe = np.where(z > 0, z, 1.0)
    return np.where(z > 0, b / (2.0 * safe) * np.tanh(safe / 2.0), b / 4.0)


def pg_variance(b, z) -> np.ndarray:
    """Var PG(b, z) = b/(4z^3)(sinh z - z) sech^2(z/2), b/24 at z = 0."""
    b = np.asarray(b, dtype=np.float64)
    z = np.abs(np.asarray(z, dtype=np.float64))
    small = z < 1e-2
    safe = np.where(small, 1.0, z)
    ratio = np.where(small, 1.0 / 6.0 + z ** 2 / 120.0 + z ** 4 / 5040.0, (np.sinh(safe) - safe) / safe ** 3)
    return b / 4.0 * ratio / np.cosh(z / 2.0) ** 2


# --- J*(1, c) sampler ---

def _series_coef(n: int, x: np.ndarray, t: float) -> np.ndarray:
    """Piecewise coefficient a_n(x) of the alternating series for J*(1, 0)."""
    k = n + 0.5
    left = np.exp(math.log(math.pi * k) + 1.5 * np.log(2.0 / (math.pi * x)) - 2.0 * k * k / x)
    right = math.pi * k * np.exp(-k * k * math.pi ** 2 * x / 2.0)
    return np.where(x <= t, left, right)


def _exponential_mass(c: np.ndarray, t: float) -> np.ndarray:
    """Probability of taking the exponential proposal for tilt c."""
    fz = _PI2_8 + c * c / 2.0
    root = math.sqrt(1.0 / t)
    x0 = np.log(fz) + fz * t
    xb = x0 - c + log_ndtr(root * (t * c - 1.0))
    xa = x0 + c + log_ndtr(-root * (t * c + 1.0))
    q_over_p = 4.0 / math.pi * (np.exp(xb) + np.exp(xa))
    return 1.0 / (1.0 + q_over_p)


def _truncated_inverse_gaussian(gen: np.random.Generator, c: np.ndarray, t: float) -> np.ndarray:
    """IG(1/c, 1) truncated to (0, t)."""
    out = np.empty(c.size)
    wide = c < 1.0 / t  # mean 1/c beyond the truncation point

    idx = np.flatnonzero(wide)
    while idx.size:
        e1 = gen.standard_exponential(idx.size)
        e2 = gen.standard_exponential(idx.size)
        ok = e1 * e1 <= 2.0 * e2 / t
        x = t / (1.0 + t * e1) ** 2
        ok &= gen.random(idx.size) <= np.exp(-0.5 * c[idx] ** 2 * x)
        out[idx[ok]] = x[ok]
        idx = idx[~ok]

    idx = np.flatnonzero(~wide)
    while idx.size:
        mu = 1.0 / c[idx]
        y = gen.standard_normal(idx.size) ** 2
        x = mu + 0.5 * mu * mu * y - 0.5 * mu * np.sqrt(4.0 * mu * y + (mu * y) ** 2)
        flip = gen.random(idx.size) > mu / (mu + x)
        x = np.where(flip, mu * mu / x, x)
        ok = x < t
        out[idx[ok]] = x[ok]
        idx = idx[~ok]
    return out


def _series_accept(gen: np.random.Generator, x: np.ndarray, t: float, tol: float) -> np.ndarray:
    s = _series_coef(0, x, t)
    y = gen.random(x.size) * s
    accepted = np.zeros(x.size, dtype=bool)
    active = np.ones(x.size, dtype=bool)
    n = 0
    while active.any():
        n += 1
        idx = np.flatnonzero(active)
        a = _series_coef(n, x[idx], t)
        if n % 2:
            s[idx] -= a
            hit = y[idx] <= s[idx]
            accepted[idx[hit]] = True
            active[idx[hit]] = False
        else:
            s[idx] += a
            miss = y[idx] > s[idx]
            active[idx[miss]] = False
        # bracket has collapsed
        done = active[idx] & (a < tol)
        if done.any():
            j = idx[done]
            accepted[j] = y[j] <= s[j]
            active[j] = False
    return accepted


def _draw_jstar(gen: np.random.Generator, c: np.ndarray, t: float = PG_TRUNCATION,
                tol: float = PG_SERIES_TOL) -> np.ndarray:
    """Vectorised J*(1, c) draws."""
    c = np.abs(np.asarray(c, dtype=np.float64))
    out = np.empty(c.size)
    pending = np.arange(c.size)
    rounds = 0
    while pending.size:
        rounds += 1
        cc = c[pending]
        use_exp = gen.random(pending.size) < _exponential_mass(cc, t)
        x = np.empty(pending.size)
        fz = _PI2_8 + cc[use_exp] ** 2 / 2.0
        x[use_exp] = t + gen.standard_exponential(int(use_exp.sum())) / fz
        if not use_exp.all():
            x[~use_exp] = _truncated_inverse_gaussian(gen, cc[~use_exp], t)
        ok = _series_accept(gen, x, t, tol)
        out[pending[ok]] = x[ok]
        pending = pending[~ok]
    if rounds > 3:
        logger.debug(f"J* sampler needed {rounds} proposal rounds for {c.size} variates")
    return out


def _draw_pg_normal(gen: np.random.Generator, b: np.ndarray, z: np.ndarray) -> np.ndarray:
    mean = pg_mean(b, z)
    sd = np.sqrt(pg_variance(b, z))
    out = gen.normal(mean, sd)
    bad = np.flatnonzero(out <= 0)
    while bad.size:
        out[bad] = gen.normal(mean[bad], sd[bad])
        bad = bad[out[bad] <= 0]
    return out


def draw_pg_vector(s: RngStream, b, z, exact_max: int = PG_EXACT_SUM_MAX) -> np.ndarray:
    """
    Independent PG(b_i, z_i) draws. Entries with b_i = 0 return 0.

    b must hold non-negative integers.
    """
    b = np.asarray(b)
    z = np.broadcast_to(np.asarray(z, dtype=np.float64), b.shape).ravel()
    bf = b.ravel()
    if bf.size and (np.any(bf < 0) or np.any(bf != np.floor(bf))):
        raise InvalidArgumentError("Polya-Gamma shapes must be non-negative integers")
    bi = bf.astype(np.int64)
    gen = s.generator
    out = np.zeros(bi.size)

    exact = np.flatnonzero((bi > 0) & (bi <= exact_max))
    if exact.size:
        reps = bi[exact]
        draws = _draw_jstar(gen, np.repeat(z[exact] / 2.0, reps)) / 4.0
        starts = np.concatenate([[0], np.cumsum(reps)[:-1]])
        out[exact] = np.add.reduceat(draws, starts)

    approx = np.flatnonzero(bi > exact_max)
    if approx.size:
        out[approx] = _draw_pg_normal(gen, bi[approx].astype(np.float64), z[approx])
    return out.reshape(b.shape)


def draw_pg(s: RngStream, p: PgParams) -> float:
    """One PG(b, z) variate."""
    if not isinstance(p, PgParams):
        raise InvalidArgumentError("draw_pg expects PgParams")
    return float(draw_pg_vector(s, np.array([p.b]), np.array([p.z]))[0])
