"""
Monte Carlo efficiency: autocorrelation, integrated autocorrelation time (IAT),
effective sample size, cost per effective sample (CES) and the potential scale
reduction factor across chains.
"""
import logging
import os
import re
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from core.errors import ChainFileError, InvalidArgumentError, UndefinedVarianceError

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["sampler", "cpu_seconds", "ess", "iat", "ces"]
CHAIN_PARAMETERS = ("beta0", "sigma2", "tau2")
MIN_IAT_LENGTH = 50


def _as_chain(chain) -> np.ndarray:
    x = np.asarray(chain, dtype=np.float64).ravel()
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("Chain contains non-finite values")
    return x


def acf(chain, max_lag: Optional[int] = None) -> np.ndarray:
    """Biased autocorrelation estimates for lags 0..max_lag, computed by FFT."""
    x = _as_chain(chain)
    n = x.size
    if n < 2:
        raise InvalidArgumentError(f"Autocorrelation needs at least 2 draws, got {n}")
    max_lag = n - 1 if max_lag is None else int(max_lag)
    if not 0 <= max_lag < n:
        raise InvalidArgumentError(f"max_lag must lie in [0, {n - 1}], got {max_lag}")
    x = x - x.mean()
    scale = max(1.0, float(np.max(np.abs(x))) if n else 1.0)
    if np.all(np.abs(x) <= 1e-14 * scale):
        raise UndefinedVarianceError("Chain is constant; autocorrelation is undefined")
    size = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:max_lag + 1] / n
    return acov / acov[0]


def iat(chain) -> float:
    """
    1 + 2 sum rho(l), truncated by Geyer's initial positive sequence:
    consecutive pair sums rho(2k) + rho(2k+1) are accumulated while positive.
    """
    x = _as_chain(chain)
    if x.size < MIN_IAT_LENGTH:
        raise InvalidArgumentError(f"IAT needs at least {MIN_IAT_LENGTH} draws, got {x.size}")
    rho = acf(x)
    pairs = rho[:2 * (rho.size // 2)].reshape(-1, 2).sum(axis=1)
    nonpositive = np.flatnonzero(pairs <= 0)
    stop = nonpositive[0] if nonpositive.size else pairs.size
    return float(-1.0 + 2.0 * pairs[:stop].sum())


def effective_size(n: int, iat_value: float) -> float:
    if not (n > 0 and iat_value > 0):
        raise InvalidArgumentError(f"Need positive n and IAT, got n={n}, iat={iat_value}")
    return n / iat_value


def ess(chain) -> float:
    """N / IAT."""
    x = _as_chain(chain)
    return effective_size(x.size, iat(x))


def ces(cpu_seconds: float, n_retained: int, iat_value: float) -> float:
    """Cost per effective sample: IAT * T / N."""
    if not (cpu_seconds > 0 and n_retained > 0 and iat_value > 0):
        raise InvalidArgumentError(
            f"CES needs positive inputs, got T={cpu_seconds}, N={n_retained}, IAT={iat_value}")
    return iat_value * cpu_seconds / n_retained


def mc_standard_error(chain) -> float:
    """Standard error of the chain mean, sd * sqrt(IAT / N)."""
    x = _as_chain(chain)
    return float(np.std(x, ddof=1) * np.sqrt(max(iat(x), 1.0) / x.size))


def ergodic_means(chain) -> np.ndarray:
    x = _as_chain(chain)
    return np.cumsum(x) / np.arange(1, x.size + 1)


def _stack_chains(chains: Sequence) -> np.ndarray:
    if len(chains) < 2:
        raise InvalidArgumentError(f"Gelman-Rubin needs at least 2 chains, got {len(chains)}")
    lengths = {len(c) for c in chains}
    if len(lengths) != 1:
        raise InvalidArgumentError(f"Chains must have equal length, got lengths {sorted(lengths)}")
    if lengths.pop() < 10:
        raise InvalidArgumentError("Gelman-Rubin needs chains of length >= 10")
    return np.vstack([_as_chain(c) for c in chains])


def gelman_rubin(chains: Sequence) -> float:
    """Potential scale reduction factor sqrt(V / W)."""
    X = _stack_chains(chains)
    m, n = X.shape
    W = float(np.mean(np.var(X, axis=1, ddof=1)))
    if W <= 0:
        raise UndefinedVarianceError("Within-chain variance is zero; PSRF is undefined")
    B = n * float(np.var(X.mean(axis=1), ddof=1))
    V = (n - 1) / n * W + (1.0 + 1.0 / m) * B / n
    return float(np.sqrt(V / W))


def gelman_rubin_trace(chains: Sequence, step: Optional[int] = None) -> pd.DataFrame:
    """PSRF over growing prefixes of the chains (the data behind a Gelman plot)."""
    X = _stack_chains(chains)
    n = X.shape[1]
    step = step or max(10, n // 50)
    ends = list(range(max(10, step), n + 1, step))
    if not ends or ends[-1] != n:
        ends.append(n)
    return pd.DataFrame({"draws": ends, "psrf": [gelman_rubin(X[:, :e]) for e in ends]})


@dataclass
class EfficiencyReport:
    sampler: str
    cpu_seconds: float
    ess: float
    iat: float
    ces: float
    n_retained: int
    parameter: str = ""

    def as_row(self) -> Dict:
        return asdict(self)


def efficiency_report(chain, cpu_seconds: float, sampler: str = "", parameter: str = "") -> EfficiencyReport:
    x = _as_chain(chain)
    tau = iat(x)
    return EfficiencyReport(
        sampler=sampler,
        cpu_seconds=float(cpu_seconds),
        ess=effective_size(x.size, tau),
        iat=tau,
        ces=ces(cpu_seconds, x.size, tau),
        n_retained=int(x.size),
        parameter=parameter,
    )


def write_report_csv(reports: Sequence[EfficiencyReport], path: str) -> str:
    """``sampler,cpu_seconds,ess,iat,ces``; a leading ``parameter`` column when several are reported."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame = pd.DataFrame([r.as_row() for r in reports])
    columns = list(REPORT_COLUMNS)
    if (frame["parameter"] != "").any():
        columns = ["parameter"] + columns
    frame[columns].to_csv(path, index=False, float_format="%.6g")
    return path


def acf_table(frame: pd.DataFrame, max_lag: int, parameters: Sequence[str] = CHAIN_PARAMETERS) -> pd.DataFrame:
    """ACF per parameter; parameters that are absent, all-missing or constant are skipped."""
    table = {"lag": np.arange(max_lag + 1)}
    for name in parameters:
        if name not in frame or frame[name].isna().all():
            continue
        values = frame[name].to_numpy(dtype=np.float64)
        try:
            table[name] = acf(values, min(max_lag, values.size - 1))
        except UndefinedVarianceError:
            logger.warning(f"Skipping ACF of constant parameter {name}")
            continue
    size = min(len(v) for v in table.values())
    return pd.DataFrame({k: v[:size] for k, v in table.items()})


# --- chain files ---

_LINE_RE = re.compile(r"line (\d+)")


def read_chain_csv(path: str) -> pd.DataFrame:
    """
    Read a chain CSV (``iter,beta0,sigma2,tau2,seconds``). sigma2 may be blank.

    Raises ChainFileError with the 1-based line number of the first malformed row.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise ChainFileError(path, 1, "file is empty")
    except pd.errors.ParserError as e:
        match = _LINE_RE.search(str(e))
        raise ChainFileError(path, int(match.group(1)) if match else None, "wrong number of fields")

    expected = ["iter", "beta0", "sigma2", "tau2", "seconds"]
    header = [c.strip() for c in frame.columns]
    if header != expected:
        raise ChainFileError(path, 1, f"expected header {','.join(expected)}, got {','.join(header)}")
    frame.columns = header

    out = {}
    for name in expected:
        raw = frame[name].str.strip()
        values = pd.to_numeric(raw, errors="coerce")
        bad = values.isna() & ((raw != "") | (name != "sigma2"))
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise ChainFileError(path, row + 2, f"bad value {frame[name].iloc[row]!r} in column {name}")
        out[name] = values.astype(np.float64)
    result = pd.DataFrame(out)
    if len(result) < 2:
        raise ChainFileError(path, None, "needs at least two draws")
    return result
