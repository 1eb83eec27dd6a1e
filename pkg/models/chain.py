"""Chain driver: runs Gibbs scans, times them and keeps the retained draws."""
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config.settings import DEFAULT_FIELD_THIN, DEFAULT_ORDERING, DEFAULT_SEED
from core.errors import InvalidArgumentError
from core.gmrf import FieldUpdater, SamplerKind
from core.graph import Coloring, greedy_color
from core.rng import RngStream
from utils.instrument import timed_operation
from .state import GibbsModel, StepTimer

logger = logging.getLogger(__name__)

CHAIN_COLUMNS = ["iter", "beta0", "sigma2", "tau2", "seconds"]


@dataclass
class ChainOutput:
    """
    Per-iteration draws and timings of one chain.

    Arrays hold every iteration; the retained draws are iterations burnin+1,
    burnin+1+thin, ... (1-based). Field snapshots are taken every ``field_thin``-th
    retained iteration.
    """

    model: str
    sampler: str
    seed: int
    stream_id: int
    iterations: int
    burnin: int
    thin: int
    field_thin: int
    beta0: np.ndarray
    sigma2: np.ndarray
    tau2: np.ndarray
    seconds: np.ndarray
    field_seconds: np.ndarray
    hyper_seconds: np.ndarray
    field_mean: np.ndarray
    gamma_mean: np.ndarray
    snapshots: List[Tuple[int, np.ndarray]] = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    coloring_k: Optional[int] = None
    shape: Optional[Tuple[int, int]] = None

    @property
    def retained_iterations(self) -> np.ndarray:
        return np.arange(self.burnin + 1, self.iterations + 1, self.thin)

    @property
    def n_retained(self) -> int:
        return int(self.retained_iterations.size)

    def retained(self, name: str) -> np.ndarray:
        return getattr(self, name)[self.retained_iterations - 1]

    @property
    def total_seconds(self) -> float:
        return float(self.seconds.sum())

    def to_frame(self) -> pd.DataFrame:
        """Retained rows in the chain CSV layout (sigma2 is NaN for models without it)."""
        return pd.DataFrame({
            "iter": self.retained_iterations,
            "beta0": self.retained("beta0"),
            "sigma2": self.retained("sigma2"),
            "tau2": self.retained("tau2"),
            "seconds": self.retained("seconds"),
        }, columns=CHAIN_COLUMNS)

    def write_chain_csv(self, path: str) -> str:
        _ensure_parent(path)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path

    def write_field_mean_csv(self, path: str) -> str:
        """p x p matrix for lattice images, ``node,mean`` rows otherwise."""
        _ensure_parent(path)
        if self.shape is not None:
            pd.DataFrame(self.field_mean.reshape(self.shape)).to_csv(path, header=False, index=False, float_format="%.10g")
        else:
            pd.DataFrame({"node": np.arange(self.field_mean.size), "mean": self.field_mean}).to_csv(
                path, index=False, float_format="%.10g")
        return path

    def write_snapshots_csv(self, path: str) -> str:
        """One row per snapshot: iteration followed by the field values."""
        _ensure_parent(path)
        if self.snapshots:
            iters = [it for it, _ in self.snapshots]
            frame = pd.DataFrame(np.vstack([g for _, g in self.snapshots]))
            frame.insert(0, "iter", iters)
        else:
            frame = pd.DataFrame({"iter": []})
        frame.to_csv(path, index=False, float_format="%.10g")
        return path


def _ensure_parent(path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)


def _check_schedule(iterations: int, burnin: int, thin: int, field_thin: int) -> None:
    if iterations < 1:
        raise InvalidArgumentError(f"iterations must be positive, got {iterations}")
    if not 0 <= burnin < iterations:
        raise InvalidArgumentError(f"burnin must satisfy 0 <= burnin < iterations, got {burnin} with {iterations} iterations")
    if thin < 1 or field_thin < 1:
        raise InvalidArgumentError(f"thin and field_thin must be >= 1, got {thin} and {field_thin}")


@timed_operation
def run_chain(model: GibbsModel, kind, iterations: int, burnin: int, thin: int = 1, seed: int = DEFAULT_SEED, *,
              coloring: Optional[Coloring] = None, workers: int = 1, ordering: str = DEFAULT_ORDERING,
              field_thin: int = DEFAULT_FIELD_THIN, stream_id: int = 0, dispersion: float = 1.0,
              log_every: int = 1000, progress: Optional[Callable[[int], None]] = None) -> ChainOutput:
    """
    Run one chain of ``iterations`` Gibbs scans with the chosen field kernel.

    Chromatic kernels colour ``model.graph`` greedily in natural order unless a
    colouring is given.
    """
    _check_schedule(iterations, burnin, thin, field_thin)
    try:
        kind = SamplerKind(kind)
    except ValueError:
        raise InvalidArgumentError(f"Unknown sampler {kind!r}")
    if kind.is_chromatic and coloring is None:
        coloring = greedy_color(model.graph)

    n = model.n
    beta0 = np.empty(iterations)
    sigma2 = np.full(iterations, np.nan)
    tau2 = np.empty(iterations)
    seconds = np.empty(iterations)
    field_seconds = np.empty(iterations)
    hyper_seconds = np.empty(iterations)
    field_mean = np.zeros(n)
    gamma_mean = np.zeros(n)
    snapshots = []

    stream = RngStream(seed, stream_id)
    timer = StepTimer()
    retained = 0
    with FieldUpdater(kind, model.prior_structure, coloring=coloring, workers=workers, ordering=ordering) as updater:
        state = model.initial_state(updater, dispersion)
        for t in range(1, iterations + 1):
            start = time.perf_counter()
            model.step(state, updater, stream, t, timer)
            seconds[t - 1] = time.perf_counter() - start
            field_seconds[t - 1], hyper_seconds[t - 1] = timer.lap()

            beta0[t - 1] = state.beta0
            tau2[t - 1] = state.tau2
            if state.sigma2 is not None:
                sigma2[t - 1] = state.sigma2

            if t > burnin and (t - burnin - 1) % thin == 0:
                retained += 1
                field_mean += (model.field_summary(state) - field_mean) / retained
                gamma_mean += (state.gamma.x - gamma_mean) / retained
                if (retained - 1) % field_thin == 0:
                    snapshots.append((t, state.gamma.x.copy()))

            if log_every and t % log_every == 0:
                logger.debug(f"[{kind.value}/{stream_id}] iteration {t}/{iterations}: beta0={state.beta0:.4f} tau2={state.tau2:.4g}")
            if progress is not None:
                progress(t)
        counters = dict(updater.counters.as_dict())

    counters["iterations"] = iterations
    output = ChainOutput(
        model=model.name,
        sampler=kind.value,
        seed=int(seed),
        stream_id=int(stream_id),
        iterations=iterations,
        burnin=burnin,
        thin=thin,
        field_thin=field_thin,
        beta0=beta0,
        sigma2=sigma2,
        tau2=tau2,
        seconds=seconds,
        field_seconds=field_seconds,
        hyper_seconds=hyper_seconds,
        field_mean=field_mean,
        gamma_mean=gamma_mean,
        snapshots=snapshots,
        counters=counters,
        coloring_k=coloring.k if coloring is not None else None,
        shape=getattr(model, "shape", None),
    )
    logger.info(
        f"Chain {model.name}/{kind.value} (stream {stream_id}): {iterations} iterations in {output.total_seconds:.2f}s "
        f"(field {field_seconds.sum():.2f}s), retained {output.n_retained}, "
        f"k={output.coloring_k}, factorizations={counters['numeric_factorizations']}")
    return output


def dispersed_starts(chains: int) -> np.ndarray:
    """Variance multipliers spread over two decades, one per chain."""
    if chains == 1:
        return np.ones(1)
    return 10.0 ** np.linspace(-1.0, 1.0, chains)


def run_chains(model: GibbsModel, kind, chains: int, iterations: int, burnin: int, thin: int = 1,
               seed: int = DEFAULT_SEED, **kwargs) -> List[ChainOutput]:
    """Independent chains from dispersed starting values on distinct streams."""
    if chains < 1:
        raise InvalidArgumentError(f"chains must be >= 1, got {chains}")
    try:
        kind = SamplerKind(kind)
    except ValueError:
        raise InvalidArgumentError(f"Unknown sampler {kind!r}")
    # one colouring shared by every chain
    if kind.is_chromatic and kwargs.get("coloring") is None:
        kwargs["coloring"] = greedy_color(model.graph)
    return [
        run_chain(model, kind, iterations, burnin, thin, seed, stream_id=c, dispersion=float(d), **kwargs)
        for c, d in enumerate(dispersed_starts(chains))
    ]
