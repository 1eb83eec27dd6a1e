import time
from abc import ABC, abstractmethod
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np
from scipy import sparse

from core.gmrf import FieldState, FieldUpdater
from core.rng import RngStream


@dataclass
class ModelState:
    """Current values of every unknown in a Gibbs scan."""

    beta0: float
    gamma: FieldState
    tau2: float
    sigma2: Optional[float] = None       # Gaussian image model only
    psi: Optional[np.ndarray] = None     # binomial model only (0 at unobserved sites)


class StepTimer:
    """Splits wall-clock time of one Gibbs iteration into field and hyperparameter parts."""

    def __init__(self):
        self.field_seconds = 0.0
        self.hyper_seconds = 0.0

    @contextmanager
    def field(self) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.field_seconds += time.perf_counter() - start

    @contextmanager
    def hyper(self) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.hyper_seconds += time.perf_counter() - start

    def lap(self) -> Tuple[float, float]:
        """Return (field, hyper) seconds accumulated since the last lap and reset."""
        out = (self.field_seconds, self.hyper_seconds)
        self.field_seconds = 0.0
        self.hyper_seconds = 0.0
        return out


class GibbsModel(ABC):
    """Interface the chain driver needs from a model."""

    name: str = ""
    has_sigma2: bool = False

    @property
    @abstractmethod
    def n(self) -> int:
        ...

    @property
    @abstractmethod
    def prior_structure(self) -> sparse.csr_matrix:
        """Sparsity pattern shared by every field conditional of this model."""

    @abstractmethod
    def initial_state(self, updater: FieldUpdater, dispersion: float = 1.0) -> ModelState:
        ...

    @abstractmethod
    def step(self, state: ModelState, updater: FieldUpdater, s: RngStream, iteration: int,
             timer: Optional[StepTimer] = None) -> ModelState:
        ...

    @abstractmethod
    def field_summary(self, state: ModelState) -> np.ndarray:
        """Per-site quantity whose posterior mean is reported (embedded field or probability)."""
