"""
Gaussian image reconstruction: y = 1 beta0 + gamma + eps with an IAR prior on gamma.

Conditionals (flat prior on beta0, InvGam(alpha, alpha) on both variances):

    beta0  | .  ~ N(mean(y - gamma), sigma2 / n)
    sigma2 | .  ~ InvGam(alpha + n/2, alpha + |y - beta0 - gamma|^2 / 2)
    tau2   | .  ~ InvGam(alpha + rank/2, alpha + gamma' (D - W) gamma / 2)
    gamma  | .  ~ N(Qp^-1 b, Qp^-1),  Qp = I/sigma2 + (D - W)/tau2,  b = (y - beta0)/sigma2

Scan order is beta0, sigma2, tau2, gamma. After the field update gamma is centred to
sum zero within each connected component; since Qp 1 = 1/sigma2 this is exact
conditioning on the constraint and keeps beta0 identified.
"""
import logging
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy import sparse

from config.settings import DEFAULT_ALPHA
from core.errors import InvalidArgumentError
from core.gmrf import FieldUpdater, center_field, iar_structure, posterior_conditional, GmrfConditional
from core.graph import MarkovGraph, build_lattice
from core.rng import RngStream, draw_inverse_gamma, draw_normal
from utils.instrument import timed_operation
from .state import GibbsModel, ModelState, StepTimer

logger = logging.getLogger(__name__)


@dataclass
class GaussianImageModel(GibbsModel):
    y: np.ndarray
    graph: MarkovGraph
    alpha: float = DEFAULT_ALPHA
    center: bool = True
    shape: Optional[Tuple[int, int]] = None

    name = "gaussian_image"
    has_sigma2 = True

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64).ravel()
        if self.y.size != self.graph.n:
            raise InvalidArgumentError(f"Image has {self.y.size} pixels but the graph has {self.graph.n} nodes")
        if not self.alpha > 0:
            raise InvalidArgumentError(f"alpha must be positive, got {self.alpha}")
        if not np.all(np.isfinite(self.y)):
            raise InvalidArgumentError("Observations must be finite")
        if self.shape is None:
            self.shape = self.graph.shape_hint

    @classmethod
    def on_lattice(cls, image: np.ndarray, alpha: float = DEFAULT_ALPHA, neighborhood: str = "king8") -> "GaussianImageModel":
        image = np.atleast_2d(np.asarray(image, dtype=np.float64))
        rows, cols = image.shape
        return cls(y=image.ravel(), graph=build_lattice(rows, cols, neighborhood), alpha=alpha, shape=(rows, cols))

    @property
    def n(self) -> int:
        return self.graph.n

    @cached_property
    def structure(self) -> sparse.csr_matrix:
        return iar_structure(self.graph)

    @property
    def prior_structure(self) -> sparse.csr_matrix:
        return self.structure

    @cached_property
    def components(self) -> Tuple[int, np.ndarray]:
        return self.graph.connected_components()

    @property
    def rank(self) -> int:
        """rank(D - W) = n minus the number of connected components."""
        return self.n - self.components[0]

    # --- full conditionals ---

    def beta0_conditional(self, gamma: np.ndarray, sigma2: float) -> Tuple[float, float]:
        """(mean, variance) of beta0."""
        return float(np.mean(self.y - gamma)), sigma2 / self.n

    def sigma2_conditional(self, beta0: float, gamma: np.ndarray) -> Tuple[float, float]:
        """(shape, rate) of sigma2."""
        resid = self.y - beta0 - gamma
        return self.alpha + self.n / 2.0, self.alpha + float(resid @ resid) / 2.0

    def tau2_conditional(self, gamma: np.ndarray) -> Tuple[float, float]:
        """(shape, rate) of tau2."""
        quad = float(gamma @ (self.structure @ gamma))
        return self.alpha + self.rank / 2.0, self.alpha + max(quad, 0.0) / 2.0

    def field_conditional(self, beta0: float, sigma2: float, tau2: float) -> GmrfConditional:
        return posterior_conditional(self.structure, tau2, np.full(self.n, 1.0 / sigma2), (self.y - beta0) / sigma2)

    # --- scan ---

    def initial_state(self, updater: FieldUpdater, dispersion: float = 1.0) -> ModelState:
        spread = float(np.var(self.y)) or 1.0
        return ModelState(
            beta0=float(np.mean(self.y)),
            gamma=updater.new_state(np.zeros(self.n)),
            sigma2=dispersion * spread / 2.0,
            tau2=dispersion * spread / 2.0,
        )

    def step(self, state: ModelState, updater: FieldUpdater, s: RngStream, iteration: int,
             timer: Optional[StepTimer] = None) -> ModelState:
        return gibbs_step_gaussian(state, self, updater, s, iteration, timer)

    def field_summary(self, state: ModelState) -> np.ndarray:
        return state.beta0 + state.gamma.x


def gibbs_step_gaussian(state: ModelState, model: GaussianImageModel, updater: FieldUpdater, s: RngStream,
                        iteration: int, timer: Optional[StepTimer] = None) -> ModelState:
    """One scan beta0 -> sigma2 -> tau2 -> gamma, gamma by the updater's kernel."""
    timer = timer or StepTimer()
    gamma = state.gamma.x
    with timer.hyper():
        mean, var = model.beta0_conditional(gamma, state.sigma2)
        state.beta0 = float(draw_normal(s, mean, np.sqrt(var)))
        shape, rate = model.sigma2_conditional(state.beta0, gamma)
        state.sigma2 = float(draw_inverse_gamma(s, shape, rate))
        shape, rate = model.tau2_conditional(gamma)
        state.tau2 = float(draw_inverse_gamma(s, shape, rate))
        cond = model.field_conditional(state.beta0, state.sigma2, state.tau2)
    with timer.field():
        updater.update(state.gamma, cond, s, iteration)
        if model.center:
            state.gamma.x = center_field(state.gamma.x, model.components[1])
    return state


# --- data ---

def pixel_coordinates(p: int) -> Tuple[np.ndarray, np.ndarray]:
    """Row-major pixel centres evenly spaced over [-3, 3]^2."""
    grid = np.linspace(-3.0, 3.0, p)
    u, v = np.meshgrid(grid, grid, indexing="ij")
    return u.ravel(), v.ravel()


@timed_operation
def simulate_image(p: int, noise_sd: float, s: RngStream) -> Tuple[np.ndarray, np.ndarray]:
    """
    Rescaled bivariate Gaussian density on a p x p grid plus iid noise.

    Returns (truth, y) as row-major vectors of length p*p.
    """
    if p < 2:
        raise InvalidArgumentError(f"Image side length must be at least 2, got {p}")
    if noise_sd < 0 or not np.isfinite(noise_sd):
        raise InvalidArgumentError(f"noise_sd must be non-negative, got {noise_sd}")
    u, v = pixel_coordinates(p)
    truth = 5.0 * np.exp(-(u ** 2 + v ** 2) / 2.0) / np.pi
    if noise_sd == 0:
        return truth, truth.copy()
    return truth, truth + draw_normal(s, 0.0, noise_sd, size=truth.size)


def write_matrix_csv(values: np.ndarray, path: str, shape: Optional[Tuple[int, int]] = None) -> str:
    """Plain numeric matrix, no header."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    values = np.asarray(values)
    if shape is not None:
        values = values.reshape(shape)
    pd.DataFrame(np.atleast_2d(values)).to_csv(path, header=False, index=False, float_format="%.10g")
    return path


def read_matrix_csv(path: str) -> np.ndarray:
    try:
        frame = pd.read_csv(path, header=None)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InvalidArgumentError(f"{path}: cannot parse image matrix: {e}")
    values = frame.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    if np.isnan(values).any():
        row, _ = np.argwhere(np.isnan(values))[0]
        raise InvalidArgumentError(f"{path}:{row + 1}: missing or non-numeric value")
    return values
