"""
Binomial logit model with a proper CAR field, sampled through Polya-Gamma augmentation.

    Y_i ~ Bin(m_i, logistic(beta0 + gamma_i)),  gamma ~ N(0, tau2 (D - rho W)^-1)
    beta0 ~ N(0, 1000),  tau2 ~ InvGam(1, 1)

With psi_i ~ PG(m_i, beta0 + gamma_i) and kappa_i = Y_i - m_i/2 the likelihood is
Gaussian in (beta0, gamma). Unobserved sites, and sites with m_i = 0, carry
psi_i = kappa_i = 0 and are updated from the prior alone.

The likelihood only sees beta0 + gamma, and for rho near 1 the prior barely
constrains the mean of gamma, so beta0 and gamma drift slowly along that ridge.
With ``shift_move`` each scan adds an exact Gibbs draw of a translation
(beta0 + c, gamma - c) along it.
"""
import logging
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.special import expit, logit

from config.settings import BETA0_PRIOR_VAR, DEFAULT_RHO, TAU2_PRIOR_RATE, TAU2_PRIOR_SHAPE
from core.errors import InvalidArgumentError
from core.gmrf import FieldUpdater, GmrfConditional, center_field, posterior_conditional, proper_car_structure, sample_prior
from core.graph import MarkovGraph
from core.polyagamma import draw_pg_vector
from core.rng import RngStream, draw_inverse_gamma, draw_normal
from utils.instrument import timed_operation
from .state import GibbsModel, ModelState, StepTimer

logger = logging.getLogger(__name__)


@dataclass
class BinomialLogitModel(GibbsModel):
    Y: np.ndarray
    m: np.ndarray
    graph: MarkovGraph
    observed: Optional[np.ndarray] = None
    rho: float = DEFAULT_RHO
    prior_var_beta: float = BETA0_PRIOR_VAR
    tau2_shape: float = TAU2_PRIOR_SHAPE
    tau2_rate: float = TAU2_PRIOR_RATE
    shift_move: bool = True

    name = "binomial_logit"
    has_sigma2 = False

    def __post_init__(self):
        n = self.graph.n
        self.Y = np.asarray(self.Y, dtype=np.float64).ravel()
        self.m = np.asarray(self.m, dtype=np.float64).ravel()
        observed = np.ones(n, dtype=bool) if self.observed is None else np.asarray(self.observed, dtype=bool).ravel()
        if self.Y.size != n or self.m.size != n or observed.size != n:
            raise InvalidArgumentError(
                f"Vote vectors have sizes Y={self.Y.size}, m={self.m.size}, observed={observed.size}; graph has {n} nodes")
        obs_y, obs_m = self.Y[observed], self.m[observed]
        if np.any(obs_m < 0) or np.any(obs_y < 0) or np.any(obs_m != np.floor(obs_m)) or np.any(obs_y != np.floor(obs_y)):
            raise InvalidArgumentError("Counts must be non-negative integers")
        if np.any(obs_y > obs_m):
            i = int(np.flatnonzero(observed)[np.flatnonzero(obs_y > obs_m)[0]])
            raise InvalidArgumentError(f"Site {i} has Y={self.Y[i]:g} successes out of m={self.m[i]:g} trials")
        # no trials carries no likelihood
        self.observed = observed & (self.m > 0)
        if not (self.prior_var_beta > 0 and self.tau2_shape > 0 and self.tau2_rate > 0):
            raise InvalidArgumentError("Prior variance and inverse-gamma parameters must be positive")
        isolated = (self.graph.degrees == 0) & ~self.observed
        if isolated.any():
            raise InvalidArgumentError(
                f"Site {int(np.flatnonzero(isolated)[0])} is isolated and unobserved; its field is not identified")
        if n_missing := int((~self.observed).sum()):
            logger.info(f"{n_missing} of {n} sites carry no data and are updated from the prior")

    @property
    def n(self) -> int:
        return self.graph.n

    @cached_property
    def trials(self) -> np.ndarray:
        return np.where(self.observed, self.m, 0.0)

    @cached_property
    def kappa(self) -> np.ndarray:
        return np.where(self.observed, self.Y - self.m / 2.0, 0.0)

    @cached_property
    def structure(self) -> sparse.csr_matrix:
        return proper_car_structure(self.graph, self.rho)

    @property
    def prior_structure(self) -> sparse.csr_matrix:
        return self.structure

    # --- full conditionals ---

    def beta0_conditional(self, gamma: np.ndarray, psi: np.ndarray) -> Tuple[float, float]:
        """(mean, variance) of beta0 given the augmentation variables."""
        prec = 1.0 / self.prior_var_beta + float(psi.sum())
        return float(np.sum(self.kappa - psi * gamma)) / prec, 1.0 / prec

    def tau2_conditional(self, gamma: np.ndarray) -> Tuple[float, float]:
        quad = float(gamma @ (self.structure @ gamma))
        return self.tau2_shape + self.n / 2.0, self.tau2_rate + max(quad, 0.0) / 2.0

    def field_conditional(self, beta0: float, tau2: float, psi: np.ndarray) -> GmrfConditional:
        return posterior_conditional(self.structure, tau2, psi, self.kappa - psi * beta0, allow_zero_noise=True)

    @cached_property
    def structure_row_sums(self) -> np.ndarray:
        """(D - rho W) 1 = (1 - rho) D."""
        return np.asarray(self.structure @ np.ones(self.n))

    def shift_conditional(self, beta0: float, gamma: np.ndarray, tau2: float) -> Tuple[float, float]:
        """(mean, variance) of c for the move beta0 + c, gamma - c; the likelihood is invariant."""
        q1 = self.structure_row_sums
        prec = 1.0 / self.prior_var_beta + float(q1.sum()) / tau2
        return (float(q1 @ gamma) / tau2 - beta0 / self.prior_var_beta) / prec, 1.0 / prec

    # --- scan ---

    def initial_state(self, updater: FieldUpdater, dispersion: float = 1.0) -> ModelState:
        obs = self.observed
        rate = (self.Y[obs].sum() + 0.5) / (self.m[obs].sum() + 1.0) if obs.any() else 0.5
        return ModelState(
            beta0=float(logit(rate)),
            gamma=updater.new_state(np.zeros(self.n)),
            tau2=float(dispersion),
            psi=np.zeros(self.n),
        )

    def step(self, state: ModelState, updater: FieldUpdater, s: RngStream, iteration: int,
             timer: Optional[StepTimer] = None) -> ModelState:
        return gibbs_step_binomial(state, self, updater, s, iteration, timer)

    def field_summary(self, state: ModelState) -> np.ndarray:
        return expit(state.beta0 + state.gamma.x)


def gibbs_step_binomial(state: ModelState, model: BinomialLogitModel, updater: FieldUpdater, s: RngStream,
                        iteration: int, timer: Optional[StepTimer] = None) -> ModelState:
    """One scan psi -> beta0 -> gamma -> (shift) -> tau2."""
    timer = timer or StepTimer()
    with timer.hyper():
        state.psi = draw_pg_vector(s, model.trials, state.beta0 + state.gamma.x)
        mean, var = model.beta0_conditional(state.gamma.x, state.psi)
        state.beta0 = float(draw_normal(s, mean, np.sqrt(var)))
        cond = model.field_conditional(state.beta0, state.tau2, state.psi)
    with timer.field():
        updater.update(state.gamma, cond, s, iteration)
    with timer.hyper():
        if model.shift_move:
            mean, var = model.shift_conditional(state.beta0, state.gamma.x, state.tau2)
            c = float(draw_normal(s, mean, np.sqrt(var)))
            state.beta0 += c
            state.gamma.x = state.gamma.x - c
        shape, rate = model.tau2_conditional(state.gamma.x)
        state.tau2 = float(draw_inverse_gamma(s, shape, rate))
    return state


# --- data ---

@dataclass
class SyntheticVotes:
    Y: np.ndarray
    m: np.ndarray
    observed: np.ndarray
    gamma: np.ndarray
    beta0: float

    def model(self, graph: MarkovGraph, rho: float = DEFAULT_RHO) -> BinomialLogitModel:
        return BinomialLogitModel(Y=self.Y, m=self.m, observed=self.observed, graph=graph, rho=rho)


@timed_operation
def simulate_binomial(graph: MarkovGraph, beta0: float, tau2: float, rho: float, mean_trials: float,
                      s: RngStream, missing_fraction: float = 0.0) -> SyntheticVotes:
    """
    Synthetic precinct counts: centred proper-CAR field, Poisson trial counts (at least 1),
    binomial successes and a random set of unobserved sites.
    """
    if not 0.0 <= missing_fraction < 1.0:
        raise InvalidArgumentError(f"missing_fraction must lie in [0, 1), got {missing_fraction}")
    if not mean_trials > 0:
        raise InvalidArgumentError(f"mean_trials must be positive, got {mean_trials}")
    gamma = center_field(sample_prior(proper_car_structure(graph, rho), tau2, s))
    gen = s.generator
    m = np.maximum(gen.poisson(mean_trials, graph.n), 1)
    Y = gen.binomial(m, expit(beta0 + gamma))
    observed = np.ones(graph.n, dtype=bool)
    n_missing = int(round(missing_fraction * graph.n))
    if n_missing:
        observed[gen.permutation(graph.n)[:n_missing]] = False
    return SyntheticVotes(Y=Y.astype(np.float64), m=m.astype(np.float64), observed=observed, gamma=gamma, beta0=beta0)


def write_votes_csv(votes: SyntheticVotes, path: str) -> str:
    """``node,Y,m`` with blank counts for unobserved sites."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame = pd.DataFrame({
        "node": np.arange(votes.Y.size),
        "Y": pd.Series(np.where(votes.observed, votes.Y, np.nan)).astype("Int64"),
        "m": pd.Series(np.where(votes.observed, votes.m, np.nan)).astype("Int64"),
    })
    frame.to_csv(path, index=False)
    return path


def read_votes_csv(path: str, n: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Read ``node,Y,m`` rows. Blank Y or m marks the site unobserved; nodes missing from
    the file (when ``n`` is given) are unobserved too. Returns (Y, m, observed).
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InvalidArgumentError(f"{path}: cannot parse votes file: {e}")
    missing_cols = {"node", "Y", "m"} - set(frame.columns)
    if missing_cols:
        raise InvalidArgumentError(f"{path}: missing columns {sorted(missing_cols)}")

    nodes, ys, ms = [], [], []
    for offset, row in enumerate(frame.itertuples(index=False)):
        lineno = offset + 2  # header is line 1
        try:
            node = int(row.node)
            y = float(row.Y) if row.Y.strip() else np.nan
            m = float(row.m) if row.m.strip() else np.nan
        except ValueError:
            raise InvalidArgumentError(f"{path}:{lineno}: non-numeric entry")
        nodes.append(node)
        ys.append(y)
        ms.append(m)

    nodes = np.asarray(nodes, dtype=np.int64)
    size = n if n is not None else (int(nodes.max()) + 1 if nodes.size else 0)
    if nodes.size and (nodes.min() < 0 or nodes.max() >= size):
        raise InvalidArgumentError(f"{path}: node index out of range for n={size}")
    Y = np.zeros(size)
    m = np.zeros(size)
    observed = np.zeros(size, dtype=bool)
    ys, ms = np.asarray(ys), np.asarray(ms)
    ok = ~np.isnan(ys) & ~np.isnan(ms)
    Y[nodes[ok]] = ys[ok]
    m[nodes[ok]] = ms[ok]
    observed[nodes[ok]] = True
    return Y, m, observed
