from .state import ModelState, StepTimer, GibbsModel
from .gaussian_image import GaussianImageModel, gibbs_step_gaussian, simulate_image
from .binomial_logit import BinomialLogitModel, gibbs_step_binomial, simulate_binomial, read_votes_csv
from .chain import ChainOutput, run_chain, run_chains

__all__ = [
    'ModelState',
    'StepTimer',
    'GibbsModel',
    'GaussianImageModel',
    'gibbs_step_gaussian',
    'simulate_image',
    'BinomialLogitModel',
    'gibbs_step_binomial',
    'simulate_binomial',
    'read_votes_csv',
    'ChainOutput',
    'run_chain',
    'run_chains',
]
