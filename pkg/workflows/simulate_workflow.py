# workflows/simulate_workflow.py
import logging
import os
from typing import Any, Dict, List, Optional, Tuple

from config import settings
from core.graph import random_planar_graph, write_edge_list
from core.rng import RngStream
from models.binomial_logit import simulate_binomial, write_votes_csv
from models.gaussian_image import simulate_image, write_matrix_csv
from utils.instrument import timed_operation

logger = logging.getLogger(__name__)

# Data generation draws from its own substream so chains (streams 0..chains-1) never reuse it
DATA_STREAM_ID = 1 << 32


@timed_operation
def run_simulate_workflow(
    out: str,
    p: int = 50,
    noise_sd: float = 1.0,
    seed: int = settings.DEFAULT_SEED,
    model: str = "gaussian_image",
    sites: int = 100,
    beta0: float = 0.5,
    tau2: float = 1.0,
    rho: float = settings.DEFAULT_RHO,
    mean_trials: float = 200.0,
    missing_fraction: float = 0.0,
) -> Tuple[Dict[str, Any], List[str]]:
    """
    Generate synthetic data sets.

    gaussian_image writes ``truth.csv`` and ``observed.csv`` (p x p matrices);
    binomial_logit writes ``graph.txt`` (edge list), ``votes.csv`` and ``truth_gamma.csv``.

    Returns:
        Summary facts and the list of files written
    """
    stream = RngStream(seed, DATA_STREAM_ID)
    os.makedirs(out, exist_ok=True)

    if model == "gaussian_image":
        logger.info(f"Simulating a {p}x{p} image with noise sd {noise_sd}")
        truth, y = simulate_image(p, noise_sd, stream)
        paths = [
            write_matrix_csv(truth, os.path.join(out, "truth.csv"), (p, p)),
            write_matrix_csv(y, os.path.join(out, "observed.csv"), (p, p)),
        ]
        return {"model": model, "p": p, "noise_sd": noise_sd, "seed": seed}, paths

    logger.info(f"Simulating precinct data on a {sites}-node planar graph")
    graph = random_planar_graph(sites, seed)
    votes = simulate_binomial(graph, beta0, tau2, rho, mean_trials, stream, missing_fraction)
    paths = [
        write_edge_list(graph, os.path.join(out, "graph.txt")),
        write_votes_csv(votes, os.path.join(out, "votes.csv")),
        write_matrix_csv(votes.gamma, os.path.join(out, "truth_gamma.csv"), (graph.n, 1)),
    ]
    summary = {
        "model": model,
        "sites": graph.n,
        "edges": graph.n_edges,
        "observed": int(votes.observed.sum()),
        "beta0": beta0,
        "seed": seed,
    }
    return summary, paths
