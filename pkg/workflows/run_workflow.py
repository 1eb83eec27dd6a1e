# workflows/run_workflow.py
import dataclasses
import logging
import os
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import psutil

from config.experiment import ExperimentConfig
from core.errors import InvalidArgumentError, UndefinedVarianceError
from core.gmrf import SamplerKind
from core.graph import color_order, greedy_color, random_planar_graph, read_edge_list
from core.rng import RngStream
from diagnostics.efficiency import efficiency_report, gelman_rubin, write_report_csv
from models.binomial_logit import BinomialLogitModel, read_votes_csv, simulate_binomial
from models.chain import ChainOutput, run_chains
from models.gaussian_image import GaussianImageModel, read_matrix_csv, simulate_image
from models.state import GibbsModel
import utils.cli as console
from utils.instrument import timed_operation
from workflows.simulate_workflow import DATA_STREAM_ID

logger = logging.getLogger(__name__)

# progress bar refreshes per chain
_PROGRESS_TICKS = 200


def build_model(config: ExperimentConfig) -> Tuple[GibbsModel, Dict[str, Any]]:
    """
    Model for a run plus whatever ground truth is known (simulated data only).

    Data files win over simulation: ``observed`` (and optionally ``graph``) for the
    image model, ``graph``/``votes`` for the binomial model.
    """
    stream = RngStream(config.seed, DATA_STREAM_ID)
    truth: Dict[str, Any] = {}

    if config.model == "gaussian_image":
        if config.observed is not None:
            image = read_matrix_csv(config.observed)
            if config.graph is not None:
                model = GaussianImageModel(y=image.ravel(), graph=read_edge_list(config.graph), alpha=config.alpha)
            else:
                model = GaussianImageModel.on_lattice(image, config.alpha, config.neighborhood)
            logger.info(f"Loaded {image.shape[0]}x{image.shape[1]} observations from {config.observed}")
        elif config.graph is not None:
            raise InvalidArgumentError("The gaussian_image model on a graph file needs --observed data")
        else:
            x, y = simulate_image(config.p, config.noise_sd, stream)
            model = GaussianImageModel.on_lattice(y.reshape(config.p, config.p), config.alpha, config.neighborhood)
            truth["field"] = x
        return model, truth

    graph = read_edge_list(config.graph) if config.graph is not None else random_planar_graph(config.sites, config.seed)
    if config.votes is not None:
        Y, m, observed = read_votes_csv(config.votes, graph.n)
        model = BinomialLogitModel(Y=Y, m=m, graph=graph, observed=observed, rho=config.rho)
    else:
        votes = simulate_binomial(graph, config.true_beta0, config.true_tau2, config.rho,
                                  config.mean_trials, stream, config.missing_fraction)
        model = votes.model(graph, config.rho)
        truth["beta0"] = votes.beta0
        truth["gamma"] = votes.gamma
    return model, truth


def _parameters(model: GibbsModel) -> List[str]:
    return ["beta0", "sigma2", "tau2"] if model.has_sigma2 else ["beta0", "tau2"]


def _efficiency_rows(outputs: List[ChainOutput], parameters: List[str]):
    reports = []
    for c, output in enumerate(outputs):
        for name in parameters:
            label = name if len(outputs) == 1 else f"{name}.{c}"
            try:
                reports.append(efficiency_report(output.retained(name), output.total_seconds,
                                                 sampler=output.sampler, parameter=label))
            except (InvalidArgumentError, UndefinedVarianceError) as e:
                logger.warning(f"No efficiency figures for {label}: {e}")
    return reports


def _psrf_frame(outputs: List[ChainOutput], parameters: List[str]) -> pd.DataFrame:
    rows = []
    for name in parameters:
        try:
            rows.append({"parameter": name, "psrf": gelman_rubin([o.retained(name) for o in outputs])})
        except (InvalidArgumentError, UndefinedVarianceError) as e:
            logger.warning(f"No PSRF for {name}: {e}")
    return pd.DataFrame(rows, columns=["parameter", "psrf"])


def _progress_callback(kind: str, chains: int, iterations: int):
    cli = console.cli
    task = f"run-{kind}"
    tick = max(1, iterations // _PROGRESS_TICKS)
    cli.start_progress(task, f"{kind}: {chains} chain(s) x {iterations} iterations", total=chains * iterations)
    done = {"chain": 0}

    def callback(t: int) -> None:
        if t % tick == 0 or t == iterations:
            cli.update_progress(task, completed=done["chain"] * iterations + t)
        if t == iterations:
            done["chain"] += 1

    return task, callback


@timed_operation
def run_sampler_workflow(config: ExperimentConfig, show_progress: bool = True) -> Tuple[Dict[str, Any], List[str]]:
    """
    Run ``config.chains`` chains of one sampler on one model and write the results
    into ``config.run_dir``.

    Files: ``chain.csv`` (``chain_<c>.csv`` with several chains), ``field_mean.csv``,
    ``field_snapshots.csv``, ``report.csv``, ``metadata.txt`` and, for two or more
    chains, ``psrf.csv``.

    Returns:
        Summary facts (also written to the metadata) and the list of files written
    """
    logger.info(f"Starting run: model={config.model} sampler={config.sampler} seed={config.seed}")
    run_dir = config.run_dir
    os.makedirs(run_dir, exist_ok=True)

    # Step 1: data
    model, truth = build_model(config)
    logger.info(f"Model {model.name} on {model.n} sites ({model.graph.n_edges} edges)")

    # Step 2: colouring
    kind = SamplerKind(config.sampler)
    coloring = None
    if kind.is_chromatic:
        coloring = greedy_color(model.graph, color_order(model.graph, config.color_order))
        logger.info(f"Greedy colouring ({config.color_order}) uses k={coloring.k} colours")

    # Step 3: chains
    task, callback = (None, None)
    if show_progress:
        task, callback = _progress_callback(kind.value, config.chains, config.iterations)
    try:
        outputs = run_chains(
            model, kind, config.chains, config.iterations, config.burnin, config.thin, config.seed,
            coloring=coloring, workers=config.workers, ordering=config.ordering,
            field_thin=config.field_thin, progress=callback,
        )
    except Exception:
        if task:
            console.cli.stop_progress(task, success=False)
        raise
    if task:
        console.cli.stop_progress(task)

    # Step 4: outputs
    paths: List[str] = []
    for c, output in enumerate(outputs):
        name = "chain.csv" if len(outputs) == 1 else f"chain_{c}.csv"
        paths.append(output.write_chain_csv(os.path.join(run_dir, name)))

    pooled = dataclasses.replace(outputs[0], field_mean=np.mean([o.field_mean for o in outputs], axis=0))
    paths.append(pooled.write_field_mean_csv(os.path.join(run_dir, "field_mean.csv")))
    paths.append(outputs[0].write_snapshots_csv(os.path.join(run_dir, "field_snapshots.csv")))

    parameters = _parameters(model)
    reports = _efficiency_rows(outputs, parameters)
    if reports:
        paths.append(write_report_csv(reports, os.path.join(run_dir, "report.csv")))

    psrf = None
    if len(outputs) >= 2:
        psrf = _psrf_frame(outputs, parameters)
        psrf_path = os.path.join(run_dir, "psrf.csv")
        psrf.to_csv(psrf_path, index=False, float_format="%.6g")
        paths.append(psrf_path)

    # Step 5: metadata
    summary: Dict[str, Any] = {
        "n": model.n,
        "k": coloring.k if coloring is not None else "",
        "total_seconds": round(sum(o.total_seconds for o in outputs), 4),
        "field_seconds": round(float(sum(o.field_seconds.sum() for o in outputs)), 4),
        "hyper_seconds": round(float(sum(o.hyper_seconds.sum() for o in outputs)), 4),
        "n_retained": outputs[0].n_retained,
        "beta0_mean": float(np.mean([o.retained("beta0").mean() for o in outputs])),
        "tau2_mean": float(np.mean([o.retained("tau2").mean() for o in outputs])),
    }
    if model.has_sigma2:
        summary["sigma2_mean"] = float(np.mean([o.retained("sigma2").mean() for o in outputs]))
    for key in outputs[0].counters:
        summary[key] = sum(o.counters[key] for o in outputs)
    if "field" in truth:
        summary["mse_posterior_mean"] = float(np.mean((pooled.field_mean - truth["field"]) ** 2))
        summary["mse_observed"] = float(np.mean((model.y - truth["field"]) ** 2))
    if "beta0" in truth:
        summary["true_beta0"] = truth["beta0"]
        summary["beta0_abs_error"] = abs(summary["beta0_mean"] - truth["beta0"])
    if psrf is not None:
        for row in psrf.itertuples(index=False):
            summary[f"psrf_{row.parameter}"] = float(row.psrf)
    summary["rss_mb"] = round(psutil.Process().memory_info().rss / 2 ** 20, 1)

    paths.append(config.write_metadata(os.path.join(run_dir, "metadata.txt"), summary))
    logger.info(f"Run finished: {summary['total_seconds']:.2f}s total, outputs in {run_dir}")
    summary["reports"] = reports
    return summary, paths
