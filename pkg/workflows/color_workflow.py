# workflows/color_workflow.py
import logging
import os
from typing import Any, Dict, List, Optional, Tuple

from core.errors import InvalidArgumentError
from core.graph import build_lattice, color_order, greedy_color, read_edge_list, validate_coloring, write_coloring_csv
from utils.instrument import timed_operation

logger = logging.getLogger(__name__)


def parse_lattice(value: str) -> Tuple[int, int]:
    """``ROWSxCOLS`` (or a single side length) -> (rows, cols)."""
    text = value.lower().strip()
    try:
        if "x" in text:
            rows, cols = (int(v) for v in text.split("x", 1))
        else:
            rows = cols = int(text)
    except ValueError:
        raise InvalidArgumentError(f"Bad lattice size {value!r}; expected ROWSxCOLS")
    return rows, cols


@timed_operation
def run_color_workflow(
    out: str,
    graph_file: Optional[str] = None,
    lattice: Optional[str] = None,
    neighborhood: str = "king8",
    order: str = "natural",
) -> Tuple[Dict[str, Any], List[str]]:
    """
    Greedy-colour a graph file or a lattice and write ``coloring.csv``.

    Returns:
        Summary (k, max degree, class sizes) and the list of files written
    """
    if (graph_file is None) == (lattice is None):
        raise InvalidArgumentError("Give exactly one of a graph file or a lattice size")
    if graph_file is not None:
        graph = read_edge_list(graph_file)
        source = graph_file
    else:
        rows, cols = parse_lattice(lattice)
        graph = build_lattice(rows, cols, neighborhood)
        source = f"{rows}x{cols} {neighborhood} lattice"

    coloring = greedy_color(graph, color_order(graph, order))
    if not validate_coloring(graph, coloring):
        raise InvalidArgumentError("Greedy colouring failed validation")
    logger.info(f"Coloured {source} with k={coloring.k} (max degree {graph.max_degree}, order {order})")

    path = write_coloring_csv(coloring, os.path.join(out, "coloring.csv"))
    summary = {
        "source": source,
        "nodes": graph.n,
        "edges": graph.n_edges,
        "max_degree": graph.max_degree,
        "k": coloring.k,
        "class_sizes": coloring.class_sizes,
        "order": order,
    }
    return summary, [path]
