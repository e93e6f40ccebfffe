"""Exact minimum-weight perfect-matching decoding for surface codes.

The solver runs the blossom algorithm's dual phase directly on the sparse
decoding graph and supports divide-and-fuse parallel decoding over
measurement-round partitions.
"""

from .graphs import (
    CodeSpec,
    ErrorPattern,
    GraphError,
    ModelGraph,
    Syndrome,
    build_surface_code_graph,
    compute_weight,
    dist,
    graph_from_json,
    graph_to_json,
    sample_error,
    syndrome_from_json,
    syndrome_of,
    syndrome_to_json,
)
from .framework import (
    DecodeResult,
    PerfectMatching,
    matching_to_correction,
    verify_correction,
)
from .oracle import build_syndrome_graph, exact_mwpm, oracle_weight
from .solver import Solver, decode

__version__ = "0.1.0"

__all__ = [
    "CodeSpec",
    "DecodeResult",
    "ErrorPattern",
    "GraphError",
    "ModelGraph",
    "PerfectMatching",
    "Solver",
    "Syndrome",
    "build_surface_code_graph",
    "build_syndrome_graph",
    "compute_weight",
    "decode",
    "dist",
    "exact_mwpm",
    "graph_from_json",
    "graph_to_json",
    "matching_to_correction",
    "oracle_weight",
    "sample_error",
    "syndrome_from_json",
    "syndrome_of",
    "syndrome_to_json",
    "verify_correction",
    "__version__",
]
