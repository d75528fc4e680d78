"""Executable tree-embedding and arrowing machinery for bounded-degree trees in random graphs."""

from treeramsey.errors import (
    BudgetExceeded,
    BudgetExhausted,
    CapacityExhausted,
    CapExceeded,
    CleaningDiverged,
    DensityTooLow,
    GoodnessUnrecoverable,
    HypothesisBroken,
    InternalAssertion,
    InvalidBeta,
    InvalidDegreeBound,
    NoCandidate,
    NoEmbedding,
    PreconditionBroken,
    SamplingExhausted,
    SplitNotFound,
    TreeRamseyError,
)
from treeramsey.graph_core import ColouredGraph, GnpSpec, Graph, sample_gnp
from treeramsey.trees import SubtreeDecomposition, Tree

__all__ = [
    "BudgetExceeded",
    "BudgetExhausted",
    "CapacityExhausted",
    "CapExceeded",
    "CleaningDiverged",
    "ColouredGraph",
    "DensityTooLow",
    "GnpSpec",
    "GoodnessUnrecoverable",
    "Graph",
    "HypothesisBroken",
    "InternalAssertion",
    "InvalidBeta",
    "InvalidDegreeBound",
    "NoCandidate",
    "NoEmbedding",
    "PreconditionBroken",
    "SamplingExhausted",
    "SplitNotFound",
    "SubtreeDecomposition",
    "Tree",
    "TreeRamseyError",
    "sample_gnp",
]
