"""Low-memory Frank-Wolfe with Gaussian sampling for Max-k-Cut and Max-Agree."""
from .graph import (
    CostOperator,
    GraphFormatError,
    SignedGraph,
    WeightedGraph,
    build_cost_maxagree,
    build_cost_maxkcut,
    jaccard_signed_graph,
    parse_gset,
    read_gset,
    serialize_gset,
)
from .penalty import ConstraintImage, PenaltyConfig
from .fw import SampleSet, SolverStats, fw_gaussian, lmo, lanczos_max_eigvec, make_rng

__version__ = "0.1.0"
