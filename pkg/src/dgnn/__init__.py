"""Decoupled graph neural network: attribute, topology and semantic embedding
streams tied together by a shared structural-consistency factor."""

from .graph import (
    Graph,
    SemanticGraph,
    build_graph,
    cosine_similarity,
    homophily_rate,
    laplacian,
    normalize,
    semantic_graph,
)
from .model import (
    DgnnHyperparams,
    EmbeddingState,
    ReconFactor,
    ablation_config,
    consistency_residual,
    forward,
    init_state,
    objective_value,
    update_F,
    update_H,
    update_Hf,
)
from .train import TrainConfig, make_split, run_trials, train

__version__ = "0.1.0"
