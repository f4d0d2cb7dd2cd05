from .baselines import PageRankError, ScoredUnit, build_similarity_graph, pagerank, score_lead, score_textrank
from .neural import (
    ScorerParams,
    TrainingDiverged,
    bce_loss,
    build_vocab,
    embed_and_pool,
    grad_check,
    init_params,
    load_params,
    predict_prob,
    save_params,
    score_neural,
    train,
    transformer_block,
)

__all__ = [
    "PageRankError", "ScoredUnit", "build_similarity_graph", "pagerank", "score_lead", "score_textrank",
    "ScorerParams", "TrainingDiverged", "bce_loss", "build_vocab", "embed_and_pool", "grad_check",
    "init_params", "load_params", "predict_prob", "save_params", "score_neural", "train", "transformer_block",
]
