from grag.gnn.losses import ce_loss, mean_pairwise_loss, pairwise_ranking_loss, ranking_pairs
from grag.gnn.model import (
    DimMismatch,
    GcnModel,
    GraphInputs,
    LayerState,
    StaleCache,
    backward,
    forward,
    message,
    predict,
    prepare_inputs,
    score,
)
from grag.gnn.train import Example, TrainConfig, TrainResult, learning_rate, train

STRATEGIES = {
    # name: (message passing, feature mode, loss)
    "mlp": (False, "baseline", "cross_entropy"),
    "gcn": (True, "baseline", "cross_entropy"),
    "g-rag": (True, "amr_augmented", "cross_entropy"),
    "g-rag-rl": (True, "amr_augmented", "pairwise_ranking"),
}
