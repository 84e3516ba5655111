from .plackett_luce import (
    listwise_loss,
    listwise_loss_grad,
    mse_loss,
    mse_loss_grad,
    pl_permutation_prob,
    pl_prob_in_topk,
    pl_top1,
)
from .scorer import (
    ScorerParams,
    backward,
    forward,
    init_params,
    load_params,
    make_architecture,
    save_params,
)
from .training import (
    TrainConfig,
    TrainingDiverged,
    TrainingSample,
    feature_matrix,
    instance_features,
    make_sample,
    model_scores,
    train_pas,
    train_regression,
    validation_swr,
)

scorer_forward = forward
