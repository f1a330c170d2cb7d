from .lstm import (
    LstmConfig,
    LstmModel,
    LstmParams,
    batch_loss,
    batch_loss_and_grads,
    forward_logits,
    init_params,
    lstm_score,
    lstm_score_batch,
    train_lstm,
)
from .persist import load_model, save_model
from .svm import (
    Score,
    SvmConfig,
    SvmModel,
    fit_platt,
    logistic,
    primal_objective,
    svm_score,
    train_svm,
)

__all__ = [
    "LstmConfig",
    "LstmModel",
    "LstmParams",
    "Score",
    "SvmConfig",
    "SvmModel",
    "batch_loss",
    "batch_loss_and_grads",
    "fit_platt",
    "forward_logits",
    "init_params",
    "load_model",
    "logistic",
    "lstm_score",
    "lstm_score_batch",
    "primal_objective",
    "save_model",
    "svm_score",
    "train_svm",
]
