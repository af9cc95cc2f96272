"""From-scratch MLP / CNN / LSTM classifiers with analytic backpropagation."""

from .io import load_network, save_network
from .layers import conv1d_forward, dense_forward, dropout, lstm_forward
from .network import (
    KINDS,
    GradientError,
    NetworkSpec,
    Params,
    backward,
    batch_loss,
    bce_loss,
    forward,
    glorot_bounds,
    init_network,
    loss_and_grads,
    predict_proba,
)
from .optim import AdamState, adam_step
from .training import TrainConfig, TrainResult, train, train_arrays

__all__ = [
    "KINDS", "GradientError", "NetworkSpec", "Params", "AdamState", "TrainConfig", "TrainResult",
    "adam_step", "backward", "batch_loss", "bce_loss", "conv1d_forward", "dense_forward",
    "dropout", "forward", "glorot_bounds", "init_network", "load_network", "loss_and_grads",
    "lstm_forward", "predict_proba", "save_network", "train", "train_arrays",
]
