from wattsplit.nn.layers import (
    LSTM,
    Conv1D,
    Dense,
    Flatten,
    MaxPool1D,
    Network,
    ReLU,
    ShapeError,
    Softmax,
)
from wattsplit.nn.losses import LOSS_FUNCTIONS, cross_entropy, mse, softmax
from wattsplit.nn.optim import Adam
from wattsplit.nn.gradcheck import gradient_check

__all__ = [
    "Adam",
    "Conv1D",
    "Dense",
    "Flatten",
    "LOSS_FUNCTIONS",
    "LSTM",
    "MaxPool1D",
    "Network",
    "ReLU",
    "ShapeError",
    "Softmax",
    "cross_entropy",
    "gradient_check",
    "mse",
    "softmax",
]
