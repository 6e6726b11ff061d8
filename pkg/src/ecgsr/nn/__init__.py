from .ops import (
    activation,
    conv1d,
    conv1d_out_len,
    conv_transpose1d,
    conv_transpose1d_out_len,
    crop,
    dropout,
    mse,
    relu,
    tanh,
)
from .optim import AdamState, adam_step
from .tensor import Tensor, add, backward, scale

__all__ = [
    "Tensor", "backward", "add", "scale",
    "conv1d", "conv_transpose1d", "conv1d_out_len", "conv_transpose1d_out_len",
    "relu", "tanh", "activation", "dropout", "crop", "mse",
    "AdamState", "adam_step",
]
