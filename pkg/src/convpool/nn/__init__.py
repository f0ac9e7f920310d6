from convpool.nn.net import (
    ApproximatorSpec,
    init_params,
    forward,
    forward_backward,
    num_params,
    param_layout,
)
from convpool.nn.optim import AdamState, adam_step, global_norm_clip
from convpool.nn.dist import (
    CategoricalHead,
    log_softmax,
    softmax,
    entropy,
    kl_divergence,
    sample_categorical,
    sample_logits,
)

__all__ = [
    "ApproximatorSpec",
    "init_params",
    "forward",
    "forward_backward",
    "num_params",
    "param_layout",
    "AdamState",
    "adam_step",
    "global_norm_clip",
    "CategoricalHead",
    "log_softmax",
    "softmax",
    "entropy",
    "kl_divergence",
    "sample_categorical",
    "sample_logits",
]
