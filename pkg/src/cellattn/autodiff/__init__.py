from .tensor import (
    ACTIVATIONS,
    BatchNormState,
    ShapeError,
    Tensor,
    activation,
    add,
    add_n,
    batch_norm_1d,
    concat,
    constant,
    cross_entropy,
    dropout,
    elu,
    gather,
    gelu,
    identity,
    leaky_relu,
    masked_softmax,
    matmul,
    mul,
    relu,
    reshape,
    scale,
    scatter_add,
    sigmoid,
    sum_all,
    sum_rows,
    tanh,
)
from .optim import AdamW, AdamWState, adamw_step
from .gradcheck import GradCheckReport, grad_check
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
