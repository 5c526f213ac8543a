from vulnscan.numcore.gradcheck import grad_check, numeric_grad
from vulnscan.numcore.ops import (
    add,
    as_tensor,
    concat,
    cross_entropy,
    embedding,
    exp,
    index,
    layer_norm,
    log,
    log_softmax,
    lstm_scan,
    matmul,
    mean,
    mul,
    relu,
    reshape,
    scale,
    sigmoid,
    softmax,
    stack_rows,
    sub,
    sum,
    tanh,
    transpose,
)
from vulnscan.numcore.tensor import (
    NumericalError,
    ShapeError,
    Tensor,
    backward,
    check_finite,
    grad_enabled,
    no_grad,
)
