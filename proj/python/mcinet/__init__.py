"""Python interface to the mcinet C++ core.

Exposes the tensor kernels (gemm, im2col, conv2d), the architecture
builders, and the training/evaluation pipeline.
"""

from ._core import (  # noqa: F401
    ModelGraph,
    argmax,
    build,
    census,
    conv2d,
    conv_out_extent,
    decode_image,
    forward,
    freeze_through,
    gemm,
    im2col,
    infer_shapes,
    last_conv_id,
    load_weights,
    relu,
    replace_head,
    run_gradient_suite,
    save_weights,
    softmax,
    synth_dataset,
    train_and_evaluate,
)

__all__ = [
    "ModelGraph",
    "argmax",
    "build",
    "census",
    "conv2d",
    "conv_out_extent",
    "decode_image",
    "forward",
    "freeze_through",
    "gemm",
    "im2col",
    "infer_shapes",
    "last_conv_id",
    "load_weights",
    "relu",
    "replace_head",
    "run_gradient_suite",
    "save_weights",
    "softmax",
    "synth_dataset",
    "train_and_evaluate",
]
