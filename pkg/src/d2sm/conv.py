"""3x3 zero-padded convolutions and pooling on NHWC float64 arrays.

Shared by the feature extractor and the denoiser. Kernels are laid out as
(3, 3, c_in, c_out).
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _im2col(x):
    # x: (B, H, W, C) -> (B*H*W, 9*C), ordered (ky, kx, c) to match kernel layout
    b, h, w, c = x.shape
    xp = np.zeros((b, h + 2, w + 2, c))
    xp[:, 1:-1, 1:-1, :] = x
    win = sliding_window_view(xp, (3, 3), axis=(1, 2))  # (B, H, W, C, 3, 3)
    return win.transpose(0, 1, 2, 4, 5, 3).reshape(b * h * w, 9 * c)


def conv3x3(x, kernel, bias=None):
    """Return (y, cols); cols is the im2col matrix needed by the backward pass."""
    b, h, w, _ = x.shape
    cols = _im2col(x)
    y = cols @ kernel.reshape(-1, kernel.shape[-1])
    if bias is not None:
        y = y + bias
    return y.reshape(b, h, w, kernel.shape[-1]), cols


def conv3x3_backward(dy, cols, kernel, need_input_grad=True):
    """Gradients of conv3x3 w.r.t. kernel, bias and (optionally) input."""
    b, h, w, c_out = dy.shape
    dy2 = dy.reshape(-1, c_out)
    dk = (cols.T @ dy2).reshape(kernel.shape)
    db = dy2.sum(axis=0)
    if not need_input_grad:
        return dk, db, None
    # same-padded stride-1 conv: the input gradient is a conv with the flipped kernel
    flipped = np.ascontiguousarray(kernel[::-1, ::-1].transpose(0, 1, 3, 2))
    dx, _ = conv3x3(dy, flipped)
    return dk, db, dx


def avg_pool2(x):
    """2x2 average pooling, stride 2; odd trailing rows/cols are dropped."""
    b, h, w, c = x.shape
    h2, w2 = h // 2, w // 2
    x = x[:, :2 * h2, :2 * w2, :]
    return x.reshape(b, h2, 2, w2, 2, c).mean(axis=(2, 4))


def avg_pool2_backward(dy, in_shape):
    b, h, w, c = in_shape
    h2, w2 = dy.shape[1], dy.shape[2]
    dx = np.zeros(in_shape)
    up = np.repeat(np.repeat(dy, 2, axis=1), 2, axis=2) / 4.0
    dx[:, :2 * h2, :2 * w2, :] = up
    return dx
