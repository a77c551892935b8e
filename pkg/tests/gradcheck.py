"""Central finite-difference oracle for gradient checks.

Independent of the autodiff path: it only mutates raw .data buffers and
re-runs the caller's forward closure.
"""

import numpy as np

FD_STEP = 1e-5


def numeric_grad(forward, tensor, coords=None, step=FD_STEP):
    """Central differences of forward() w.r.t. selected coords of tensor.data.

    forward: () -> float, re-reading tensor.data each call.
    coords: flat indices to probe (default: all).
    Returns {flat_index: derivative}.
    """
    flat = tensor.data.reshape(-1)
    if coords is None:
        coords = range(flat.size)
    grads = {}
    for i in coords:
        keep = flat[i]
        flat[i] = keep + step
        up = forward()
        flat[i] = keep - step
        down = forward()
        flat[i] = keep
        grads[i] = (up - down) / (2.0 * step)
    return grads


def relative_error(analytic, numeric):
    scale = max(1.0, abs(analytic), abs(numeric))
    return abs(analytic - numeric) / scale


def check_grads(forward, loss_fn, tensors, rng, coords_per_tensor=8, tol=1e-4):
    """Assert analytic grads match central differences on sampled coordinates.

    loss_fn: () -> loss Tensor (fresh graph); forward: () -> float value of it.
    Returns the worst relative error seen.
    """
    from tckd.tensor import backward

    loss = loss_fn()
    backward(loss)
    worst = 0.0
    for t in tensors:
        assert t.grad is not None, "tensor missing analytic gradient"
        n = t.data.size
        count = min(coords_per_tensor, n)
        coords = sorted(rng.choice(n, size=count, replace=False).tolist())
        numeric = numeric_grad(forward, t, coords)
        analytic_flat = t.grad.reshape(-1)
        for i, num in numeric.items():
            err = relative_error(float(analytic_flat[i]), num)
            worst = max(worst, err)
            assert err < tol, (
                f"gradient mismatch at flat index {i}: analytic {analytic_flat[i]!r}, "
                f"numeric {num!r}, rel err {err:.2e}")
    return worst
