"""Analytic-vs-central-difference gradient verification."""
import numpy as np

from ..errors import NumericError
from .rng import DeterministicRng
from .tensor import Tensor


def grad_check(fn, inputs, h=1e-4, max_coords=None, seed=0, floor_frac=1e-3):
    """Worst relative error between backprop and central differences.

    ``fn`` maps the list of input Tensors to a scalar Tensor. Each sampled
    coordinate is perturbed by ``h * (|x| + 1)``. The error of one coordinate
    is ``|a - n| / max(|a|, |n|, floor)``, with ``floor`` set to ``floor_frac``
    times the largest analytic gradient magnitude seen, so exact zeros are
    judged against the overall gradient scale. At most ``max_coords``
    coordinates per input are checked, sampled without replacement.
    """
    inputs = [x if isinstance(x, Tensor) else Tensor(x) for x in inputs]
    for x in inputs:
        if x.dtype != np.float64:
            raise TypeError("grad_check runs in double precision")
        x.requires_grad = True
        x.grad = None
    out = fn(inputs)
    if out.size != 1:
        raise ValueError("grad_check needs a scalar-valued function")
    out.backward()
    analytic = [np.zeros_like(x.data) if x.grad is None else x.grad for x in inputs]

    rng = DeterministicRng(seed, 0, "gradcheck")
    pairs = []
    for x, a in zip(inputs, analytic):
        flat = x.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(np.argsort(rng.uniform(flat.size), kind="stable")[:max_coords])
        for i in coords:
            orig = flat[i]
            step = h * (abs(orig) + 1.0)
            flat[i] = orig + step
            fp = float(fn(inputs).data)
            flat[i] = orig - step
            fm = float(fn(inputs).data)
            flat[i] = orig
            num = (fp - fm) / (2.0 * step)
            if not np.isfinite(num):
                raise NumericError("non-finite finite-difference estimate")
            pairs.append((float(a.reshape(-1)[i]), num))
    if not pairs:
        return 0.0
    an = np.array(pairs)
    floor = max(floor_frac * np.abs(an[:, 0]).max(), 1e-12)
    denom = np.maximum(np.maximum(np.abs(an[:, 0]), np.abs(an[:, 1])), floor)
    return float((np.abs(an[:, 0] - an[:, 1]) / denom).max())
