"""Task registry: BBOB-style functions plus a synthetic MLP-fitting task.

The MLP task stands in for large neuroevolution problems at desk scale: the
search space (33 weights by default) exceeds the meta-training dimensions
while a fitness evaluation stays in the microsecond range.
"""

from dataclasses import dataclass

import numpy as np

from . import bbob

__all__ = ["MlpTask", "make_task", "task_names"]


@dataclass(frozen=True)
class MlpTask:
    """Fit a tiny tanh MLP to a fixed sample of sin(pi*x1) + x2^2."""

    layers: tuple = (2, 8, 1)
    n_points: int = 64
    seed: int = 0

    def __post_init__(self):
        if len(self.layers) != 3:
            raise ValueError("expected (input, hidden, output) layer sizes")
        rng = np.random.default_rng(self.seed)
        inputs = rng.uniform(-1.0, 1.0, size=(self.n_points, self.layers[0]))
        targets = np.sin(np.pi * inputs[:, 0]) + inputs[:, 1] ** 2
        object.__setattr__(self, "_inputs", inputs)
        object.__setattr__(self, "_targets", targets)

    @property
    def dim(self):
        d_in, d_h, d_out = self.layers
        return d_in * d_h + d_h + d_h * d_out + d_out

    @property
    def sigma0(self):
        return 0.1

    @property
    def function(self):
        return "mlp-sine"

    def core_values(self, x):
        """Mean squared error of each decoded network over the dataset."""
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.dim:
            raise ValueError(f"expected dimension {self.dim}, "
                             f"got {x.shape[1]}")
        d_in, d_h, d_out = self.layers
        i = 0
        w1 = x[:, i:i + d_in * d_h].reshape(-1, d_in, d_h); i += d_in * d_h
        b1 = x[:, i:i + d_h]; i += d_h
        w2 = x[:, i:i + d_h * d_out].reshape(-1, d_h, d_out); i += d_h * d_out
        b2 = x[:, i:i + d_out]

        hidden = np.tanh(np.einsum("pi,nih->nph", self._inputs, w1)
                         + b1[:, None, :])
        pred = np.einsum("nph,nho->npo", hidden, w2)[:, :, 0] + b2
        mse = np.mean((pred - self._targets) ** 2, axis=1)
        return mse[0] if squeeze else mse

    def evaluate(self, x, rng=None):
        return np.atleast_1d(self.core_values(x))


def task_names():
    return bbob.FUNCTION_NAMES + ("mlp-sine",)


def make_task(name, dim=None, seed=0, sigma0=0.1, noise=False):
    """Build a task by string id; BBOB offsets are drawn from ``seed``."""
    if name == "mlp-sine":
        return MlpTask(seed=seed)
    if name not in bbob.FUNCTION_NAMES:
        raise ValueError(f"unknown task {name!r}; known: "
                         f"{', '.join(task_names())}")
    if dim is None:
        raise ValueError(f"task {name!r} needs an explicit dimension")
    offset = np.random.default_rng([seed, 0xB0B]).uniform(-5.0, 5.0, dim)
    return bbob.TaskSpec(function=name, dim=dim, offset=offset,
                         sigma0=sigma0, noise=noise, seed=seed)
