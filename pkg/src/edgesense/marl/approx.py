"""Small fully connected networks with hand-written reverse mode.

Hidden layers use tanh, the output layer is linear. Inputs may be a single
vector or a batch of row vectors.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch

PARAMS_MAGIC = "edgesense-params"
PARAMS_VERSION = 1


@dataclass
class Approximator:
    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.layer_sizes) < 2:
            raise ShapeMismatch("need at least an input and an output width")
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ShapeMismatch("one weight matrix and bias per layer")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (self.layer_sizes[k], self.layer_sizes[k + 1]) or b.shape != (self.layer_sizes[k + 1],):
                raise ShapeMismatch(f"layer {k} has shape {W.shape}/{b.shape}")

    @classmethod
    def init(cls, layer_sizes, rng: np.random.Generator, out_scale: float = 1.0) -> "Approximator":
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
        sizes = [int(s) for s in layer_sizes]
        weights, biases = [], []
        for k in range(len(sizes) - 1):
            bound = 1.0 / np.sqrt(max(sizes[k], 1))
            W = rng.uniform(-bound, bound, size=(sizes[k], sizes[k + 1]))
            if k == len(sizes) - 2:
                W = W * out_scale
            weights.append(W)
            biases.append(np.zeros(sizes[k + 1]))
        return cls(sizes, weights, biases)

    @classmethod
    def zeros(cls, layer_sizes) -> "Approximator":
        sizes = [int(s) for s in layer_sizes]
        return cls(sizes, [np.zeros((sizes[k], sizes[k + 1])) for k in range(len(sizes) - 1)],
                   [np.zeros(sizes[k + 1]) for k in range(len(sizes) - 1)])

    @property
    def n_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_out(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> "Approximator":
        return Approximator(list(self.layer_sizes), [W.copy() for W in self.weights],
                            [b.copy() for b in self.biases])

    # -- evaluation ---------------------------------------------------------------
    def _check_input(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.n_in,) or x.ndim > 2:
            raise ShapeMismatch(f"expected input width {self.n_in}, got shape {x.shape}")
        return x

    def forward(self, x) -> np.ndarray:
        return self.forward_cache(x)[0]

    def forward_cache(self, x):
        x = self._check_input(x)
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ W + b
            if k < last:
                h = np.tanh(h)
            acts.append(h)
        return h, acts

    def backward(self, cache, upstream) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Gradients of ``sum(output * upstream)`` with respect to all parameters.

        ``cache`` is the second value of :meth:`forward_cache`.
        """
        acts = cache
        g = np.asarray(upstream, dtype=float)
        if g.shape != acts[-1].shape:
            raise ShapeMismatch(f"upstream shape {g.shape} != output shape {acts[-1].shape}")
        dWs = [None] * len(self.weights)
        dbs = [None] * len(self.weights)
        for k in range(len(self.weights) - 1, -1, -1):
            if k < len(self.weights) - 1:
                g = g * (1.0 - acts[k + 1] ** 2)
            a_in = acts[k]
            if g.ndim == 1:
                dWs[k] = np.outer(a_in, g)
                dbs[k] = g.copy()
            else:
                dWs[k] = a_in.T @ g
                dbs[k] = g.sum(axis=0)
            g = g @ self.weights[k].T
        return dWs, dbs

    def input_grad(self, cache, upstream) -> np.ndarray:
        acts = cache
        g = np.asarray(upstream, dtype=float)
        for k in range(len(self.weights) - 1, -1, -1):
            if k < len(self.weights) - 1:
                g = g * (1.0 - acts[k + 1] ** 2)
            g = g @ self.weights[k].T
        return g

    # -- flat views ---------------------------------------------------------------
    def flat(self) -> np.ndarray:
        parts = []
        for W, b in zip(self.weights, self.biases):
            parts += [W.ravel(), b]
        return np.concatenate(parts) if parts else np.zeros(0)

    def set_flat(self, theta: np.ndarray) -> None:
        theta = np.asarray(theta, dtype=float)
        if theta.size != self.n_params:
            raise ShapeMismatch(f"expected {self.n_params} parameters, got {theta.size}")
        pos = 0
        for k in range(len(self.weights)):
            n = self.weights[k].size
            self.weights[k] = theta[pos:pos + n].reshape(self.weights[k].shape).copy()
            pos += n
            n = self.biases[k].size
            self.biases[k] = theta[pos:pos + n].copy()
            pos += n

    @property
    def n_params(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    @staticmethod
    def flat_grads(dWs, dbs) -> np.ndarray:
        parts = []
        for dW, db in zip(dWs, dbs):
            parts += [dW.ravel(), db]
        return np.concatenate(parts)


def _fmt(values: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(values))


def dump_approximators(named: list[tuple[str, Approximator | None]]) -> str:
    """Text layout: magic + version line, count line, then per network a name
    line, a ``layers`` line, and one row-major line per weight and bias."""
    out = io.StringIO()
    out.write(f"{PARAMS_MAGIC} {PARAMS_VERSION}\n")
    out.write(f"networks {len(named)}\n")
    for name, net in named:
        out.write(f"name {name}\n")
        if net is None:
            out.write("layers\n")
            continue
        out.write("layers " + " ".join(str(s) for s in net.layer_sizes) + "\n")
        for W, b in zip(net.weights, net.biases):
            out.write(_fmt(W) + "\n")
            out.write(_fmt(b) + "\n")
    return out.getvalue()


def load_approximators(text: str) -> list[tuple[str, Approximator | None]]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    head = lines[0].split()
    if len(head) != 2 or head[0] != PARAMS_MAGIC or int(head[1]) != PARAMS_VERSION:
        raise ValueError(f"not a {PARAMS_MAGIC} v{PARAMS_VERSION} file")
    count = int(lines[1].split()[1])
    pos = 2
    result = []
    for _ in range(count):
        name = lines[pos].split(maxsplit=1)[1]
        sizes = [int(s) for s in lines[pos + 1].split()[1:]]
        pos += 2
        if not sizes:
            result.append((name, None))
            continue
        weights, biases = [], []
        for k in range(len(sizes) - 1):
            W = np.array([float(v) for v in lines[pos].split()]).reshape(sizes[k], sizes[k + 1])
            b = np.array([float(v) for v in lines[pos + 1].split()]).reshape(sizes[k + 1])
            weights.append(W)
            biases.append(b)
            pos += 2
        result.append((name, Approximator(sizes, weights, biases)))
    return result
