"""Bare-numpy multilayer perceptron with Adam and gradient validation.

The default architecture is 4 affine layers with rectifiers between (an
input-width stack narrowing only at the output), which serves as the
sentence recoder, the linear cluster head (a 1-affine-layer degenerate
case), and the downstream classifiers. Everything trains in binary64;
checkpoints reduce to the storage format's binary32.

Analytic gradients are validated against central finite differences
(f(t+h) - f(t-h)) / 2h on small models; see gradient_check.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .mathkit import SeededRng
from .store import read_embeddings, write_embeddings

ADAM_DEFAULTS = {"lr": 1e-3, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8}


class Mlp:
    """Affine layer stack with rectifiers between layers (none after the last).

    dims lists the layer widths, e.g. [768, 768, 768, 768, r] for the
    default 4-affine-layer shape. Weights initialize to the scaled uniform
    fan-in scheme U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases start at zero.
    """

    def __init__(self, dims, rng: SeededRng | None = None, params=None):
        dims = [int(d) for d in dims]
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ValueError(f"dims must chain at least one affine layer, got {dims}")
        self.dims = dims
        if params is not None:
            weights, biases = params
            if len(weights) != len(dims) - 1 or len(biases) != len(dims) - 1:
                raise ValueError("parameter count does not match dims")
            self.weights, self.biases = [], []
            for i, (w, b) in enumerate(zip(weights, biases)):
                w = np.asarray(w, dtype=np.float64)
                b = np.asarray(b, dtype=np.float64).reshape(-1)
                if w.shape != (dims[i], dims[i + 1]) or b.shape != (dims[i + 1],):
                    raise ValueError(f"layer {i} parameter shapes do not chain with dims")
                if not (np.isfinite(w).all() and np.isfinite(b).all()):
                    raise ValueError("parameters must be finite")
                self.weights.append(w.copy())
                self.biases.append(b.copy())
        else:
            if rng is None:
                raise ValueError("need an rng to initialize parameters")
            self.weights, self.biases = [], []
            for fan_in, fan_out in zip(dims[:-1], dims[1:]):
                bound = 1.0 / np.sqrt(fan_in)
                w = (np.asarray(rng.uniform((fan_in, fan_out))) * 2.0 - 1.0) * bound
                self.weights.append(w)
                self.biases.append(np.zeros(fan_out))

    @property
    def params(self) -> list[np.ndarray]:
        """Flat parameter list [W0, b0, W1, b1, ...]; arrays are live views."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def copy(self) -> "Mlp":
        return Mlp(self.dims, params=(self.weights, self.biases))

    def _check_input(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dims[0]:
            raise ValueError(f"batch must be 2-d with {self.dims[0]} columns, got {x.shape}")
        return x

    def forward(self, x) -> np.ndarray:
        """Logits for a batch, without caching intermediates."""
        return self.forward_cached(x)[0]

    def forward_cached(self, x):
        """Logits plus the cached per-layer (input, preactivation) pairs."""
        h = self._check_input(x)
        cache = []
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            cache.append((h, z))
            h = z if i == last else np.maximum(z, 0.0)
        return h, cache

    def backward(self, cache, dlogits):
        """Gradients of a scalar loss given d(loss)/d(logits).

        Returns (grads, dx) where grads aligns with .params and dx is the
        gradient with respect to the input batch (needed when this model
        sits downstream of another, as the cluster head does).
        """
        delta = np.asarray(dlogits, dtype=np.float64)
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        for i in range(len(self.weights) - 1, -1, -1):
            h_in, z = cache[i]
            grads_w[i] = h_in.T @ delta
            grads_b[i] = delta.sum(axis=0)
            delta = delta @ self.weights[i].T
            if i > 0:
                # rectifier subgradient: zero at and below the kink
                delta = delta * (cache[i - 1][1] > 0.0)
        grads = []
        for gw, gb in zip(grads_w, grads_b):
            grads.extend([gw, gb])
        return grads, delta


def softmax(logits) -> np.ndarray:
    """Row-wise softmax, stable under large logits; rows sum to 1."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits, labels):
    """Mean cross-entropy over the batch and its gradient in the logits.

    Returns (loss, dlogits) with dlogits = (softmax - onehot) / batch.
    """
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels)
    if z.ndim != 2 or y.ndim != 1 or y.shape[0] != z.shape[0]:
        raise ValueError("logits must be (batch, classes) with one label per row")
    if z.shape[0] == 0:
        raise ValueError("batch must be nonempty")
    if y.size and (y.min() < 0 or y.max() >= z.shape[1]):
        raise ValueError(f"labels must lie in [0, {z.shape[1]})")
    m = z.max(axis=1, keepdims=True)
    logp = z - (m + np.log(np.exp(z - m).sum(axis=1, keepdims=True)))
    n = z.shape[0]
    loss = float(-logp[np.arange(n), y].mean())
    dlogits = np.exp(logp)
    dlogits[np.arange(n), y] -= 1.0
    return loss, dlogits / n


def predict(model: Mlp, x) -> np.ndarray:
    """Argmax class per row; ties resolve to the lowest class index."""
    return model.forward(x).argmax(axis=1)


class AdamState:
    """Moment accumulators and step count for bias-corrected Adam."""

    def __init__(self, params, lr=None, beta1=None, beta2=None, eps=None):
        self.lr = ADAM_DEFAULTS["lr"] if lr is None else float(lr)
        self.beta1 = ADAM_DEFAULTS["beta1"] if beta1 is None else float(beta1)
        self.beta2 = ADAM_DEFAULTS["beta2"] if beta2 is None else float(beta2)
        self.eps = ADAM_DEFAULTS["eps"] if eps is None else float(eps)
        self.step_count = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]


def adam_step(params, grads, state: AdamState) -> None:
    """One in-place bias-corrected Adam update over aligned lists."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads, and state must align")
    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError("gradient shape does not match parameter shape")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def gradient_check(model: Mlp, batch, targets, h: float = 1e-5) -> float:
    """Max relative error of analytic vs central-difference gradients.

    Perturbs every parameter element by +-h and compares the numeric
    slope against backward's output. Restricted to small models; the cost
    is two forward passes per parameter.

    Unreliable when a preactivation sits within h of a rectifier kink
    (the subgradient takes one side, the finite difference straddles it).
    Zero-initialized biases make exact kinks reachable: a batch row dead
    at one layer lands every later preactivation of that row on 0.
    Fixtures should nudge biases off zero and keep |z| >> h.
    """
    if model.n_params > 10_000:
        raise ValueError("gradient_check is for models with at most 1e4 parameters")
    x = np.asarray(batch, dtype=np.float64)
    logits, cache = model.forward_cached(x)
    _, dlogits = cross_entropy(logits, targets)
    grads, _ = model.backward(cache, dlogits)
    worst = 0.0
    for param, grad in zip(model.params, grads):
        flat = param.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = cross_entropy(model.forward(x), targets)[0]
            flat[i] = orig - h
            down = cross_entropy(model.forward(x), targets)[0]
            flat[i] = orig
            numeric = (up - down) / (2.0 * h)
            analytic = gflat[i]
            scale = max(abs(numeric) + abs(analytic), 1e-8)
            worst = max(worst, abs(numeric - analytic) / scale)
    return worst


def save_mlp(model: Mlp, directory, extra: dict | None = None) -> None:
    """Checkpoint: one EMB1 block per parameter array plus a JSON manifest.

    Weights round to binary32 at this boundary; loading restores binary64
    arithmetic on the rounded values.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        write_embeddings(w, d / f"layer{i}.w.emb")
        write_embeddings(b.reshape(1, -1), d / f"layer{i}.b.emb")
    manifest = {
        "dims": model.dims,
        "n_layers": len(model.weights),
        "nonlinearity": "relu",
        "extra": extra or {},
    }
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def load_mlp(directory) -> tuple[Mlp, dict]:
    """Load a checkpoint; returns (model, manifest extra dict)."""
    d = Path(directory)
    manifest = json.loads((d / "manifest.json").read_text(encoding="utf-8"))
    dims = [int(v) for v in manifest["dims"]]
    weights, biases = [], []
    for i in range(int(manifest["n_layers"])):
        weights.append(read_embeddings(d / f"layer{i}.w.emb"))
        biases.append(read_embeddings(d / f"layer{i}.b.emb").reshape(-1))
    model = Mlp(dims, params=(weights, biases))
    return model, dict(manifest.get("extra", {}))
