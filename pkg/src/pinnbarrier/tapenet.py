"""Fully connected tanh network with exact x-derivatives and parameter gradients.

Inputs are batches of shape (N, input_dim); column 0 is always the spatial
coordinate x. ``forward_jet`` pushes (value, d/dx, d2/dx2) through every layer
and keeps the intermediates so that :func:`backward` can accumulate the
parameter gradient of any scalar built from (u, u_x, u_xx) in one reverse pass.

Parameters are flattened layer by layer as ``W_0.ravel(), b_0, W_1.ravel(), ...``
with ``W_l`` of shape (n_in, n_out).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CHECKPOINT_VERSION = 1

DESK_HIDDEN = (64, 64, 64, 64)
FULL_HIDDEN = (200,) * 7


class NumericFault(FloatingPointError):
    """Raised when a gradient contains a non-finite entry.

    The training loop fills in ``phase`` and ``iteration`` before re-raising.
    """

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index
        self.phase: str | None = None
        self.iteration: int | None = None


def preset_layer_sizes(preset: str, input_dim: int) -> list[int]:
    hidden = {"desk": DESK_HIDDEN, "paper": FULL_HIDDEN}[preset]
    return [input_dim, *hidden, 1]


@dataclass
class NetParams:
    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_params(self) -> int:
        return sum((a + 1) * b for a, b in zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    def flat(self) -> np.ndarray:
        parts = []
        for W, b in zip(self.weights, self.biases):
            parts.append(W.ravel())
            parts.append(b)
        return np.concatenate(parts)

    @classmethod
    def from_flat(cls, layer_sizes, theta) -> "NetParams":
        layer_sizes = [int(s) for s in layer_sizes]
        theta = np.asarray(theta, dtype=float)
        weights, biases = [], []
        k = 0
        for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            weights.append(theta[k:k + n_in * n_out].reshape(n_in, n_out))
            k += n_in * n_out
            biases.append(theta[k:k + n_out])
            k += n_out
        if k != theta.size:
            raise ValueError(f"expected {k} parameters for {layer_sizes}, got {theta.size}")
        return cls(layer_sizes, weights, biases)

    def copy(self) -> "NetParams":
        return NetParams.from_flat(self.layer_sizes, self.flat().copy())


def init_params(layer_sizes, seed: int) -> NetParams:
    """Glorot-uniform weights, zero biases."""
    layer_sizes = [int(s) for s in layer_sizes]
    if len(layer_sizes) < 2 or min(layer_sizes) < 1:
        raise ValueError(f"invalid layer sizes {layer_sizes}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = np.sqrt(6.0 / (n_in + n_out))
        weights.append(rng.uniform(-limit, limit, size=(n_in, n_out)))
        biases.append(np.zeros(n_out))
    return NetParams(layer_sizes, weights, biases)


def _as_batch(params: NetParams, inputs) -> np.ndarray:
    X = np.asarray(inputs, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if params.input_dim == 1 else X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != params.input_dim:
        raise ValueError(f"inputs of shape {np.shape(inputs)} do not match input_dim={params.input_dim}")
    return X


def forward(params: NetParams, inputs) -> np.ndarray:
    """Network output u for each row of ``inputs``; returns shape (N,)."""
    a = _as_batch(params, inputs)
    last = len(params.weights) - 1
    for l, (W, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ W + b
        a = z if l == last else np.tanh(z)
    return a[:, 0]


@dataclass
class JetEval:
    u: np.ndarray
    u_x: np.ndarray
    u_xx: np.ndarray
    # per-layer (a, a_x, a_xx) entering each affine map, and tanh outputs
    tape: list = field(default_factory=list, repr=False)
    inputs: np.ndarray | None = field(default=None, repr=False)


def forward_jet(params: NetParams, inputs) -> JetEval:
    """Propagate value, d/dx and d2/dx2 (other inputs held fixed)."""
    X = _as_batch(params, inputs)
    n = X.shape[0]
    a = X
    a_x = np.zeros_like(X)
    a_x[:, 0] = 1.0
    a_xx = None  # zero at the input; skipped in the first affine map
    tape = []
    last = len(params.weights) - 1
    for l, (W, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ W + b
        z_x = a_x @ W
        z_xx = np.zeros((n, W.shape[1])) if a_xx is None else a_xx @ W
        if l == last:
            tape.append((a, a_x, a_xx, None))
            return JetEval(u=z[:, 0], u_x=z_x[:, 0], u_xx=z_xx[:, 0], tape=tape, inputs=X)
        t = np.tanh(z)
        s = 1.0 - t * t
        new_x = s * z_x
        new_xx = s * z_xx - 2.0 * t * new_x * z_x
        tape.append((a, a_x, a_xx, (t, s, z_x, z_xx)))
        a, a_x, a_xx = t, new_x, new_xx
    raise AssertionError("unreachable")


def forward_taped(params: NetParams, inputs) -> JetEval:
    """Value-only forward pass that records what :func:`backward` needs."""
    a = _as_batch(params, inputs)
    X = a
    tape = []
    last = len(params.weights) - 1
    for l, (W, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ W + b
        if l == last:
            tape.append((a, None, None, None))
            break
        t = np.tanh(z)
        tape.append((a, None, None, (t, 1.0 - t * t, None, None)))
        a = t
    return JetEval(u=z[:, 0], u_x=None, u_xx=None, tape=tape, inputs=X)


def backward(params: NetParams, jet: JetEval, g_u, g_ux=None, g_uxx=None, check: bool = True) -> np.ndarray:
    """Gradient w.r.t. the flat parameters of ``sum_k g_u[k] u_k + g_ux[k] u_x,k + g_uxx[k] u_xx,k``.

    The cotangents are the partial derivatives of the scalar loss with respect
    to the per-point jet outputs.
    """
    n = jet.u.shape[0]
    zbar = np.asarray(g_u, dtype=float).reshape(n, 1)
    zbar_x = None if g_ux is None else np.asarray(g_ux, dtype=float).reshape(n, 1)
    zbar_xx = None if g_uxx is None else np.asarray(g_uxx, dtype=float).reshape(n, 1)

    grads_W = [None] * len(params.weights)
    grads_b = [None] * len(params.weights)
    for l in range(len(params.weights) - 1, -1, -1):
        W = params.weights[l]
        a, a_x, a_xx, _ = jet.tape[l]
        gW = a.T @ zbar
        if zbar_x is not None:
            gW += a_x.T @ zbar_x
        if zbar_xx is not None and a_xx is not None:
            gW += a_xx.T @ zbar_xx
        grads_W[l] = gW
        grads_b[l] = zbar.sum(axis=0)
        if l == 0:
            break
        abar = zbar @ W.T
        abar_x = None if zbar_x is None else zbar_x @ W.T
        abar_xx = None if zbar_xx is None else zbar_xx @ W.T
        t, s, z_x, z_xx = jet.tape[l - 1][3]
        # a = tanh z;  a_x = s z_x;  a_xx = s z_xx - 2 t s z_x^2
        zbar = abar * s
        if abar_x is not None:
            zbar = zbar - 2.0 * abar_x * t * s * z_x
        if abar_xx is not None:
            zbar = zbar - abar_xx * (2.0 * t * s * z_xx + 2.0 * s * (s - 2.0 * t * t) * z_x * z_x)
            zbar_x = (abar_x if abar_x is not None else 0.0) * s - 4.0 * abar_xx * t * s * z_x
            zbar_xx = abar_xx * s
        else:
            zbar_x = None if abar_x is None else abar_x * s
            zbar_xx = None

    parts = []
    for gW, gb in zip(grads_W, grads_b):
        parts.append(gW.ravel())
        parts.append(gb)
    grad = np.concatenate(parts)
    if check:
        check_finite(grad)
    return grad


def check_finite(grad: np.ndarray) -> None:
    bad = np.flatnonzero(~np.isfinite(grad))
    if bad.size:
        raise NumericFault(f"non-finite gradient entry at parameter {bad[0]}", index=int(bad[0]))


def save_checkpoint(path, params: NetParams, extra: dict | None = None) -> None:
    payload = {
        "format": "pinnbarrier-checkpoint",
        "version": CHECKPOINT_VERSION,
        "layer_sizes": list(params.layer_sizes),
        "params": [float(v) for v in params.flat()],
    }
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload) + "\n")


def load_checkpoint(path) -> tuple[NetParams, dict]:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != "pinnbarrier-checkpoint":
        raise ValueError(f"{path} is not a network checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    params = NetParams.from_flat(payload["layer_sizes"], np.array(payload["params"], dtype=float))
    extra = {k: v for k, v in payload.items() if k not in {"format", "version", "layer_sizes", "params"}}
    return params, extra
