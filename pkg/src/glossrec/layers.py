"""Sequence layers with explicit forward/backward passes, float64 numpy.

Each layer keeps its parameters in `params` (name -> array) and accumulates
gradients into the matching `grads` entries during backward(). forward()
caches whatever backward() needs; calling backward() without a forward pass
raises ForwardCacheError. All layers operate on a (T, channels) array for a
single sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ForwardCacheError, InvalidInputError


class Layer:
    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def zero_grads(self):
        for name, p in self.params.items():
            self.grads[name] = np.zeros_like(p)

    def _take_cache(self):
        if self._cache is None:
            raise ForwardCacheError(f"{type(self).__name__}.backward without forward")
        cache, self._cache = self._cache, None
        return cache

    def buffers(self) -> dict[str, np.ndarray]:
        return {}


def _uniform_init(rng, shape, fan_in):
    limit = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=shape)


class Linear(Layer):
    def __init__(self, in_dim: int, out_dim: int, rng):
        super().__init__()
        self.params = {
            "W": _uniform_init(rng, (in_dim, out_dim), in_dim),
            "b": np.zeros(out_dim),
        }
        self.zero_grads()

    def forward(self, x: np.ndarray, mode: str = "train") -> np.ndarray:
        if x.shape[1] != self.params["W"].shape[0]:
            raise InvalidInputError(
                f"linear expects width {self.params['W'].shape[0]}, got {x.shape[1]}"
            )
        self._cache = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        x = self._take_cache()
        self.grads["W"] += x.T @ grad_out
        self.grads["b"] += grad_out.sum(axis=0)
        return grad_out @ self.params["W"].T


class Conv1d(Layer):
    """Valid (unpadded) temporal convolution, stride 1: (T, Cin) -> (T-k+1, Cout)."""

    def __init__(self, kernel: int, in_channels: int, out_channels: int, rng):
        super().__init__()
        self.kernel = kernel
        self.params = {
            "W": _uniform_init(
                rng, (kernel, in_channels, out_channels), kernel * in_channels
            ),
            "b": np.zeros(out_channels),
        }
        self.zero_grads()

    def forward(self, x: np.ndarray, mode: str = "train") -> np.ndarray:
        T = x.shape[0]
        out_len = T - self.kernel + 1
        if out_len < 1:
            raise InvalidInputError(f"conv kernel {self.kernel} longer than input {T}")
        W = self.params["W"]
        y = np.tile(self.params["b"], (out_len, 1))
        for j in range(self.kernel):
            y += x[j : j + out_len] @ W[j]
        self._cache = x
        return y

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        x = self._take_cache()
        out_len = grad_out.shape[0]
        W = self.params["W"]
        grad_x = np.zeros_like(x)
        for j in range(self.kernel):
            self.grads["W"][j] += x[j : j + out_len].T @ grad_out
            grad_x[j : j + out_len] += grad_out @ W[j].T
        self.grads["b"] += grad_out.sum(axis=0)
        return grad_x


class BatchNorm1d(Layer):
    """Per-channel normalization over the frames of one sequence.

    Train mode normalizes by the current batch moments and folds them into
    the running moments (momentum 0.1); eval mode uses the running moments.
    The running variance stores the same biased estimate used for
    normalization, so freezing running stats to a batch's stats makes the
    two modes agree exactly.
    """

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.1):
        super().__init__()
        self.eps = eps
        self.momentum = momentum
        self.params = {"gamma": np.ones(channels), "beta": np.zeros(channels)}
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.zero_grads()

    def buffers(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def forward(self, x: np.ndarray, mode: str = "train") -> np.ndarray:
        if mode == "train":
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            self.running_mean += self.momentum * (mean - self.running_mean)
            self.running_var += self.momentum * (var - self.running_var)
        else:
            mean = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        x_hat = (x - mean) * inv_std
        self._cache = (x_hat, inv_std, mode)
        return self.params["gamma"] * x_hat + self.params["beta"]

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        x_hat, inv_std, mode = self._take_cache()
        self.grads["gamma"] += (grad_out * x_hat).sum(axis=0)
        self.grads["beta"] += grad_out.sum(axis=0)
        grad_hat = grad_out * self.params["gamma"]
        if mode != "train":
            return grad_hat * inv_std
        T = x_hat.shape[0]
        return (
            inv_std
            / T
            * (
                T * grad_hat
                - grad_hat.sum(axis=0)
                - x_hat * (grad_hat * x_hat).sum(axis=0)
            )
        )


class Relu(Layer):
    def forward(self, x: np.ndarray, mode: str = "train") -> np.ndarray:
        self._cache = x > 0
        return np.where(self._cache, x, 0.0)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        mask = self._take_cache()
        return np.where(mask, grad_out, 0.0)


class MaxPool2(Layer):
    """Kernel-2 stride-2 max pooling over time; an odd trailing frame is dropped."""

    def forward(self, x: np.ndarray, mode: str = "train") -> np.ndarray:
        out_len = x.shape[0] // 2
        if out_len < 1:
            raise InvalidInputError("pooling needs at least 2 frames")
        pairs = x[: 2 * out_len].reshape(out_len, 2, -1)
        take_first = pairs[:, 0, :] >= pairs[:, 1, :]  # ties pick the earlier frame
        self._cache = (take_first, x.shape[0])
        return np.where(take_first, pairs[:, 0, :], pairs[:, 1, :])

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        take_first, T = self._take_cache()
        out_len = grad_out.shape[0]
        grad_pairs = np.zeros((out_len, 2, grad_out.shape[1]))
        grad_pairs[:, 0, :] = np.where(take_first, grad_out, 0.0)
        grad_pairs[:, 1, :] = np.where(take_first, 0.0, grad_out)
        grad_x = np.zeros((T, grad_out.shape[1]))
        grad_x[: 2 * out_len] = grad_pairs.reshape(2 * out_len, -1)
        return grad_x


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


GATES = ("i", "f", "o", "c")


@dataclass
class LstmState:
    """Post-update cell state with the gate activations kept for tracing."""

    h: np.ndarray
    c: np.ndarray
    gate_i: np.ndarray
    gate_f: np.ndarray
    gate_o: np.ndarray
    candidate: np.ndarray
    tanh_c: np.ndarray


def lstm_cell(
    x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray, params: dict
) -> LstmState:
    """One LSTM update: logistic i/f/o gates, tanh candidate, h = o*tanh(c)."""
    if x.shape[-1] != params["U_i"].shape[0] or h_prev.shape[-1] != params[
        "W_i"
    ].shape[0]:
        raise InvalidInputError("lstm_cell input widths do not match parameters")
    gate_i = sigmoid(x @ params["U_i"] + h_prev @ params["W_i"] + params["b_i"])
    gate_f = sigmoid(x @ params["U_f"] + h_prev @ params["W_f"] + params["b_f"])
    gate_o = sigmoid(x @ params["U_o"] + h_prev @ params["W_o"] + params["b_o"])
    cand = np.tanh(x @ params["U_c"] + h_prev @ params["W_c"] + params["b_c"])
    c = gate_f * c_prev + gate_i * cand
    tanh_c = np.tanh(c)
    return LstmState(
        h=gate_o * tanh_c,
        c=c,
        gate_i=gate_i,
        gate_f=gate_f,
        gate_o=gate_o,
        candidate=cand,
        tanh_c=tanh_c,
    )


class LstmDirection(Layer):
    """One direction of an LSTM layer, unrolled over the sequence.

    The forget-gate bias starts at 1 so fresh models can carry memory.
    Gate activations are kept for tracing.
    """

    def __init__(self, in_dim: int, hidden: int, rng):
        super().__init__()
        self.hidden = hidden
        for g in GATES:
            self.params[f"U_{g}"] = _uniform_init(rng, (in_dim, hidden), in_dim)
            self.params[f"W_{g}"] = _uniform_init(rng, (hidden, hidden), hidden)
            self.params[f"b_{g}"] = np.zeros(hidden)
        self.params["b_f"] = np.ones(hidden)
        self.zero_grads()
        self.gate_trace: dict[str, np.ndarray] | None = None

    def forward(self, x: np.ndarray, mode: str = "train") -> np.ndarray:
        T = x.shape[0]
        h = np.zeros(self.hidden)
        c = np.zeros(self.hidden)
        steps = []
        out = np.zeros((T, self.hidden))
        for t in range(T):
            state = lstm_cell(x[t], h, c, self.params)
            steps.append((x[t], h, c, state))
            h, c = state.h, state.c
            out[t] = h
        self._cache = steps
        self.gate_trace = {
            "i": np.stack([s[3].gate_i for s in steps]),
            "f": np.stack([s[3].gate_f for s in steps]),
            "o": np.stack([s[3].gate_o for s in steps]),
        }
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        steps = self._take_cache()
        p, g = self.params, self.grads
        T = grad_out.shape[0]
        grad_x = np.zeros((T, p["U_i"].shape[0]))
        dh_next = np.zeros(self.hidden)
        dc_next = np.zeros(self.hidden)
        for t in range(T - 1, -1, -1):
            xt, h_prev, c_prev, s = steps[t]
            dh = grad_out[t] + dh_next
            do = dh * s.tanh_c
            dc = dc_next + dh * s.gate_o * (1.0 - s.tanh_c**2)
            da = {
                "i": dc * s.candidate * s.gate_i * (1.0 - s.gate_i),
                "f": dc * c_prev * s.gate_f * (1.0 - s.gate_f),
                "o": do * s.gate_o * (1.0 - s.gate_o),
                "c": dc * s.gate_i * (1.0 - s.candidate**2),
            }
            dh_next = np.zeros(self.hidden)
            dx = np.zeros_like(xt)
            for name, d in da.items():
                g[f"U_{name}"] += np.outer(xt, d)
                g[f"W_{name}"] += np.outer(h_prev, d)
                g[f"b_{name}"] += d
                dx += d @ p[f"U_{name}"].T
                dh_next += d @ p[f"W_{name}"].T
            grad_x[t] = dx
            dc_next = dc * s.gate_f
        return grad_x


class BiLstmLayer(Layer):
    """Forward and reversed LSTM over the sequence, hidden states concatenated."""

    def __init__(self, in_dim: int, hidden: int, rng):
        super().__init__()
        self.fwd = LstmDirection(in_dim, hidden, rng)
        self.bwd = LstmDirection(in_dim, hidden, rng)
        self.hidden = hidden

    def zero_grads(self):
        self.fwd.zero_grads()
        self.bwd.zero_grads()

    @property
    def children(self):
        return {"fwd": self.fwd, "bwd": self.bwd}

    def forward(self, x: np.ndarray, mode: str = "train") -> np.ndarray:
        out_f = self.fwd.forward(x, mode)
        out_b = self.bwd.forward(x[::-1], mode)[::-1]
        return np.concatenate([out_f, out_b], axis=1)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        H = self.hidden
        grad_f = self.fwd.backward(grad_out[:, :H])
        grad_b = self.bwd.backward(grad_out[::-1, H:])[::-1]
        return grad_f + grad_b
