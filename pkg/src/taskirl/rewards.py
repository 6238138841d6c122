"""Reward models over product states and actions.

Three parameterizations share one interface: a table with one weight per
state-action pair, a linear function of a fixed feature encoding, and a
small fully connected network over the same encoding. The encoding
concatenates a one-hot k x k object neighborhood of the cell (out-of-bounds
positions stay all-zero), a one-hot automaton state padded to a fixed
width, and a one-hot action; it depends only on local observations, so
linear and network rewards transfer across environments.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from . import grid_env
from .automata import ProductMdp

DFA_SLOTS = 10  # one-hot width reserved for automaton states
DEFAULT_HIDDEN = (214, 50)


def cell_features(grid: grid_env.GridMap, k: int = 7) -> np.ndarray:
    """(H, W, k*k*NUM_KINDS) one-hot neighborhoods, row-major window order."""
    if k < 1 or k % 2 == 0:
        raise ValueError("k must be odd and positive")
    r = k // 2
    h, w = grid.height, grid.width
    out = np.zeros((h, w, k * k * grid_env.NUM_KINDS), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            base = 0
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx < w:
                        out[y, x, base + int(grid.cells[ny, nx])] = 1.0
                    base += grid_env.NUM_KINDS
    return out


def feature_dim(k: int = 7, dfa_slots: int = DFA_SLOTS) -> int:
    return k * k * grid_env.NUM_KINDS + dfa_slots + len(grid_env.ACTIONS)


def product_features(
    product: ProductMdp, k: int = 7, dfa_slots: int = DFA_SLOTS
) -> np.ndarray:
    """(Z, A, F) encoding of every product state-action pair."""
    slots = max(dfa_slots, product.dfa.n_states)
    n_a = product.n_actions
    neigh = cell_features(product.grid, k)
    nf = neigh.shape[-1]
    f = nf + slots + n_a
    out = np.zeros((product.n_states, n_a, f), dtype=np.float64)
    for z, ((x, y), q) in enumerate(product.states):
        out[z, :, :nf] = neigh[y, x]
        out[z, :, nf + q] = 1.0
    for a in range(n_a):
        out[:, a, nf + slots + a] = 1.0
    return out


class TabularReward:
    """One parameter per product state-action pair. Not transferable."""

    variant = "tabular"
    transferable = False

    def __init__(self, n_states: int, n_actions: int,
                 theta: Optional[np.ndarray] = None):
        self.n_states = n_states
        self.n_actions = n_actions
        self.d = n_states * n_actions
        self._theta = np.zeros(self.d) if theta is None else np.asarray(
            theta, dtype=np.float64).copy()
        if self._theta.shape != (self.d,):
            raise ValueError("theta has the wrong length")

    @property
    def theta(self) -> np.ndarray:
        return self._theta

    @theta.setter
    def theta(self, value: np.ndarray) -> None:
        value = np.asarray(value, dtype=np.float64)
        if value.shape != (self.d,):
            raise ValueError("theta has the wrong length")
        self._theta = value.copy()

    def reward_table(self, features: Optional[np.ndarray] = None) -> np.ndarray:
        return self._theta.reshape(self.n_states, self.n_actions)

    def reward_grads(self, features: Optional[np.ndarray] = None) -> np.ndarray:
        eye = np.eye(self.d)
        return eye.reshape(self.n_states, self.n_actions, self.d)

    def weighted_grad(self, features: Optional[np.ndarray],
                      weights: np.ndarray) -> np.ndarray:
        return np.asarray(weights, dtype=np.float64).ravel().copy()


class LinearReward:
    """Inner product of the feature encoding with a weight vector."""

    variant = "linear"
    transferable = True

    def __init__(self, n_features: int, theta: Optional[np.ndarray] = None):
        self.n_features = n_features
        self.d = n_features
        self._theta = np.zeros(self.d) if theta is None else np.asarray(
            theta, dtype=np.float64).copy()
        if self._theta.shape != (self.d,):
            raise ValueError("theta has the wrong length")

    @property
    def theta(self) -> np.ndarray:
        return self._theta

    @theta.setter
    def theta(self, value: np.ndarray) -> None:
        value = np.asarray(value, dtype=np.float64)
        if value.shape != (self.d,):
            raise ValueError("theta has the wrong length")
        self._theta = value.copy()

    def reward_table(self, features: np.ndarray) -> np.ndarray:
        return features @ self._theta

    def reward_grads(self, features: np.ndarray) -> np.ndarray:
        return features

    def weighted_grad(self, features: np.ndarray,
                      weights: np.ndarray) -> np.ndarray:
        return np.einsum("zaf,za->f", features, weights)


class MlpReward:
    """Fully connected rectifier network with a single output unit.

    Weights are initialized uniformly in +-1/sqrt(fan_in); biases start at
    zero. Parameters are exposed as one flat vector in layer order.
    """

    variant = "mlp"
    transferable = True

    def __init__(self, n_features: int, hidden: Sequence[int] = DEFAULT_HIDDEN,
                 seed: int = 0):
        if not hidden:
            raise ValueError("need at least one hidden layer")
        self.n_features = n_features
        self.hidden = tuple(int(h) for h in hidden)
        rng = np.random.default_rng(seed)
        sizes = [n_features, *self.hidden]
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        bound = 1.0 / np.sqrt(sizes[-1])
        self.out_w = rng.uniform(-bound, bound, size=sizes[-1])
        self.out_b = 0.0
        self.d = sum(w.size + b.size for w, b in zip(self.weights, self.biases))
        self.d += self.out_w.size + 1

    @property
    def theta(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        parts.append(self.out_w)
        parts.append(np.array([self.out_b]))
        return np.concatenate(parts)

    @theta.setter
    def theta(self, value: np.ndarray) -> None:
        value = np.asarray(value, dtype=np.float64)
        if value.shape != (self.d,):
            raise ValueError("theta has the wrong length")
        pos = 0
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[i] = value[pos : pos + w.size].reshape(w.shape).copy()
            pos += w.size
            self.biases[i] = value[pos : pos + b.size].copy()
            pos += b.size
        self.out_w = value[pos : pos + self.out_w.size].copy()
        pos += self.out_w.size
        self.out_b = float(value[pos])

    def _forward(self, x: np.ndarray):
        acts = [x]
        pres = []
        for w, b in zip(self.weights, self.biases):
            z = acts[-1] @ w + b
            pres.append(z)
            acts.append(np.maximum(z, 0.0))
        out = acts[-1] @ self.out_w + self.out_b
        return out, acts, pres

    def reward_table(self, features: np.ndarray) -> np.ndarray:
        z, a, f = features.shape
        out, _, _ = self._forward(features.reshape(z * a, f))
        return out.reshape(z, a)

    def reward_grads(self, features: np.ndarray) -> np.ndarray:
        """(Z, A, d) per-pair parameter gradients of the output."""
        z, a, f = features.shape
        x = features.reshape(z * a, f)
        _, acts, pres = self._forward(x)
        b = x.shape[0]
        delta = np.where(pres[-1] > 0.0, self.out_w, 0.0)
        chunks: list[np.ndarray] = []
        per_layer: list[tuple[np.ndarray, np.ndarray]] = []
        for i in range(len(self.weights) - 1, -1, -1):
            gw = np.einsum("bi,bj->bij", acts[i], delta).reshape(b, -1)
            gb = delta
            per_layer.append((gw, gb))
            if i > 0:
                delta = (delta @ self.weights[i].T) * (pres[i - 1] > 0.0)
        for gw, gb in reversed(per_layer):
            chunks.append(gw)
            chunks.append(gb)
        chunks.append(acts[-1])
        chunks.append(np.ones((b, 1)))
        return np.concatenate(chunks, axis=1).reshape(z, a, self.d)

    def weighted_grad(self, features: np.ndarray,
                      weights: np.ndarray) -> np.ndarray:
        """Gradient of sum(weights * reward) over the parameters."""
        z, a, f = features.shape
        x = features.reshape(z * a, f)
        wf = np.asarray(weights, dtype=np.float64).reshape(z * a)
        _, acts, pres = self._forward(x)
        g_out_w = acts[-1].T @ wf
        g_out_b = wf.sum()
        delta = np.outer(wf, self.out_w) * (pres[-1] > 0.0)
        grads: list[tuple[np.ndarray, np.ndarray]] = []
        for i in range(len(self.weights) - 1, -1, -1):
            gw = acts[i].T @ delta
            gb = delta.sum(axis=0)
            grads.append((gw, gb))
            if i > 0:
                delta = (delta @ self.weights[i].T) * (pres[i - 1] > 0.0)
        parts = []
        for gw, gb in reversed(grads):
            parts.append(gw.ravel())
            parts.append(gb)
        parts.append(g_out_w)
        parts.append(np.array([g_out_b]))
        return np.concatenate(parts)


RewardModel = TabularReward | LinearReward | MlpReward


def make_model(variant: str, product: ProductMdp, features: Optional[np.ndarray],
               hidden: Sequence[int] = DEFAULT_HIDDEN, seed: int = 0) -> RewardModel:
    if variant == "tabular":
        return TabularReward(product.n_states, product.n_actions)
    if features is None:
        raise ValueError(f"{variant} model needs features")
    if variant == "linear":
        return LinearReward(features.shape[-1])
    if variant == "mlp":
        return MlpReward(features.shape[-1], hidden=hidden, seed=seed)
    raise ValueError(f"unknown reward variant {variant!r}")


def save_model(model: RewardModel, path: str) -> None:
    """Text format: variant line, dimension line, one parameter per line."""
    if model.variant == "tabular":
        dims = f"dims {model.n_states} {model.n_actions}"
    elif model.variant == "linear":
        dims = f"dims {model.n_features}"
    else:
        dims = "dims " + " ".join(
            str(v) for v in (model.n_features, *model.hidden))
    lines = [f"variant {model.variant}", dims]
    lines.extend(repr(float(v)) for v in model.theta)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path: str) -> RewardModel:
    with open(path) as fh:
        lines = [l.strip() for l in fh if l.strip()]
    if len(lines) < 2 or not lines[0].startswith("variant "):
        raise ValueError(f"{path}: missing variant header")
    variant = lines[0].split()[1]
    dims = [int(v) for v in lines[1].split()[1:]]
    theta = np.array([float(v) for v in lines[2:]], dtype=np.float64)
    if variant == "tabular":
        model: RewardModel = TabularReward(dims[0], dims[1])
    elif variant == "linear":
        model = LinearReward(dims[0])
    elif variant == "mlp":
        model = MlpReward(dims[0], hidden=tuple(dims[1:]))
    else:
        raise ValueError(f"{path}: unknown variant {variant!r}")
    model.theta = theta
    return model
