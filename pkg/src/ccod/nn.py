"""Minimal neural-network engine for the control agents.

One LSTM layer reads the observation time series; its final hidden state
(optionally concatenated with an extra scalar input such as an action) feeds
two ReLU dense layers and a linear head. Forward and backward passes are
exact (backpropagation through time across the whole sequence), so gradients
can be validated against central finite differences. Everything is float64
numpy; no external autodiff.
"""

from __future__ import annotations

import numpy as np

LSTM_HIDDEN = 8
DENSE_DIMS = (128, 64)
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


class ContractViolation(RuntimeError):
    """An operation was called outside its preconditions (shape/order)."""


class TrainingError(RuntimeError):
    """A training step produced non-finite numbers and was aborted."""


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


class Network:
    """LSTM -> dense -> dense -> linear head, with cached backward pass.

    Parameters
    ----------
    head_dim : int
        Output width (7 Q-values, or 1 for actor/critic heads).
    extra_dim : int
        Width of an optional side input concatenated with the LSTM output
        before the first dense layer (the DDPG critic's action input).
    """

    def __init__(self, head_dim: int, *, input_dim: int = 2,
                 lstm_hidden: int = LSTM_HIDDEN, dense_dims=DENSE_DIMS,
                 extra_dim: int = 0, rng: np.random.Generator | None = None,
                 seed=None):
        self.head_dim = head_dim
        self.input_dim = input_dim
        self.lstm_hidden = lstm_hidden
        self.dense_dims = tuple(dense_dims)
        self.extra_dim = extra_dim
        rng = rng if rng is not None else np.random.default_rng(seed)
        h = lstm_hidden
        d1, d2 = self.dense_dims
        feat = h + extra_dim

        def uniform(fan_in, *shape):
            bound = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-bound, bound, size=shape)

        self.params: dict[str, np.ndarray] = {
            "lstm_wx": uniform(h, input_dim, 4 * h),
            "lstm_wh": uniform(h, h, 4 * h),
            "lstm_b": uniform(h, 4 * h),
            "dense1_w": uniform(feat, feat, d1),
            "dense1_b": uniform(feat, d1),
            "dense2_w": uniform(d1, d1, d2),
            "dense2_b": uniform(d1, d2),
            "head_w": uniform(d2, d2, head_dim),
            "head_b": uniform(d2, head_dim),
        }
        self._cache = None

    # -- forward --------------------------------------------------------

    def forward(self, obs: np.ndarray, extra: np.ndarray | None = None) -> np.ndarray:
        """Run the network; a (T, input_dim) observation yields a (head_dim,)
        vector, a (B, T, input_dim) batch yields (B, head_dim).

        The LSTM starts from zero hidden/cell state for every call:
        observations are self-contained windows, not a running stream.
        """
        obs = np.asarray(obs, dtype=float)
        single = obs.ndim == 2
        if single:
            obs = obs[None]
            if extra is not None:
                extra = np.asarray(extra, dtype=float).reshape(1, -1)
        if obs.ndim != 3 or obs.shape[2] != self.input_dim:
            raise ContractViolation(f"expected (B, T, {self.input_dim}) input, got {obs.shape}")
        if (extra is None) != (self.extra_dim == 0):
            raise ContractViolation("extra input does not match the network's extra_dim")

        p = self.params
        b, t, _ = obs.shape
        h_dim = self.lstm_hidden
        h = np.zeros((b, h_dim))
        c = np.zeros((b, h_dim))
        steps = []
        for step in range(t):
            x = obs[:, step, :]
            z = x @ p["lstm_wx"] + h @ p["lstm_wh"] + p["lstm_b"]
            i = _sigmoid(z[:, :h_dim])
            f = _sigmoid(z[:, h_dim:2 * h_dim])
            g = np.tanh(z[:, 2 * h_dim:3 * h_dim])
            o = _sigmoid(z[:, 3 * h_dim:])
            c_prev, h_prev = c, h
            c = f * c_prev + i * g
            tanh_c = np.tanh(c)
            h = o * tanh_c
            steps.append((x, h_prev, c_prev, i, f, g, o, tanh_c))

        if extra is not None:
            extra = np.asarray(extra, dtype=float)
            if extra.shape != (b, self.extra_dim):
                raise ContractViolation(f"expected extra of shape ({b}, {self.extra_dim})")
            feat = np.concatenate([h, extra], axis=1)
        else:
            feat = h
        z1 = feat @ p["dense1_w"] + p["dense1_b"]
        a1 = np.maximum(z1, 0.0)
        z2 = a1 @ p["dense2_w"] + p["dense2_b"]
        a2 = np.maximum(z2, 0.0)
        out = a2 @ p["head_w"] + p["head_b"]
        self._cache = (steps, feat, z1, a1, z2, a2)
        return out[0] if single else out

    # -- backward -------------------------------------------------------

    def backward(self, upstream: np.ndarray) -> tuple[dict[str, np.ndarray], np.ndarray | None]:
        """Gradients of sum(upstream * output) w.r.t. every parameter.

        Must follow a forward pass (whose intermediate values are reused).
        Also returns the gradient w.r.t. the extra side input (None when
        the network has none), which the DDPG actor update chains through.
        """
        if self._cache is None:
            raise ContractViolation("backward called before forward")
        steps, feat, z1, a1, z2, a2 = self._cache
        p = self.params
        h_dim = self.lstm_hidden
        upstream = np.asarray(upstream, dtype=float)
        if upstream.ndim == 1:
            upstream = upstream[None]
        b = feat.shape[0]
        if upstream.shape != (b, self.head_dim):
            raise ContractViolation(f"expected upstream of shape ({b}, {self.head_dim})")

        grads = {k: np.zeros_like(v) for k, v in p.items()}
        grads["head_w"] = a2.T @ upstream
        grads["head_b"] = upstream.sum(axis=0)
        d_a2 = upstream @ p["head_w"].T
        d_z2 = d_a2 * (z2 > 0)
        grads["dense2_w"] = a1.T @ d_z2
        grads["dense2_b"] = d_z2.sum(axis=0)
        d_a1 = d_z2 @ p["dense2_w"].T
        d_z1 = d_a1 * (z1 > 0)
        grads["dense1_w"] = feat.T @ d_z1
        grads["dense1_b"] = d_z1.sum(axis=0)
        d_feat = d_z1 @ p["dense1_w"].T

        d_h = d_feat[:, :h_dim]
        extra_grad = d_feat[:, h_dim:].copy() if self.extra_dim else None

        d_c = np.zeros_like(d_h)
        g_wx, g_wh, g_b = grads["lstm_wx"], grads["lstm_wh"], grads["lstm_b"]
        wh_t = p["lstm_wh"].T
        for x, h_prev, c_prev, i, f, g, o, tanh_c in reversed(steps):
            d_o = d_h * tanh_c
            d_c = d_c + d_h * o * (1.0 - tanh_c * tanh_c)
            d_i = d_c * g
            d_f = d_c * c_prev
            d_g = d_c * i
            dz = np.concatenate([
                d_i * i * (1.0 - i),
                d_f * f * (1.0 - f),
                d_g * (1.0 - g * g),
                d_o * o * (1.0 - o),
            ], axis=1)
            g_wx += x.T @ dz
            g_wh += h_prev.T @ dz
            g_b += dz.sum(axis=0)
            d_h = dz @ wh_t
            d_c = d_c * f
        return grads, extra_grad

    # -- parameter management --------------------------------------------

    def copy(self) -> "Network":
        """Independent clone with identical parameters (target networks)."""
        clone = Network(self.head_dim, input_dim=self.input_dim,
                        lstm_hidden=self.lstm_hidden, dense_dims=self.dense_dims,
                        extra_dim=self.extra_dim, rng=np.random.default_rng(0))
        for k, v in self.params.items():
            clone.params[k] = v.copy()
        return clone

    def save(self, path) -> None:
        """Dump parameters; the npz archive is its own shape manifest."""
        np.savez(path, **self.params)

    def load(self, path) -> None:
        with np.load(path) as data:
            for k, v in self.params.items():
                if k not in data.files:
                    raise ContractViolation(f"missing tensor {k!r} in {path}")
                if data[k].shape != v.shape:
                    raise ContractViolation(
                        f"shape mismatch for {k!r}: file {data[k].shape}, network {v.shape}")
                self.params[k] = data[k].astype(float)
        self._cache = None


class Adam:
    """Adam optimizer with per-parameter moment state."""

    def __init__(self, network: Network, betas=ADAM_BETAS, eps: float = ADAM_EPS):
        self.betas = betas
        self.eps = eps
        self.t = 0
        self._m = {k: np.zeros_like(v) for k, v in network.params.items()}
        self._v = {k: np.zeros_like(v) for k, v in network.params.items()}

    def step(self, network: Network, grads: dict[str, np.ndarray], lr: float) -> None:
        """One update; aborts (raising) before touching any parameter if a
        gradient is non-finite."""
        for k, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient in {k!r}")
        b1, b2 = self.betas
        self.t += 1
        corr1 = 1.0 - b1 ** self.t
        corr2 = 1.0 - b2 ** self.t
        for k, g in grads.items():
            m = self._m[k]
            v = self._v[k]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            network.params[k] -= lr * (m / corr1) / (np.sqrt(v / corr2) + self.eps)


def soft_update(target: Network, local: Network, tau: float) -> None:
    """Blend local weights into the target: w_t <- tau*w_l + (1-tau)*w_t."""
    if not 0.0 <= tau <= 1.0:
        raise ContractViolation("tau must be in [0, 1]")
    for k, w_local in local.params.items():
        w_target = target.params[k]
        if w_target.shape != w_local.shape:
            raise ContractViolation(f"shape mismatch for {k!r}")
        w_target *= 1.0 - tau
        w_target += tau * w_local


def _reference_hidden(params: dict[str, np.ndarray], obs: np.ndarray, hidden: int) -> np.ndarray:
    """Plain re-implementation of the recurrence for the gradient oracle."""
    h = np.zeros(hidden)
    c = np.zeros(hidden)
    for x in obs:
        z = x @ params["lstm_wx"] + h @ params["lstm_wh"] + params["lstm_b"]
        i = _sigmoid(z[:hidden])
        f = _sigmoid(z[hidden:2 * hidden])
        g = np.tanh(z[2 * hidden:3 * hidden])
        o = _sigmoid(z[3 * hidden:])
        c = f * c + i * g
        h = o * np.tanh(c)
    return h


def numerical_gradients(network: Network, obs, upstream,
                        extra=None, eps: float = 1e-5) -> dict[str, np.ndarray]:
    """Central finite differences of sum(upstream * forward(obs)) per weight.

    Uses its own forward re-implementation, so it is independent of both
    :meth:`Network.backward` and the cached ``forward``. Perturbing a layer
    leaves earlier activations untouched, so each evaluation recomputes only
    from the perturbed layer onward. Single observation only.
    """
    p = network.params
    obs = np.asarray(obs, dtype=float)
    upstream = np.asarray(upstream, dtype=float)
    if obs.ndim != 2 or upstream.shape != (network.head_dim,):
        raise ContractViolation("numerical_gradients checks one observation at a time")
    side = None if extra is None else np.asarray(extra, dtype=float).reshape(-1)

    def feat_fresh():
        h = _reference_hidden(p, obs, network.lstm_hidden)
        return h if side is None else np.concatenate([h, side])

    def from_feat(feat):
        return from_a1(np.maximum(feat @ p["dense1_w"] + p["dense1_b"], 0.0))

    def from_a1(a1):
        return from_a2(np.maximum(a1 @ p["dense2_w"] + p["dense2_b"], 0.0))

    def from_a2(a2):
        return float(upstream @ (a2 @ p["head_w"] + p["head_b"]))

    base_feat = feat_fresh()
    base_a1 = np.maximum(base_feat @ p["dense1_w"] + p["dense1_b"], 0.0)
    base_a2 = np.maximum(base_a1 @ p["dense2_w"] + p["dense2_b"], 0.0)
    evaluators = {
        "lstm_wx": lambda: from_feat(feat_fresh()),
        "lstm_wh": lambda: from_feat(feat_fresh()),
        "lstm_b": lambda: from_feat(feat_fresh()),
        "dense1_w": lambda: from_feat(base_feat),
        "dense1_b": lambda: from_feat(base_feat),
        "dense2_w": lambda: from_a1(base_a1),
        "dense2_b": lambda: from_a1(base_a1),
        "head_w": lambda: from_a2(base_a2),
        "head_b": lambda: from_a2(base_a2),
    }

    grads = {}
    for key, tensor in p.items():
        loss = evaluators[key]
        g = np.zeros_like(tensor)
        flat = tensor.reshape(-1)
        g_flat = g.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            hi = loss()
            flat[idx] = orig - eps
            lo = loss()
            flat[idx] = orig
            g_flat[idx] = (hi - lo) / (2.0 * eps)
        grads[key] = g
    return grads


def gradient_check(trials: int = 10, *, head_dim: int = 7, extra_dim: int = 0,
                   eps: float = 1e-5, seed: int = 0) -> float:
    """Worst relative error between analytic and numerical gradients over
    freshly initialized networks and random observations."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for trial in range(trials):
        net = Network(head_dim, extra_dim=extra_dim, rng=np.random.default_rng([seed, trial]))
        obs = rng.uniform(0.0, 1.0, size=(3, 2))
        extra = rng.uniform(0.0, 6.0, size=extra_dim) if extra_dim else None
        upstream = rng.normal(size=head_dim)
        net.forward(obs, extra)
        analytic, _ = net.backward(upstream)
        numeric = numerical_gradients(net, obs, upstream, extra, eps=eps)
        for k in analytic:
            scale = np.maximum(np.maximum(np.abs(analytic[k]), np.abs(numeric[k])), 1e-4)
            worst = max(worst, float(np.max(np.abs(analytic[k] - numeric[k]) / scale)))
    return worst


__all__ = [
    "Adam",
    "ContractViolation",
    "DENSE_DIMS",
    "LSTM_HIDDEN",
    "Network",
    "TrainingError",
    "gradient_check",
    "numerical_gradients",
    "soft_update",
]
