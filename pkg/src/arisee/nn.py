"""Two-layer tanh actor-critic network with hand-written backpropagation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PARAM_ORDER = ("W1", "b1", "W2", "b2", "Wp", "bp", "Wv", "bv")
SNAPSHOT_VERSION = 1


@dataclass
class ActorCritic:
    """Shared trunk, per-element categorical policy head, scalar value head.

    ``params`` holds ``W1 (D,H) b1 (H) W2 (H,H) b2 (H) Wp (H,E*C) bp (E*C) Wv (H,1) bv (1)``.
    """

    n_inputs: int
    n_elements: int
    n_choices: int
    hidden: int = 64
    params: dict = field(default_factory=dict)

    @classmethod
    def create(cls, n_inputs: int, n_elements: int, n_choices: int, hidden: int = 64,
               seed: int = 0, scale_policy: float = 0.01) -> "ActorCritic":
        rng = np.random.default_rng(seed)
        out = n_elements * n_choices

        def dense(fan_in, fan_out, gain=1.0):
            return rng.standard_normal((fan_in, fan_out)) * gain / np.sqrt(fan_in)

        params = {
            "W1": dense(n_inputs, hidden),
            "b1": np.zeros(hidden),
            "W2": dense(hidden, hidden),
            "b2": np.zeros(hidden),
            "Wp": dense(hidden, out, scale_policy),
            "bp": np.zeros(out),
            "Wv": dense(hidden, 1),
            "bv": np.zeros(1),
        }
        return cls(n_inputs, n_elements, n_choices, hidden, params)

    @property
    def n_params(self) -> int:
        return sum(self.params[k].size for k in PARAM_ORDER)

    def get_flat(self) -> np.ndarray:
        return np.concatenate([self.params[k].ravel() for k in PARAM_ORDER])

    def set_flat(self, flat) -> None:
        flat = np.asarray(flat, dtype=float)
        if flat.size != self.n_params:
            raise ValueError("parameter vector has the wrong length")
        pos = 0
        for k in PARAM_ORDER:
            size = self.params[k].size
            self.params[k] = flat[pos:pos + size].reshape(self.params[k].shape).copy()
            pos += size

    def copy(self) -> "ActorCritic":
        return ActorCritic(self.n_inputs, self.n_elements, self.n_choices, self.hidden,
                           {k: v.copy() for k, v in self.params.items()})

    def snapshot(self) -> list:
        """Flat list with a versioned header, suitable for JSON."""
        header = [SNAPSHOT_VERSION, self.n_inputs, self.n_elements, self.n_choices, self.hidden]
        return header + self.get_flat().tolist()

    @classmethod
    def from_snapshot(cls, data) -> "ActorCritic":
        version, d, e, c, h = (int(x) for x in data[:5])
        if version != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        net = cls.create(d, e, c, h)
        net.set_flat(data[5:])
        return net


def masked_log_softmax(logits: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    """Log-probabilities over the last axis; masked-out entries get ``-inf``."""
    if mask is not None:
        logits = np.where(mask, logits, -np.inf)
    top = np.max(logits, axis=-1, keepdims=True)
    shifted = logits - top
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def forward(net: ActorCritic, states: np.ndarray, mask: np.ndarray | None = None):
    """Return ``(logp (B,E,C), value (B,), cache)``."""
    x = np.atleast_2d(np.asarray(states, dtype=float))
    if x.shape[1] != net.n_inputs:
        raise ValueError(f"state dimension {x.shape[1]} does not match network input {net.n_inputs}")
    p = net.params
    h1 = np.tanh(x @ p["W1"] + p["b1"])
    h2 = np.tanh(h1 @ p["W2"] + p["b2"])
    logits = (h2 @ p["Wp"] + p["bp"]).reshape(-1, net.n_elements, net.n_choices)
    value = (h2 @ p["Wv"] + p["bv"])[:, 0]
    logp = masked_log_softmax(logits, mask)
    return logp, value, (x, h1, h2)


def ppo_loss(net: ActorCritic, states, actions, logp_old, advantages, returns,
             clip: float = 0.2, value_coef: float = 0.5, entropy_coef: float = 0.01,
             mask: np.ndarray | None = None, with_grad: bool = True):
    """Total loss ``-L_clip + c_v * MSE(V, G) - c_e * entropy`` and its gradient.

    Returns ``(loss, grads, info)`` where ``grads`` mirrors ``net.params``.
    """
    actions = np.asarray(actions, dtype=np.int64)
    adv = np.asarray(advantages, dtype=float)
    ret = np.asarray(returns, dtype=float)
    logp, value, (x, h1, h2) = forward(net, states, mask)
    b = logp.shape[0]
    probs = np.exp(logp)
    rows = np.arange(b)[:, None]
    cols = np.arange(net.n_elements)[None, :]
    logp_act = logp[rows, cols, actions].sum(axis=1)
    ratio = np.exp(logp_act - np.asarray(logp_old, dtype=float))
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip)
    surr = np.minimum(ratio * adv, clipped * adv)
    plogp = np.where(probs > 0, probs * np.where(np.isfinite(logp), logp, 0.0), 0.0)
    entropy_el = -plogp.sum(axis=2)
    entropy = entropy_el.sum(axis=1)
    v_err = value - ret
    loss = -surr.mean() + value_coef * np.mean(v_err ** 2) - entropy_coef * entropy.mean()
    info = {"ratio": ratio, "entropy": float(entropy.mean()), "value_loss": float(np.mean(v_err ** 2)),
            "policy_objective": float(surr.mean())}
    if not with_grad:
        return float(loss), None, info

    active = (ratio * adv <= clipped * adv)
    d_logp_act = np.where(active, -adv * ratio, 0.0) / b
    onehot = np.zeros_like(probs)
    onehot[rows, cols, actions] = 1.0
    safe_logp = np.where(np.isfinite(logp), logp, 0.0)
    d_logits = d_logp_act[:, None, None] * (onehot - probs)
    d_logits += (entropy_coef / b) * probs * (safe_logp + entropy_el[:, :, None])
    d_logits = d_logits.reshape(b, -1)
    d_value = 2.0 * value_coef * v_err / b

    p = net.params
    grads = {
        "Wp": h2.T @ d_logits,
        "bp": d_logits.sum(axis=0),
        "Wv": h2.T @ d_value[:, None],
        "bv": np.array([d_value.sum()]),
    }
    d_h2 = d_logits @ p["Wp"].T + d_value[:, None] @ p["Wv"].T
    d_a2 = d_h2 * (1.0 - h2 ** 2)
    grads["W2"] = h1.T @ d_a2
    grads["b2"] = d_a2.sum(axis=0)
    d_h1 = d_a2 @ p["W2"].T
    d_a1 = d_h1 * (1.0 - h1 ** 2)
    grads["W1"] = x.T @ d_a1
    grads["b1"] = d_a1.sum(axis=0)
    return float(loss), grads, info


def flatten_grads(grads: dict) -> np.ndarray:
    return np.concatenate([grads[k].ravel() for k in PARAM_ORDER])


@dataclass
class Adam:
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_grad_norm: float | None = 0.5
    t: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None

    def step(self, net: ActorCritic, grads) -> None:
        """One update from a gradient dict or a flat gradient vector."""
        g = flatten_grads(grads) if isinstance(grads, dict) else np.asarray(grads, dtype=float)
        if self.max_grad_norm is not None:
            norm = float(np.sqrt(g @ g))
            if norm > self.max_grad_norm:
                g = g * (self.max_grad_norm / norm)
        if self.t == 0 or not isinstance(self.m, np.ndarray):
            self.m = np.zeros_like(g)
            self.v = np.zeros_like(g)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * g
        self.v = self.beta2 * self.v + (1 - self.beta2) * g * g
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        net.set_flat(net.get_flat() - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))
