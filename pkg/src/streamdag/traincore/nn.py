"""GRU cell and MLP with hand-written forward/backward passes.

Parameter blocks live in a flat ``dict[str, np.ndarray]`` under namespaced
keys (``gru1_wz``, ``mlp_w1``, ...) so SGD updates and finite-difference
checks can iterate one structure. The GRU consumes the partner state and the
event features as its input ``x = [h_other, feat]`` and the node's own state
as the hidden vector:

    z = sigmoid(Wz x + Uz h + bz)
    r = sigmoid(Wr x + Ur h + br)
    c = tanh(Wh x + Uh (r * h) + bh)
    out = (1 - z) * h + z * c
"""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError

GRU_FIELDS = ("wz", "uz", "bz", "wr", "ur", "br", "wh", "uh", "bh")


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def gru_param_init(rng: np.random.Generator, dim: int, x_dim: int,
                   prefix: str) -> dict[str, np.ndarray]:
    out = {}
    for gate in ("z", "r", "h"):
        out[f"{prefix}w{gate}"] = rng.normal(0.0, 1.0 / np.sqrt(x_dim), (dim, x_dim))
        out[f"{prefix}u{gate}"] = rng.normal(0.0, 1.0 / np.sqrt(dim), (dim, dim))
        out[f"{prefix}b{gate}"] = np.zeros(dim)
    return out


def gru_forward(params: dict[str, np.ndarray], prefix: str, h_self: np.ndarray,
                h_other: np.ndarray, feat: np.ndarray) -> tuple[np.ndarray, tuple]:
    if h_self.shape != h_other.shape:
        raise ValidationError(
            f"state dims disagree: {h_self.shape} vs {h_other.shape}")
    x = np.concatenate([h_other, feat])
    if params[prefix + "wz"].shape[1] != x.shape[0]:
        raise ValidationError(
            f"input dim {x.shape[0]} does not match "
            f"{params[prefix + 'wz'].shape[1]}")
    z = sigmoid(params[prefix + "wz"] @ x + params[prefix + "uz"] @ h_self
                + params[prefix + "bz"])
    r = sigmoid(params[prefix + "wr"] @ x + params[prefix + "ur"] @ h_self
                + params[prefix + "br"])
    rh = r * h_self
    c = np.tanh(params[prefix + "wh"] @ x + params[prefix + "uh"] @ rh
                + params[prefix + "bh"])
    out = (1.0 - z) * h_self + z * c
    return out, (x, h_self, z, r, rh, c)


def gru_backward(params: dict[str, np.ndarray], prefix: str, cache: tuple,
                 g_out: np.ndarray, grads: dict[str, np.ndarray]
                 ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Accumulates parameter grads in-place; returns (g_h_self, g_h_other, g_feat)."""
    x, h_self, z, r, rh, c = cache
    dim = h_self.shape[0]

    g_z = g_out * (c - h_self)
    g_c = g_out * z
    g_h = g_out * (1.0 - z)

    g_ah = g_c * (1.0 - c * c)
    grads[prefix + "wh"] += np.outer(g_ah, x)
    grads[prefix + "uh"] += np.outer(g_ah, rh)
    grads[prefix + "bh"] += g_ah
    g_x = params[prefix + "wh"].T @ g_ah
    g_rh = params[prefix + "uh"].T @ g_ah
    g_r = g_rh * h_self
    g_h += g_rh * r

    g_ar = g_r * r * (1.0 - r)
    grads[prefix + "wr"] += np.outer(g_ar, x)
    grads[prefix + "ur"] += np.outer(g_ar, h_self)
    grads[prefix + "br"] += g_ar
    g_x += params[prefix + "wr"].T @ g_ar
    g_h += params[prefix + "ur"].T @ g_ar

    g_az = g_z * z * (1.0 - z)
    grads[prefix + "wz"] += np.outer(g_az, x)
    grads[prefix + "uz"] += np.outer(g_az, h_self)
    grads[prefix + "bz"] += g_az
    g_x += params[prefix + "wz"].T @ g_az
    g_h += params[prefix + "uz"].T @ g_az

    return g_h, g_x[:dim], g_x[dim:]


def mlp_param_init(rng: np.random.Generator, dim: int, in_dim: int,
                   prefix: str = "mlp_") -> dict[str, np.ndarray]:
    return {
        prefix + "w1": rng.normal(0.0, 1.0 / np.sqrt(in_dim), (dim, in_dim)),
        prefix + "b1": np.zeros(dim),
        prefix + "w2": rng.normal(0.0, 1.0 / np.sqrt(dim), (dim, dim)),
        prefix + "b2": np.zeros(dim),
    }


def mlp_forward(params: dict[str, np.ndarray], x: np.ndarray,
                prefix: str = "mlp_") -> tuple[np.ndarray, tuple]:
    hidden = np.tanh(params[prefix + "w1"] @ x + params[prefix + "b1"])
    out = params[prefix + "w2"] @ hidden + params[prefix + "b2"]
    return out, (x, hidden)


def mlp_backward(params: dict[str, np.ndarray], cache: tuple, g_out: np.ndarray,
                 grads: dict[str, np.ndarray], prefix: str = "mlp_") -> np.ndarray:
    """Accumulates parameter grads in-place; returns gradient w.r.t. input."""
    x, hidden = cache
    grads[prefix + "w2"] += np.outer(g_out, hidden)
    grads[prefix + "b2"] += g_out
    g_hidden = params[prefix + "w2"].T @ g_out
    g_a1 = g_hidden * (1.0 - hidden * hidden)
    grads[prefix + "w1"] += np.outer(g_a1, x)
    grads[prefix + "b1"] += g_a1
    return params[prefix + "w1"].T @ g_a1


def softmax_cross_entropy(scores: np.ndarray, true_index: int = 0
                          ) -> tuple[float, np.ndarray]:
    """Loss -log softmax(scores)[true_index] and its gradient w.r.t. scores."""
    if scores.size == 0:
        raise ValidationError("empty candidate set")
    shifted = scores - scores.max()
    exps = np.exp(shifted)
    probs = exps / exps.sum()
    loss = -float(np.log(probs[true_index]))
    g = probs.copy()
    g[true_index] -= 1.0
    return loss, g
