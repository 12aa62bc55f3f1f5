"""Six-layer scalar tanh chain: the minimal decoupling demonstration.

The coupled network is h_i = tanh(w_i * h_{i-1}) with h_0 = x; its
computational chain needs 6 sequential steps. Splitting at the third hidden
unit introduces a free scalar phi, giving two independent 3-step segments

    x -> h1 -> h2 -> h3        phi -> h4 -> h5 -> h6

trained under  0.5 * (h6 - target)^2 + 0.5 * alpha * (h3 - phi)^2  with
plain gradient descent on all weights and phi. When the constraint h3 == phi
holds, the decoupled network reproduces the coupled one exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class ToyConfig:
    alpha: float = 1.0
    lr: float = 0.05
    steps: int = 2000
    seed: int = 0
    x: float = 1.0
    target: float = 0.5


@dataclass
class ToyReport:
    segment_lengths: tuple[int, int]
    residual: float            # |h3 - phi| after training
    coupled_gap: float         # |decoupled h6 - coupled h6| with trained weights
    h3: float
    phi: float
    h6_decoupled: float
    h6_coupled: float
    final_loss: float
    loss_curve: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"segment_lengths": list(self.segment_lengths),
                "residual": self.residual, "coupled_gap": self.coupled_gap,
                "h3": self.h3, "phi": self.phi,
                "h6_decoupled": self.h6_decoupled,
                "h6_coupled": self.h6_coupled, "final_loss": self.final_loss}


def _segment(ws, h0: float) -> list[float]:
    hs = [h0]
    for w in ws:
        hs.append(math.tanh(w * hs[-1]))
    return hs


def coupled_forward(w: np.ndarray, x: float) -> float:
    return _segment(w, x)[-1]


def toy_six_layer(config: ToyConfig | None = None,
                  phi_init: float | None = None) -> ToyReport:
    """Train the decoupled chain; ``phi_init`` overrides the zero start
    (pass the coupled h3 to verify exact equivalence without training)."""
    config = config or ToyConfig()
    rng = np.random.default_rng(config.seed)
    w = rng.uniform(-1.0, 1.0, 6)
    phi = 0.0 if phi_init is None else float(phi_init)
    alpha, lr, x, y = config.alpha, config.lr, config.x, config.target

    losses = []
    for _ in range(config.steps):
        # Two independent 3-step segments (parallel in the decoupled model).
        seg1 = _segment(w[:3], x)       # x, h1, h2, h3
        seg2 = _segment(w[3:], phi)     # phi, h4, h5, h6
        h3, h6 = seg1[-1], seg2[-1]
        loss = 0.5 * (h6 - y) ** 2 + 0.5 * alpha * (h3 - phi) ** 2
        losses.append(loss)

        gw = np.zeros(6)
        # Segment 2: d loss / d h6 back to w4..w6 and phi.
        g = h6 - y
        for i in (5, 4, 3):
            ga = g * (1.0 - seg2[i - 2] ** 2)
            gw[i] = ga * seg2[i - 3]
            g = ga * w[i]
        gphi = g + alpha * (phi - h3)
        # Segment 1: penalty pulls h3 toward phi through w1..w3.
        g = alpha * (h3 - phi)
        for i in (2, 1, 0):
            ga = g * (1.0 - seg1[i + 1] ** 2)
            gw[i] = ga * seg1[i]
            g = ga * w[i]

        w -= lr * gw
        phi -= lr * gphi

    seg1 = _segment(w[:3], x)
    seg2 = _segment(w[3:], phi)
    h3, h6d = seg1[-1], seg2[-1]
    h6c = coupled_forward(w, x)
    final_loss = 0.5 * (h6d - y) ** 2 + 0.5 * alpha * (h3 - phi) ** 2
    return ToyReport(segment_lengths=(3, 3), residual=abs(h3 - phi),
                     coupled_gap=abs(h6d - h6c), h3=h3, phi=phi,
                     h6_decoupled=h6d, h6_coupled=h6c,
                     final_loss=final_loss, loss_curve=losses)
