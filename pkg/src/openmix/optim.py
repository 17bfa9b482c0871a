"""RMSprop with per-parameter running second moments."""

from __future__ import annotations

import numpy as np

from .nn import TwoHeadMLP, iter_params, zeros_like_model


class RmspropState:
    """Running mean of squared gradients for every model parameter.

    Update rule per parameter: v <- rho*v + (1-rho)*g^2, then
    p <- p - lr * g / (sqrt(v) + eps). Deterministic and in-place.
    """

    def __init__(
        self,
        model: TwoHeadMLP,
        lr: float = 1e-4,
        rho: float = 0.9,
        eps: float = 1e-8,
    ) -> None:
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        if not 0.0 <= rho < 1.0:
            raise ValueError("decay rho must be in [0, 1)")
        self.lr = lr
        self.rho = rho
        self.eps = eps
        self.square_avg = zeros_like_model(model)

    def step(self, params: TwoHeadMLP, grads: TwoHeadMLP) -> None:
        """Apply one update to params in place."""
        for (_, p), (_, g), (_, v) in zip(
            iter_params(params), iter_params(grads), iter_params(self.square_avg)
        ):
            if p.shape != g.shape:
                raise ValueError("gradient shape does not match parameter shape")
            v *= self.rho
            v += (1.0 - self.rho) * g * g
            p -= self.lr * g / (np.sqrt(v) + self.eps)
