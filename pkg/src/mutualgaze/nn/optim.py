"""Stochastic gradient descent with classical momentum.

Update rule per parameter: v <- m * v + g, w <- w - lr * v, with the
velocity buffer starting at zero.
"""

import numpy as np


class SGD:
    def __init__(self, params, lr=1e-3, momentum=0.9):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        if not 0.0 <= momentum < 1.0:
            raise ValueError(f"momentum must be in [0,1), got {momentum}")
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        for p, v in zip(self.params, self.velocity):
            if p.grad is None:
                continue
            v *= self.momentum
            v += p.grad
            p.data -= self.lr * v
