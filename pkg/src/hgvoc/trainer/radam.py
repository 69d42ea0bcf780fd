"""Rectified Adam.

Variance rectification kicks in once the approximated sample size of the
second moment exceeds 4; before that the update is plain bias-corrected
momentum times the learning rate.  Moments are kept in float32 to match
the deployment precision of everything else.
"""

import math

import numpy as np


class OptimizerError(RuntimeError):
    """Non-finite gradient or corrupted optimizer state."""


def radam_step(data, grad, m, v, t, lr, beta1=0.9, beta2=0.999, eps=1e-6):
    """One in-place update of a single tensor; returns nothing.

    ``m`` and ``v`` are the running first/second moments (updated in
    place), ``t`` the 1-based step count.
    """
    if t < 1:
        raise OptimizerError("step count must be >= 1")
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * (grad * grad)

    rho_inf = 2.0 / (1.0 - beta2) - 1.0
    beta2_t = beta2 ** t
    rho_t = rho_inf - 2.0 * t * beta2_t / (1.0 - beta2_t)
    m_hat = m / np.asarray(1.0 - beta1 ** t, dtype=data.dtype)

    if rho_t > 4.0:
        rect = math.sqrt(
            ((rho_t - 4.0) * (rho_t - 2.0) * rho_inf)
            / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t))
        v_hat = np.sqrt(v / np.asarray(1.0 - beta2_t, dtype=data.dtype))
        data -= np.asarray(lr * rect, dtype=data.dtype) * m_hat / (v_hat + np.asarray(eps, dtype=data.dtype))
    else:
        data -= np.asarray(lr, dtype=data.dtype) * m_hat


class RAdam:
    def __init__(self, params, lr, betas=(0.9, 0.999), eps=1e-6):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = {p.name: np.zeros_like(p.data) for p in self.params}
        self.v = {p.name: np.zeros_like(p.data) for p in self.params}

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        self.t += 1
        for p in self.params:
            g = p.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise OptimizerError(
                    f"non-finite gradient in {p.name!r} at step {self.t}")
            radam_step(p.data, g, self.m[p.name], self.v[p.name], self.t,
                       self.lr, self.beta1, self.beta2, self.eps)

    def state_tensors(self, prefix):
        """Moment buffers as named arrays for checkpointing."""
        out = {}
        for p in self.params:
            out[f"{prefix}.m.{p.name}"] = self.m[p.name]
            out[f"{prefix}.v.{p.name}"] = self.v[p.name]
        return out

    def load_state_tensors(self, prefix, tensors, t):
        for p in self.params:
            self.m[p.name] = tensors[f"{prefix}.m.{p.name}"].reshape(p.data.shape).copy()
            self.v[p.name] = tensors[f"{prefix}.v.{p.name}"].reshape(p.data.shape).copy()
        self.t = int(t)
