"""Subcritical Feller branching diffusion: closed forms and exact sampling.

The diffusion dX = sqrt(X) dW - c X dt with c > 0 is absorbed at 0. Its
transition law given X_0 = x0 is compound Poisson: K ~ Poisson(x0 * r(t))
clusters, each Exponential with rate u(t), where

    r(t) = 2c e^{-ct} / (1 - e^{-ct}),    u(t) = 2c / (1 - e^{-ct}).

The Laplace exponent of that compound law is r(t) * lambda / (u(t) + lambda),
which equals v(t, lambda) below, so the sampler is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError


def one_minus_exp_neg(x):
    """1 - e^{-x} without cancellation for small x."""
    return -np.expm1(-x)


@dataclass(frozen=True)
class FellerTransition:
    """Transition-law constants of the c-subcritical Feller diffusion."""

    c: float

    def __post_init__(self):
        if self.c <= 0:
            raise InvalidParameterError(f"c must be positive, got {self.c}")

    def cluster_rate(self, t: float) -> float:
        """r(t): Poisson intensity per unit initial mass."""
        assert t > 0
        return 2.0 * self.c * np.exp(-self.c * t) / one_minus_exp_neg(self.c * t)

    def cluster_scale(self, t: float) -> float:
        """u(t): exponential rate of a single cluster's mass."""
        assert t > 0
        return 2.0 * self.c / one_minus_exp_neg(self.c * t)

    def v(self, t: float, lam: float) -> float:
        return v_laplace(t, lam, self.c)


def v_laplace(t, lam, c):
    """v(t, lambda) with E[exp(-lambda X_t) | X_0 = x0] = exp(-x0 v(t, lambda))."""
    if c <= 0:
        raise InvalidParameterError(f"c must be positive, got {c}")
    t = np.asarray(t, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(t < 0):
        raise InvalidParameterError("t must be nonnegative")
    om = one_minus_exp_neg(c * t)
    out = 2.0 * lam * c * np.exp(-c * t) / (lam * om + 2.0 * c)
    return out if out.ndim else float(out)


def survival_probability(x0, t, c):
    """P(X_t != 0 | X_0 = x0) = 1 - exp(-x0 r(t))."""
    if t <= 0:
        raise InvalidParameterError("survival probability needs t > 0")
    r = FellerTransition(c).cluster_rate(t)
    return float(one_minus_exp_neg(np.asarray(x0, dtype=float) * r)) if np.ndim(x0) == 0 \
        else one_minus_exp_neg(np.asarray(x0, dtype=float) * r)


def fbd_transition_sample(x0, t, c, rng: np.random.Generator, size=None):
    """Exact draw(s) of X_t given X_0 = x0.

    K ~ Poisson(x0 r(t)) clusters, total mass Gamma(K, rate u(t)). With
    size=None a scalar is returned, otherwise an array of independent draws.
    """
    if t <= 0:
        raise InvalidParameterError("transition sampling needs t > 0")
    tr = FellerTransition(c)
    r = tr.cluster_rate(t)
    u = tr.cluster_scale(t)
    if size is None:
        if x0 == 0.0:
            return 0.0
        k = rng.poisson(x0 * r)
        return float(rng.gamma(k, 1.0 / u)) if k > 0 else 0.0
    k = rng.poisson(x0 * r, size=size)
    out = np.zeros(size, dtype=float)
    pos = k > 0
    out[pos] = rng.gamma(k[pos], 1.0 / u)
    return out


def fbd_euler_sample(x0, t, c, dt, rng: np.random.Generator, size=None):
    """Euler-Maruyama cross-check sampler, absorbed (clamped) at 0."""
    if dt <= 0:
        raise InvalidParameterError("dt must be positive")
    n_steps = int(round(t / dt))
    scalar = size is None
    n = 1 if scalar else size
    x = np.full(n, float(x0))
    sq_dt = np.sqrt(dt)
    for _ in range(n_steps):
        alive = x > 0.0
        if not alive.any():
            break
        dw = rng.standard_normal(n) * sq_dt
        x = np.where(alive, x + np.sqrt(np.maximum(x, 0.0)) * dw - c * x * dt, 0.0)
        np.maximum(x, 0.0, out=x)
    return float(x[0]) if scalar else x


def kappa_density(t, x, c):
    """Entrance-law density: total mass r(t), exponential shape with rate u(t)."""
    if t <= 0:
        raise InvalidParameterError("kappa density needs t > 0")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise InvalidParameterError("kappa density is supported on x > 0")
    om = one_minus_exp_neg(c * t)
    out = (2.0 * c) ** 2 * np.exp(-c * t) / om ** 2 * np.exp(-2.0 * c * x / om)
    return out if out.ndim else float(out)


def gamma_equilibrium_sample(a, c, rng: np.random.Generator, size=None):
    """Equilibrium with immigration level a: Gamma(shape 2ca, rate 2c)."""
    if a < 0:
        raise InvalidParameterError("immigration level a must be nonnegative")
    if c <= 0:
        raise InvalidParameterError(f"c must be positive, got {c}")
    if a == 0:
        return 0.0 if size is None else np.zeros(size)
    draw = rng.gamma(2.0 * c * a, 1.0 / (2.0 * c), size=size)
    return float(draw) if size is None else draw
