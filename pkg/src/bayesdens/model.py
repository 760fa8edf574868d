"""Poisson mixed-model log posterior and gradient in unconstrained coordinates.

The counts c_l are Poisson with log intensity eta_l = h_l' theta, where
h_l = (1, g_l, z_1(g_l), ..., z_K(g_l)) and theta = (beta0, beta1, u).  The
intercept and slope get N(0, sigma_beta^2) priors, the penalized coefficients
u_k get N(0, sigma2), and sigma2 carries a half-Cauchy prior on its square
root expressed through the auxiliary variable a:

    sigma2 | a ~ Inverse-Gamma(1/2, rate 1/a)
    a        ~ Inverse-Gamma(1/2, rate 1/s_sigma^2)

Inverse-Gamma(kappa, lambda) here always means the rate convention
p(v) proportional to v^(-kappa-1) exp(-lambda / v).  For gradient-based
sampling the scale parameters are mapped to omega = log sigma2 and
b = log a; all expressions below include the Jacobians of that change of
variables.  Up to an additive constant,

    log p = sum_l [c_l eta_l - exp(eta_l)]
            - (beta0^2 + beta1^2) / (2 sigma_beta^2)
            - ((K + 1) / 2) omega - exp(-omega) ||u||^2 / 2
            - b - exp(-omega - b) - exp(-b) / s_sigma^2.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteResult


@dataclass(frozen=True)
class Hyperparameters:
    """Prior scales: sigma_beta for (beta0, beta1), s_sigma for the half-Cauchy."""

    sigma_beta: float = 1000.0
    s_sigma: float = 1000.0

    def __post_init__(self):
        if not (self.sigma_beta > 0 and np.isfinite(self.sigma_beta)):
            raise ValueError(f"sigma_beta must be positive and finite, got {self.sigma_beta}")
        if not (self.s_sigma > 0 and np.isfinite(self.s_sigma)):
            raise ValueError(f"s_sigma must be positive and finite, got {self.s_sigma}")


@dataclass
class ParamState:
    """Model parameters in their natural domains."""

    beta0: float
    beta1: float
    u: np.ndarray
    sigma2: float
    a: float

    def to_unconstrained(self) -> "UnconstrainedState":
        if self.sigma2 <= 0 or self.a <= 0:
            raise ValueError("sigma2 and a must be positive")
        theta = np.concatenate([[self.beta0, self.beta1], np.asarray(self.u, dtype=float)])
        return UnconstrainedState(theta=theta, omega=float(np.log(self.sigma2)), b=float(np.log(self.a)))


@dataclass
class UnconstrainedState:
    """(theta, log sigma2, log a): the coordinates the samplers move in."""

    theta: np.ndarray
    omega: float
    b: float

    def to_params(self) -> ParamState:
        return ParamState(
            beta0=float(self.theta[0]),
            beta1=float(self.theta[1]),
            u=np.asarray(self.theta[2:], dtype=float).copy(),
            sigma2=float(np.exp(self.omega)),
            a=float(np.exp(self.b)),
        )


def _logp_packed(z, counts, design, hp):
    """Log posterior for packed z = (theta, omega, b); non-finite -> raise."""
    K = design.shape[1] - 2
    theta = z[: 2 + K]
    omega, b = z[2 + K], z[3 + K]
    eta = design @ theta
    with np.errstate(over="ignore"):
        mu = np.exp(eta)
    u = theta[2:]
    uss = float(u @ u)
    val = (
        float(counts @ eta)
        - float(mu.sum())
        - (theta[0] ** 2 + theta[1] ** 2) / (2.0 * hp.sigma_beta**2)
        - 0.5 * (K + 1) * omega
        - 0.5 * np.exp(-omega) * uss
        - b
        - np.exp(-omega - b)
        - np.exp(-b) / hp.s_sigma**2
    )
    if not np.isfinite(val):
        raise NonFiniteResult("log posterior overflowed; divergent state")
    return val


def _grad_packed(z, counts, design, hp):
    """Gradient of _logp_packed with respect to (theta, omega, b)."""
    K = design.shape[1] - 2
    theta = z[: 2 + K]
    omega, b = z[2 + K], z[3 + K]
    eta = design @ theta
    with np.errstate(over="ignore"):
        mu = np.exp(eta)
    if not np.all(np.isfinite(mu)):
        raise NonFiniteResult("intensity overflowed; divergent state")
    g = np.empty(z.size)
    g[: 2 + K] = design.T @ (counts - mu)
    g[0] -= theta[0] / hp.sigma_beta**2
    g[1] -= theta[1] / hp.sigma_beta**2
    u = theta[2:]
    inv_s2 = np.exp(-omega)
    g[2 : 2 + K] -= inv_s2 * u
    g[2 + K] = -0.5 * (K + 1) + 0.5 * inv_s2 * float(u @ u) + np.exp(-omega - b)
    g[3 + K] = -1.0 + np.exp(-omega - b) + np.exp(-b) / hp.s_sigma**2
    if not np.all(np.isfinite(g)):
        raise NonFiniteResult("gradient overflowed; divergent state")
    return g


def _pack(state: UnconstrainedState) -> np.ndarray:
    return np.concatenate([state.theta, [state.omega, state.b]])


def log_posterior(state: UnconstrainedState, gc, sd, hp: Hyperparameters) -> float:
    """Log posterior density (up to a constant) at an unconstrained state."""
    return _logp_packed(_pack(state), gc.counts.astype(float), sd.design, hp)


def grad_log_posterior(state: UnconstrainedState, gc, sd, hp: Hyperparameters) -> np.ndarray:
    """Exact gradient of log_posterior in (theta, omega, b) order."""
    return _grad_packed(_pack(state), gc.counts.astype(float), sd.design, hp)
