"""Monte Carlo engines for the Poisson mixed model.

Two interchangeable samplers produce the retained coefficient draws:

* ``fit_slice``: scalar Gibbs sweeps where every coefficient conditional has
  the form exp(s1 x - x^2 / (2 s2) - sum_j exp(x s3_j + s4_j)) and is drawn
  with Neal's stepping-out slice sampler; the variance layers are exact
  Inverse-Gamma draws.
* ``fit_nuts``: a no-U-turn sampler on the unconstrained coordinates with
  identity mass matrix, leapfrog integration, slice-within-trajectory tree
  doubling, and dual-averaging step size adaptation during warmup.

All randomness flows through numpy PCG64 generators; independent substreams
are derived from (seed, stream_id) so replicated runs do not depend on
execution order.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceLimit, NonFiniteResult, SliceStuck
from .model import Hyperparameters, _grad_packed, _logp_packed

_SHRINK_LIMIT = 1000
_DELTA_MAX = 1000.0  # energy-error threshold that flags a divergent leapfrog path
_DIVERGENCE_FRACTION = 0.10


@dataclass
class FitConfig:
    """Engine choice and Monte Carlo controls.

    ``warmup=None`` resolves to the per-engine default: 100 sweeps for the
    Gibbs/slice engine, 1000 iterations for NUTS.
    """

    method: str = "slice"
    warmup: int | None = None
    retained: int = 1000
    seed: int = 0
    slice_width: float = 1.0
    slice_max_steps: int = 50
    nuts_target_accept: float = 0.8
    nuts_max_depth: int = 10

    def __post_init__(self):
        if self.method not in ("slice", "nuts"):
            raise ValueError(f"method must be 'slice' or 'nuts', got {self.method!r}")
        if self.retained < 100:
            raise ValueError(f"retained must be >= 100, got {self.retained}")
        if self.warmup is not None and self.warmup < 0:
            raise ValueError(f"warmup must be >= 0, got {self.warmup}")
        if not (0.0 < self.nuts_target_accept < 1.0):
            raise ValueError("nuts_target_accept must be in (0, 1)")
        if self.slice_width <= 0:
            raise ValueError("slice_width must be positive")

    def resolved_warmup(self) -> int:
        if self.warmup is not None:
            return self.warmup
        return 100 if self.method == "slice" else 1000


@dataclass
class PosteriorSamples:
    """Retained draws: one row of coef per sweep, plus the variance layers."""

    coef: np.ndarray       # R x (2+K) draws of (beta0, beta1, u)
    sigma2: np.ndarray     # R
    a: np.ndarray          # R
    diagnostics: dict = field(default_factory=dict)

    @property
    def R(self) -> int:
        return self.coef.shape[0]


def substream(seed, stream_id=0) -> np.random.Generator:
    """Independent, reproducible generator for (seed, stream_id)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((int(seed), int(stream_id)))))


def inverse_gamma(rng, shape, rate) -> float:
    """One Inverse-Gamma(shape, rate) draw: reciprocal of Gamma(shape, rate)."""
    return 1.0 / rng.gamma(shape, 1.0 / rate)


# ---------------------------------------------------------------------------
# Slice sampling
# ---------------------------------------------------------------------------

def sample_H(s1, s2, s3, s4, x0, cfg: FitConfig, rng) -> float:
    """Draw from the density proportional to exp(s1 x - x^2/(2 s2) - 1' exp(x s3 + s4)).

    Stepping-out-and-shrinkage slice sampling (Neal 2003).  Each term of the
    log density is concave in x, so the horizontal slice is one interval and
    shrinkage cannot cut off mass.
    """
    s3 = np.asarray(s3, dtype=float)
    s4 = np.asarray(s4, dtype=float)
    half_prec = 0.5 / s2

    def logf(x):
        with np.errstate(over="ignore"):
            expo = float(np.exp(x * s3 + s4).sum()) if s3.size else 0.0
        return s1 * x - x * x * half_prec - expo

    f0 = logf(x0)
    if not np.isfinite(f0):
        raise NonFiniteResult("slice sampler started at a state with non-finite density")
    level = f0 - rng.exponential()

    w = cfg.slice_width
    left = x0 - w * rng.uniform()
    right = left + w
    for _ in range(cfg.slice_max_steps):
        if logf(left) <= level:
            break
        left -= w
    for _ in range(cfg.slice_max_steps):
        if logf(right) <= level:
            break
        right += w

    for _ in range(_SHRINK_LIMIT):
        x1 = rng.uniform(left, right)
        if logf(x1) >= level:
            return x1
        if x1 < x0:
            left = x1
        else:
            right = x1
    raise SliceStuck("no acceptance after shrinkage limit; numeric pathology")


def fit_slice(gc, sd, hp: Hyperparameters, cfg: FitConfig) -> PosteriorSamples:
    """Slice-sampling-within-Gibbs fit.

    Each sweep updates the 2+K coefficients one at a time from their exact
    full conditionals via ``sample_H`` (using the freshest values of the
    other coefficients), then refreshes the auxiliary a and the spline
    variance sigma2 from their closed-form Inverse-Gamma conditionals.
    """
    t0 = time.perf_counter()
    rng = substream(cfg.seed, 0)
    C = sd.design
    c = gc.counts.astype(float)
    K = C.shape[1] - 2
    Ctc = C.T @ c

    theta = np.zeros(2 + K)
    theta[0] = math.log(float(c.mean()) + 0.1)
    eta = C @ theta
    sigma2 = 1.0
    a = 1.0
    v = np.empty(2 + K)

    warmup = cfg.resolved_warmup()
    total = warmup + cfg.retained
    coef = np.empty((cfg.retained, 2 + K))
    sig_draws = np.empty(cfg.retained)
    a_draws = np.empty(cfg.retained)

    for g in range(total):
        v[:2] = hp.sigma_beta**2
        v[2:] = sigma2
        for j in range(2 + K):
            cj = C[:, j]
            s4 = eta - theta[j] * cj
            xj = sample_H(Ctc[j], v[j], cj, s4, theta[j], cfg, rng)
            theta[j] = xj
            eta = s4 + xj * cj
        a = inverse_gamma(rng, 1.0, 1.0 / sigma2 + 1.0 / hp.s_sigma**2)
        uss = float(theta[2:] @ theta[2:])
        sigma2 = inverse_gamma(rng, 0.5 * (K + 1), 0.5 * uss + 1.0 / a)
        if g >= warmup:
            r = g - warmup
            coef[r] = theta
            sig_draws[r] = sigma2
            a_draws[r] = a

    if not (np.all(np.isfinite(coef)) and np.all(np.isfinite(sig_draws))):
        raise NonFiniteResult("non-finite draws in Gibbs output")
    diag = {
        "divergences": 0,
        "mean_accept": 1.0,
        "seconds": time.perf_counter() - t0,
    }
    return PosteriorSamples(coef=coef, sigma2=sig_draws, a=a_draws, diagnostics=diag)


# ---------------------------------------------------------------------------
# No-U-turn sampling
# ---------------------------------------------------------------------------

def leapfrog(z, p, eps, logp_grad):
    """One leapfrog step; returns (z', p', logp', grad').

    ``logp_grad(z) -> (logp, grad)``.  Composed with momentum negation this
    map is an involution, which is what makes the sampler reversible.
    """
    logp, grad = logp_grad(z)
    p_half = p + 0.5 * eps * grad
    z_new = z + eps * p_half
    logp_new, grad_new = logp_grad(z_new)
    p_new = p_half + 0.5 * eps * grad_new
    return z_new, p_new, logp_new, grad_new


def _find_reasonable_epsilon(z, logp_grad, rng):
    """Heuristic initial step size: double or halve until the one-step
    acceptance probability crosses 1/2."""
    eps = 1.0
    logp, _ = logp_grad(z)
    p = rng.standard_normal(z.size)
    _, p1, logp1, _ = leapfrog(z, p, eps, logp_grad)
    joint0 = logp - 0.5 * float(p @ p)
    joint1 = logp1 - 0.5 * float(p1 @ p1)
    direction = 1.0 if (joint1 - joint0) > math.log(0.5) else -1.0
    for _ in range(100):
        eps *= 2.0**direction
        _, p1, logp1, _ = leapfrog(z, p, eps, logp_grad)
        joint1 = logp1 - 0.5 * float(p1 @ p1)
        if direction * (joint1 - joint0) <= direction * math.log(0.5):
            break
    return eps


class _Tree:
    __slots__ = (
        "z_minus", "p_minus", "z_plus", "p_plus",
        "z_prop", "n_valid", "keep_going", "diverged",
        "alpha_sum", "n_alpha",
    )

    def __init__(self, z_minus, p_minus, z_plus, p_plus, z_prop, n_valid,
                 keep_going, diverged, alpha_sum, n_alpha):
        self.z_minus = z_minus
        self.p_minus = p_minus
        self.z_plus = z_plus
        self.p_plus = p_plus
        self.z_prop = z_prop
        self.n_valid = n_valid
        self.keep_going = keep_going
        self.diverged = diverged
        self.alpha_sum = alpha_sum
        self.n_alpha = n_alpha


def _no_uturn(z_minus, z_plus, p_minus, p_plus):
    dz = z_plus - z_minus
    return (dz @ p_minus) >= 0.0 and (dz @ p_plus) >= 0.0


def _build_tree(z, p, log_u, direction, depth, eps, joint0, logp_grad, rng):
    if depth == 0:
        z1, p1, logp1, _ = leapfrog(z, p, direction * eps, logp_grad)
        joint1 = logp1 - 0.5 * float(p1 @ p1)
        n_valid = 1 if log_u <= joint1 else 0
        diverged = log_u - _DELTA_MAX > joint1
        alpha = min(1.0, math.exp(min(0.0, joint1 - joint0)))
        return _Tree(z1, p1, z1, p1, z1, n_valid, not diverged, diverged, alpha, 1)

    tree = _build_tree(z, p, log_u, direction, depth - 1, eps, joint0, logp_grad, rng)
    if tree.keep_going:
        if direction == -1:
            sub = _build_tree(tree.z_minus, tree.p_minus, log_u, direction,
                              depth - 1, eps, joint0, logp_grad, rng)
            tree.z_minus, tree.p_minus = sub.z_minus, sub.p_minus
        else:
            sub = _build_tree(tree.z_plus, tree.p_plus, log_u, direction,
                              depth - 1, eps, joint0, logp_grad, rng)
            tree.z_plus, tree.p_plus = sub.z_plus, sub.p_plus
        total = tree.n_valid + sub.n_valid
        if total > 0 and rng.uniform() < sub.n_valid / total:
            tree.z_prop = sub.z_prop
        tree.n_valid = total
        tree.alpha_sum += sub.alpha_sum
        tree.n_alpha += sub.n_alpha
        tree.diverged = tree.diverged or sub.diverged
        tree.keep_going = (
            sub.keep_going
            and _no_uturn(tree.z_minus, tree.z_plus, tree.p_minus, tree.p_plus)
        )
    return tree


def nuts_chain(logp_grad, z0, warmup, retained, rng,
               target_accept=0.8, max_depth=10):
    """Generic NUTS driver; returns (draws, diagnostics).

    ``logp_grad`` must return (log density, gradient) and may signal an
    untenable state by returning -inf; dual averaging adapts the step size
    toward ``target_accept`` during warmup and freezes it afterwards.
    """

    def safe(z):
        try:
            return _logp_packed_like(z)
        except NonFiniteResult:
            return -np.inf, np.zeros_like(z)

    def _logp_packed_like(z):
        return logp_grad(z)

    z = np.asarray(z0, dtype=float).copy()
    eps = _find_reasonable_epsilon(z, safe, rng)
    mu = math.log(10.0 * eps)
    log_eps_bar = 0.0
    h_bar = 0.0
    gamma, t0, kappa = 0.05, 10.0, 0.75

    draws = np.empty((retained, z.size))
    divergences = 0
    accept_sum = 0.0
    total = warmup + retained

    for m in range(1, total + 1):
        logp, _ = safe(z)
        p0 = rng.standard_normal(z.size)
        joint0 = logp - 0.5 * float(p0 @ p0)
        log_u = joint0 - rng.exponential()

        z_minus = z.copy()
        z_plus = z.copy()
        p_minus = p0.copy()
        p_plus = p0.copy()
        z_next = z.copy()
        n_valid = 1
        keep_going = True
        diverged = False
        alpha_sum, n_alpha = 0.0, 1
        depth = 0

        while keep_going and depth < max_depth:
            direction = 1 if rng.uniform() < 0.5 else -1
            if direction == -1:
                tree = _build_tree(z_minus, p_minus, log_u, direction, depth,
                                   eps, joint0, safe, rng)
                z_minus, p_minus = tree.z_minus, tree.p_minus
            else:
                tree = _build_tree(z_plus, p_plus, log_u, direction, depth,
                                   eps, joint0, safe, rng)
                z_plus, p_plus = tree.z_plus, tree.p_plus
            if tree.keep_going and rng.uniform() < min(1.0, tree.n_valid / n_valid):
                z_next = tree.z_prop
            n_valid += tree.n_valid
            diverged = diverged or tree.diverged
            alpha_sum, n_alpha = tree.alpha_sum, tree.n_alpha
            keep_going = (
                tree.keep_going
                and _no_uturn(z_minus, z_plus, p_minus, p_plus)
            )
            depth += 1

        z = z_next
        accept_stat = alpha_sum / n_alpha

        if m <= warmup:
            frac = 1.0 / (m + t0)
            h_bar = (1.0 - frac) * h_bar + frac * (target_accept - accept_stat)
            log_eps = mu - math.sqrt(m) / gamma * h_bar
            eta = m**-kappa
            log_eps_bar = (1.0 - eta) * log_eps_bar + eta * log_eps
            eps = math.exp(log_eps)
            if m == warmup:
                eps = math.exp(log_eps_bar)
        else:
            draws[m - warmup - 1] = z
            divergences += int(diverged)
            accept_sum += accept_stat

    diagnostics = {
        "divergences": divergences,
        "mean_accept": accept_sum / retained,
        "step_size": eps,
    }
    return draws, diagnostics


def fit_nuts(gc, sd, hp: Hyperparameters, cfg: FitConfig) -> PosteriorSamples:
    """No-U-turn fit of the model on unconstrained coordinates."""
    t0 = time.perf_counter()
    rng = substream(cfg.seed, 0)
    C = sd.design
    c = gc.counts.astype(float)
    K = C.shape[1] - 2

    def logp_grad(z):
        return _logp_packed(z, c, C, hp), _grad_packed(z, c, C, hp)

    z0 = np.zeros(K + 4)
    z0[0] = math.log(float(c.mean()) + 0.1)
    draws, diag = nuts_chain(
        logp_grad, z0, cfg.resolved_warmup(), cfg.retained, rng,
        target_accept=cfg.nuts_target_accept, max_depth=cfg.nuts_max_depth,
    )
    if not np.all(np.isfinite(draws)):
        raise NonFiniteResult("non-finite draws in NUTS output")
    if diag["divergences"] > _DIVERGENCE_FRACTION * cfg.retained:
        raise DivergenceLimit(
            f"{diag['divergences']} divergent transitions out of {cfg.retained} retained"
        )
    diag = {
        "divergences": diag["divergences"],
        "mean_accept": diag["mean_accept"],
        "seconds": time.perf_counter() - t0,
    }
    return PosteriorSamples(
        coef=draws[:, : 2 + K].copy(),
        sigma2=np.exp(draws[:, 2 + K]),
        a=np.exp(draws[:, 3 + K]),
        diagnostics=diag,
    )


def fit(gc, sd, hp: Hyperparameters, cfg: FitConfig) -> PosteriorSamples:
    """Dispatch on cfg.method."""
    if cfg.method == "slice":
        return fit_slice(gc, sd, hp, cfg)
    return fit_nuts(gc, sd, hp, cfg)
