"""Exploration-rate controllers.

Three controllers share one small interface (``epsilon``, ``observe``,
``reset``):

* :class:`ConstantEpsilon`: a fixed rate.
* :class:`AnnealedEpsilon`: geometric decay with a floor.
* :class:`EpsilonBmc`: the exploration rate is the posterior mean of a
  Beta-distributed weight ``w`` on the uniform-return model, against the
  greedy-return model. Returns (expected-SARSA targets) are modelled with a
  Normal-Gamma posterior; the posterior predictive, a Student-t, scores the
  greedy and uniform targets, and those two evidences drive a Bayesian model
  combination update of the Beta, projected back by moment matching.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class NormalGammaParams:
    mu0: float = 0.0
    tau0: float = 1.0
    a0: float = 2.0
    b0: float = 1.0

    def __post_init__(self):
        if not self.tau0 > 0:
            raise ValueError("tau0 must be > 0")
        if not self.a0 > 1:
            raise ValueError("a0 must be > 1 for a finite predictive variance")
        if not self.b0 > 0:
            raise ValueError("b0 must be > 0")


@dataclass
class ReturnStats:
    """Running count, mean and population variance (Welford recurrence)."""

    count: int = 0
    mean_hat: float = 0.0
    m2: float = 0.0

    @property
    def var_hat(self) -> float:
        return self.m2 / self.count if self.count > 1 else 0.0

    def push(self, x: float) -> None:
        self.count += 1
        delta = x - self.mean_hat
        self.mean_hat += delta / self.count
        self.m2 += delta * (x - self.mean_hat)


@dataclass(frozen=True)
class BetaWeight:
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


@dataclass(frozen=True)
class NormalGammaPosterior:
    mu: float
    tau: float
    a: float
    b: float

    @property
    def predictive_dof(self) -> float:
        return 2.0 * self.a

    @property
    def predictive_scale2(self) -> float:
        return self.b * (self.tau + 1.0) / (self.a * self.tau)


def normal_gamma_posterior(prior: NormalGammaParams, stats: ReturnStats) -> NormalGammaPosterior:
    """Closed-form conjugate update from sufficient statistics (t, mean, population var)."""
    t = stats.count
    tau = prior.tau0 + t
    mu = (prior.tau0 * prior.mu0 + t * stats.mean_hat) / tau
    a = prior.a0 + 0.5 * t
    b = prior.b0 + 0.5 * (t * stats.var_hat
                          + prior.tau0 * t * (stats.mean_hat - prior.mu0) ** 2 / tau)
    return NormalGammaPosterior(mu, tau, a, b)


def student_t_logpdf(x: float, dof: float, loc: float, scale2: float) -> float:
    """Log-density of a location-scale Student-t with squared scale `scale2`."""
    z2 = (x - loc) ** 2 / scale2
    return (math.lgamma(0.5 * (dof + 1.0)) - math.lgamma(0.5 * dof)
            - 0.5 * math.log(dof * math.pi * scale2)
            - 0.5 * (dof + 1.0) * math.log1p(z2 / dof))


def predictive_logpdf(post: NormalGammaPosterior, x: float) -> float:
    return student_t_logpdf(x, post.predictive_dof, post.mu, post.predictive_scale2)


@dataclass(frozen=True)
class MixtureMoments:
    lam_u: float
    m1: float
    m2: float
    var: float


def beta_mixture_moments(alpha: float, beta: float, log_e_u: float, log_e_q: float) -> MixtureMoments:
    """First two moments of p(w | G) ∝ (w e_U + (1 - w) e_Q) Beta(w; alpha, beta).

    The posterior is the mixture lam_U Beta(alpha+1, beta) + lam_Q Beta(alpha, beta+1)
    with lam_U ∝ alpha e_U and lam_Q ∝ beta e_Q. Only the evidence ratio matters,
    so the evidences enter as log-densities.
    """
    n = alpha + beta
    logit = math.log(alpha) + log_e_u - math.log(beta) - log_e_q
    if logit >= 0:
        lam_u = 1.0 / (1.0 + math.exp(-logit))
    else:
        el = math.exp(logit)
        lam_u = el / (1.0 + el)
    lam_q = 1.0 - lam_u

    mean_u = (alpha + 1.0) / (n + 1.0)
    mean_q = alpha / (n + 1.0)
    # Both components share the total n + 1; variances differ only in the numerator.
    denom = (n + 1.0) ** 2 * (n + 2.0)
    var_u = (alpha + 1.0) * beta / denom
    var_q = alpha * (beta + 1.0) / denom
    m1 = lam_u * mean_u + lam_q * mean_q
    # Direct mixture variance avoids the m2 - m1**2 cancellation.
    var = lam_u * var_u + lam_q * var_q + lam_u * lam_q * (mean_u - mean_q) ** 2
    m2 = var + m1 * m1
    return MixtureMoments(lam_u, m1, m2, var)


def moment_match_beta(m1: float, var: float) -> tuple[float, float]:
    common = m1 * (1.0 - m1) / var - 1.0
    return m1 * common, (1.0 - m1) * common


class ConstantEpsilon:
    kind = "constant"

    def __init__(self, epsilon: float = 0.1):
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
        self.value = float(epsilon)

    def epsilon(self) -> float:
        return self.value

    def observe(self, g_q: float, g_u: float, g_exp: float) -> None:
        pass

    def reset(self) -> None:
        pass


class AnnealedEpsilon:
    kind = "annealed"

    def __init__(self, epsilon0: float = 1.0, decay: float = 0.9, epsilon_min: float = 0.01):
        if not 0.0 <= epsilon_min <= epsilon0 <= 1.0:
            raise ValueError("need 0 <= epsilon_min <= epsilon0 <= 1")
        if not 0.0 < decay <= 1.0:
            raise ValueError("decay must lie in (0, 1]")
        self.epsilon0 = float(epsilon0)
        self.decay = float(decay)
        self.epsilon_min = float(epsilon_min)
        self.steps = 0

    def epsilon(self) -> float:
        return max(self.epsilon_min, self.epsilon0 * self.decay ** self.steps)

    def observe(self, g_q: float, g_u: float, g_exp: float) -> None:
        self.steps += 1

    def reset(self) -> None:
        self.steps = 0


@dataclass
class EpsilonBmc:
    """Bayesian-model-combination exploration rate.

    ``epsilon()`` is the Beta posterior mean alpha / (alpha + beta) of the weight on
    the uniform-return model. Each ``observe`` call:

    1. pushes the expected-SARSA target into the running return statistics,
    2. forms the Normal-Gamma posterior over returns,
    3. scores the greedy and uniform targets under its Student-t predictive,
    4. updates the Beta weight by moment-matching the two-component posterior.

    Steps whose evidences are both zero or whose matched variance is degenerate
    leave the Beta untouched and bump ``skipped_updates``.
    """

    prior: NormalGammaParams = field(default_factory=NormalGammaParams)
    initial_weight: BetaWeight = field(default_factory=BetaWeight)
    stats: ReturnStats = field(default_factory=ReturnStats)
    weight: BetaWeight | None = None
    skipped_updates: int = 0
    kind = "bmc"

    def __post_init__(self):
        if self.weight is None:
            self.weight = self.initial_weight

    def epsilon(self) -> float:
        return self.weight.mean

    def posterior(self) -> NormalGammaPosterior:
        return normal_gamma_posterior(self.prior, self.stats)

    def observe(self, g_q: float, g_u: float, g_exp: float) -> None:
        for v in (g_q, g_u, g_exp):
            if not math.isfinite(v):
                raise FloatingPointError(f"non-finite return target {v!r}")
        self.stats.push(g_exp)
        post = self.posterior()
        log_e_q = predictive_logpdf(post, g_q)
        log_e_u = predictive_logpdf(post, g_u)
        if log_e_q == -math.inf and log_e_u == -math.inf:
            self.skipped_updates += 1
            return
        mom = beta_mixture_moments(self.weight.alpha, self.weight.beta, log_e_u, log_e_q)
        if mom.var <= 1e-15:
            self.skipped_updates += 1
            return
        alpha, beta = moment_match_beta(mom.m1, mom.var)
        if not (alpha > 0 and beta > 0 and math.isfinite(alpha) and math.isfinite(beta)):
            self.skipped_updates += 1
            return
        self.weight = BetaWeight(alpha, beta)

    def reset(self) -> None:
        self.stats = ReturnStats()
        self.weight = self.initial_weight
        self.skipped_updates = 0


EpsilonController = ConstantEpsilon | AnnealedEpsilon | EpsilonBmc


def make_controller(spec: dict) -> EpsilonController:
    """Build a controller from a config mapping such as ``{"kind": "bmc", ...}``."""
    spec = dict(spec)
    kind = spec.pop("kind")
    if kind == "constant":
        return ConstantEpsilon(**spec)
    if kind == "annealed":
        return AnnealedEpsilon(**spec)
    if kind == "bmc":
        prior = NormalGammaParams(**{k: spec.pop(k) for k in ("mu0", "tau0", "a0", "b0") if k in spec})
        weight = BetaWeight(**{k: spec.pop(k) for k in ("alpha", "beta") if k in spec})
        if spec:
            raise ValueError(f"unknown bmc controller keys: {sorted(spec)}")
        return EpsilonBmc(prior=prior, initial_weight=weight)
    raise ValueError(f"unknown controller kind {kind!r}")
