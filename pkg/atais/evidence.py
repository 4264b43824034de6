"""Evidence, noise-scale posterior and joint inference from stored particles.

Everything here reweights the particles kept by the sampler: cached residuals
give rho_t^(n)(sigma) for any sigma, so no function in this module calls the
forward map.
"""

import logging
import math
import functools
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from .const import (
    DEFAULT_EVIDENCE_POINTS,
    DEFAULT_MCMC_BURN_IN,
    DEFAULT_MCMC_LENGTH,
    DEFAULT_MCMC_STEP,
    DEFAULT_SIR_SAMPLES,
    EVIDENCE_CACHE_SIZE,
    SCHEME_MONTE_CARLO,
    SCHEME_RIEMANN,
    SIGMA_MAP_RTOL,
    STREAM_EVIDENCE,
    STREAM_MCMC,
    STREAM_SIR,
)
from .exceptions import DomainError, NumericalError
from .model import SigmaPrior
from .rng import substream
from .store import ParticleStore

_LOGGER = logging.getLogger(__name__)

JointFunction = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class McmcConfig:
    """Settings of the random-walk chain over sigma."""

    J: int = DEFAULT_MCMC_LENGTH
    burn_in: int = DEFAULT_MCMC_BURN_IN
    step: float = DEFAULT_MCMC_STEP
    seed: int = 0

    def __post_init__(self) -> None:
        """Validate the settings."""
        if self.J < 1:
            raise DomainError("chain length J must be at least 1")
        if self.burn_in < 0:
            raise DomainError("burn-in must be non-negative")
        if not self.step > 0.0:
            raise DomainError("step size must be positive")


@dataclass(frozen=True)
class RiemannGrid:
    """Midpoint quadrature over the prior support with R nodes."""

    R: int = DEFAULT_EVIDENCE_POINTS


@dataclass(frozen=True)
class MonteCarlo:
    """Plain Monte Carlo over R prior draws."""

    R: int = DEFAULT_EVIDENCE_POINTS
    seed: int = 0


EvidenceScheme = Union[RiemannGrid, MonteCarlo]


def make_scheme(name: str, R: int = DEFAULT_EVIDENCE_POINTS, seed: int = 0) -> EvidenceScheme:
    """Return the integration scheme registered under ``name``."""
    if name == SCHEME_RIEMANN:
        return RiemannGrid(R)
    if name == SCHEME_MONTE_CARLO:
        return MonteCarlo(R, seed)
    raise DomainError(f"unknown evidence scheme: {name}")


@dataclass(frozen=True)
class EvidenceEstimate:
    """An evidence value kept in the log domain."""

    log_value: float

    @property
    def value(self) -> float:
        """Return the evidence in the linear domain."""
        return math.exp(self.log_value)


@dataclass(eq=False)
class SigmaChain:
    """Draws of the noisy chain over sigma."""

    draws: np.ndarray
    acceptance_rate: float


def rho_weights(store: ParticleStore, sigma: float) -> np.ndarray:
    """Return rho_t^(n)(sigma) = l(y|theta,sigma) g(theta) / q_t(theta)."""
    return np.exp(store.log_rho(sigma))


class EvidenceCurve:
    """Memoized sigma -> Z_hat(sigma), the mean of the rho weights.

    The memo keeps the EVIDENCE_CACHE_SIZE most recently used sigmas.
    """

    def __init__(self, store: ParticleStore) -> None:
        """Initialize the curve over a store."""
        if len(store) == 0:
            raise DomainError("evidence curve needs a non-empty store")
        self.store = store
        self._log_n = math.log(len(store))
        self._cached = functools.lru_cache(maxsize=EVIDENCE_CACHE_SIZE)(self._compute)

    def _compute(self, sigma: float) -> float:
        return float(logsumexp(self.store.log_rho(sigma)) - self._log_n)

    def log_value(self, sigma: float) -> float:
        """Return log Z_hat(sigma)."""
        return self._cached(float(sigma))

    def cache_size(self) -> int:
        """Return the number of memoized sigmas."""
        return self._cached.cache_info().currsize

    def log_values(self, sigmas: np.ndarray) -> np.ndarray:
        """Return log Z_hat at each sigma."""
        return np.array([self.log_value(sigma) for sigma in np.asarray(sigmas).reshape(-1)])

    def __call__(self, sigma: float) -> float:
        """Return Z_hat(sigma)."""
        return math.exp(self.log_value(sigma))


def conditional_evidence(store: ParticleStore, sigma: float) -> Tuple[float, float]:
    """Return (Z_hat(sigma), log Z_hat(sigma))."""
    log_value = EvidenceCurve(store).log_value(sigma)
    if log_value == -math.inf:
        _LOGGER.warning("All rho weights vanish at sigma=%s", sigma)
    return math.exp(log_value), log_value


def global_evidence(
    curve: EvidenceCurve, prior: SigmaPrior, scheme: Optional[EvidenceScheme] = None
) -> EvidenceEstimate:
    """Return Z_hat = integral of Z_hat(sigma) g(sigma) dsigma."""
    if scheme is None:
        scheme = RiemannGrid()
    if scheme.R < 1:
        raise DomainError("R must be at least 1")

    if isinstance(scheme, MonteCarlo):
        sigmas = prior.sample(substream(scheme.seed, STREAM_EVIDENCE), scheme.R)
        log_value = logsumexp(curve.log_values(sigmas)) - math.log(scheme.R)
    else:
        nodes, step = prior.midpoint_grid(scheme.R)
        terms = curve.log_values(nodes) + prior.log_density(nodes) + math.log(step)
        log_value = logsumexp(terms)
    return EvidenceEstimate(float(log_value))


class SigmaPosterior:
    """Evaluable approximation p_hat(sigma|y) = Z_hat(sigma) g(sigma) / Z_hat."""

    def __init__(
        self, curve: EvidenceCurve, prior: SigmaPrior, evidence: EvidenceEstimate
    ) -> None:
        """Initialize the density."""
        if evidence.log_value == -math.inf:
            raise DomainError("evidence must be positive")
        self.curve = curve
        self.prior = prior
        self.evidence = evidence

    def log_pdf(self, sigma: Union[float, np.ndarray]) -> np.ndarray:
        """Return log p_hat(sigma|y)."""
        sigma = np.asarray(sigma, dtype=float)
        inside = np.asarray(self.prior.log_density(sigma)) > -np.inf
        values = np.full(sigma.shape, -np.inf)
        if np.any(inside):
            values[inside] = (
                self.curve.log_values(sigma[inside])
                + self.prior.log_density(sigma[inside])
                - self.evidence.log_value
            )
        return values[()]

    def pdf(self, sigma: Union[float, np.ndarray]) -> np.ndarray:
        """Return p_hat(sigma|y)."""
        return np.exp(self.log_pdf(sigma))

    def moments(self, points: int = DEFAULT_EVIDENCE_POINTS) -> Dict[str, float]:
        """Return mean, variance and mode by midpoint quadrature over the support."""
        nodes, step = self.prior.midpoint_grid(points)
        density = self.pdf(nodes) * step
        mass = float(np.sum(density))
        if mass <= 0.0:
            raise NumericalError("sigma posterior has no mass on the quadrature grid")
        density = density / mass
        mean = float(density @ nodes)
        var = float(density @ (nodes - mean) ** 2)
        mode = float(nodes[int(np.argmax(density))])
        return {"mean": mean, "var": var, "mode": mode, "mass": mass}


def marginal_posterior_sigma(
    curve: EvidenceCurve, prior: SigmaPrior, evidence: EvidenceEstimate
) -> SigmaPosterior:
    """Return the approximate marginal posterior of sigma."""
    return SigmaPosterior(curve, prior, evidence)


def _log_objective(curve: Any, prior: SigmaPrior, sigma: float) -> float:
    """Return log Z_hat(sigma) + log g(sigma)."""
    log_prior = float(prior.log_density(sigma))
    if log_prior == -math.inf:
        return -math.inf
    return curve.log_value(sigma) + log_prior


def sigma_map_marg(
    curve: Any,
    prior: SigmaPrior,
    points: int = DEFAULT_EVIDENCE_POINTS,
    rtol: float = SIGMA_MAP_RTOL,
) -> float:
    """Return argmax of Z_hat(sigma) g(sigma) by grid scan and golden section."""
    nodes, _ = prior.midpoint_grid(points)
    values = np.array([_log_objective(curve, prior, sigma) for sigma in nodes])
    best = int(np.argmax(values))
    if not np.isfinite(values[best]) or np.all(values == values[best]):
        _LOGGER.warning("Flat sigma objective; returning the grid maximum")
        return float(nodes[best])
    if best == 0 or best == len(nodes) - 1:
        return float(nodes[best])

    try:
        result = minimize_scalar(
            lambda sigma: -_log_objective(curve, prior, sigma),
            bracket=(nodes[best - 1], nodes[best], nodes[best + 1]),
            method="golden",
            tol=rtol,
        )
    except (ValueError, RuntimeError):
        _LOGGER.warning("Grid maximum is not bracketed; returning it unrefined")
        return float(nodes[best])
    if not np.isfinite(result.fun) or -result.fun < values[best]:
        return float(nodes[best])
    return float(result.x)


def noisy_mcmc_sigma(
    curve: Any,
    prior: SigmaPrior,
    config: McmcConfig,
    sigma_init: Optional[float] = None,
) -> SigmaChain:
    """Run random-walk Metropolis on s = log sigma targeting Z_hat(sigma) g(sigma).

    The chain state is s, proposals are s + step * N(0, 1), and the acceptance
    ratio uses Z_hat(e^s) g(e^s) e^s, the target density in s including the
    Jacobian of sigma = e^s. Returned draws are e^s, distributed as
    p_hat(sigma|y) on the sigma scale.
    """
    rng = substream(config.seed, STREAM_MCMC)
    if sigma_init is None:
        sigma_init = sigma_map_marg(curve, prior)
    if float(prior.log_density(sigma_init)) == -math.inf:
        raise DomainError(f"initial sigma {sigma_init} is outside the prior support")

    def log_target(s: float) -> float:
        # target in log-sigma coordinates, Jacobian included
        return _log_objective(curve, prior, math.exp(s)) + s

    s = math.log(sigma_init)
    current = log_target(s)
    total = config.burn_in + config.J
    steps = rng.standard_normal(total) * config.step
    log_u = np.log(rng.uniform(size=total))
    draws = np.empty(config.J)
    accepted = 0
    for i in range(total):
        candidate = s + steps[i]
        proposed = log_target(candidate)
        if proposed > -math.inf and log_u[i] < proposed - current:
            s, current = candidate, proposed
            accepted += 1
        if i >= config.burn_in:
            draws[i - config.burn_in] = math.exp(s)

    if accepted == 0:
        raise NumericalError("sigma chain never accepted a move")
    rate = accepted / total
    _LOGGER.debug("Sigma chain acceptance rate %.3f", rate)
    return SigmaChain(draws=draws, acceptance_rate=rate)


class JointPosteriorApprox:
    """Joint (theta, sigma) approximation: shared particles, per-draw weights."""

    def __init__(self, store: ParticleStore, sigma_draws: np.ndarray) -> None:
        """Initialize from a store and a set of sigma draws."""
        sigma_draws = np.asarray(sigma_draws, dtype=float).reshape(-1)
        if sigma_draws.size == 0:
            raise DomainError("sigma draws must not be empty")
        self.store = store
        self.sigma_draws = sigma_draws
        self._unique, self._inverse, self._counts = np.unique(
            sigma_draws, return_inverse=True, return_counts=True
        )

    def weights(self, sigma: float) -> np.ndarray:
        """Return normalized rho weights at sigma."""
        log_rho = self.store.log_rho(sigma)
        if not np.any(np.isfinite(log_rho)):
            raise NumericalError(f"no particle carries weight at sigma={sigma}")
        return np.exp(log_rho - logsumexp(log_rho))

    def expectation(self, h: JointFunction) -> Union[float, np.ndarray]:
        """Return (1/J) sum_j sum_{t,n} rho_bar(sigma_j) h(theta, sigma_j)."""
        thetas = self.store.thetas
        total = None
        for sigma, count in zip(self._unique, self._counts):
            values = np.asarray(h(thetas, float(sigma)), dtype=float)
            term = count * np.tensordot(self.weights(sigma), values, axes=1)
            total = term if total is None else total + term
        result = total / self.sigma_draws.size
        return float(result) if np.ndim(result) == 0 else result

    def resample(self, count: int, seed: int = 0) -> np.ndarray:
        """Return ``count`` unweighted (theta, sigma) rows by SIR."""
        if count < 1:
            raise DomainError("count must be at least 1")
        rng = substream(seed, STREAM_SIR)
        thetas = self.store.thetas
        picks = rng.integers(0, self.sigma_draws.size, size=count)
        slots = self._inverse.reshape(-1)[picks]
        samples = np.empty((count, thetas.shape[1] + 1))
        for slot in np.unique(slots):
            rows = np.flatnonzero(slots == slot)
            sigma = float(self._unique[slot])
            chosen = rng.choice(len(thetas), size=rows.size, p=self.weights(sigma))
            samples[rows, :-1] = thetas[chosen]
            samples[rows, -1] = sigma
        return samples


def joint_expectation(
    store: ParticleStore, sigma_draws: np.ndarray, h: JointFunction
) -> Union[float, np.ndarray]:
    """Return the joint-posterior expectation of h(theta, sigma).

    ``h`` receives the (NT, M) particle array and one sigma and returns one
    value (or one row of values) per particle.
    """
    return JointPosteriorApprox(store, sigma_draws).expectation(h)


def sir_resample_joint(
    store: ParticleStore, sigma_draws: np.ndarray, count: int, seed: int = 0
) -> np.ndarray:
    """Return unweighted joint samples; last column is sigma."""
    return JointPosteriorApprox(store, sigma_draws).resample(count, seed)


@dataclass
class PostProcessingSettings:
    """Settings of the post-processing chain."""

    scheme: EvidenceScheme = field(default_factory=RiemannGrid)
    mcmc: McmcConfig = field(default_factory=McmcConfig)
    sir_samples: int = DEFAULT_SIR_SAMPLES
    grid_points: int = DEFAULT_EVIDENCE_POINTS
    sir_seed: int = 0


@dataclass(eq=False)
class PostProcessingResult:
    """Everything the post-processing chain computes."""

    curve: EvidenceCurve
    evidence: EvidenceEstimate
    sigma_posterior: SigmaPosterior
    sigma_map: float
    chain: SigmaChain
    joint_samples: np.ndarray
    summary: Dict[str, Any]
    curve_table: List[Tuple[float, float, float]]
    posterior_table: List[Tuple[float, float]]


def run_post_processing(
    store: ParticleStore, prior: SigmaPrior, settings: Optional[PostProcessingSettings] = None
) -> PostProcessingResult:
    """Run the whole chain: Z_hat(sigma), Z_hat, p_hat(sigma|y), chain, joint moments."""
    if settings is None:
        settings = PostProcessingSettings()

    curve = EvidenceCurve(store)
    evidence = global_evidence(curve, prior, settings.scheme)
    posterior = marginal_posterior_sigma(curve, prior, evidence)
    sigma_map = sigma_map_marg(curve, prior, points=settings.grid_points)
    moments = posterior.moments(settings.grid_points)
    chain = noisy_mcmc_sigma(curve, prior, settings.mcmc, sigma_init=sigma_map)

    joint = JointPosteriorApprox(store, chain.draws)
    theta_mean = np.atleast_1d(joint.expectation(lambda thetas, sigma: thetas))
    theta_second = np.atleast_1d(joint.expectation(lambda thetas, sigma: thetas**2))
    samples = joint.resample(settings.sir_samples, settings.sir_seed)

    nodes, _ = prior.midpoint_grid(settings.grid_points)
    log_curve = curve.log_values(nodes)
    curve_table = [
        (float(s), float(math.exp(v)), float(v)) for s, v in zip(nodes, log_curve)
    ]
    posterior_table = [(float(s), float(p)) for s, p in zip(nodes, posterior.pdf(nodes))]

    summary = {
        "Z_hat": evidence.value,
        "log_Z_hat": evidence.log_value,
        "sigma_map_marg": sigma_map,
        "sigma_mean": moments["mean"],
        "sigma_var": moments["var"],
        "sigma_chain_mean": float(np.mean(chain.draws)),
        "sigma_chain_acceptance": chain.acceptance_rate,
        "theta_mean": theta_mean.tolist(),
        "theta_var": (theta_second - theta_mean**2).tolist(),
    }
    _LOGGER.info(
        "Post-processing: log Z_hat=%.6g sigma_map_marg=%.6g", evidence.log_value, sigma_map
    )
    return PostProcessingResult(
        curve=curve,
        evidence=evidence,
        sigma_posterior=posterior,
        sigma_map=sigma_map,
        chain=chain,
        joint_samples=samples,
        summary=summary,
        curve_table=curve_table,
        posterior_table=posterior_table,
    )
