"""Adaptive importance sampling with automatic tempering.

Each iteration targets the tempered conditional posterior p(theta | y, sigma)
at the current maximum-likelihood noise estimate. The estimate only moves when
a particle with a smaller residual is found, so the schedule cools exactly as
fast as the best fit improves.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from .const import EPS_SCALE, MIN_ESS, STREAM_SAMPLING
from .coordinator import EvaluationCoordinator, get_coordinator
from .exceptions import DomainError
from .model import ObservationModel, log_likelihood, sigma_ml_given_theta
from .proposal import GaussianProposal, sample_proposal
from .rng import substream
from .store import ParticleStore

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AtaisConfig:
    """Settings of one sampler run."""

    N: int
    T: int
    sigma0: float
    mu0: np.ndarray
    cov0: np.ndarray
    eps: float
    seed: int = 0

    def __post_init__(self) -> None:
        """Validate the settings."""
        if self.N < 1 or self.T < 1:
            raise DomainError("N and T must be at least 1")
        if not self.sigma0 > 0.0:
            raise DomainError("sigma0 must be positive")
        if not self.eps > 0.0:
            raise DomainError("eps must be positive")

    @classmethod
    def for_model(
        cls,
        model: ObservationModel,
        N: int,
        T: int,
        sigma0: float,
        mu0: Optional[np.ndarray] = None,
        proposal_std: Optional[np.ndarray] = None,
        eps: Optional[float] = None,
        seed: int = 0,
    ) -> "AtaisConfig":
        """Fill unset proposal settings from the box center and the model's initial std."""
        box = model.prior
        mean = box.center if mu0 is None else np.asarray(mu0, dtype=float)
        std = (
            model.initial_proposal_std
            if proposal_std is None
            else np.broadcast_to(np.asarray(proposal_std, dtype=float), box.sides.shape)
        )
        if eps is None:
            eps = default_eps(model)
        return cls(
            N=int(N),
            T=int(T),
            sigma0=float(sigma0),
            mu0=mean,
            cov0=np.diag(std**2),
            eps=float(eps),
            seed=int(seed),
        )


def default_eps(model: ObservationModel) -> float:
    """Return the covariance regularizer 1e-6 * mean(box side)^2."""
    return EPS_SCALE * float(np.mean(model.prior.sides)) ** 2


@dataclass(frozen=True, eq=False)
class TemperState:
    """Running global estimates of the MAP and the ML noise scale."""

    sigma_ml_hat: float
    theta_map_hat: Optional[np.ndarray]
    V_min: float
    log_pi_map: float

    @classmethod
    def initial(cls, sigma0: float) -> "TemperState":
        """Return the state before any particle is seen."""
        return cls(
            sigma_ml_hat=float(sigma0),
            theta_map_hat=None,
            V_min=math.inf,
            log_pi_map=-math.inf,
        )


@dataclass(frozen=True, eq=False)
class CurrentMax:
    """Best particle of one iteration."""

    index: int
    theta: np.ndarray
    V: float
    sigma: float


@dataclass(eq=False)
class PosteriorEstimate:
    """Self-normalized IS summary of p(theta | y, sigma_ml_hat)."""

    mean: np.ndarray
    cov: np.ndarray
    theta_map: Optional[np.ndarray]
    ess: float
    warnings: List[str] = field(default_factory=list)


def effective_sample_size(log_w: np.ndarray) -> float:
    """Return 1 / sum(w_bar^2) computed in the log domain."""
    log_w = np.asarray(log_w, dtype=float)
    if not np.any(np.isfinite(log_w)):
        return 0.0
    return float(np.exp(2.0 * logsumexp(log_w) - logsumexp(2.0 * log_w)))


def normalize_log_weights(log_w: np.ndarray) -> np.ndarray:
    """Return normalized linear weights via max-shift; all zero if none finite."""
    log_w = np.asarray(log_w, dtype=float)
    if not np.any(np.isfinite(log_w)):
        return np.zeros_like(log_w)
    return np.exp(log_w - logsumexp(log_w))


def weigh_particles(
    model: ObservationModel,
    particles: np.ndarray,
    sigma_prev: float,
    q: GaussianProposal,
    coordinator: Optional[EvaluationCoordinator] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Return (log-weights, residuals) of particles against pi at sigma_prev.

    Every particle costs exactly one forward-map call; particles outside the
    box keep their residual but get a log-weight of -inf.
    """
    particles = np.atleast_2d(particles)
    residuals = get_coordinator(coordinator).residuals(model, particles)
    log_prior = model.log_prior_batch(particles)
    log_target = np.where(
        np.isfinite(log_prior),
        log_likelihood(residuals, model.K, sigma_prev) + log_prior,
        -np.inf,
    )
    log_w = log_target - q.log_pdf(particles)
    return log_w, residuals


def update_current_max(
    particles: np.ndarray,
    residuals: np.ndarray,
    K: int,
    log_w: Optional[np.ndarray] = None,
) -> Optional[CurrentMax]:
    """Return the smallest-residual particle, or None if no particle is valid.

    Under a uniform prior the argmin residual is the argmax of the tempered
    posterior for every sigma. Particles with a -inf log-weight are skipped.
    """
    residuals = np.asarray(residuals, dtype=float)
    if log_w is not None:
        residuals = np.where(np.isfinite(log_w), residuals, np.inf)
    if residuals.size == 0 or not np.any(np.isfinite(residuals)):
        return None
    index = int(np.argmin(residuals))
    V = float(residuals[index])
    return CurrentMax(
        index=index,
        theta=np.array(np.atleast_2d(particles)[index], dtype=float),
        V=V,
        sigma=float(sigma_ml_given_theta(V, K)),
    )


def update_global_max(state: TemperState, current: CurrentMax, K: int) -> TemperState:
    """Accept the iteration's best particle if its residual is not worse."""
    if current.V > state.V_min:
        return state
    sigma = float(sigma_ml_given_theta(current.V, K))
    if sigma > 0.0:
        log_pi_map = float(log_likelihood(current.V, K, sigma))
    else:
        _LOGGER.warning("Zero residual reached; keeping the previous tempering scale")
        sigma = state.sigma_ml_hat
        log_pi_map = math.inf
    return replace(
        state,
        sigma_ml_hat=sigma,
        theta_map_hat=current.theta,
        V_min=current.V,
        log_pi_map=log_pi_map,
    )


def adapt_proposal(
    particles: np.ndarray,
    log_w: np.ndarray,
    theta_map_hat: Optional[np.ndarray],
    eps: float,
    previous: Optional[GaussianProposal] = None,
) -> GaussianProposal:
    """Return N(theta_map_hat, weighted covariance + eps I)."""
    particles = np.atleast_2d(np.asarray(particles, dtype=float))
    dimension = particles.shape[1]
    if not np.any(np.isfinite(log_w)):
        _LOGGER.warning("All importance weights are zero; keeping the previous covariance")
        if previous is None:
            raise DomainError("cannot adapt without a valid particle or a previous proposal")
        mean = previous.mean if theta_map_hat is None else theta_map_hat
        return GaussianProposal(mean, previous.cov)

    weights = normalize_log_weights(log_w)
    centroid = weights @ particles
    diff = particles - centroid
    cov = (weights[:, None] * diff).T @ diff + eps * np.eye(dimension)
    mean = centroid if theta_map_hat is None else theta_map_hat
    return GaussianProposal(mean, cov)


def run_atais(
    model: ObservationModel,
    config: AtaisConfig,
    coordinator: Optional[EvaluationCoordinator] = None,
) -> Tuple[TemperState, ParticleStore]:
    """Run T iterations of sample, weigh, current max, global max and adapt."""
    if not model.uniform_prior:
        _LOGGER.warning(
            "Generic theta prior in use: the MAP estimate may drift with the tempering scale"
        )

    calls_before = model.n_forward_evals
    state = TemperState.initial(config.sigma0)
    store = ParticleStore(model.dimension, model.K)
    store.sigma_schedule.append(state.sigma_ml_hat)
    q = GaussianProposal(config.mu0, config.cov0)
    _LOGGER.info(
        "Starting sampler: N=%s T=%s sigma0=%s M=%s K=%s",
        config.N, config.T, config.sigma0, model.dimension, model.K,
    )

    for t in range(1, config.T + 1):
        rng = substream(config.seed, STREAM_SAMPLING, t)
        particles = sample_proposal(q, config.N, rng)
        sigma_prev = state.sigma_ml_hat
        log_w, residuals = weigh_particles(model, particles, sigma_prev, q, coordinator)
        store.append_iteration(t, particles, log_w, residuals, sigma_prev, q)

        current = update_current_max(particles, residuals, model.K, log_w)
        if current is None:
            _LOGGER.warning("Iteration %s produced no valid particle", t)
        else:
            state = update_global_max(state, current, model.K)

        q = adapt_proposal(particles, log_w, state.theta_map_hat, config.eps, previous=q)
        store.sigma_schedule.append(state.sigma_ml_hat)
        _LOGGER.debug(
            "Iteration %s: sigma_ml=%.6g V_min=%.6g ess=%.1f",
            t, state.sigma_ml_hat, state.V_min, effective_sample_size(log_w),
        )

    store.n_forward_evals = model.n_forward_evals - calls_before
    _LOGGER.info(
        "Sampler finished: sigma_ml=%.6g after %s forward evaluations",
        state.sigma_ml_hat, store.n_forward_evals,
    )
    return state, store


def correct_weights(store: ParticleStore, sigma_final: Optional[float] = None) -> np.ndarray:
    """Return normalized weights of every particle against pi at sigma_final.

    The correction K log(sigma_prev / sigma_T) + e (1/2sigma_prev^2 - 1/2sigma_T^2)
    only uses cached residuals.
    """
    if sigma_final is None:
        sigma_final = store.final_sigma
    log_w = store.log_rho(sigma_final)
    if not np.any(np.isfinite(log_w)):
        _LOGGER.warning("No particle carries weight after correction")
    return normalize_log_weights(log_w)


def posterior_estimates(
    store: ParticleStore, weights: np.ndarray, state: Optional[TemperState] = None
) -> PosteriorEstimate:
    """Return weighted mean, covariance and MAP of p(theta | y, sigma_T)."""
    weights = np.asarray(weights, dtype=float)
    thetas = store.thetas
    messages = []
    total = float(np.sum(weights))
    if total <= 0.0:
        raise DomainError("weights carry no mass")
    weights = weights / total

    mean = weights @ thetas
    diff = thetas - mean
    cov = (weights[:, None] * diff).T @ diff
    ess = float(1.0 / np.sum(weights**2))
    if ess < MIN_ESS:
        message = f"effective sample size {ess:.3g} is below {MIN_ESS}"
        _LOGGER.warning("Posterior estimate: %s", message)
        messages.append(message)

    theta_map = None if state is None else state.theta_map_hat
    return PosteriorEstimate(mean=mean, cov=cov, theta_map=theta_map, ess=ess, warnings=messages)
