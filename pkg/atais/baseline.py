"""Standard adaptive importance sampling over the joint (theta, sigma) space.

Population Monte Carlo style adaptation: the proposal moves to the weighted
mean and weighted covariance of the last population. It is the comparison
method for the tempered sampler and shares its evaluation coordinator.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
from scipy.special import logsumexp

from .const import EPS_SCALE, PROPOSAL_STD_FRACTION, STREAM_BASELINE
from .coordinator import EvaluationCoordinator, get_coordinator
from .exceptions import DomainError
from .model import ObservationModel, SigmaPrior, log_likelihood
from .proposal import GaussianProposal
from .rng import substream
from .sampler import effective_sample_size, normalize_log_weights

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class StandardAisConfig:
    """Settings of one baseline run over the (M+1)-dimensional space."""

    N: int
    T: int
    mu0: np.ndarray
    cov0: np.ndarray
    eps: float
    seed: int = 0

    def __post_init__(self) -> None:
        """Validate the settings."""
        if self.N < 1 or self.T < 1:
            raise DomainError("N and T must be at least 1")
        if not self.eps > 0.0:
            raise DomainError("eps must be positive")

    @classmethod
    def for_model(
        cls,
        model: ObservationModel,
        sigma_prior: SigmaPrior,
        N: int,
        T: int,
        mu0: Optional[np.ndarray] = None,
        proposal_std: Optional[np.ndarray] = None,
        eps: Optional[float] = None,
        seed: int = 0,
    ) -> "StandardAisConfig":
        """Fill unset settings from the box prior and the sigma support.

        ``mu0`` and ``proposal_std`` may cover theta only, in which case the
        sigma entry is taken from the prior support.
        """
        a, b = sigma_prior.support
        center = np.append(model.prior.center, 0.5 * (a + b))
        std = np.append(model.initial_proposal_std, PROPOSAL_STD_FRACTION * (b - a))
        if mu0 is not None:
            mu0 = np.asarray(mu0, dtype=float).reshape(-1)
            center = mu0 if mu0.size == center.size else np.append(mu0, center[-1])
        if proposal_std is not None:
            given = np.asarray(proposal_std, dtype=float).reshape(-1)
            if given.size == model.dimension:
                given = np.append(given, std[-1])
            std = np.broadcast_to(given, std.shape)
        if eps is None:
            eps = EPS_SCALE * float(np.mean(np.append(model.prior.sides, b - a))) ** 2
        return cls(
            N=int(N),
            T=int(T),
            mu0=center,
            cov0=np.diag(std**2),
            eps=float(eps),
            seed=int(seed),
        )


@dataclass(eq=False)
class StandardAisResult:
    """Weighted joint particles and the pooled evidence estimate."""

    particles: np.ndarray
    log_w: np.ndarray
    residuals: np.ndarray
    iterations: np.ndarray
    indices: np.ndarray
    proposals: List[GaussianProposal]
    log_evidence: float
    n_forward_evals: int
    warnings: List[str] = field(default_factory=list)

    @property
    def evidence(self) -> float:
        """Return Z_hat in the linear domain."""
        return math.exp(self.log_evidence)

    @property
    def dimension(self) -> int:
        """Return M, the theta dimension."""
        return int(self.particles.shape[1] - 1)

    def posterior_mean(self) -> np.ndarray:
        """Return the self-normalized mean of (theta, sigma)."""
        return normalize_log_weights(self.log_w) @ self.particles

    def to_csv(self, path: Union[str, Path]) -> None:
        """Write the particles with a trailing sigma column."""
        header = (
            ["t", "n"]
            + [f"theta_{i}" for i in range(self.dimension)]
            + ["sigma", "log_w", "residual"]
        )
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            for t, n, particle, log_w, residual in zip(
                self.iterations, self.indices, self.particles, self.log_w, self.residuals
            ):
                writer.writerow(
                    [int(t), int(n)]
                    + [repr(float(value)) for value in particle]
                    + [repr(float(log_w)), repr(float(residual))]
                )

    def summary(self) -> Dict[str, Any]:
        """Return the JSON summary."""
        mean = self.posterior_mean()
        return {
            "Z_hat": self.evidence,
            "log_Z_hat": self.log_evidence,
            "theta_mean": mean[:-1].tolist(),
            "sigma_mean": float(mean[-1]),
            "ess": effective_sample_size(self.log_w),
            "n_forward_evals": self.n_forward_evals,
            "warnings": list(self.warnings),
        }


def weigh_joint_particles(
    model: ObservationModel,
    sigma_prior: SigmaPrior,
    particles: np.ndarray,
    q: GaussianProposal,
    coordinator: Optional[EvaluationCoordinator] = None,
) -> Dict[str, np.ndarray]:
    """Return log-weights l g_theta g_sigma / q and residuals of joint particles.

    Every particle costs one forward call; sigma outside the prior support
    gets a log-weight of -inf.
    """
    particles = np.atleast_2d(particles)
    thetas, sigmas = particles[:, :-1], particles[:, -1]
    residuals = get_coordinator(coordinator).residuals(model, thetas)

    log_prior = model.log_prior_batch(thetas) + np.asarray(
        sigma_prior.log_density(sigmas), dtype=float
    ).reshape(-1)
    valid = np.isfinite(log_prior)
    log_target = np.full(len(particles), -np.inf)
    if np.any(valid):
        log_target[valid] = (
            log_likelihood(residuals[valid], model.K, sigmas[valid]) + log_prior[valid]
        )
    return {"log_w": log_target - q.log_pdf(particles), "residuals": residuals}


def adapt_joint_proposal(
    particles: np.ndarray, log_w: np.ndarray, eps: float, previous: GaussianProposal
) -> GaussianProposal:
    """Return N(weighted mean, weighted covariance + eps I)."""
    if not np.any(np.isfinite(log_w)):
        _LOGGER.warning("All baseline weights are zero; keeping the previous proposal")
        return previous
    weights = normalize_log_weights(log_w)
    mean = weights @ particles
    diff = particles - mean
    cov = (weights[:, None] * diff).T @ diff + eps * np.eye(particles.shape[1])
    return GaussianProposal(mean, cov)


def run_standard_ais(
    model: ObservationModel,
    sigma_prior: SigmaPrior,
    config: StandardAisConfig,
    coordinator: Optional[EvaluationCoordinator] = None,
) -> StandardAisResult:
    """Run T iterations of sample, weigh and adapt; Z_hat pools every weight."""
    if len(np.ravel(config.mu0)) != model.dimension + 1:
        raise DomainError("baseline proposal must cover theta and sigma")

    calls_before = model.n_forward_evals
    q = GaussianProposal(config.mu0, config.cov0)
    proposals: List[GaussianProposal] = []
    chunks: List[Dict[str, np.ndarray]] = []
    messages: List[str] = []
    _LOGGER.info("Starting baseline: N=%s T=%s M=%s", config.N, config.T, model.dimension)

    for t in range(1, config.T + 1):
        rng = substream(config.seed, STREAM_BASELINE, t)
        particles = q.sample(rng, config.N)
        weighed = weigh_joint_particles(model, sigma_prior, particles, q, coordinator)
        proposals.append(q)
        chunks.append({"particles": particles, **weighed})
        q = adapt_joint_proposal(particles, weighed["log_w"], config.eps, q)
        _LOGGER.debug(
            "Baseline iteration %s: ess=%.1f", t, effective_sample_size(weighed["log_w"])
        )

    log_w = np.concatenate([chunk["log_w"] for chunk in chunks])
    if not np.any(np.isfinite(log_w)):
        message = "no baseline particle carries weight"
        _LOGGER.warning("Baseline: %s", message)
        messages.append(message)
        log_evidence = -math.inf
    else:
        log_evidence = float(logsumexp(log_w) - math.log(log_w.size))

    n_calls = model.n_forward_evals - calls_before
    _LOGGER.info("Baseline finished: log Z_hat=%.6g", log_evidence)
    return StandardAisResult(
        particles=np.concatenate([chunk["particles"] for chunk in chunks]),
        log_w=log_w,
        residuals=np.concatenate([chunk["residuals"] for chunk in chunks]),
        iterations=np.repeat(np.arange(1, config.T + 1), config.N),
        indices=np.tile(np.arange(config.N), config.T),
        proposals=proposals,
        log_evidence=log_evidence,
        n_forward_evals=n_calls,
        warnings=messages,
    )
