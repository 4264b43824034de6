"""Constants for the atais package."""
import math
from typing import Final

DOMAIN: Final = "atais"

# Random stream identifiers
STREAM_SAMPLING: Final = 0
STREAM_BASELINE: Final = 1
STREAM_EVIDENCE: Final = 2
STREAM_MCMC: Final = 3
STREAM_SIR: Final = 4
STREAM_SIMULATE: Final = 5

DEFAULT_SEED: Final = 0
ENV_SEED: Final = "ATAIS_SEED"

# Sampler defaults
DEFAULT_N: Final = 1000
DEFAULT_T: Final = 10
EPS_SCALE: Final = 1e-6
# first proposal std as a fraction of the box side, unless the model sets one
PROPOSAL_STD_FRACTION: Final = 0.25
MIN_ESS: Final = 2.0

# Post-processing defaults
DEFAULT_EVIDENCE_POINTS: Final = 200
DEFAULT_MCMC_LENGTH: Final = 5000
DEFAULT_MCMC_BURN_IN: Final = 500
DEFAULT_MCMC_STEP: Final = 0.25
DEFAULT_SIR_SAMPLES: Final = 10000
SIGMA_MAP_RTOL: Final = 1e-6
EVIDENCE_CACHE_SIZE: Final = 4096

SCHEME_RIEMANN: Final = "riemann"
SCHEME_MONTE_CARLO: Final = "monte_carlo"
EVIDENCE_SCHEMES: Final = [SCHEME_RIEMANN, SCHEME_MONTE_CARLO]

# Oracle
DEFAULT_ORACLE_POINTS: Final = 2000
# the toy likelihood has spikes narrower than a 2000-node theta step
DEFAULT_ORACLE_THETA_POINTS: Final = 16000
ORACLE_CERTIFY_RTOL: Final = 5e-3
ORACLE_BLOCK_ENTRIES: Final = 1 << 20

# Kepler solver
KEPLER_TOL: Final = 1e-12
KEPLER_MAX_ITER: Final = 1_000_000
KEPLER_NEWTON_STALL: Final = 50
TWO_PI: Final = 2.0 * math.pi

# Benchmark models
MODEL_TOY: Final = "toy"
MODEL_TOY_SINE: Final = "toy-sine"
MODEL_RV: Final = "rv"
MODEL_LINEAR: Final = "linear"
MODEL_KINDS: Final = [MODEL_TOY, MODEL_TOY_SINE, MODEL_RV, MODEL_LINEAR]

TOY_THETA_TRUE: Final = 2.5
TOY_SIGMA_TRUE: Final = 4.0
TOY_K: Final = 8
TOY_BOX: Final = (0.0, 20.0)
TOY_SIGMA0: Final = 20.0
TOY_SIGMA_PRIOR: Final = (0.0, 20.0)
TOY_PROPOSAL_STD: Final = 2.0

RV_V0_TRUE: Final = 5.0
RV_SIGMA_TRUE: Final = 3.0
RV_K: Final = 120
RV_SIGMA0: Final = 30.0
RV_SIGMA_PRIOR: Final = (0.0, 30.0)
RV_PROPOSAL_STD: Final = 5.0
RV_SPAN: Final = (0.0, 400.0)
RV_WINDOWS: Final = 3
RV_WINDOW_LENGTH: Final = 60.0

LINEAR_BOX: Final = (-10.0, 10.0)
LINEAR_SIGMA0: Final = 10.0
LINEAR_SIGMA_PRIOR: Final = (0.0, 10.0)

# Per-planet parameter order: amplitude, argument of perigee, eccentricity, period, periastron
RV_PLANET_FIELDS: Final = ("A", "omega", "e", "P", "tau")
RV_V0_BOUNDS: Final = (-20.0, 20.0)
RV_AMPLITUDE_BOUND: Final = 30.0
RV_NARROW_AMPLITUDE_BOUND: Final = 20.0
RV_OMEGA_BOUNDS: Final = (0.0, 2.0 * math.pi)
RV_ECCENTRICITY_BOUNDS: Final = (0.0, 1.0)
RV_PERIOD_BOUNDS: Final = (0.0, 365.0)
RV_TAU_BOUNDS: Final = (0.0, 50.0)

# Two-planet system used for simulation, in RV_PLANET_FIELDS order
RV_PLANETS: Final = (
    (25.0, 0.61, 0.1, 15.0, 3.0),
    (5.0, 0.17, 0.0, 115.0, 24.0),
)

# Output files
FILE_DATASET: Final = "dataset.csv"
FILE_DATASET_INFO: Final = "dataset.json"
FILE_PARTICLES: Final = "particles.csv"
FILE_PROPOSALS: Final = "proposals.json"
FILE_SUMMARY: Final = "summary.json"
FILE_EVIDENCE_CURVE: Final = "evidence_curve.csv"
FILE_SIGMA_POSTERIOR: Final = "sigma_posterior.csv"
FILE_JOINT_SAMPLES: Final = "joint_samples.csv"
FILE_BASELINE_PARTICLES: Final = "baseline_particles.csv"
FILE_BASELINE_SUMMARY: Final = "baseline_summary.json"
FILE_ORACLE_SUMMARY: Final = "oracle_summary.json"
FILE_ORACLE_THETA: Final = "oracle_theta.csv"
FILE_ORACLE_SIGMA: Final = "oracle_sigma.csv"
FILE_COMPARISON: Final = "comparison.json"

# Exit codes
EXIT_OK: Final = 0
EXIT_CONFIG: Final = 2
EXIT_NUMERIC: Final = 3
EXIT_UNCERTIFIED: Final = 4
