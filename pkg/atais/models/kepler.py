"""Kepler's equation and the anomaly chain of a Keplerian orbit."""

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.integrate import solve_ivp

from ..const import KEPLER_MAX_ITER, KEPLER_NEWTON_STALL, KEPLER_TOL, TWO_PI
from ..exceptions import DomainError, KeplerConvergenceError

_LOGGER = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


def mean_anomaly(t: ArrayLike, P: float, tau: float) -> ArrayLike:
    """Return M = (2 pi / P)(t - tau), unwrapped."""
    if not P > 0.0:
        raise DomainError("period must be positive")
    return (TWO_PI / P * (np.asarray(t, dtype=float) - tau))[()]


def _check_eccentricity(e: np.ndarray) -> None:
    """Raise unless every eccentricity lies in [0, 1)."""
    if not np.all((e >= 0.0) & (e < 1.0)):
        raise DomainError("eccentricity must lie in [0, 1)")


def solve_kepler(
    M: ArrayLike,
    e: ArrayLike,
    tol: float = KEPLER_TOL,
    max_iter: int = KEPLER_MAX_ITER,
) -> ArrayLike:
    """Return E with |E - e sin E - M mod 2 pi| <= tol, E in [0, 2 pi].

    Newton from E0 = M + 0.85 e sign(sin M); entries that stall fall back to
    bisection on [0, 2 pi], where the Kepler function is increasing.
    """
    M, e = np.broadcast_arrays(np.asarray(M, dtype=float), np.asarray(e, dtype=float))
    shape = M.shape
    _check_eccentricity(e)
    if not np.all(np.isfinite(M)):
        raise DomainError("mean anomaly must be finite")

    # work on 1-d copies so scalars can be updated in place
    M = np.atleast_1d(np.mod(M, TWO_PI)).astype(float, copy=True)
    e = np.atleast_1d(e).astype(float, copy=True)
    E = M + 0.85 * e * np.sign(np.sin(M))

    def kepler(E: np.ndarray, e: np.ndarray, M: np.ndarray) -> np.ndarray:
        return E - e * np.sin(E) - M

    active = np.abs(kepler(E, e, M)) > tol
    for _ in range(min(int(max_iter), KEPLER_NEWTON_STALL)):
        if not np.any(active):
            break
        Ea, ea, Ma = E[active], e[active], M[active]
        E[active] = Ea - kepler(Ea, ea, Ma) / (1.0 - ea * np.cos(Ea))
        residual = kepler(E, e, M)
        active = ~(np.abs(residual) <= tol) | (E < 0.0) | (E > TWO_PI)

    if np.any(active):
        _LOGGER.debug("Newton stalled on %s entries; bisecting", int(np.sum(active)))
        ea, Ma = e[active], M[active]
        lo = np.zeros_like(Ma)
        hi = np.full_like(Ma, TWO_PI)
        mid = 0.5 * (lo + hi)
        for _ in range(int(max_iter)):
            mid = 0.5 * (lo + hi)
            value = kepler(mid, ea, Ma)
            if np.all(np.abs(value) <= tol) or np.all(hi - lo <= 4.0 * np.spacing(TWO_PI)):
                break
            above = value > 0.0
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid)
        E[active] = mid
        residual = np.abs(kepler(mid, ea, Ma))
        if np.any(residual > tol):
            raise KeplerConvergenceError(
                f"Kepler solver stopped at residual {float(np.max(residual)):.3e}"
            )
    return E.reshape(shape)[()]


def true_anomaly(E: ArrayLike, e: ArrayLike) -> ArrayLike:
    """Return u = 2 atan2(sqrt(1+e) sin(E/2), sqrt(1-e) cos(E/2))."""
    E = np.asarray(E, dtype=float)
    e = np.asarray(e, dtype=float)
    _check_eccentricity(e)
    half = 0.5 * E
    u = 2.0 * np.arctan2(np.sqrt(1.0 + e) * np.sin(half), np.sqrt(1.0 - e) * np.cos(half))
    # keep u on the same 2 pi branch as E
    return (u + TWO_PI * np.round((E - u) / TWO_PI))[()]


def true_anomaly_at(t: ArrayLike, P: float, e: float, tau: float) -> ArrayLike:
    """Return the true anomaly at time t through the analytic chain."""
    return true_anomaly(solve_kepler(mean_anomaly(t, P, tau), e), e)


@dataclass(frozen=True)
class AnomalyOdeReport:
    """Deviation of two differential forms of du/dt from the analytic chain."""

    max_deviation_printed: float
    max_deviation_standard: float

    @property
    def matching_form(self) -> str:
        """Return the form that agrees better with the analytic chain."""
        if self.max_deviation_standard <= self.max_deviation_printed:
            return "standard"
        return "printed"


def _wrapped_difference(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Return a - b reduced to [-pi, pi)."""
    return np.mod(a - b + math.pi, TWO_PI) - math.pi


def _integrate_anomaly(
    P: float, e: float, tau: float, times: np.ndarray, exponent_base: float
) -> np.ndarray:
    """Integrate du/dt = (2 pi / P)(1 + e cos u)^2 / base^(3/2) from u(tau) = 0."""
    rate = TWO_PI / P / exponent_base**1.5

    def rhs(_t: float, u: np.ndarray) -> np.ndarray:
        return rate * (1.0 + e * np.cos(u)) ** 2

    result = np.zeros_like(times)
    for mask in (times > tau, times < tau):
        if not np.any(mask):
            continue
        targets = times[mask]
        order = np.argsort(np.abs(targets - tau))
        end = targets[order[-1]]
        solution = solve_ivp(
            rhs,
            (tau, end),
            [0.0],
            t_eval=targets[order],
            rtol=1e-10,
            atol=1e-12,
        )
        values = np.empty(targets.size)
        values[order] = solution.y[0]
        result[mask] = values
    return result


def check_true_anomaly_ode(
    P: float, e: float, tau: float, times: np.ndarray
) -> AnomalyOdeReport:
    """Compare the printed (1-e)^(3/2) and standard (1-e^2)^(3/2) rate forms."""
    times = np.asarray(times, dtype=float).reshape(-1)
    _check_eccentricity(np.asarray(e))
    analytic = np.asarray(true_anomaly_at(times, P, e, tau))
    printed = _integrate_anomaly(P, e, tau, times, 1.0 - e)
    standard = _integrate_anomaly(P, e, tau, times, 1.0 - e**2)
    report = AnomalyOdeReport(
        max_deviation_printed=float(np.max(np.abs(_wrapped_difference(printed, analytic)))),
        max_deviation_standard=float(np.max(np.abs(_wrapped_difference(standard, analytic)))),
    )
    _LOGGER.debug(
        "Anomaly ODE check: printed %.3e, standard %.3e",
        report.max_deviation_printed,
        report.max_deviation_standard,
    )
    return report
