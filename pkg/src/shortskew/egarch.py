"""EGARCH(1,1) filtering, Gaussian maximum likelihood and normalization.

The log-variance recursion is::

    log s2[t] = kappa + gamma1 * log s2[t-1]
                + eta1 * (|e[t-1]| / s[t-1] - sqrt(2/pi))
                + xi1 * e[t-1] / s[t-1]

``xi1`` is the leverage coefficient: ``xi1 > 0`` means positive shocks raise
future volatility more than negative ones (anti-leverage).

The recursion starts from ``s2[0] = sigma0_sq`` (sample variance by default)
and a presample innovation of zero.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.optimize import minimize

from .errors import DomainError, InsufficientDataError, NumericalOverflowError, ShapeError

logger = logging.getLogger(__name__)

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
VARIANCE_FLOOR = 1e-12
MIN_FIT_OBS = 60
_LOG_FLOOR = math.log(VARIANCE_FLOOR)
_LOG_CEIL = 700.0
_LOG_2PI = math.log(2.0 * math.pi)
_PENALTY = 1e100


@dataclass(frozen=True)
class EgarchParams:
    kappa: float
    gamma1: float
    eta1: float
    xi1: float

    def __post_init__(self):
        vals = self.as_array()
        if not np.all(np.isfinite(vals)):
            raise DomainError(f"EGARCH parameters must be finite: {self}")
        if not abs(self.gamma1) < 1.0:
            raise DomainError(f"|gamma1| must be < 1 for stationarity, got {self.gamma1}")

    def as_array(self) -> np.ndarray:
        return np.array([self.kappa, self.gamma1, self.eta1, self.xi1], dtype=float)

    @classmethod
    def from_array(cls, a) -> "EgarchParams":
        return cls(*(float(x) for x in a))

    @property
    def unconditional_log_variance(self) -> float:
        """Stationary mean of log s2."""
        return self.kappa / (1.0 - self.gamma1)


@dataclass(frozen=True)
class VolatilityPath:
    sigma: np.ndarray
    loglik: float

    def __len__(self) -> int:
        return self.sigma.size


@dataclass(frozen=True)
class EgarchFit:
    params: EgarchParams
    path: VolatilityPath
    converged: bool
    start_loglik: float
    n_evals: int
    n_cycles: int
    sigma0_sq: float

    @property
    def loglik(self) -> float:
        return self.path.loglik

    def __iter__(self):
        yield self.params
        yield self.path


@numba.njit(cache=True)
def _recursion(kappa, gamma1, eta1, xi1, eps, log_s2_0):
    n = eps.shape[0]
    log_s2 = np.empty(n)
    ll = 0.0
    prev_log = log_s2_0
    prev_z = 0.0
    for t in range(n):
        h = kappa + gamma1 * prev_log + eta1 * (abs(prev_z) - SQRT_2_OVER_PI) + xi1 * prev_z
        if not np.isfinite(h) or h > _LOG_CEIL:
            return log_s2, ll, t
        if h < _LOG_FLOOR:
            h = _LOG_FLOOR
        log_s2[t] = h
        s2 = math.exp(h)
        ll += -0.5 * (_LOG_2PI + h + eps[t] * eps[t] / s2)
        prev_z = eps[t] / math.sqrt(s2)
        prev_log = h
    if not np.isfinite(ll):
        return log_s2, ll, n - 1
    return log_s2, ll, -1


@numba.njit(cache=True)
def _loglik_grad(kappa, gamma1, eta1, xi1, eps, log_s2_0):
    """Log-likelihood and its gradient in (kappa, gamma1, eta1, xi1).

    Differentiates the recursion forward in time; a floored variance has
    zero derivative. Returns ``bad >= 0`` on overflow, like ``_recursion``.
    """
    n = eps.shape[0]
    grad = np.zeros(4)
    dh = np.zeros(4)
    dprev = np.zeros(4)
    ll = 0.0
    prev_log = log_s2_0
    prev_z = 0.0
    for t in range(n):
        h = kappa + gamma1 * prev_log + eta1 * (abs(prev_z) - SQRT_2_OVER_PI) + xi1 * prev_z
        if not np.isfinite(h) or h > _LOG_CEIL:
            return ll, grad, t
        # d prev_z / d theta = -0.5 * prev_z * d prev_log / d theta
        slope = (eta1 * (1.0 if prev_z > 0 else (-1.0 if prev_z < 0 else 0.0)) + xi1) * (-0.5 * prev_z)
        for k in range(4):
            dh[k] = (gamma1 + slope) * dprev[k]
        dh[0] += 1.0
        dh[1] += prev_log
        dh[2] += abs(prev_z) - SQRT_2_OVER_PI
        dh[3] += prev_z
        if h < _LOG_FLOOR:
            h = _LOG_FLOOR
            for k in range(4):
                dh[k] = 0.0
        s2 = math.exp(h)
        ll += -0.5 * (_LOG_2PI + h + eps[t] * eps[t] / s2)
        w = -0.5 * (1.0 - eps[t] * eps[t] / s2)
        for k in range(4):
            grad[k] += w * dh[k]
            dprev[k] = dh[k]
        prev_z = eps[t] / math.sqrt(s2)
        prev_log = h
    if not np.isfinite(ll):
        return ll, grad, n - 1
    return ll, grad, -1


def _as_vector(eps) -> np.ndarray:
    eps = np.ascontiguousarray(eps, dtype=float)
    if eps.ndim != 1:
        raise ShapeError(f"expected a 1-d series, got shape {eps.shape}")
    return eps


def default_sigma0_sq(eps) -> float:
    v = float(np.var(eps, ddof=1)) if len(eps) > 1 else 0.0
    return v if v > VARIANCE_FLOOR else VARIANCE_FLOOR


def egarch_filter(params: EgarchParams, eps, sigma0_sq: float | None = None) -> VolatilityPath:
    """Run the variance recursion and return the conditional volatility path.

    The Gaussian log-likelihood ``sum(-0.5*log(2*pi*s2) - e**2/(2*s2))`` is
    returned alongside. Variances are floored at 1e-12.

    Raises
    ------
    NumericalOverflowError
        The log-variance becomes non-finite or overflows; ``.index`` gives
        the offending observation.
    """
    eps = _as_vector(eps)
    if sigma0_sq is None:
        sigma0_sq = default_sigma0_sq(eps)
    if not sigma0_sq > 0:
        raise DomainError(f"sigma0_sq must be positive, got {sigma0_sq}")
    log_s2, ll, bad = _recursion(params.kappa, params.gamma1, params.eta1, params.xi1,
                                 eps, math.log(sigma0_sq))
    if bad >= 0:
        raise NumericalOverflowError(int(bad), f"EGARCH recursion overflowed at index {bad}")
    return VolatilityPath(np.exp(0.5 * log_s2), float(ll))


# The optimizer works on (mu, atanh(gamma1), eta1, xi1) with
# kappa = mu * (1 - gamma1); mu is the stationary level of log s2. This
# decorrelates kappa from gamma1, which otherwise form a long thin ridge.

def _to_theta(p: EgarchParams) -> np.ndarray:
    return np.array([p.unconditional_log_variance, math.atanh(p.gamma1), p.eta1, p.xi1])


def _from_theta(theta) -> EgarchParams:
    g = math.tanh(theta[1])
    # keep strictly inside (-1, 1) after rounding
    g = min(max(g, -1.0 + 1e-12), 1.0 - 1e-12)
    return EgarchParams(float(theta[0] * (1.0 - g)), g, float(theta[2]), float(theta[3]))


def _objective(theta, eps, log_s2_0, gamma_max=1.0):
    g = math.tanh(theta[1])
    if not abs(g) < gamma_max:
        return _PENALTY
    _, ll, bad = _recursion(theta[0] * (1.0 - g), g, theta[2], theta[3], eps, log_s2_0)
    if bad >= 0 or not math.isfinite(ll):
        return _PENALTY
    return -ll


def _objective_grad(theta, eps, log_s2_0):
    mu, a = theta[0], theta[1]
    g = math.tanh(a)
    if not abs(g) < 1.0:
        return _PENALTY, np.zeros(4)
    ll, gr, bad = _loglik_grad(mu * (1.0 - g), g, theta[2], theta[3], eps, log_s2_0)
    if bad >= 0 or not math.isfinite(ll):
        return _PENALTY, np.zeros(4)
    dg = 1.0 - g * g
    # chain rule through kappa = mu * (1 - g), g = tanh(a)
    out = np.array([gr[0] * (1.0 - g), (gr[1] - mu * gr[0]) * dg, gr[2], gr[3]])
    return -ll, -out


# Quasi-Newton coordinates are theta / _QN_SCALE. L-BFGS-B's first step has
# unit length, which in raw coordinates is violent enough in eta1/xi1 to
# overflow the recursion.
_QN_SCALE = np.array([1.0, 0.5, 0.05, 0.05])


def _scaled_objective_grad(u, eps, log_s2_0):
    f, g = _objective_grad(u * _QN_SCALE, eps, log_s2_0)
    return f, g * _QN_SCALE


def _stationary(theta, eps, log_s2_0, a_max, gtol=1e-2) -> bool:
    f, g = _objective_grad(theta, eps, log_s2_0)
    if f >= _PENALTY:
        return False
    if a_max is not None and abs(theta[1]) >= a_max - 1e-12:
        # at the bound only an inward-pointing gradient component may remain
        if g[1] * np.sign(theta[1]) < 0:
            g = g.copy()
            g[1] = 0.0
    return bool(np.max(np.abs(g)) <= gtol)


def default_start(eps) -> EgarchParams:
    """Starting point: gamma1=0.9, eta1=0.1, xi1=0, kappa=log(var)*(1-gamma1)."""
    return EgarchParams(math.log(default_sigma0_sq(eps)) * 0.1, 0.9, 0.1, 0.0)


_SIMPLEX_STEPS = np.array([0.25, 0.35, 0.05, 0.05])


def egarch_fit(eps, start: EgarchParams | None = None, sigma0_sq: float | None = None,
               min_obs: int = MIN_FIT_OBS, max_cycles: int = 20, maxiter: int = 4000,
               tol: float = 1e-8, gamma_max: float = 1.0, method: str = "nelder-mead") -> EgarchFit:
    """Gaussian maximum-likelihood EGARCH(1,1) fit by restarted Nelder-Mead.

    Each cycle is a fresh simplex around the incumbent; iteration stops when
    a full cycle improves the log-likelihood by less than ``tol``. A fit that
    exhausts ``max_cycles`` or whose last simplex did not terminate cleanly
    is returned with ``converged=False``; callers decide whether to drop it.

    ``gamma_max`` tightens the stationarity region to ``|gamma1| < gamma_max``.
    Short samples can trace a likelihood ridge towards ``|gamma1| = 1`` that
    never satisfies the improvement criterion; a bound below one stops it.

    ``method="l-bfgs-b"`` replaces the simplex by a quasi-Newton search with
    an analytic gradient and box bounds on the transformed ``gamma1``. The
    restart cycles and the convergence criterion are unchanged. It is much
    cheaper on short, flat likelihoods.

    Raises
    ------
    InsufficientDataError
        Fewer than ``min_obs`` observations.
    """
    eps = _as_vector(eps)
    if eps.size < min_obs:
        raise InsufficientDataError(f"EGARCH fit needs at least {min_obs} observations, got {eps.size}")
    if sigma0_sq is None:
        sigma0_sq = default_sigma0_sq(eps)
    log_s2_0 = math.log(sigma0_sq)
    if start is None:
        start = default_start(eps)

    if not 0.0 < gamma_max <= 1.0:
        raise DomainError(f"gamma_max must lie in (0, 1], got {gamma_max}")
    if abs(start.gamma1) >= gamma_max:
        # pull the start inside the bound, keeping its stationary level
        g = math.copysign(0.99 * gamma_max, start.gamma1)
        start = EgarchParams(start.unconditional_log_variance * (1.0 - g), g, start.eta1, start.xi1)
    theta = _to_theta(start)
    best = _objective(theta, eps, log_s2_0, gamma_max)
    start_ll = -best
    n_evals = 1
    converged = False
    cycles = 0
    if method not in ("nelder-mead", "l-bfgs-b"):
        raise DomainError(f"unknown optimizer {method!r}")
    a_max = math.atanh(gamma_max) - 1e-9 if gamma_max < 1.0 else None
    b = None if a_max is None else a_max / _QN_SCALE[1]
    bounds = [(None, None), (None if b is None else -b, b), (None, None), (None, None)]
    stalled = False
    for cycles in range(1, max_cycles + 1):
        use_simplex = method == "nelder-mead" or stalled
        if use_simplex:
            simplex = np.vstack([theta, theta + np.diag(_SIMPLEX_STEPS)])
            res = minimize(_objective, theta, args=(eps, log_s2_0, gamma_max), method="Nelder-Mead",
                           options={"initial_simplex": simplex, "maxiter": maxiter,
                                    "maxfev": 2 * maxiter, "xatol": 1e-7, "fatol": tol / 10})
        else:
            res = minimize(_scaled_objective_grad, theta / _QN_SCALE, args=(eps, log_s2_0), jac=True,
                           method="L-BFGS-B", bounds=bounds,
                           options={"maxiter": maxiter, "ftol": 1e-14, "gtol": 1e-9})
            res.x = res.x * _QN_SCALE
        n_evals += res.nfev
        gain = best - res.fun
        if res.fun < best:
            theta, best = res.x, res.fun
        # a first quasi-Newton run that cannot take a single step from a
        # non-stationary start has hit the overflow penalty in its line
        # search; hand the next cycle to the simplex instead
        stalled = (not use_simplex and cycles == 1 and res.nit <= 1
                   and not _stationary(theta, eps, log_s2_0, a_max))
        if gain < tol and not stalled:
            converged = True
            break

    if best >= _PENALTY:
        converged = False
    params = _from_theta(theta)
    path = egarch_filter(params, eps, sigma0_sq) if best < _PENALTY else \
        VolatilityPath(np.full(eps.size, math.sqrt(sigma0_sq)), -_PENALTY)
    if not converged:
        logger.info("EGARCH fit did not converge after %d cycles (%d evals)", cycles, n_evals)
    return EgarchFit(params, path, converged, start_ll, n_evals, cycles, float(sigma0_sq))


def normalize(eps, vol: VolatilityPath) -> np.ndarray:
    """Excess returns divided elementwise by their conditional volatility."""
    eps = _as_vector(eps)
    sigma = np.asarray(vol.sigma if isinstance(vol, VolatilityPath) else vol, dtype=float)
    if sigma.shape != eps.shape:
        raise ShapeError(f"series has {eps.size} observations but volatility path has {sigma.size}")
    if np.any(~(sigma > 0)):
        raise DomainError("conditional volatilities must be strictly positive")
    return eps / sigma
