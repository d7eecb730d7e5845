"""A2 Archimedean copula: generator, CDF, density, tail coefficient and fitting.

The generator is

    phi(t) = (t^(-1/theta) + t^(1/theta) - 2)^theta,   theta >= 1.

Writing ``w = t^(1/(2 theta))`` and ``g = 1/w - w`` gives ``phi = g^(2 theta)``,
which is the form used internally: ``g`` is computed with ``expm1`` so that the
generator stays accurate near ``t = 1``, and the inverse becomes the positive
root of ``w^2 + g w - 1 = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import integrate, optimize

from tailsel.errors import (
    DataError,
    DomainError,
    OptimizationError,
    QuadratureError,
    UndefinedStatisticError,
)

THETA_MAX = 50.0
DENSITY_CLIP = 1e-12
MIN_FIT_SIZE = 10
_TINY = np.finfo(float).tiny

_LOG2 = math.log(2.0)


def _check_theta(theta: float, theta_max: float | None = None) -> float:
    theta = float(theta)
    if not np.isfinite(theta) or theta < 1.0:
        raise DomainError(f"theta must be >= 1, got {theta!r}")
    if theta_max is not None and theta > theta_max:
        raise DomainError(f"theta must be <= {theta_max}, got {theta!r}")
    return theta


def _scalar_or_array(x: np.ndarray, like) -> float | np.ndarray:
    if np.ndim(like) != 0:
        return x
    x = np.asarray(x)
    return x[()] if x.dtype == np.longdouble else float(x)


# ---------------------------------------------------------------------------
# generator and its inverse
# ---------------------------------------------------------------------------

def generator(t, theta: float):
    """Evaluate the A2 generator phi(t; theta) for t in (0, 1]."""
    theta = _check_theta(theta)
    t_arr = np.asarray(t, dtype=float)
    if np.any(~(t_arr > 0.0)) or np.any(t_arr > 1.0):
        raise DomainError("generator is defined for t in (0, 1]")
    a = 0.5 / theta
    lt = np.log(t_arr)
    # g = t^-a - t^a = t^-a * (1 - t^(2a))
    g = -np.expm1(2.0 * a * lt) * np.exp(-a * lt)
    phi = np.power(g, 2.0 * theta)
    # Near t = 1 with large theta, g^(2 theta) drops below the double range and
    # the round trip through the inverse is lost; keep those in long double.
    if np.any((phi < _TINY) & (g > 0.0)):
        phi = np.power(g.astype(np.longdouble), np.longdouble(2.0 * theta))
    return _scalar_or_array(phi, t)


def generator_inverse(s, theta: float):
    """Evaluate the inverse generator for s >= 0; returns values in (0, 1]."""
    theta = _check_theta(theta)
    s_arr = np.asarray(s)
    s_arr = s_arr if s_arr.dtype == np.longdouble else s_arr.astype(float)
    if np.any(~(s_arr >= 0.0)):
        raise DomainError("inverse generator is defined for s >= 0")
    g = np.power(s_arr, 0.5 / theta).astype(float)
    with np.errstate(invalid="ignore", over="ignore"):
        # stable root of w^2 + g w - 1 = 0
        w = 2.0 / (g + np.sqrt(g * g + 4.0))
    w = np.where(np.isinf(g), 0.0, w)
    return _scalar_or_array(np.power(w, 2.0 * theta), s)


def _log_phi_terms(t: np.ndarray, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Return (log phi(t), log |phi'(t)|) for t in (0, 1)."""
    a = 0.5 / theta
    lt = np.log(t)
    log_g = np.log(-np.expm1(2.0 * a * lt)) - a * lt
    log_phi = 2.0 * theta * log_g
    # |phi'(t)| = g^(2 theta - 1) * (1 + w^2) / (w t)
    log_dphi = (2.0 * theta - 1.0) * log_g + np.log1p(np.exp(2.0 * a * lt)) - a * lt - lt
    return log_phi, log_dphi


def _log_psi_terms(log_s: np.ndarray, theta: float):
    """Log of psi, |psi'| and psi'' at s = exp(log_s), psi the inverse generator.

    With g = s^a, r = sqrt(g^2 + 4), a = 1/(2 theta):
        psi'  = -psi * g / (r s)
        psi'' =  psi * g / (r s^2) * (g / r + 1 - 4 a / r^2)
    """
    a = 0.5 / theta
    g = np.exp(a * log_s)
    r = np.sqrt(g * g + 4.0)
    log_psi = 2.0 * theta * (_LOG2 - np.log(g + r))
    log_h = np.log(g) - np.log(r) - log_s
    log_dpsi = log_psi + log_h
    log_d2psi = log_psi + log_h - log_s + np.log(g / r + 1.0 - 4.0 * a / (r * r))
    return log_psi, log_dpsi, log_d2psi


# ---------------------------------------------------------------------------
# copula functions
# ---------------------------------------------------------------------------

def copula_cdf(u, v, theta: float):
    """C(u, v) = psi(phi(u) + phi(v)) on the closed unit square."""
    theta = _check_theta(theta)
    u_arr, v_arr = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    for arr in (u_arr, v_arr):
        if np.any(~((arr >= 0.0) & (arr <= 1.0))):
            raise DomainError("copula_cdf is defined on [0, 1]^2")
    interior = (u_arr > 0) & (v_arr > 0) & (u_arr < 1) & (v_arr < 1)
    uu = np.where(interior, u_arr, 0.5)
    vv = np.where(interior, v_arr, 0.5)
    inner = generator_inverse(generator(uu, theta) + generator(vv, theta), theta)
    out = np.where(
        (u_arr == 0) | (v_arr == 0),
        0.0,
        np.where(v_arr == 1, u_arr, np.where(u_arr == 1, v_arr, inner)),
    )
    return float(out) if out.ndim == 0 else out


def log_copula_density(u, v, theta: float) -> np.ndarray:
    """Log density; inputs are clipped to [DENSITY_CLIP, 1 - DENSITY_CLIP]."""
    theta = _check_theta(theta)
    u = np.clip(np.asarray(u, dtype=float), DENSITY_CLIP, 1.0 - DENSITY_CLIP)
    v = np.clip(np.asarray(v, dtype=float), DENSITY_CLIP, 1.0 - DENSITY_CLIP)
    log_phi_u, log_dphi_u = _log_phi_terms(u, theta)
    log_phi_v, log_dphi_v = _log_phi_terms(v, theta)
    log_s = np.logaddexp(log_phi_u, log_phi_v)
    _, _, log_d2psi = _log_psi_terms(log_s, theta)
    return log_d2psi + log_dphi_u + log_dphi_v


def copula_density(u, v, theta: float):
    """Copula density c(u, v) = psi''(phi(u) + phi(v)) phi'(u) phi'(v) on (0, 1)^2."""
    u_arr = np.asarray(u, dtype=float)
    v_arr = np.asarray(v, dtype=float)
    for arr in (u_arr, v_arr):
        if np.any(~((arr > 0.0) & (arr < 1.0))):
            raise DomainError("copula_density is defined on the open unit square")
    out = np.exp(log_copula_density(u_arr, v_arr, theta))
    return float(out) if out.ndim == 0 else out


def conditional_cdf(v, u, theta: float) -> np.ndarray:
    """P(V <= v | U = u) = dC/du, for u, v in (0, 1)."""
    theta = _check_theta(theta)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    log_phi_u, log_dphi_u = _log_phi_terms(u, theta)
    log_phi_v, _ = _log_phi_terms(v, theta)
    _, log_dpsi, _ = _log_psi_terms(np.logaddexp(log_phi_u, log_phi_v), theta)
    return np.exp(log_dpsi + log_dphi_u)


def upper_tail_coefficient(theta: float) -> float:
    """lambda_U = 2 - 2^(1/(2 theta))."""
    theta = _check_theta(theta)
    return 2.0 - 2.0 ** (1.0 / (2.0 * theta))


# ---------------------------------------------------------------------------
# Kendall's tau
# ---------------------------------------------------------------------------

def _kendall_integrand(t: float, theta: float) -> float:
    # -phi(t)/phi'(t) = t (1 - t^(1/theta)) / (1 + t^(1/theta)) = -t tanh(log(t) / (2 theta))
    if t <= 0.0:
        return 0.0
    return -t * math.tanh(math.log(t) / (2.0 * theta))


def kendall_tau_model(theta: float, theta_max: float = THETA_MAX) -> float:
    """Population Kendall's tau of the A2 copula, 1 + 4 * int_0^1 phi/phi' dt."""
    theta = _check_theta(theta, theta_max)
    value, abserr, info = integrate.quad(
        _kendall_integrand, 0.0, 1.0, args=(theta,), epsabs=1e-8, epsrel=0.0, limit=200, full_output=1
    )[:3]
    if abserr > 1e-8:
        raise QuadratureError(f"Kendall tau quadrature did not converge (theta={theta}, err={abserr:.2e})")
    return 1.0 - 4.0 * value


def _dense_ranks(x: np.ndarray) -> np.ndarray:
    _, inv = np.unique(x, return_inverse=True)
    return inv.astype(np.int64).ravel()


def _tie_pairs(codes: np.ndarray) -> int:
    counts = np.bincount(codes).astype(np.int64)
    return int((counts * (counts - 1) // 2).sum())


def count_inversions(values: np.ndarray) -> int:
    """Number of pairs i < j with values[i] > values[j].

    Bottom-up merge sort: at each level the count for a right-block element is
    the number of strictly larger elements in its sorted left sibling. The
    merge itself is a stable sort of block-offset keys; timsort detects the two
    presorted runs per block, so each level is linear.
    """
    a = _dense_ranks(np.asarray(values))
    n = a.size
    if n < 2:
        return 0
    m = int(a.max()) + 1
    idx = np.arange(n, dtype=np.int64)
    total = 0
    width = 1
    while width < n:
        block = idx // (2 * width)
        right = (idx // width) % 2 == 1
        key = block * m + a
        left_keys = key[~right]
        right_keys = key[right]
        not_greater = np.searchsorted(left_keys, right_keys, side="right")
        block_end = np.searchsorted(left_keys, (block[right] + 1) * m, side="left")
        total += int((block_end - not_greater).sum())
        a = np.sort(key, kind="stable") - block * m
        width *= 2
    return total


def kendall_tau_empirical(x, y) -> float:
    """Tie-adjusted Kendall tau-b in O(n log n) (Knight's algorithm)."""
    x = np.asarray(x).ravel()
    y = np.asarray(y).ravel()
    if x.size != y.size:
        raise ValueError("x and y must have the same length")
    n = x.size
    if n < 2:
        raise UndefinedStatisticError("Kendall tau needs at least two observations")
    rx = _dense_ranks(x)
    ry = _dense_ranks(y)
    n0 = n * (n - 1) // 2
    n1 = _tie_pairs(rx)
    n2 = _tie_pairs(ry)
    if n1 == n0 or n2 == n0:
        raise UndefinedStatisticError("Kendall tau is undefined when a margin is constant")
    joint = rx * (int(ry.max()) + 1) + ry
    n3 = _tie_pairs(_dense_ranks(joint))
    order = np.lexsort((ry, rx))
    discordant = count_inversions(ry[order])
    concordant = n0 - n1 - n2 + n3 - discordant
    return (concordant - discordant) / math.sqrt((n0 - n1) * (n0 - n2))


# ---------------------------------------------------------------------------
# estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PseudoSample:
    """Paired pseudo-observations strictly inside the unit square."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        u = np.asarray(self.u, dtype=float).ravel()
        v = np.asarray(self.v, dtype=float).ravel()
        if u.size != v.size:
            raise DataError("u and v must have the same length")
        for arr in (u, v):
            if np.any(~((arr > 0.0) & (arr < 1.0))):
                raise DomainError("pseudo-observations must lie strictly inside (0, 1)")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def n(self) -> int:
        return int(self.u.size)


@dataclass(frozen=True)
class ThetaEstimate:
    theta: float
    method: Literal["tau_inversion", "pseudo_mle"]
    tau_hat: float
    clamped: bool
    log_likelihood: float | None = None

    @property
    def lambda_u(self) -> float:
        return upper_tail_coefficient(self.theta)

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "method": self.method,
            "tau_hat": self.tau_hat,
            "clamped": self.clamped,
            "log_likelihood": self.log_likelihood,
            "lambda_u": self.lambda_u,
        }


def theta_from_tau(tau: float, theta_max: float = THETA_MAX, tol: float = 1e-6) -> tuple[float, bool]:
    """Invert kendall_tau_model by bisection; returns (theta, clamped)."""
    lo, hi = 1.0, float(theta_max)
    if tau <= kendall_tau_model(lo, theta_max):
        return lo, True
    if tau >= kendall_tau_model(hi, theta_max):
        return hi, True
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if kendall_tau_model(mid, theta_max) < tau:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), False


def _require_fit_size(sample: PseudoSample) -> None:
    if sample.n < MIN_FIT_SIZE:
        raise DataError(f"fitting needs at least {MIN_FIT_SIZE} pairs, got {sample.n}")


def fit_theta_tau(sample: PseudoSample, theta_max: float = THETA_MAX) -> ThetaEstimate:
    """Estimate theta by inverting Kendall's tau.

    Samples whose tau lies below tau(1) (weak or negative dependence) are
    clamped to theta = 1 and flagged.
    """
    _require_fit_size(sample)
    tau_hat = kendall_tau_empirical(sample.u, sample.v)
    theta, clamped = theta_from_tau(tau_hat, theta_max)
    return ThetaEstimate(theta=theta, method="tau_inversion", tau_hat=tau_hat, clamped=clamped)


def log_likelihood(sample: PseudoSample, theta: float) -> float:
    return float(np.sum(log_copula_density(sample.u, sample.v, theta)))


def fit_theta_mle(
    sample: PseudoSample,
    init: float | None = None,
    theta_max: float = THETA_MAX,
    tau_hat: float | None = None,
) -> ThetaEstimate:
    """Maximize the pseudo-log-likelihood over [1, theta_max].

    Uses bounded Brent search on log(theta), so the 1e-6 tolerance is relative
    in theta. ``init`` defaults to the tau-inversion estimate; if the likelihood
    there beats the global search, the search is repeated on a bracket around it.
    """
    _require_fit_size(sample)
    if init is None or tau_hat is None:
        tau_est = fit_theta_tau(sample, theta_max)
        init = tau_est.theta if init is None else init
        tau_hat = tau_est.tau_hat
    init = min(max(float(init), 1.0), theta_max)
    log_hi = math.log(theta_max)
    finite_seen = False

    def nll(x: float) -> float:
        nonlocal finite_seen
        with np.errstate(all="ignore"):
            val = -log_likelihood(sample, math.exp(x))
        if not np.isfinite(val):
            return 1e300
        finite_seen = True
        return val

    res = optimize.minimize_scalar(nll, bounds=(0.0, log_hi), method="bounded", options={"xatol": 1e-6})
    candidates = [(res.fun, res.x)]
    x0 = math.log(init)
    f0 = nll(x0)
    if f0 < res.fun:
        local = optimize.minimize_scalar(
            nll,
            bounds=(max(0.0, x0 - 0.5), min(log_hi, x0 + 0.5)),
            method="bounded",
            options={"xatol": 1e-6},
        )
        candidates += [(f0, x0), (local.fun, local.x)]
    candidates += [(nll(0.0), 0.0), (nll(log_hi), log_hi)]
    if not finite_seen:
        raise OptimizationError("pseudo-likelihood is non-finite at every probe point")
    best_f, best_x = min(candidates, key=lambda c: (c[0], c[1]))
    clamped = best_x in (0.0, log_hi)
    theta = 1.0 if best_x == 0.0 else (float(theta_max) if best_x == log_hi else math.exp(best_x))
    return ThetaEstimate(
        theta=theta, method="pseudo_mle", tau_hat=float(tau_hat), clamped=clamped, log_likelihood=float(-best_f)
    )


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def sample_conditional(theta: float, n: int, seed: int, tol: float = 1e-9) -> PseudoSample:
    """Draw n pairs from the A2 copula by conditional inversion.

    U is uniform; V solves dC/du(V | U) = P for an independent uniform P,
    found by vectorized bisection to ``tol``.
    """
    theta = _check_theta(theta)
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    eps = DENSITY_CLIP
    u = np.clip(rng.random(n), eps, 1.0 - eps)
    p = np.clip(rng.random(n), eps, 1.0 - eps)
    lo = np.zeros(n)
    hi = np.ones(n)
    n_iter = int(math.ceil(math.log2(1.0 / tol)))
    with np.errstate(all="ignore"):
        for _ in range(n_iter):
            mid = 0.5 * (lo + hi)
            below = conditional_cdf(mid, u, theta) <= p
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
    return PseudoSample(u, 0.5 * (lo + hi))
