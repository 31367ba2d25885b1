"""Skew-generalized-normal (SGN) machinery for effective-SINR fitting.

An effective SINR is log-SGN distributed when X = ln(Gamma_eff) follows
the 4-parameter SGN law with density

    f(x) = (2/sigma) * psi((x-mu)/sigma)
                     * PSI(lambda1*(x-mu) / sqrt(sigma^2 + lambda2*(x-mu)^2)),

where psi/PSI are the standard normal PDF/CDF, sigma > 0 and
lambda2 >= 0. Fitting is maximum likelihood via Nelder-Mead with
exp-reparameterization of the constrained parameters.
"""

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.optimize import minimize
from scipy.special import erfc, log_ndtr

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_CDF_GRID_POINTS = 2048      # cached CDF grid resolution
_CDF_GRID_HALF_WIDTH = 12.0  # in units of sigma; tail mass < 1e-31
_ENVELOPE_SCALE = 4.0        # rejection-sampling envelope constant
_MAX_FIT_ITER = 2000


def std_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / _SQRT_2PI
    return out if out.ndim else float(out)


def std_normal_cdf(x):
    x = np.asarray(x, dtype=float)
    out = 0.5 * erfc(-x / math.sqrt(2.0))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class LogSgnParams:
    """Location/scale/shape parameters of the SGN law of ln(Gamma_eff)."""

    mu: float
    sigma: float
    lambda1: float
    lambda2: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        if self.lambda2 < 0:
            raise ValueError("lambda2 must be >= 0")

    def as_dict(self):
        return {
            "mu": self.mu,
            "sigma": self.sigma,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
        }


@dataclass
class FitReport:
    params: LogSgnParams
    log_likelihood: float
    ks_distance: float
    n_samples: int
    converged: bool
    iterations: int

    def as_dict(self):
        return {
            **self.params.as_dict(),
            "loglik": self.log_likelihood,
            "ks": self.ks_distance,
            "n": self.n_samples,
            "converged": self.converged,
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=2)
            fh.write("\n")


def _skew_arg(x, p: LogSgnParams):
    t = x - p.mu
    return p.lambda1 * t / np.sqrt(p.sigma**2 + p.lambda2 * t * t)


def sgn_pdf(x, p: LogSgnParams):
    x = np.asarray(x, dtype=float)
    t = (x - p.mu) / p.sigma
    out = (2.0 / p.sigma) * np.exp(-0.5 * t * t) / _SQRT_2PI \
        * std_normal_cdf(_skew_arg(x, p))
    out = np.asarray(out)
    return out if out.ndim else float(out)


def sgn_logpdf(x, p: LogSgnParams):
    """Log density; uses log_ndtr so deep skew tails stay finite."""
    x = np.asarray(x, dtype=float)
    t = (x - p.mu) / p.sigma
    return (
        math.log(2.0 / p.sigma)
        - 0.5 * t * t
        - math.log(_SQRT_2PI)
        + log_ndtr(_skew_arg(x, p))
    )


def _cdf_grid(p: LogSgnParams, n_points=_CDF_GRID_POINTS):
    """Cached-grid CDF: cumulative Simpson of the density over
    mu +/- _CDF_GRID_HALF_WIDTH sigma. The half width is floored at the
    float resolution around mu so degenerate (near-constant) fits still
    yield a usable step-like CDF."""
    half = max(_CDF_GRID_HALF_WIDTH * p.sigma,
               1e-9 * max(1.0, abs(p.mu)))
    xs = np.linspace(p.mu - half, p.mu + half, n_points + 1)
    cdf = cumulative_simpson(sgn_pdf(xs, p), x=xs, initial=0.0)
    return xs, np.clip(cdf, 0.0, 1.0)


def sgn_cdf(x, p: LogSgnParams, _cache={}):
    """SGN CDF by quadrature, interpolated on a cached grid."""
    key = (p.mu, p.sigma, p.lambda1, p.lambda2)
    if key not in _cache:
        if len(_cache) > 64:
            _cache.clear()
        _cache[key] = _cdf_grid(p)
    xs, cdf = _cache[key]
    x = np.asarray(x, dtype=float)
    out = np.interp(x, xs, cdf, left=0.0, right=1.0)
    return out if out.ndim else float(out)


def sample_sgn(p: LogSgnParams, n, seed):
    """i.i.d. SGN samples by rejection from a N(mu, (2*sigma)^2) envelope.

    The envelope 4 * N(mu, (2*sigma)^2) dominates the density
    analytically (f/q = 4*psi(t)*PSI(.)/psi(t/2) <= 4); the bound is
    re-asserted on a dense grid at construction as a guard against
    parameter pathologies.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    grid = np.linspace(p.mu - 10.0 * p.sigma, p.mu + 10.0 * p.sigma, 4001)
    envelope = _ENVELOPE_SCALE * std_normal_pdf((grid - p.mu) / (2.0 * p.sigma)) \
        / (2.0 * p.sigma)
    if np.any(sgn_pdf(grid, p) > envelope * (1.0 + 1e-12)):
        raise ValueError("rejection envelope violated for these parameters")

    rng = np.random.default_rng(seed)
    out = np.empty(n)
    filled = 0
    while filled < n:
        m = max(2 * (n - filled), 1024)
        cand = p.mu + 2.0 * p.sigma * rng.standard_normal(m)
        env = _ENVELOPE_SCALE * std_normal_pdf((cand - p.mu) / (2.0 * p.sigma)) \
            / (2.0 * p.sigma)
        keep = cand[rng.random(m) * env < sgn_pdf(cand, p)]
        take = min(len(keep), n - filled)
        out[filled:filled + take] = keep[:take]
        filled += take
    return out


def ks_distance(samples_a, cdf_or_samples_b):
    """Kolmogorov-Smirnov statistic.

    One-sample when the second argument is callable (CDF) or a
    LogSgnParams (CDF by quadrature); two-sample (exact sorted-merge)
    when it is an array of samples.
    """
    a = np.sort(np.asarray(samples_a, dtype=float))
    if a.size < 2:
        raise ValueError("need at least 2 samples")

    if isinstance(cdf_or_samples_b, LogSgnParams):
        cdf = lambda x: sgn_cdf(x, cdf_or_samples_b)  # noqa: E731
    elif callable(cdf_or_samples_b):
        cdf = cdf_or_samples_b
    else:
        b = np.sort(np.asarray(cdf_or_samples_b, dtype=float))
        if b.size < 2:
            raise ValueError("need at least 2 samples")
        # exact two-sample statistic over the merged support
        allv = np.concatenate([a, b])
        cdf_a = np.searchsorted(a, allv, side="right") / a.size
        cdf_b = np.searchsorted(b, allv, side="right") / b.size
        return float(np.abs(cdf_a - cdf_b).max())

    f = np.asarray(cdf(a), dtype=float)
    n = a.size
    ecdf_hi = np.arange(1, n + 1) / n
    ecdf_lo = np.arange(0, n) / n
    return float(max((ecdf_hi - f).max(), (f - ecdf_lo).max()))


def _neg_loglik(theta, x):
    mu, log_sigma, lam1, log_lam2 = theta
    if not np.all(np.isfinite(theta)) or abs(log_sigma) > 50 or log_lam2 > 50:
        return 1e300
    p = LogSgnParams(mu, math.exp(log_sigma), lam1, math.exp(log_lam2))
    ll = np.sum(sgn_logpdf(x, p))
    return 1e300 if not np.isfinite(ll) else -ll


def fit_sgn(x):
    """Maximum-likelihood SGN fit of real-valued samples.

    Derivative-free simplex search over (mu, ln sigma, lambda1,
    ln lambda2); moment-based initialization with three lambda1 starts
    (0 and +/- the sign of the sample skewness), best likelihood wins.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 100:
        raise ValueError("need at least 100 samples to fit")
    mu0 = float(np.mean(x))
    sigma0 = max(float(np.std(x)), 1e-6)
    skew = float(np.mean(((x - mu0) / sigma0) ** 3))
    lam0 = math.copysign(1.0, skew) if skew != 0 else 1.0
    starts = [
        (mu0, math.log(sigma0), 0.0, math.log(0.1)),
        (mu0, math.log(sigma0), lam0, math.log(0.1)),
        (mu0, math.log(sigma0), -lam0, math.log(0.1)),
    ]

    best = None
    iterations = 0
    converged = False
    for theta0 in starts:
        res = minimize(
            _neg_loglik, theta0, args=(x,), method="Nelder-Mead",
            options={"maxiter": _MAX_FIT_ITER, "xatol": 1e-6, "fatol": 1e-8},
        )
        iterations += res.nit
        if best is None or res.fun < best.fun:
            best = res
            converged = bool(res.success)

    mu, log_sigma, lam1, log_lam2 = best.x
    params = LogSgnParams(mu, math.exp(log_sigma), lam1, math.exp(log_lam2))
    return FitReport(
        params=params,
        log_likelihood=float(-best.fun),
        ks_distance=ks_distance(x, params),
        n_samples=int(x.size),
        converged=converged,
        iterations=int(iterations),
    )


def fit_logsgn(effective_sinrs):
    """Fit the log-SGN law: SGN MLE on X = ln(samples)."""
    s = np.asarray(effective_sinrs, dtype=float)
    if np.any(s <= 0):
        raise ValueError("effective SINR samples must be positive")
    return fit_sgn(np.log(s))


def loglik(x, p: LogSgnParams):
    """Total log likelihood of samples under fixed parameters."""
    return float(np.sum(sgn_logpdf(np.asarray(x, dtype=float), p)))
