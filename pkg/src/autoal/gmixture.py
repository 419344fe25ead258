"""Univariate Gaussian mixtures: EM fitting, density, sampling and the
top-fraction threshold taken from mixture draws."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

VAR_FLOOR = 1e-6
_LOG_2PI = math.log(2 * math.pi)


@dataclass(frozen=True)
class GaussianMixture:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    @property
    def n_components(self):
        return len(self.weights)

    def component_log_pdf(self, s):
        s = np.asarray(s, dtype=float)[..., None]
        return -0.5 * (_LOG_2PI + np.log(self.variances) + (s - self.means) ** 2 / self.variances)


@dataclass
class FitReport:
    iterations: int
    log_likelihood: float
    trace: list = field(default_factory=list)
    converged: bool = False


def _logsumexp(a):
    m = a.max(axis=1, keepdims=True)
    return (m + np.log(np.exp(a - m).sum(axis=1, keepdims=True)))[:, 0]


def _init_means(x, k, rng):
    # k-means++ seeding in one dimension
    means = [x[rng.integers(len(x))]]
    for _ in range(1, k):
        d2 = np.min((x[:, None] - np.array(means)[None, :]) ** 2, axis=1)
        total = d2.sum()
        means.append(x[rng.integers(len(x))] if total <= 0 else x[rng.choice(len(x), p=d2 / total)])
    return np.array(means, dtype=float)


def fit_em(observations, k, max_iters=200, tol=1e-6, seed=0, var_floor=VAR_FLOOR):
    """Maximum-likelihood mixture of ``k`` univariate Gaussians.

    The report's ``trace`` holds the mean per-observation log-likelihood
    after each E-step; ``tol`` applies to that per-observation scale.
    """
    x = np.asarray(observations, dtype=float).ravel()
    n = len(x)
    if k < 1:
        raise InputError("need at least one component")
    if k > n:
        raise InputError(f"{k} components but only {n} observations")
    if not np.all(np.isfinite(x)):
        raise InputError("observations must be finite")

    if np.ptp(x) == 0:
        gm = GaussianMixture(np.array([1.0]), np.array([x[0]]), np.array([var_floor]))
        ll = float(gm.component_log_pdf(x)[:, 0].mean())
        return gm, FitReport(0, ll * n, [ll], True)

    if k == 1:
        gm = GaussianMixture(np.array([1.0]), np.array([x.mean()]),
                             np.array([max(x.var(), var_floor)]))
        ll = float(gm.component_log_pdf(x)[:, 0].mean())
        return gm, FitReport(1, ll * n, [ll], True)

    rng = np.random.default_rng(seed)
    weights = np.full(k, 1.0 / k)
    means = _init_means(x, k, rng)
    variances = np.full(k, max(x.var(), var_floor))

    trace = []
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        gm = GaussianMixture(weights, means, variances)
        log_joint = gm.component_log_pdf(x) + np.log(np.maximum(weights, 1e-300))
        log_norm = _logsumexp(log_joint)
        ll = math.fsum(log_norm) / n
        if trace and ll - trace[-1] < tol:
            trace.append(ll)
            converged = True
            break
        trace.append(ll)
        resp = np.exp(log_joint - log_norm[:, None])
        nk = resp.sum(axis=0)
        live = nk > 1e-12
        weights = nk / n
        means = np.where(live, (resp * x[:, None]).sum(axis=0) / np.where(live, nk, 1.0), means)
        var = (resp * (x[:, None] - means) ** 2).sum(axis=0) / np.where(live, nk, 1.0)
        variances = np.maximum(np.where(live, var, variances), var_floor)
    gm = GaussianMixture(weights, means, variances)
    if not converged:
        log_joint = gm.component_log_pdf(x) + np.log(np.maximum(weights, 1e-300))
        trace.append(math.fsum(_logsumexp(log_joint)) / n)
    return gm, FitReport(it, trace[-1] * n, trace, converged)


def density(gm, s):
    """Mixture pdf evaluated at ``s`` (scalar or array)."""
    comp = np.exp(gm.component_log_pdf(s))
    return (comp * gm.weights).sum(axis=-1)


def sample(gm, count, seed=0):
    rng = np.random.default_rng(seed)
    comp = rng.choice(gm.n_components, size=count, p=gm.weights / gm.weights.sum())
    return gm.means[comp] + np.sqrt(gm.variances[comp]) * rng.standard_normal(count)


def threshold_top_t(samples, t):
    """The ``ceil(t * len)``-th largest value of ``samples``."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise InputError("no samples")
    if not 0 < t <= 1:
        raise InputError("t must lie in (0, 1]")
    rank = max(1, math.ceil(t * samples.size - 1e-9))
    return float(np.sort(samples)[::-1][rank - 1])
