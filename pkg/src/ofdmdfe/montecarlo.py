"""Monte-Carlo estimators used to cross-check the quadrature engine.

These sample the channel directly and evaluate the known Gaussian-mixture
density at the samples; they share nothing with the quadrature code beyond
the PAM level set.  Draws are stratified over the transmitted level and over
the noise quantile to cut the variance.
"""

import math

import numpy as np
from scipy.special import logsumexp, ndtri

from .qam_capacity import as_constellation

_CHUNK = 1 << 18


def _stratified_noise(rng, n_draws, p):
    """Yield ``(level_index, noise)`` chunks covering ``n_draws`` draws.

    Each level gets the same number of draws, one per equal-probability
    stratum of the standard normal, with a uniform random position inside
    the stratum.
    """
    per_level = max(1, n_draws // p)
    step = max(1, _CHUNK // p)
    for start in range(0, per_level, step):
        k = np.arange(start, min(start + step, per_level))
        u = (k[None, :] + rng.random((p, k.size))) / per_level
        noise = ndtri(u)
        idx = np.broadcast_to(np.arange(p)[:, None], noise.shape)
        yield idx.ravel(), noise.ravel()


def mc_qam_capacity(gamma, constellation, n_draws=10**7, seed=12345):
    """Plug-in mutual-information estimate, bits per complex symbol.

    Averages ``log2 f(r | a) - log2 f(r)`` over simulated PAM outputs and
    doubles the result for the two QAM dimensions.
    """
    const = as_constellation(constellation)
    if gamma == 0:
        return 0.0
    lv = const.levels
    p = lv.size
    sigma = math.sqrt(const.sigma_x2 / gamma)
    rng = np.random.default_rng(seed)
    total, count = 0.0, 0
    for idx, n in _stratified_noise(rng, n_draws, p):
        r = lv[idx] + sigma * n
        log_cond = -0.5 * n**2
        log_mix = logsumexp(-0.5 * ((r[:, None] - lv[None, :]) / sigma) ** 2, axis=1) - math.log(p)
        total += float(np.sum(log_cond - log_mix))
        count += n.size
    return 2.0 * total / count / math.log(2.0)


def mc_pam_mmse(gamma, constellation, n_draws=10**7, seed=12345):
    """Monte-Carlo normalised MMSE from the posterior of each simulated output.

    Averages the posterior variance ``E[X^2 | r] - E[X | r]^2`` (the
    conditional-mean estimator's expected squared error) over the draws.
    """
    const = as_constellation(constellation)
    lv = const.levels
    p = lv.size
    sigma = math.sqrt(const.sigma_x2 / gamma)
    rng = np.random.default_rng(seed)
    total, count = 0.0, 0
    for idx, n in _stratified_noise(rng, n_draws, p):
        r = lv[idx] + sigma * n
        logw = -0.5 * ((r[:, None] - lv[None, :]) / sigma) ** 2
        w = np.exp(logw - logw.max(axis=1, keepdims=True))
        w /= w.sum(axis=1, keepdims=True)
        mean = w @ lv
        total += float(np.sum(w @ lv**2 - mean**2))
        count += n.size
    return total / count / const.sigma_x2
