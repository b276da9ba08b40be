"""Monte-Carlo oracle: exact simulation of batched two-arm trials under H0.

Replications are generated in fixed-size blocks; block ``b`` always uses the
stream keyed ``("mc", b)``, so the output for a replication index does not
depend on how many workers run the blocks or in which order.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import sqrt

import numpy as np

from . import rng as rngmod
from .errors import DegenerateDesignError, DegenerateVarianceError
from .noise import sample
from .policy import clamped_binomial

BLOCK = 8192
MAX_RESAMPLE = 20


@dataclass(frozen=True)
class StageOutcome:
    counts: tuple
    delta_hat: float
    sigma_hat2: float
    z_dot: tuple
    z_ddot: float


def bols(rewards, assignments):
    """Batched-OLS arm-mean difference and residual variance.

    ``assignments`` holds 1 for arm 1 and 0 (or 2) for arm 2.
    Returns ``(delta_hat, sigma_hat2)`` with the residual sum of squares
    divided by ``n - 1``.
    """
    r = np.asarray(rewards, dtype=float)
    a1 = np.asarray(assignments) == 1
    n1, n = int(a1.sum()), r.size
    if n1 == 0 or n1 == n:
        raise DegenerateDesignError("an arm received no subjects")
    if n < 3:
        raise DegenerateDesignError("at least three subjects are required")
    m1, m2 = r[a1].mean(), r[~a1].mean()
    resid = np.where(a1, r - m1, r - m2)
    s2 = float(resid @ resid / (n - 1))
    if s2 <= 0:
        raise DegenerateVarianceError("zero residual variance")
    return float(m1 - m2), s2


def stage_term(counts, delta_hat, sigma_hat2):
    n1, n2 = counts
    return sqrt(n1 * n2) / (sqrt(n1 + n2) * sqrt(sigma_hat2)) * delta_hat


def test_statistic(outcomes):
    """Aggregated statistic ``S^{-1/2} sum_s sqrt(N1 N2 / n) Delta_s / sigma_s``."""
    if not outcomes:
        raise ValueError("no stages")
    total = 0.0
    for o in outcomes:
        if not o.sigma_hat2 > 0:
            raise DegenerateVarianceError("zero residual variance")
        total += stage_term(o.counts, o.delta_hat, o.sigma_hat2)
    return total / sqrt(len(outcomes))


def _stage_arrays(noise_rows, n1):
    """Vectorized BOLS pieces; the first ``n1[i]`` entries of row i are arm 1."""
    B, n = noise_rows.shape
    col = np.arange(n)[None, :]
    arm1 = col < n1[:, None]
    s1 = np.where(arm1, noise_rows, 0.0).sum(axis=1)
    s_all = noise_rows.sum(axis=1)
    n2 = n - n1
    m1 = s1 / n1
    m2 = (s_all - s1) / n2
    sq = (noise_rows**2).sum(axis=1)
    rss = sq - n1 * m1**2 - n2 * m2**2
    # guard cancellation for tiny rss with an explicit recomputation
    small = rss < 1e-8 * sq
    if np.any(small):
        resid = noise_rows - np.where(arm1, m1[:, None], m2[:, None])
        rss[small] = (resid[small] ** 2).sum(axis=1)
    s2 = rss / (n - 1)
    return m1 - m2, s2, s1, s_all - s1, sq


def simulate_block(config, block, size=BLOCK):
    """Simulate replications ``block*size .. block*size+size-1``.

    Returns a dict of arrays: ``stat`` (size,), per-stage ``counts``,
    ``delta``, ``sigma2`` (size, S) and ``resampled`` (int).
    """
    S = config.stages
    g = rngmod.stream(config.seed, "mc", block)
    stat = np.zeros(size)
    counts = np.zeros((size, S), dtype=np.int64)
    delta = np.zeros((size, S))
    sig2 = np.zeros((size, S))
    zdot = np.zeros((size, S, 2))
    zddot = np.zeros((size, S))
    label = np.zeros(size, dtype=np.int64)
    resampled = 0
    for s in range(S):
        n = config.n[s]
        pol = config.policies[s]
        probs = [config.policies[0].probs] if s == 0 else [pr for _, pr in pol.labels()]
        laws = [clamped_binomial(n, pr[0], config.min_arm_count) for pr in probs]
        n1 = np.empty(size, dtype=np.int64)
        u = g.random(size)
        for i, law in enumerate(laws):
            sel = label == i
            cdf = np.cumsum(law.weights)
            cdf[-1] = 1.0
            idx = np.searchsorted(cdf, u[sel], side="right")
            n1[sel] = law.support[np.minimum(idx, law.support.size - 1)]
        eps = sample(config.noise[s], g, size * n).reshape(size, n)
        d, s2, a, b, sq = _stage_arrays(eps, n1)
        bad = np.flatnonzero(~(s2 > 0))
        tries = 0
        while bad.size:
            if tries >= MAX_RESAMPLE:
                raise DegenerateVarianceError(f"persistent zero variance in block {block}")
            sub = rngmod.stream(config.seed, "mc-resample", block, s, tries)
            e2 = sample(config.noise[s], sub, bad.size * n).reshape(bad.size, n)
            d2, s22, a2, b2, sq2 = _stage_arrays(e2, n1[bad])
            d[bad], s2[bad], a[bad], b[bad], sq[bad] = d2, s22, a2, b2, sq2
            resampled += bad.size
            bad = bad[~(s22 > 0)]
            tries += 1
        counts[:, s], delta[:, s], sig2[:, s] = n1, d, s2
        zdot[:, s, 0] = a / np.sqrt(n1)
        zdot[:, s, 1] = b / np.sqrt(n - n1)
        zddot[:, s] = (sq - n) / sqrt(n)
        stat += np.sqrt(n1 * (n - n1) / n) * d / np.sqrt(s2)
        if s + 1 < S:
            # decision statistic sqrt(n) * (mean1 - mean2)
            label = config.policies[s + 1].label_index(sqrt(n) * d)
    return {
        "stat": stat / sqrt(S),
        "counts": counts,
        "delta": delta,
        "sigma2": sig2,
        "z_dot": zdot,
        "z_ddot": zddot,
        "resampled": resampled,
    }


def simulate_trial(config, rep_index):
    """Outcomes and statistic of replication ``rep_index``."""
    b, i = divmod(int(rep_index), BLOCK)
    res = simulate_block(config, b)
    outs = []
    for s in range(config.stages):
        n = config.n[s]
        n1 = int(res["counts"][i, s])
        d, s2 = float(res["delta"][i, s]), float(res["sigma2"][i, s])
        zd = tuple(float(v) for v in res["z_dot"][i, s])
        outs.append(StageOutcome((n1, n - n1), d, s2, zd, float(res["z_ddot"][i, s])))
    return outs, float(res["stat"][i])


def simulate_statistics(config, reps=None, workers=1):
    """Statistics of replications ``0 .. reps-1`` plus the resample count."""
    reps = int(reps or config.mc_reps)
    nblocks = -(-reps // BLOCK)

    def run(b):
        return simulate_block(config, b)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            blocks = list(ex.map(run, range(nblocks)))
    else:
        blocks = [run(b) for b in range(nblocks)]
    stats = np.concatenate([blk["stat"] for blk in blocks])[:reps]
    return stats, sum(blk["resampled"] for blk in blocks)


def stage_outcome(rewards, assignments, sigma=1.0):
    """Full :class:`StageOutcome` from one stage's raw data under H0."""
    r = np.asarray(rewards, dtype=float)
    a1 = np.asarray(assignments) == 1
    d, s2 = bols(r, a1.astype(int))
    n1, n = int(a1.sum()), r.size
    e = r / sigma
    zd = (e[a1].sum() / sqrt(n1), e[~a1].sum() / sqrt(n - n1))
    zdd = float((e**2 - 1).sum() / sqrt(n))
    return StageOutcome((n1, n - n1), d, s2, zd, zdd)


def mc_quantiles(config, alphas=None, reps=None, workers=1):
    """Order-statistic quantiles of the simulated statistic.

    Returns a list of :class:`~bols_edgeworth.quantiles.QuantileResult`
    with binomial-band standard errors.
    """
    from .quantiles import order_statistic_quantiles

    stats, _ = simulate_statistics(config, reps, workers)
    return order_statistic_quantiles(stats, config.alphas if alphas is None else alphas)
