"""Backward evaluation of the tail probability ``P[T >= x]``.

The count laws are enumerated exactly, the strategy branch is resolved
pointwise from the previous stage's decision statistic, and the remaining
integrals over the stage score vectors are done by importance sampling with
Gaussian proposals.  One set of standard-normal base draws per stage is
shared by every count branch and every threshold ``x`` (common random
numbers), so the estimate is a deterministic function of ``x``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import log, pi, sqrt

import numba
import numpy as np

from . import rng as rngmod
from .edgeworth import ExpansionMeasure, _covariance, density_table
from .errors import ParameterDomainError
from .noise import standardized_moments
from .policy import clamped_binomial

PRUNE_TOL = 1e-10


@dataclass(frozen=True)
class StatWeights:
    """Per-stage coefficients of the aggregated statistic.

    ``l_dot`` combines the studentized arm scores into the statistic;
    ``l_ddot`` turns them into the decision statistic ``sqrt(n) * (mean1 - mean2)``.
    """

    l_dot: np.ndarray
    l_ddot: np.ndarray


def stat_weights(counts, n, stages):
    n1, n2 = (float(c) for c in counts)
    if n1 <= 0 or n2 <= 0:
        raise ParameterDomainError("arm counts must be positive")
    l_dot = np.array([sqrt(n2 / n), -sqrt(n1 / n)]) / sqrt(stages)
    l_ddot = np.array([(n1 / n) ** -0.5, -((n2 / n) ** -0.5)])
    return StatWeights(l_dot, l_ddot)


def statistic_map(y, n):
    """Studentization map ``ydot - ydot * y0 / (2 sqrt(n))`` (rows of ``y``)."""
    y = np.asarray(y, dtype=float)
    return y[..., :2] * (1.0 - y[..., 2:3] / (2.0 * sqrt(n)))


def integrand(ys, weights, x, ns):
    """Indicator that the approximated statistic is at least ``x``.

    Parameters
    ----------
    ys : sequence of array_like, shape (3,) or (m, 3)
        Transformed score vectors, one per stage.
    weights : sequence of StatWeights
    ns : sequence of int
        Batch sizes.
    """
    total = 0.0
    for y, w, n in zip(ys, weights, ns):
        total = total + statistic_map(y, n) @ w.l_dot
    return np.asarray(total >= x, dtype=float) if np.ndim(total) else float(total >= x)


@dataclass(frozen=True)
class Proposal:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def chol(self):
        return np.linalg.cholesky(self.cov)

    def logpdf(self, xi):
        L = self.chol
        d = np.linalg.solve(L, (np.atleast_2d(xi) - self.mean).T)
        logdet = 2 * np.log(np.diag(L)).sum()
        return -0.5 * (d * d).sum(axis=0) - 0.5 * logdet - 1.5 * log(2 * pi)


def proposal(x, weights, vbar, p):
    """Gaussian IS proposals ``N((x a_s, 0), p Vbar_s)`` per stage.

    ``a_s = l_dot_s / sum_t |l_dot_t|^2`` so the proposal means sit on the
    boundary ``sum_s l_dot_s . mean_s = x``.
    """
    if not p > 1:
        raise ParameterDomainError("proposal scale p must exceed 1")
    norm = sum(float(w.l_dot @ w.l_dot) for w in weights)
    out = []
    for w, V in zip(weights, vbar):
        mu = np.zeros(3)
        mu[:2] = x * w.l_dot / norm
        out.append(Proposal(mu, p * np.asarray(V, dtype=float)))
    return out


def base_draws(seed, stages, draws, key="is"):
    """Standard-normal base draws, one ``(draws, 3)`` block per stage."""
    return [rngmod.stream(seed, key, s).standard_normal((draws, 3)) for s in range(stages)]


def is_estimate(f, proposals, draws, seed, key="is"):
    """Importance-sampling estimate of ``int f`` over the product space.

    ``f`` receives the list of per-stage sample arrays and returns values of
    shape ``(draws,)``.  Returns ``(value, stderr)``.
    """
    draws = int(draws)
    eta = base_draws(seed, len(proposals), draws, key)
    xis, logq = [], 0.0
    for prop, e in zip(proposals, eta):
        xi, lq = _shift(prop, e)
        xis.append(xi)
        logq = logq + lq
    ratios = np.asarray(f(xis), dtype=float) * np.exp(-logq)
    if not np.all(np.isfinite(ratios)):
        bad = np.flatnonzero(~np.isfinite(ratios))
        raise FloatingPointError(f"non-finite IS ratios at draws {bad[:5].tolist()}")
    return float(ratios.mean()), float(ratios.std(ddof=1) / sqrt(draws))


def _shift(prop, eta):
    L = prop.chol
    xi = prop.mean + eta @ L.T
    logq = -0.5 * (eta * eta).sum(axis=1) - np.log(np.diag(L)).sum() - 1.5 * log(2 * pi)
    return xi, logq


@dataclass
class TailEstimate:
    x: float
    value: float
    stderr: float
    draws: int
    branch_weights: dict = field(default_factory=dict, repr=False)
    complement: bool = False
    flagged: tuple = ()


@dataclass
class _Stage:
    n: int
    support: np.ndarray          # union of count supports over labels
    table: np.ndarray            # (labels, support) count-law weights
    measures: list
    weights: list                # StatWeights per support value
    vbar: np.ndarray
    mean_counts: tuple


class BackwardEngine:
    """Tail-probability evaluator for a :class:`DesignConfig`.

    Parameters
    ----------
    config : DesignConfig
    draws, scale_p, seed : optional overrides of the config's IS settings.
    moments : optional per-stage MomentSet overrides (plug-in estimates).
    workers : number of threads sharing the draws.
    """

    def __init__(self, config, draws=None, scale_p=None, seed=None, moments=None, workers=1):
        self.config = config
        self.workers = max(1, int(workers))
        self.draws = int(draws or config.is_draws)
        self.p = float(scale_p or config.scale_p)
        self.seed = int(config.seed if seed is None else seed)
        S = config.stages
        self.moments = (
            list(moments) if moments is not None else [standardized_moments(m) for m in config.noise]
        )
        self.stages = []
        flagged = []
        prev_mean = None
        for s in range(S):
            n = config.n[s]
            if s == 0:
                label_probs = [config.policies[0].probs]
                label_w = np.array([1.0])
            else:
                pol = config.policies[s]
                label_probs = [pr for _, pr in pol.labels()]
                m1 = prev_mean
                h_sd = sqrt(config.n[s - 1] / m1 + config.n[s - 1] / (config.n[s - 1] - m1))
                label_w = pol.label_probabilities(h_sd)
            laws = [
                clamped_binomial(n, pr[0], config.min_arm_count).pruned(PRUNE_TOL)
                for pr in label_probs
            ]
            support = np.unique(np.concatenate([law.support for law in laws]))
            table = np.zeros((len(laws), support.size))
            for i, law in enumerate(laws):
                table[i, np.searchsorted(support, law.support)] = law.weights
            measures = []
            for N in support:
                em = ExpansionMeasure.build(
                    (int(N), n - int(N)), n, self.moments[s], config.order, config.reduced
                )
                if em.degenerate:
                    flagged.append((s + 1, int(N)))
                measures.append(em)
            mean1 = float(sum(lw * law.mean() for lw, law in zip(label_w, laws)))
            mc = (mean1, n - mean1)
            V = _covariance(mc, n, self.moments[s])
            sig = sqrt(self.moments[s].sigma2)
            d = np.array([1 / sig, 1 / sig, 1 / sig**2])
            self.stages.append(
                _Stage(
                    n=n,
                    support=support,
                    table=table,
                    measures=measures,
                    weights=[stat_weights((N, n - N), n, S) for N in support],
                    vbar=V * np.outer(d, d),
                    mean_counts=mc,
                )
            )
            prev_mean = mean1
        self.flagged = tuple(flagged)
        self.eta = base_draws(self.seed, S, self.draws)
        wbar = [stat_weights(st.mean_counts, st.n, S) for st in self.stages]
        self._wbar = wbar

    def branch_weights(self):
        """Count-law weights per ``(stage, label index)``; each sums to 1."""
        return {
            (s + 1, i): dict(zip(st.support.tolist(), row.tolist()))
            for s, st in enumerate(self.stages)
            for i, row in enumerate(st.table)
        }

    def proposals(self, x):
        return proposal(x, self._wbar, [st.vbar for st in self.stages], self.p)

    def _evaluate(self, x, upper, split=False):
        props = self.proposals(x)
        M = self.draws
        if self.workers <= 1:
            return self._evaluate_rows(x, upper, split, props, slice(0, M))
        # per-draw ratios do not depend on the chunking, so any worker count
        # gives bit-identical output
        edges = np.linspace(0, M, self.workers + 1).astype(int)
        chunks = [slice(lo, hi) for lo, hi in zip(edges[:-1], edges[1:])]
        with ThreadPoolExecutor(self.workers) as ex:
            parts = list(ex.map(lambda r: self._evaluate_rows(x, upper, split, props, r), chunks))
        return np.concatenate(parts)

    def _evaluate_rows(self, x, upper, split, props, rows):
        xis, logq = [], 0.0
        for prop, e in zip(props, self.eta):
            xi, lq = _shift(prop, e[rows])
            xis.append(np.ascontiguousarray(xi))
            logq = logq + lq
        fast = len(self.stages) == 2 and not split
        psi, u, h = [], [], []
        for st, xi in zip(self.stages, xis):
            psi.append(np.ascontiguousarray(density_table(xi, st.measures)))
            ymap = statistic_map(xi, st.n)
            u.append(np.ascontiguousarray(ymap @ np.array([w.l_dot for w in st.weights]).T))
            if not fast:
                h.append(xi[:, :2] @ np.array([w.l_ddot for w in st.weights]).T)
        M = xis[0].shape[0]
        if fast:
            st1, st2 = self.stages
            kind, lo, hi = _policy_code(self.config.policies[1])
            ld = np.ascontiguousarray(np.array([w.l_ddot for w in st1.weights]))
            J = _two_stage(
                x, upper, psi[0], u[0], xis[0], ld, st1.table[0], kind, lo, hi,
                psi[1], u[1], st2.table,
            )
        else:
            J = self._recurse(
                0, x, upper, split, psi, u, h,
                np.zeros(M), np.ones(M), np.zeros(M, dtype=np.int64),
            )
        return self._finish(J, logq)

    @staticmethod
    def _finish(J, logq):
        ratios = J * np.exp(-logq)
        if not np.all(np.isfinite(ratios)):
            raise FloatingPointError("non-finite importance-sampling ratios")
        return ratios

    def _recurse(self, s, x, upper, split, psi, u, h, u_acc, w_acc, lab):
        st = self.stages[s]
        if s == len(self.stages) - 1:
            return _last_stage(x - u_acc, w_acc, lab, psi[s], u[s], st.table, upper)
        nxt = self.config.policies[s + 1]
        n_labels = len(nxt.labels())
        total = np.zeros_like(u_acc)
        for j in range(st.support.size):
            wN = st.table[lab, j]
            if not np.any(wN):
                continue
            w_new = w_acc * wN * psi[s][:, j]
            u_new = u_acc + u[s][:, j]
            nlab = nxt.label_index(h[s][:, j])
            if split:
                # integrate each strategy over its own half-space separately
                for b in range(n_labels):
                    mask = nlab == b
                    total += self._recurse(
                        s + 1, x, upper, split, psi, u, h,
                        u_new, w_new * mask, np.full_like(nlab, b),
                    )
            else:
                total += self._recurse(s + 1, x, upper, split, psi, u, h, u_new, w_new, nlab)
        return total

    def ratios(self, x, upper=True, split=False):
        """Per-draw IS ratios for ``1{T >= x}`` (or ``1{T < x}``)."""
        return self._evaluate(float(x), upper, split)

    def tail(self, x, complement="auto", split=False):
        """Estimate ``P[T >= x]``.

        With ``complement="auto"`` thresholds below zero are handled through
        ``1 - P[T < x]``, which uses the exact unit mass of the expansion
        measures and keeps the IS error proportional to the smaller tail.
        """
        x = float(x)
        use_c = (x < 0) if complement == "auto" else bool(complement)
        r = self._evaluate(x, not use_c, split)
        est = float(r.mean())
        value = 1.0 - est if use_c else est
        return TailEstimate(
            x=x,
            value=value,
            stderr=float(r.std(ddof=1) / sqrt(r.size)),
            draws=r.size,
            branch_weights=self.branch_weights(),
            complement=use_c,
            flagged=self.flagged,
        )

    def mass(self):
        """IS estimate of the total mass of the backward measure (should be 1)."""
        r = self._evaluate(0.0, True) + self._evaluate(0.0, False)
        return float(r.mean()), float(r.std(ddof=1) / sqrt(r.size))


def tail_probability(x, config, **kwargs):
    return BackwardEngine(config, **kwargs).tail(x)


@numba.njit(cache=True, nogil=True)
def _last_stage(thr, wacc, lab, psi, u, table, upper):
    M, K = psi.shape
    out = np.zeros(M)
    for m in range(M):
        wm = wacc[m]
        if wm == 0.0:
            continue
        s = 0.0
        b = lab[m]
        t = thr[m]
        for k in range(K):
            wk = table[b, k]
            if wk == 0.0:
                continue
            if (u[m, k] >= t) == upper:
                s += wk * psi[m, k]
        out[m] = wm * s
    return out


def _policy_code(policy):
    if policy.kind == "fixed":
        return 0, 0.0, 0.0
    if policy.kind == "eps_greedy":
        return 1, 0.0, 0.0
    return 2, float(policy.lower), float(policy.upper)


@numba.njit(cache=True, nogil=True)
def _two_stage(x, upper, psi1, u1, xi1, ld, w1, kind, lo, hi, psi2, u2, table2):
    """Fused two-stage backward sum for every draw.

    For each draw the stage-2 statistic contributions are sorted once; the
    label-weighted densities are accumulated from the top so that each
    stage-1 count branch needs one binary search.
    """
    M, K1 = psi1.shape
    K2 = psi2.shape[1]
    L = table2.shape[0]
    out = np.zeros(M)
    suffix = np.zeros((L, K2 + 1))
    vals = np.empty(K2)
    for m in range(M):
        order = np.argsort(u2[m])
        for j in range(K2):
            vals[j] = u2[m, order[j]]
        for b in range(L):
            suffix[b, K2] = 0.0
            for j in range(K2 - 1, -1, -1):
                k = order[j]
                suffix[b, j] = suffix[b, j + 1] + table2[b, k] * psi2[m, k]
        acc = 0.0
        for k1 in range(K1):
            wk = w1[k1]
            if wk == 0.0:
                continue
            h = xi1[m, 0] * ld[k1, 0] + xi1[m, 1] * ld[k1, 1]
            if kind == 0:
                b = 0
            elif kind == 1:
                b = 0 if h >= 0.0 else 1
            else:
                b = 0 if h <= lo else (1 if h <= hi else 2)
            t = x - u1[m, k1]
            j = np.searchsorted(vals, t)  # first position with value >= t
            v = suffix[b, j] if upper else suffix[b, 0] - suffix[b, j]
            acc += wk * psi1[m, k1] * v
        out[m] = acc
    return out
