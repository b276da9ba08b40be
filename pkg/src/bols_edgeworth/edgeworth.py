"""First-order Edgeworth densities for the per-stage score vector.

For one stage with arm counts ``(N1, N2)`` out of ``n`` subjects the score
vector is ``z = (z1, z2, z0)`` with ``zk = Nk^{-1/2} sum_{arm k} e_j`` and
``z0 = n^{-1/2} sum_j (e_j^2 - sigma^2)``.  Its first-order expansion is the
signed density

    phi(z; 0, V) * (1 + 1/6 * sum_{ijk} K_ijk H_ijk(z; V))

where ``V`` and ``K`` are the second and third conditional cumulants.  Array
index 2 always holds the ``z0`` coordinate; the public :func:`hermite3`
accepts the labels ``1, 2, 0`` used in the literature.
"""

from dataclasses import dataclass, field
from math import pi, sqrt

import numba
import numpy as np

from .errors import ExpansionDegenerateError, ParameterDomainError

COND_LIMIT = 1e12
_LABEL = {1: 0, 2: 1, 0: 2}


def stage_covariance(counts, n, moments, sigma2=None):
    """Conditional covariance of ``(z1, z2, z0)``.

    Raises
    ------
    ExpansionDegenerateError
        If the matrix is not positive definite.
    """
    V = _covariance(counts, n, moments, sigma2)
    try:
        np.linalg.cholesky(V)
    except np.linalg.LinAlgError:
        raise ExpansionDegenerateError(
            f"stage covariance is not positive definite for counts {tuple(counts)}"
        ) from None
    return V


def _covariance(counts, n, moments, sigma2=None):
    n1, n2 = _check_counts(counts, n)
    s2 = moments.sigma2 if sigma2 is None else sigma2
    V = np.zeros((3, 3))
    V[0, 0] = V[1, 1] = s2
    V[0, 2] = V[2, 0] = sqrt(n1 / n) * moments.mu3
    V[1, 2] = V[2, 1] = sqrt(n2 / n) * moments.mu3
    V[2, 2] = moments.mu4 - s2 * s2
    return V


def _check_counts(counts, n):
    n1, n2 = (float(c) for c in counts)
    if n1 <= 0 or n2 <= 0:
        raise ParameterDomainError(f"arm counts must be positive, got {tuple(counts)}")
    if abs(n1 + n2 - n) > 1e-9:
        raise ParameterDomainError(f"counts {tuple(counts)} do not sum to n={n}")
    return n1, n2


def third_cumulants(counts, n, moments, sigma2=None, reduced=False):
    """Symmetric 3x3x3 tensor of third conditional cumulants of the score.

    ``reduced`` drops the entries driven by the fifth and sixth moments.
    """
    n1, n2 = _check_counts(counts, n)
    s2 = moments.sigma2 if sigma2 is None else sigma2
    m3, m4, m5, m6 = moments.mu3, moments.mu4, moments.mu5, moments.mu6
    rn = sqrt(n)
    K = np.zeros((3, 3, 3))
    for k, nk in ((0, n1), (1, n2)):
        K[k, k, k] = m3 / sqrt(nk)
        c = (m4 - s2 * s2) / rn
        K[k, k, 2] = K[k, 2, k] = K[2, k, k] = c
        if not reduced:
            c = sqrt(nk) / n * (m5 - 2 * s2 * m3)
            K[k, 2, 2] = K[2, k, 2] = K[2, 2, k] = c
    if not reduced:
        K[2, 2, 2] = (m6 - 3 * s2 * m4 + 2 * s2**3) / rn
    return K


def hermite3(z, V, idx):
    """Third-order Hermite polynomial of ``N(0, V)`` for label triple ``idx``.

    ``H_ijk = zeta_i zeta_j zeta_k - zeta_i P_jk - zeta_j P_ik - zeta_k P_ij``
    with ``P = V^{-1}`` and ``zeta = P z``.  Labels follow ``{1, 2, 0}``.
    """
    V = np.asarray(V, dtype=float)
    if np.linalg.cond(V) > COND_LIMIT:
        raise ExpansionDegenerateError("covariance is singular")
    P = np.linalg.inv(V)
    zeta = P @ np.asarray(z, dtype=float)
    i, j, k = (_LABEL[a] for a in idx)
    return (
        zeta[i] * zeta[j] * zeta[k]
        - zeta[i] * P[j, k]
        - zeta[j] * P[i, k]
        - zeta[k] * P[i, j]
    )


@dataclass(frozen=True)
class ExpansionMeasure:
    """Signed first-order expansion measure of one stage's score vector.

    Build with :meth:`build`.  ``order=0`` keeps only the Gaussian part.
    ``degenerate`` flags a fallback to a regularized Gaussian.
    """

    n: int
    counts: tuple
    moments: object
    sigma2: float
    order: int = 1
    reduced: bool = False
    V: np.ndarray = field(default=None, repr=False, compare=False)
    K: np.ndarray = field(default=None, repr=False, compare=False)
    degenerate: bool = False

    @classmethod
    def build(cls, counts, n, moments, order=1, reduced=False, sigma2=None, fallback=True):
        if order not in (0, 1):
            raise ParameterDomainError("expansion order must be 0 or 1")
        s2 = moments.sigma2 if sigma2 is None else float(sigma2)
        counts = tuple(counts)
        degenerate = False
        try:
            V = stage_covariance(counts, n, moments, s2)
            if np.linalg.cond(V) > COND_LIMIT:
                raise ExpansionDegenerateError("stage covariance is ill-conditioned")
        except ExpansionDegenerateError:
            if not fallback:
                raise
            V = _covariance(counts, n, moments, s2)
            V = V + 1e-10 * np.trace(V) * np.eye(3)
            degenerate = True
        if order == 0 or degenerate:
            K = np.zeros((3, 3, 3))
        else:
            K = third_cumulants(counts, n, moments, s2, reduced)
        return cls(n, counts, moments, s2, 0 if degenerate else order, reduced, V, K, degenerate)

    def transformed(self, sigma=None):
        """Covariance and cumulants in ``y = (z1/sigma, z2/sigma, z0/sigma^2)``."""
        sigma = sqrt(self.sigma2) if sigma is None else float(sigma)
        if not sigma > 0:
            raise ParameterDomainError("sigma must be positive")
        d = np.array([1 / sigma, 1 / sigma, 1 / sigma**2])
        V = self.V * np.outer(d, d)
        K = self.K * d[:, None, None] * d[None, :, None] * d[None, None, :]
        return V, K


def density_params(V, K):
    """Precision, contracted cumulants and log normalizer for the kernels."""
    P = np.linalg.inv(V)
    t = np.einsum("ijk,ij->k", K, P)
    _, logdet = np.linalg.slogdet(V)
    lognorm = -0.5 * (3 * np.log(2 * pi) + logdet)
    return P, t, lognorm


def _eval(points, V, K):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    P, t, lognorm = density_params(V, K)
    out = _density_block(pts, P[None], K[None], t[None], np.array([lognorm]))[:, 0]
    return out


def expansion_density(z, em):
    """Signed density of ``em`` at ``z`` (shape ``(3,)`` or ``(m, 3)``)."""
    z = np.asarray(z, dtype=float)
    out = _eval(z, em.V, em.K)
    return out[0] if z.ndim == 1 else out


def transformed_density(y, em, sigma=None):
    """Density of ``em`` after ``y = (z1/sigma, z2/sigma, z0/sigma^2)``.

    Equals ``sigma^4 * psi(sigma*y1, sigma*y2, sigma^2*y0)``.
    """
    y = np.asarray(y, dtype=float)
    V, K = em.transformed(sigma)
    out = _eval(y, V, K)
    return out[0] if y.ndim == 1 else out


def gaussian_density(z, V):
    z = np.asarray(z, dtype=float)
    out = _eval(z, np.asarray(V, dtype=float), np.zeros((3, 3, 3)))
    return out[0] if z.ndim == 1 else out


def _unique_cubic(K):
    """Coefficients of the 10 distinct monomials of ``K(zeta, zeta, zeta)``."""
    c = np.empty(K.shape[:-3] + (10,))
    c[..., 0] = K[..., 0, 0, 0]
    c[..., 1] = 3 * K[..., 0, 0, 1]
    c[..., 2] = 3 * K[..., 0, 0, 2]
    c[..., 3] = 3 * K[..., 0, 1, 1]
    c[..., 4] = 6 * K[..., 0, 1, 2]
    c[..., 5] = 3 * K[..., 0, 2, 2]
    c[..., 6] = K[..., 1, 1, 1]
    c[..., 7] = 3 * K[..., 1, 1, 2]
    c[..., 8] = 3 * K[..., 1, 2, 2]
    c[..., 9] = K[..., 2, 2, 2]
    return c


def _density_block(Y, P, K, t, lognorm):
    """Densities of ``B`` expansion measures at ``M`` points -> ``(M, B)``."""
    return _density_kernel(Y, P, _unique_cubic(K), t, lognorm)


@numba.njit(cache=True, nogil=True)
def _density_kernel(Y, P, c, t, lognorm):
    M = Y.shape[0]
    B = P.shape[0]
    out = np.empty((M, B))
    for m in range(M):
        y0 = Y[m, 0]
        y1 = Y[m, 1]
        y2 = Y[m, 2]
        for b in range(B):
            a = P[b, 0, 0] * y0 + P[b, 0, 1] * y1 + P[b, 0, 2] * y2
            e = P[b, 1, 0] * y0 + P[b, 1, 1] * y1 + P[b, 1, 2] * y2
            f = P[b, 2, 0] * y0 + P[b, 2, 1] * y1 + P[b, 2, 2] * y2
            quad = a * y0 + e * y1 + f * y2
            cb = c[b]
            cubic = (
                a * (a * (cb[0] * a + cb[1] * e + cb[2] * f) + e * (cb[3] * e + cb[4] * f) + cb[5] * f * f)
                + e * (e * (cb[6] * e + cb[7] * f) + cb[8] * f * f)
                + cb[9] * f * f * f
            )
            lin = t[b, 0] * a + t[b, 1] * e + t[b, 2] * f
            out[m, b] = np.exp(lognorm[b] - 0.5 * quad) * (1.0 + (cubic - 3.0 * lin) / 6.0)
    return out


def density_table(points, measures, sigma=None):
    """Evaluate several measures (transformed coordinates) at shared points."""
    pts = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=float)))
    B = len(measures)
    Ps = np.empty((B, 3, 3))
    Ks = np.empty((B, 3, 3, 3))
    ts = np.empty((B, 3))
    ln = np.empty(B)
    for b, em in enumerate(measures):
        V, K = em.transformed(sigma)
        Ps[b], ts[b], ln[b] = density_params(V, K)
        Ks[b] = K
    return _density_block(pts, Ps, Ks, ts, ln)


def hermite_poly3(z, v):
    """Univariate ``h_3(z; v) = phi^{-1} (-d/dz)^3 phi`` for variance ``v``."""
    u = z / v
    return u**3 - 3 * u / v


def linear_expansion_density(z, g, counts, n, moments):
    """First-order product-form density of the weighted per-arm sums.

    Parameters
    ----------
    z : array_like, shape (k,)
    g : sequence
        Per-arm weights: callables evaluated at ``Nk / n`` or plain numbers.
    counts : sequence of int
    """
    z = np.asarray(z, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if np.any(counts <= 0):
        raise ParameterDomainError("arm counts must be positive")
    if z.shape[-1] != counts.size or len(g) != counts.size:
        raise ParameterDomainError("z, g and counts must have matching length")
    frac = counts / n
    gk = np.array([gi(f) if callable(gi) else float(gi) for gi, f in zip(g, frac)])
    var = gk**2 * moments.sigma2
    lam3 = linear_lambda(gk, frac, moments.mu3, 3)
    dens = np.exp(-0.5 * z**2 / var) / np.sqrt(2 * pi * var)
    corr = 1 + lam3 * hermite_poly3(z, var) / (6 * sqrt(n))
    return float(np.prod(dens * corr))


def linear_lambda(gk, frac, kappa, r):
    """``lambda_{r,k} = g_k^r (N_k/n)^{-(r-2)/2} kappa_r``."""
    return np.asarray(gk) ** r * np.asarray(frac, dtype=float) ** (-(r - 2) / 2) * kappa
