"""Infinite warped mixture model for 2-D point sets.

A Gaussian-process latent variable model warps latent coordinates Z into
the observed coordinates S, and a Dirichlet-process Gaussian mixture with
a Gaussian-Wishart prior clusters the points in latent space.  Inference
alternates collapsed Gibbs sampling of the assignments (the per-cluster
Gaussian parameters are integrated out, leaving multivariate Student-t
predictives) with one hybrid Monte Carlo transition over Z per sweep.

Observed coordinates are standardized internally (zero mean, unit
variance per axis) so the default kernel and prior scales are sensible
across wafer sizes; assignments are unaffected by this affine change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack as _lapack

from .errors import EmptyInputError, InternalError, NumericalError

_LOG_PI = math.log(math.pi)
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PointSet:
    """n observed 2-D coordinates, one row per point."""

    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != 2 or coords.shape[0] < 1:
            raise EmptyInputError("PointSet needs an (n, 2) array with n >= 1")
        if not np.isfinite(coords).all():
            raise ValueError("coordinates must be finite")
        coords = coords.copy()
        coords.flags.writeable = False
        object.__setattr__(self, "coords", coords)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @classmethod
    def from_points(cls, points) -> "PointSet":
        return cls(np.asarray(points, dtype=float).reshape(-1, 2))


@dataclass(frozen=True)
class KernelParams:
    """Squared-exponential kernel: signal_variance * exp(-|dz|^2 / (2 l^2)),
    plus `jitter` on the diagonal."""

    signal_variance: float = 1.0
    length_scale: float = 1.0
    jitter: float = 1e-6

    def __post_init__(self):
        if self.signal_variance <= 0 or self.length_scale <= 0:
            raise ValueError("signal_variance and length_scale must be positive")
        if self.jitter < 0:
            raise ValueError("jitter must be nonnegative")


def _default_prior_scale():
    return np.eye(2)


def _default_prior_mean():
    return np.zeros(2)


@dataclass(frozen=True)
class GwHyper:
    """Gaussian-Wishart prior (mean m, relative precision p, scale R,
    degrees of freedom r) plus the DP concentration alpha."""

    m: np.ndarray = field(default_factory=_default_prior_mean)
    p: float = 1.0
    R: np.ndarray = field(default_factory=_default_prior_scale)
    r: float = 3.0
    alpha: float = 1.0

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float).reshape(2)
        R = np.asarray(self.R, dtype=float).reshape(2, 2)
        if not np.allclose(R, R.T):
            raise ValueError("R must be symmetric")
        if np.linalg.det(R) <= 0 or R[0, 0] <= 0:
            raise ValueError("R must be positive definite")
        if self.r <= 1:
            raise ValueError("degrees of freedom r must exceed 1 for 2-D data")
        if self.p <= 0 or self.alpha <= 0:
            raise ValueError("p and alpha must be positive")
        m = m.copy(); m.flags.writeable = False
        R = R.copy(); R.flags.writeable = False
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "R", R)


@dataclass(frozen=True)
class HmcConfig:
    step_size: float = 0.01
    leapfrog_steps: int = 10

    def __post_init__(self):
        if self.step_size < 0 or self.leapfrog_steps < 1:
            raise ValueError("step_size must be >= 0 and leapfrog_steps >= 1")


@dataclass(frozen=True)
class McmcConfig:
    """MCMC schedule.  When `adapt_step_size` is set, the HMC step size is
    tuned multiplicatively during burn-in (up on accept, down on reject)
    and frozen afterwards; adaptation is deterministic given the seed.

    `gibbs_start` delays assignment resampling for that many initial
    iterations so the warp can reshape the latent space around the
    initial partition first; 0 keeps the plain alternating schedule."""

    iters: int = 1000
    burn_in: int = 500
    hmc: HmcConfig = field(default_factory=HmcConfig)
    adapt_step_size: bool = True
    gibbs_start: int = 0

    def __post_init__(self):
        if self.iters <= self.burn_in or self.burn_in < 0:
            raise ValueError("need iters > burn_in >= 0")
        if not 0 <= self.gibbs_start < self.iters:
            raise ValueError("need 0 <= gibbs_start < iters")


@dataclass(frozen=True)
class IwmmResult:
    assignments: tuple
    k_hat: int
    latent_coords: np.ndarray
    trace: tuple
    hmc_acceptance_rate: float


# ---------------------------------------------------------------------
# GPLVM warp likelihood
# ---------------------------------------------------------------------

def se_covariance(Z, kern: KernelParams) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    sq = np.sum(Z * Z, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (Z @ Z.T)
    np.maximum(d2, 0.0, out=d2)
    K = kern.signal_variance * np.exp(d2 / (-2.0 * kern.length_scale**2))
    n = Z.shape[0]
    K.flat[:: n + 1] += kern.jitter
    return K


def _chol_lower(K, jitter):
    """Lower Cholesky factor with deterministic jitter escalation."""
    base = jitter if jitter > 0 else 1e-10
    n = K.shape[0]
    for extra in (0.0, base * 100.0, base * 10000.0):
        A = K.copy()
        if extra:
            A.flat[:: n + 1] += extra
        c, info = _lapack.dpotrf(A, lower=1, overwrite_a=1)
        if info == 0:
            return c
    raise NumericalError("covariance Cholesky failed after jitter escalation")


def _coords(S) -> np.ndarray:
    if isinstance(S, PointSet):
        return S.coords
    return np.asarray(S, dtype=float)


def gplvm_log_likelihood(S, Z, kern: KernelParams) -> float:
    """log p(S | Z, kernel) for a 2-output GP:
    -n log(2 pi) - log|K| - 0.5 tr(S^T K^-1 S)."""
    Sm = _coords(S)
    Z = np.asarray(Z, dtype=float)
    n = Sm.shape[0]
    if Z.shape != (n, 2):
        raise ValueError(f"Z shape {Z.shape} does not match S ({n}, 2)")
    K = se_covariance(Z, kern)
    c = _chol_lower(K, kern.jitter)
    logdet = 2.0 * float(np.log(np.diag(c)).sum())
    KinvS, _ = _lapack.dpotrs(c, Sm, lower=1)
    trace = float(np.sum(Sm * KinvS))
    return -n * _LOG_2PI - logdet - 0.5 * trace


def gplvm_grad(S, Z, kern: KernelParams) -> np.ndarray:
    """Analytic gradient of gplvm_log_likelihood with respect to Z."""
    ll, grad = _gplvm_ll_and_grad(S, Z, kern)
    return grad


def _gplvm_ll_and_grad(S, Z, kern):
    Sm = _coords(S)
    Z = np.asarray(Z, dtype=float)
    n = Sm.shape[0]
    K = se_covariance(Z, kern)
    c = _chol_lower(K, kern.jitter)
    logdet = 2.0 * float(np.log(np.diag(c)).sum())
    inv, info = _lapack.dpotri(c, lower=1, overwrite_c=1)
    if info != 0:
        raise NumericalError("covariance inversion failed")
    diag = np.diag(inv).copy()
    Kinv = np.tril(inv, -1)
    Kinv = Kinv + Kinv.T
    Kinv.flat[:: n + 1] = diag
    KinvS = Kinv @ Sm
    ll = -n * _LOG_2PI - logdet - 0.5 * float(np.sum(Sm * KinvS))
    # dL/dK = -K^-1 + 0.5 K^-1 S S^T K^-1, then chain through the SE kernel
    G = -Kinv + 0.5 * (KinvS @ KinvS.T)
    Kse = K
    W = G * Kse  # diagonal contributes nothing: the (z_l - z_j) factor is 0
    row = W.sum(axis=1)
    grad = -(2.0 / kern.length_scale**2) * (Z * row[:, None] - W @ Z)
    return ll, grad


# ---------------------------------------------------------------------
# Latent-space mixture: Gaussian-Wishart marginals and the CRP prior
# ---------------------------------------------------------------------

def crp_log_prior(A, alpha: float) -> float:
    """log p(A | alpha) = log [ alpha^K prod_k (n_k - 1)! / prod_i (alpha + i) ]."""
    A = np.asarray(A)
    n = A.shape[0]
    if n == 0:
        return 0.0
    _, counts = np.unique(A, return_counts=True)
    out = len(counts) * math.log(alpha)
    out += float(sum(math.lgamma(int(c)) for c in counts))
    out -= float(sum(math.log(alpha + i) for i in range(n)))
    return out


def _cluster_term(n_k, sum_z, szz, h: GwHyper) -> float:
    """Log Gaussian-Wishart marginal of one cluster's latent coordinates."""
    p_k = h.p + n_k
    r_k = h.r + n_k
    m = h.m
    m_k = (h.p * m + sum_z) / p_k
    Rk = (
        h.R
        + szz
        + h.p * np.outer(m, m)
        - p_k * np.outer(m_k, m_k)
    )
    det = Rk[0, 0] * Rk[1, 1] - Rk[0, 1] * Rk[1, 0]
    detR = h.R[0, 0] * h.R[1, 1] - h.R[0, 1] * h.R[1, 0]
    if det <= 0:
        raise NumericalError("posterior scale matrix is not positive definite")
    out = -n_k * _LOG_PI
    out += math.log(h.p) - math.log(p_k)
    out += 0.5 * h.r * math.log(detR) - 0.5 * r_k * math.log(det)
    for j in (1, 2):
        out += math.lgamma(0.5 * (r_k + 1 - j)) - math.lgamma(0.5 * (h.r + 1 - j))
    return out


def latent_marginal_log(Z, A, h: GwHyper) -> float:
    """log p(Z | A, R, m, r, p): product over clusters of the marginal
    obtained by integrating out each cluster's Gaussian parameters."""
    Z = np.asarray(Z, dtype=float)
    A = np.asarray(A)
    if A.shape[0] == 0:
        return 0.0
    if Z.shape[0] != A.shape[0]:
        raise ValueError("Z and A lengths differ")
    total = 0.0
    for label in np.unique(A):
        Zk = Z[A == label]
        n_k = Zk.shape[0]
        total += _cluster_term(n_k, Zk.sum(axis=0), Zk.T @ Zk, h)
    return total


def _marginal_and_grad(Z, A, h: GwHyper):
    """Marginal log density and its gradient w.r.t. Z.

    d/dz_i log p(Z|A) = -r_k R_k^-1 (z_i - m_k) for i in cluster k.
    """
    Z = np.asarray(Z, dtype=float)
    A = np.asarray(A)
    total = 0.0
    grad = np.zeros_like(Z)
    for label in np.unique(A):
        mask = A == label
        Zk = Z[mask]
        n_k = Zk.shape[0]
        sum_z = Zk.sum(axis=0)
        szz = Zk.T @ Zk
        total += _cluster_term(n_k, sum_z, szz, h)
        p_k = h.p + n_k
        r_k = h.r + n_k
        m_k = (h.p * h.m + sum_z) / p_k
        Rk = h.R + szz + h.p * np.outer(h.m, h.m) - p_k * np.outer(m_k, m_k)
        det = Rk[0, 0] * Rk[1, 1] - Rk[0, 1] * Rk[1, 0]
        Rk_inv = np.array([[Rk[1, 1], -Rk[0, 1]], [-Rk[1, 0], Rk[0, 0]]]) / det
        grad[mask] = -r_k * (Z[mask] - m_k) @ Rk_inv.T
    return total, grad


def _t2_logpdf(zx, zy, mx, my, p_post, r_post, ra, rb, rd):
    """2-D multivariate Student-t from Gaussian-Wishart (prior or posterior)
    parameters: df = r_post - 1, location m, scale R (p_post+1)/(p_post df)."""
    nu = r_post - 1.0
    det = ra * rd - rb * rb
    if det <= 0 or nu <= 0:
        raise NumericalError("invalid Student-t parameters")
    factor = (p_post + 1.0) / (p_post * nu)
    dx = zx - mx
    dy = zy - my
    quad = (rd * dx * dx - 2.0 * rb * dx * dy + ra * dy * dy) / det / factor
    return (
        math.lgamma(0.5 * (nu + 2.0))
        - math.lgamma(0.5 * nu)
        - math.log(nu)
        - _LOG_PI
        - 0.5 * (math.log(det) + 2.0 * math.log(factor))
        - 0.5 * (nu + 2.0) * math.log1p(quad / nu)
    )


def student_t_predictive_log(z, n_k, sum_z, szz, h: GwHyper) -> float:
    """Posterior predictive density of one point given a cluster's stats;
    with n_k = 0 this is the prior predictive.  Equals the marginal ratio
    latent_marginal_log(Z + z) - latent_marginal_log(Z)."""
    p_k = h.p + n_k
    r_k = h.r + n_k
    m = h.m
    m_k = (h.p * m + np.asarray(sum_z, dtype=float)) / p_k
    Rk = h.R + np.asarray(szz, dtype=float) + h.p * np.outer(m, m) - p_k * np.outer(m_k, m_k)
    return _t2_logpdf(
        float(z[0]), float(z[1]), float(m_k[0]), float(m_k[1]),
        p_k, r_k, float(Rk[0, 0]), float(Rk[0, 1]), float(Rk[1, 1]),
    )


# ---------------------------------------------------------------------
# MCMC state
# ---------------------------------------------------------------------

class LatentState:
    """Mutable MCMC state: latent coordinates, assignments, cluster sums.

    Cluster labels stay contiguous 1..K with every cluster nonempty; sums
    are plain floats so the Gibbs inner loop avoids array overhead.
    """

    def __init__(self, Z, A, kernel: KernelParams):
        self.Z = np.array(Z, dtype=float)
        self.A = np.array(A, dtype=np.int64)
        self.kernel = kernel
        if self.Z.shape[0] != self.A.shape[0]:
            raise ValueError("Z and A lengths differ")
        self._sums = []
        self._z_version = 0
        self._gplvm_cache = None  # (z_version, ll, grad)
        self.refresh()

    def set_Z(self, Z):
        self.Z = Z
        self._z_version += 1
        self.refresh()

    def gplvm_ll_grad(self, Sm):
        """GPLVM likelihood and gradient at the current Z, cached until Z moves."""
        cache = self._gplvm_cache
        if cache is not None and cache[0] == self._z_version:
            return cache[1], cache[2]
        ll, grad = _gplvm_ll_and_grad(Sm, self.Z, self.kernel)
        self._gplvm_cache = (self._z_version, ll, grad)
        return ll, grad

    @property
    def K(self) -> int:
        return len(self._sums)

    def refresh(self):
        """Rebuild cluster sums from scratch (labels must be 1..K)."""
        labels = sorted(set(self.A.tolist()))
        if labels != list(range(1, len(labels) + 1)):
            raise InternalError(f"labels not contiguous 1..K: {labels}")
        sums = []
        for k in labels:
            Zk = self.Z[self.A == k]
            sums.append([
                Zk.shape[0],
                float(Zk[:, 0].sum()), float(Zk[:, 1].sum()),
                float(np.dot(Zk[:, 0], Zk[:, 0])),
                float(np.dot(Zk[:, 0], Zk[:, 1])),
                float(np.dot(Zk[:, 1], Zk[:, 1])),
            ])
        self._sums = sums

    def cluster_sums(self, k):
        """(n_k, sum_z, sum_zz^T) of cluster k (1-based)."""
        n, sx, sy, sxx, sxy, syy = self._sums[k - 1]
        return n, np.array([sx, sy]), np.array([[sxx, sxy], [sxy, syy]])

    def remove_point(self, i):
        k = int(self.A[i])
        if k == 0:
            raise InternalError("point already removed")
        zx = float(self.Z[i, 0])
        zy = float(self.Z[i, 1])
        s = self._sums[k - 1]
        s[0] -= 1
        s[1] -= zx
        s[2] -= zy
        s[3] -= zx * zx
        s[4] -= zx * zy
        s[5] -= zy * zy
        self.A[i] = 0
        if s[0] == 0:
            del self._sums[k - 1]
            self.A[self.A > k] -= 1

    def assign_point(self, i, k):
        if not (1 <= k <= self.K + 1):
            raise InternalError(f"assignment label {k} out of range")
        if k == self.K + 1:
            self._sums.append([0, 0.0, 0.0, 0.0, 0.0, 0.0])
        zx = float(self.Z[i, 0])
        zy = float(self.Z[i, 1])
        s = self._sums[k - 1]
        s[0] += 1
        s[1] += zx
        s[2] += zy
        s[3] += zx * zx
        s[4] += zx * zy
        s[5] += zy * zy
        self.A[i] = k

    def marginal_log(self, h: GwHyper) -> float:
        total = 0.0
        for k in range(1, self.K + 1):
            n, sum_z, szz = self.cluster_sums(k)
            total += _cluster_term(n, sum_z, szz, h)
        return total


def gibbs_assignment_step(state: LatentState, i: int, h: GwHyper, rng) -> int:
    """Resample assignment a_i from its collapsed conditional.

    Weights: n_k^{-i} * t-predictive(z_i | cluster k) for existing
    clusters, alpha * t-predictive(z_i | prior) for a new one.
    """
    state.remove_point(i)
    zx = float(state.Z[i, 0])
    zy = float(state.Z[i, 1])
    p0, r0 = h.p, h.r
    m0x, m0y = float(h.m[0]), float(h.m[1])
    logs = []
    for k in range(1, state.K + 1):
        n, sx, sy, sxx, sxy, syy = state._sums[k - 1]
        p_k = p0 + n
        r_k = r0 + n
        mkx = (p0 * m0x + sx) / p_k
        mky = (p0 * m0y + sy) / p_k
        ra = h.R[0, 0] + sxx + p0 * m0x * m0x - p_k * mkx * mkx
        rb = h.R[0, 1] + sxy + p0 * m0x * m0y - p_k * mkx * mky
        rd = h.R[1, 1] + syy + p0 * m0y * m0y - p_k * mky * mky
        logs.append(math.log(n) + _t2_logpdf(zx, zy, mkx, mky, p_k, r_k, ra, rb, rd))
    logs.append(
        math.log(h.alpha)
        + _t2_logpdf(zx, zy, m0x, m0y, p0, r0,
                     float(h.R[0, 0]), float(h.R[0, 1]), float(h.R[1, 1]))
    )
    mx = max(logs)
    weights = [math.exp(v - mx) for v in logs]
    total = sum(weights)
    u = rng.random() * total
    acc = 0.0
    choice = len(weights) - 1
    for idx, w in enumerate(weights):
        acc += w
        if u < acc:
            choice = idx
            break
    k_new = choice + 1
    state.assign_point(i, k_new)
    return k_new


def hmc_latent_step(state: LatentState, S, h: GwHyper, hmc: HmcConfig, rng) -> bool:
    """One hybrid Monte Carlo transition of Z targeting
    log p(S|Z, kernel) + log p(Z|A, ...).  Returns True on acceptance."""
    Sm = _coords(S)
    momentum = rng.standard_normal(state.Z.shape)
    u = rng.random()
    eps = hmc.step_size
    try:
        ll0, gll0 = state.gplvm_ll_grad(Sm)
        marg0, gmarg0 = _marginal_and_grad(state.Z, state.A, h)
        U0 = -(ll0 + marg0)
        g0 = -(gll0 + gmarg0)
        Z = state.Z.copy()
        p = momentum - 0.5 * eps * g0
        ll1, gll1 = ll0, gll0
        for step in range(hmc.leapfrog_steps):
            Z = Z + eps * p
            ll1, gll1 = _gplvm_ll_and_grad(Sm, Z, state.kernel)
            marg1, gmarg1 = _marginal_and_grad(Z, state.A, h)
            U1 = -(ll1 + marg1)
            g1 = -(gll1 + gmarg1)
            if step < hmc.leapfrog_steps - 1:
                p = p - eps * g1
            else:
                p = p - 0.5 * eps * g1
    except NumericalError:
        return False
    H0 = U0 + 0.5 * float(np.sum(momentum * momentum))
    H1 = U1 + 0.5 * float(np.sum(p * p))
    if not math.isfinite(H1):
        return False
    log_u = math.log(u) if u > 0 else -math.inf
    if log_u < H0 - H1:
        state.set_Z(Z)
        state._gplvm_cache = (state._z_version, ll1, gll1)
        return True
    return False


def _potential_and_grad(Sm, Z, kernel, A, h):
    ll, gll = _gplvm_ll_and_grad(Sm, Z, kernel)
    marg, gmarg = _marginal_and_grad(Z, A, h)
    return -(ll + marg), -(gll + gmarg)


def _canonical_labels(A):
    mapping = {}
    out = []
    for a in A:
        if a not in mapping:
            mapping[a] = len(mapping) + 1
        out.append(mapping[a])
    return tuple(out)


def _component_init(coords) -> np.ndarray:
    """Initial assignments from Chebyshev-adjacency connected components.

    Points within Chebyshev distance 1.01 are linked, so integer grid
    coordinates group into king-move components; continuous point clouds
    degrade gracefully (near-duplicates share a cluster).
    """
    n = coords.shape[0]
    labels = np.zeros(n, dtype=np.int64)
    current = 0
    for i in range(n):
        if labels[i]:
            continue
        current += 1
        stack = [i]
        labels[i] = current
        while stack:
            u = stack.pop()
            d = np.max(np.abs(coords - coords[u]), axis=1)
            for v in np.nonzero((d <= 1.01) & (labels == 0))[0]:
                labels[v] = current
                stack.append(v)
    return labels


def iwmm_fit(
    S: PointSet,
    h: GwHyper | None = None,
    k0: KernelParams | None = None,
    mcmc: McmcConfig | None = None,
    seed: int = 0,
    init: str = "single",
) -> IwmmResult:
    """Fit the warped mixture by alternating Gibbs sweeps and HMC moves.

    Deterministic given `seed`.  The reported assignments come from the
    kept iteration (after burn-in) with the highest joint log density
    p(S|Z) p(Z|A) p(A).

    init: "single" starts all points in one cluster; "components" starts
    from Chebyshev-adjacency connected components (natural for grid point
    sets coming out of a spatial filter).
    """
    if h is None:
        h = GwHyper()
    if k0 is None:
        k0 = KernelParams()
    if mcmc is None:
        mcmc = McmcConfig()
    coords = S.coords if isinstance(S, PointSet) else np.asarray(S, dtype=float)
    n = coords.shape[0]
    if n == 0:
        raise EmptyInputError("cannot fit an empty point set")

    mu = coords.mean(axis=0)
    sd = coords.std(axis=0)
    sd = np.where(sd == 0, 1.0, sd)
    Sstd = (coords - mu) / sd

    if init == "components":
        A0 = _component_init(coords)
    elif init == "single":
        A0 = np.ones(n, dtype=np.int64)
    else:
        raise ValueError(f"unknown init {init!r}")
    state = LatentState(Sstd.copy(), A0, k0)
    rng = np.random.default_rng(seed)

    trace = []
    best_joint = -math.inf
    best_A = state.A.copy()
    best_Z = state.Z.copy()
    accepted = 0
    step_size = mcmc.hmc.step_size
    for it in range(1, mcmc.iters + 1):
        if it > mcmc.gibbs_start:
            for i in range(n):
                gibbs_assignment_step(state, i, h, rng)
        hmc_cfg = HmcConfig(step_size=step_size, leapfrog_steps=mcmc.hmc.leapfrog_steps)
        ok = hmc_latent_step(state, Sstd, h, hmc_cfg, rng)
        if ok:
            accepted += 1
        if mcmc.adapt_step_size and it <= mcmc.burn_in and step_size > 0:
            step_size = min(1.0, max(1e-6, step_size * (1.07 if ok else 0.87)))
        joint = (
            state.gplvm_ll_grad(Sstd)[0]
            + state.marginal_log(h)
            + crp_log_prior(state.A, h.alpha)
        )
        trace.append((state.K, joint))
        if it > mcmc.burn_in and joint > best_joint:
            best_joint = joint
            best_A = state.A.copy()
            best_Z = state.Z.copy()

    assignments = _canonical_labels(best_A.tolist())
    return IwmmResult(
        assignments=assignments,
        k_hat=len(set(assignments)),
        latent_coords=best_Z,
        trace=tuple(trace),
        hmc_acceptance_rate=accepted / mcmc.iters,
    )
