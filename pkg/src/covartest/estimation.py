"""Moment estimators for grouped multivariate samples.

Observations are stored column-wise: each group is a d x n_i array whose
columns are independent subjects.  The estimators produce, per group, the
half-vectorized covariance ``vhat`` and correlation ``rhat``, the empirical
fourth-moment covariance ``Sigma`` of ``sqrt(n) * vhat``, the delta-method
Jacobian mapping covariance coordinates to correlation coordinates, and the
implied correlation-scale covariance ``Upsilon``.  Pooling stacks groups
block-diagonally with weights N/n_i.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (
    FULL,
    HalfVec,
    block_diag,
    full_length,
    strict_length,
    unvech,
    vech,
    vech_pairs,
    vech_position_table,
    vech_strict,
)


@dataclass(frozen=True)
class GroupedSample:
    """Independent groups of column-wise observations sharing one dimension."""

    groups: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.groups) < 1:
            raise ValueError("a grouped sample needs at least one group")
        cleaned = []
        for i, g in enumerate(self.groups):
            g = np.asarray(g, dtype=float)
            if g.ndim != 2:
                raise ValueError(f"group {i + 1} must be a 2-d array, got ndim={g.ndim}")
            if not np.all(np.isfinite(g)):
                raise ValueError(f"group {i + 1} contains non-finite values")
            cleaned.append(g)
        d = cleaned[0].shape[0]
        for i, g in enumerate(cleaned):
            if g.shape[0] != d:
                raise ValueError(
                    f"group {i + 1} has dimension {g.shape[0]}, expected {d}"
                )
            if g.shape[1] < 2:
                raise ValueError(
                    f"group {i + 1} needs at least 2 observations, got {g.shape[1]}"
                )
        object.__setattr__(self, "groups", tuple(cleaned))

    @property
    def a(self) -> int:
        return len(self.groups)

    @property
    def d(self) -> int:
        return self.groups[0].shape[0]

    @property
    def n(self) -> tuple[int, ...]:
        return tuple(g.shape[1] for g in self.groups)

    @property
    def N(self) -> int:
        return sum(self.n)


def group_cov_vector(X) -> HalfVec:
    """Half-vectorized empirical covariance (divisor n - 1) of one group."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 2:
        raise ValueError("covariance needs a d x n array with n >= 2")
    n = X.shape[1]
    Xc = X - X.mean(axis=1, keepdims=True)
    S = Xc @ Xc.T / (n - 1)
    return vech((S + S.T) / 2.0)


def group_fourth_moment_cov(X) -> np.ndarray:
    """Empirical covariance of sqrt(n) times the half-vectorized covariance.

    Each centered observation contributes the half-vectorization of its
    outer product, recentered by the group mean of those outer products;
    the estimator is the outer-product average of these contributions with
    divisor n - 1.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 2:
        raise ValueError("fourth-moment covariance needs a d x n array with n >= 2")
    n = X.shape[1]
    Xc = X - X.mean(axis=1, keepdims=True)
    rows, cols = vech_pairs(X.shape[0])
    # column k holds vech of the outer product of the k-th centered column
    W = Xc[rows] * Xc[cols]
    Wc = W - W.mean(axis=1, keepdims=True)
    S = Wc @ Wc.T / (n - 1)
    return (S + S.T) / 2.0


def group_corr_vector(X) -> HalfVec:
    """Strict half-vectorization of the empirical correlation of one group."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        raise ValueError("correlation vectorization needs d >= 2")
    V = unvech(group_cov_vector(X))
    if np.any(np.diag(V) <= 0.0):
        raise ValueError("degenerate component: zero sample variance")
    sd = np.sqrt(np.diag(V))
    R = V / np.outer(sd, sd)
    R = np.clip((R + R.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(R, 1.0)
    return vech_strict(R)


def correlation_jacobian(v) -> np.ndarray:
    """Delta-method Jacobian of the correlation vector in the covariance vector.

    Row (j, k) has entry (v_jj v_kk)^(-1/2) at position (j, k),
    -r_jk / (2 v_jj) at (j, j) and -r_jk / (2 v_kk) at (k, k); all other
    entries vanish.
    """
    hv = v if isinstance(v, HalfVec) else HalfVec.from_values(v, FULL)
    if hv.kind != FULL:
        raise ValueError("the Jacobian is evaluated at a full covariance vector")
    d = hv.d
    if d < 2:
        raise ValueError("correlation vectorization needs d >= 2")
    V = unvech(hv)
    var = np.diag(V).copy()
    if np.any(var <= 0.0):
        raise ValueError("degenerate component: nonpositive variance")
    pos = vech_position_table(d)
    rows_j, rows_k = vech_pairs(d, strict=True)
    r = V[rows_j, rows_k] / np.sqrt(var[rows_j] * var[rows_k])
    M = np.zeros((strict_length(d), full_length(d)))
    t = np.arange(len(rows_j))
    M[t, pos[rows_j, rows_k]] = 1.0 / np.sqrt(var[rows_j] * var[rows_k])
    M[t, pos[rows_j, rows_j]] = -r / (2.0 * var[rows_j])
    M[t, pos[rows_k, rows_k]] = -r / (2.0 * var[rows_k])
    return M


def group_upsilon(Sigma, M) -> np.ndarray:
    """Correlation-scale covariance M Sigma M^T, symmetrized."""
    Sigma = np.asarray(Sigma, dtype=float)
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or Sigma.shape != (M.shape[1], M.shape[1]):
        raise ValueError(
            f"shape mismatch: M is {M.shape}, Sigma is {Sigma.shape}"
        )
    U = M @ Sigma @ M.T
    return (U + U.T) / 2.0


@dataclass(frozen=True)
class MomentEstimates:
    """Per-group and pooled moment estimates for one grouped sample."""

    d: int
    n: tuple[int, ...]
    vhat: tuple[HalfVec, ...]
    Sigma: tuple[np.ndarray, ...]
    Sigma_pooled: np.ndarray
    rhat: tuple[HalfVec, ...] | None = None
    jacobian: tuple[np.ndarray, ...] | None = None
    Upsilon: tuple[np.ndarray, ...] | None = None
    Upsilon_pooled: np.ndarray | None = None

    @property
    def a(self) -> int:
        return len(self.n)

    @property
    def N(self) -> int:
        return sum(self.n)

    @property
    def p(self) -> int:
        return full_length(self.d)

    @property
    def p_strict(self) -> int:
        return strict_length(self.d)

    @property
    def vhat_pooled(self) -> np.ndarray:
        return np.concatenate([hv.values for hv in self.vhat])

    @property
    def rhat_pooled(self) -> np.ndarray:
        if self.rhat is None:
            raise ValueError("correlation estimates were not computed")
        return np.concatenate([hv.values for hv in self.rhat])

    @property
    def has_correlation(self) -> bool:
        return self.rhat is not None


def pool_estimates(sample: GroupedSample, include_correlation: bool | None = None) -> MomentEstimates:
    """All per-group estimates plus the pooled block-diagonal covariances.

    Correlation-scale quantities are included when ``include_correlation``
    is true; the default computes them whenever d >= 2.
    """
    if include_correlation is None:
        include_correlation = sample.d >= 2
    vhat = tuple(group_cov_vector(g) for g in sample.groups)
    Sigma = tuple(group_fourth_moment_cov(g) for g in sample.groups)
    N = sample.N
    weights = [N / n_i for n_i in sample.n]
    Sigma_pooled = block_diag(Sigma, weights)
    if not include_correlation:
        return MomentEstimates(
            d=sample.d, n=sample.n, vhat=vhat, Sigma=Sigma, Sigma_pooled=Sigma_pooled
        )
    rhat = tuple(group_corr_vector(g) for g in sample.groups)
    jac = tuple(correlation_jacobian(v) for v in vhat)
    Upsilon = tuple(group_upsilon(S, M) for S, M in zip(Sigma, jac))
    return MomentEstimates(
        d=sample.d,
        n=sample.n,
        vhat=vhat,
        Sigma=Sigma,
        Sigma_pooled=Sigma_pooled,
        rhat=rhat,
        jacobian=jac,
        Upsilon=Upsilon,
        Upsilon_pooled=block_diag(Upsilon, weights),
    )
