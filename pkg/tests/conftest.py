"""Shared fixtures and numerical helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from covartest.estimation import MomentEstimates, correlation_jacobian, group_upsilon
from covartest.linalg import block_diag, vech, vech_strict

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def make_spd(rng: np.random.Generator, d: int, spread: tuple[float, float] = (0.5, 3.0)) -> np.ndarray:
    """Random symmetric positive definite matrix with bounded eigenvalues."""
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    lam = rng.uniform(*spread, size=d)
    S = (Q * lam) @ Q.T
    return (S + S.T) / 2.0


def gaussian_sample(rng: np.random.Generator, V: np.ndarray, n: int) -> np.ndarray:
    """d x n draw from a centered normal with covariance V."""
    L = np.linalg.cholesky(V)
    return L @ rng.standard_normal((V.shape[0], n))


def synthetic_estimates(
    vmats: list[np.ndarray] | None,
    n: tuple[int, ...],
    rng: np.random.Generator,
    rmats: list[np.ndarray] | None = None,
) -> MomentEstimates:
    """Moment estimates with prescribed covariance (or correlation) matrices.

    The fourth-moment covariances are arbitrary well-conditioned SPD
    matrices; they only enter the statistic through the trace denominator,
    so any choice exercises the contrast residual exactly.
    """
    if vmats is None:
        # correlation-only usage: the covariance equals the correlation
        vmats = [np.asarray(R, dtype=float) for R in rmats]
    a = len(vmats)
    d = vmats[0].shape[0]
    p = d * (d + 1) // 2
    vhat = tuple(vech(V) for V in vmats)
    Sigma = tuple(make_spd(rng, p) for _ in range(a))
    N = sum(n)
    weights = [N / n_i for n_i in n]
    if d < 2:
        return MomentEstimates(
            d=d, n=tuple(n), vhat=vhat, Sigma=Sigma,
            Sigma_pooled=block_diag(Sigma, weights),
        )
    if rmats is None:
        rmats = []
        for V in vmats:
            sd = np.sqrt(np.diag(V))
            rmats.append(V / np.outer(sd, sd))
    rhat = tuple(vech_strict(R) for R in rmats)
    jac = tuple(correlation_jacobian(v) for v in vhat)
    Upsilon = tuple(group_upsilon(S, M) for S, M in zip(Sigma, jac))
    return MomentEstimates(
        d=d,
        n=tuple(n),
        vhat=vhat,
        Sigma=Sigma,
        Sigma_pooled=block_diag(Sigma, weights),
        rhat=rhat,
        jacobian=jac,
        Upsilon=Upsilon,
        Upsilon_pooled=block_diag(Upsilon, weights),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20250817)
