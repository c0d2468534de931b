"""Quadratic-form test statistic and its three resampling reference schemes.

The statistic is N times the squared residual of the hypothesis contrast,
divided by the trace of the contrasted pooled covariance.  Its null
distribution is approximated by one of

* ``MC``  -- draws from the limiting weighted chi-square mixture, with
  weights read off the contrasted pooled covariance;
* ``BT``  -- a parametric bootstrap that redraws group means and
  covariances from centered normals per group;
* ``TAY`` -- correlation targets only: normal draws on the covariance scale
  pushed through the delta-method linearization.

All engines derive one substream per repetition from the root seed, so
results do not depend on execution order or the degree of parallelism.
"""

from __future__ import annotations

import secrets
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .estimation import GroupedSample, MomentEstimates, pool_estimates
from .hypotheses import CORRELATION, COVARIANCE, HypothesisSpec
from .linalg import psd_factor

_METHODS = ("MC", "BT", "TAY")

_MC_CHUNK_ELEMENTS = 1 << 22


def fresh_seed() -> int:
    """A new root seed drawn from OS entropy."""
    return secrets.randbits(32)


def _normalize_seed(seed: int | None) -> int:
    if seed is None:
        return fresh_seed()
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed}")
    return seed


def _rep_rng(seed: int, rep: int) -> np.random.Generator:
    # counter-based derivation: the stream of repetition b is a fixed
    # function of (seed, b), independent of scheduling
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(rep,)))


def _run_reps(B: int, threads: int, body) -> np.ndarray:
    out = np.empty(B)
    if threads <= 1:
        for b in range(B):
            out[b] = body(b)
        return out
    bounds = np.linspace(0, B, threads + 1, dtype=int)

    def work(lo: int, hi: int) -> None:
        for b in range(lo, hi):
            out[b] = body(b)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [
            pool.submit(work, lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])
        ]
        for f in futures:
            f.result()
    return out


def _check_compatible(spec: HypothesisSpec, est: MomentEstimates) -> None:
    if spec.a != est.a:
        raise ValueError(f"hypothesis is for a={spec.a} groups, estimates have {est.a}")
    if spec.d != est.d:
        raise ValueError(f"hypothesis is for d={spec.d}, estimates have d={est.d}")
    if spec.target == CORRELATION and not est.has_correlation:
        raise ValueError("estimates lack correlation components")


def _theta_and_pooled(spec: HypothesisSpec, est: MomentEstimates):
    if spec.target == COVARIANCE:
        return est.vhat_pooled, est.Sigma_pooled
    return est.rhat_pooled, est.Upsilon_pooled


def _resolve(spec: HypothesisSpec, theta: np.ndarray):
    """Residual C f(theta) - zeta and the linearized contrast C J(theta)."""
    if spec.transform is None:
        return spec.C @ theta - spec.zeta, spec.C
    return (
        spec.C @ spec.transform.map(theta) - spec.zeta,
        spec.C @ spec.transform.jacobian(theta),
    )


def _trace_quad(E: np.ndarray, S: np.ndarray) -> float:
    """trace(E @ S @ E.T) without forming the product."""
    return float(((E @ S) * E).sum())


def _check_trace(tr: float, E: np.ndarray, theta: np.ndarray) -> None:
    # an analytically zero estimator covariance leaves rounding residue of
    # order eps^2 relative to (|E| |theta|)^2, so the cutoff is relative,
    # not exact; genuine traces sit many orders of magnitude above it
    scale = np.abs(E).max() * max(np.abs(theta).max(), np.finfo(float).tiny)
    if not tr > 1e-20 * scale * scale:
        raise ValueError("hypothesis covariance degenerate: zero trace")


def statistic_covariance(spec: HypothesisSpec, est: MomentEstimates) -> np.ndarray:
    """Covariance of the contrasted parameter estimate, E Sigma E^T."""
    _check_compatible(spec, est)
    theta, pooled = _theta_and_pooled(spec, est)
    _, E = _resolve(spec, theta)
    H = E @ pooled @ E.T
    return (H + H.T) / 2.0


def ats(spec: HypothesisSpec, est: MomentEstimates, N: int | None = None) -> float:
    """Observed value of the trace-normalized quadratic-form statistic."""
    _check_compatible(spec, est)
    if N is None:
        N = est.N
    theta, pooled = _theta_and_pooled(spec, est)
    u, E = _resolve(spec, theta)
    denom = _trace_quad(E, pooled)
    _check_trace(denom, E, theta)
    return float(N * (u @ u) / denom)


def mc_reference(
    spec: HypothesisSpec, est: MomentEstimates, B: int, seed: int
) -> np.ndarray:
    """B draws from the estimated weighted chi-square limit distribution."""
    _check_compatible(spec, est)
    _check_repetitions(B)
    theta, pooled = _theta_and_pooled(spec, est)
    _, E = _resolve(spec, theta)
    H = E @ pooled @ E.T
    H = (H + H.T) / 2.0
    tr = float(np.trace(H))
    _check_trace(tr, E, theta)
    lam = np.linalg.eigvalsh(H) / tr
    rng = np.random.default_rng(np.random.SeedSequence(entropy=_normalize_seed(seed)))
    out = np.empty(B)
    chunk = max(_MC_CHUNK_ELEMENTS // max(len(lam), 1), 1)
    at = 0
    while at < B:
        take = min(chunk, B - at)
        out[at:at + take] = rng.chisquare(1.0, size=(take, len(lam))) @ lam
        at += take
    return out


def mc_pvalue(
    spec: HypothesisSpec,
    est: MomentEstimates,
    N: int,
    statistic: float,
    B: int,
    seed: int,
) -> float:
    """Share of weighted chi-square draws at or above the observed statistic."""
    del N  # the limit draws do not rescale with the sample size
    ref = mc_reference(spec, est, B, seed)
    return float(np.mean(ref >= statistic))


def _bootstrap_ingredients(spec: HypothesisSpec, est: MomentEstimates):
    theta, _ = _theta_and_pooled(spec, est)
    _, E = _resolve(spec, theta)
    if spec.target == COVARIANCE:
        dim, mats = est.p, est.Sigma
    else:
        dim, mats = est.p_strict, est.Upsilon
    factors = [psd_factor(S) for S in mats]
    blocks = [E[:, i * dim:(i + 1) * dim] for i in range(est.a)]
    return E, dim, factors, blocks


def bootstrap_reference(
    sample: GroupedSample,
    spec: HypothesisSpec,
    B: int,
    seed: int,
    est: MomentEstimates | None = None,
    threads: int = 1,
) -> np.ndarray:
    """Parametric-bootstrap draws of the statistic under the null.

    Each repetition redraws every group from a centered normal with the
    estimated covariance (correlation-scale covariance for correlation
    targets), then recomputes both the contrasted mean and the trace
    denominator from the redrawn sample.
    """
    if est is None:
        est = pool_estimates(sample, include_correlation=spec.target == CORRELATION)
    _check_compatible(spec, est)
    _check_repetitions(B)
    seed = _normalize_seed(seed)
    _, dim, factors, blocks = _bootstrap_ingredients(spec, est)
    n = est.n
    N = est.N
    m = blocks[0].shape[0]

    def body(b: int) -> float:
        rng = _rep_rng(seed, b)
        num = np.zeros(m)
        denom = 0.0
        for n_i, L, E_i in zip(n, factors, blocks):
            Z = rng.standard_normal((n_i, dim)) @ L.T
            zbar = Z.mean(axis=0)
            Zc = Z - zbar
            S = Zc.T @ Zc / (n_i - 1)
            num += E_i @ zbar
            denom += (N / n_i) * _trace_quad(E_i, S)
        if not denom > 0.0:
            raise ValueError("hypothesis covariance degenerate: zero trace")
        return N * float(num @ num) / denom

    return _run_reps(B, threads, body)


def bootstrap_pvalue(
    sample: GroupedSample,
    spec: HypothesisSpec,
    B: int,
    seed: int,
    est: MomentEstimates | None = None,
    threads: int = 1,
) -> float:
    """Share of bootstrap draws at or above the observed statistic."""
    if est is None:
        est = pool_estimates(sample, include_correlation=spec.target == CORRELATION)
    observed = ats(spec, est)
    ref = bootstrap_reference(sample, spec, B, seed, est=est, threads=threads)
    return float(np.mean(ref >= observed))


def taylor_reference(
    sample: GroupedSample,
    spec: HypothesisSpec,
    B: int,
    seed: int,
    est: MomentEstimates | None = None,
    threads: int = 1,
) -> np.ndarray:
    """Delta-method reference draws for correlation targets.

    Per repetition and group a normal vector on the covariance scale is
    mapped through the estimated Jacobian; the trace denominator stays
    fixed at its observed value.
    """
    if spec.target != CORRELATION:
        raise ValueError("Taylor method applies to correlation targets only")
    if est is None:
        est = pool_estimates(sample, include_correlation=True)
    _check_compatible(spec, est)
    _check_repetitions(B)
    seed = _normalize_seed(seed)
    theta, pooled = _theta_and_pooled(spec, est)
    _, E = _resolve(spec, theta)
    denom = _trace_quad(E, pooled)
    if not denom > 0.0:
        raise ValueError("hypothesis covariance degenerate: zero trace")
    N = est.N
    ps = est.p_strict
    p = est.p
    # per group: contrast block times sqrt(N/n_i) M_i L_i, so each draw is
    # a matrix-vector product with a standard normal
    K = []
    for i, (n_i, Sig, M) in enumerate(zip(est.n, est.Sigma, est.jacobian)):
        L = psd_factor(Sig)
        K.append(E[:, i * ps:(i + 1) * ps] @ (np.sqrt(N / n_i) * (M @ L)))

    def body(b: int) -> float:
        rng = _rep_rng(seed, b)
        u = np.zeros(E.shape[0])
        for K_i in K:
            u += K_i @ rng.standard_normal(p)
        return float(u @ u) / denom

    return _run_reps(B, threads, body)


def taylor_pvalue(
    sample: GroupedSample,
    spec: HypothesisSpec,
    B: int,
    seed: int,
    est: MomentEstimates | None = None,
    threads: int = 1,
) -> float:
    """Share of delta-method draws at or above the observed statistic."""
    if est is None:
        est = pool_estimates(sample, include_correlation=True)
    observed = ats(spec, est)
    ref = taylor_reference(sample, spec, B, seed, est=est, threads=threads)
    return float(np.mean(ref >= observed))


def _check_repetitions(B: int) -> None:
    if B < 1:
        raise ValueError(f"repetitions must be positive, got {B}")
    if B < 500:
        warnings.warn(
            f"only {B} resampling repetitions; p-values are coarse below 500",
            UserWarning,
            stacklevel=3,
        )


@dataclass(frozen=True)
class TestReport:
    """Outcome of one hypothesis test run."""

    statistic: float
    p_value: float
    method: str
    repetitions: int
    seed: int
    label: str
    target: str
    n: tuple[int, ...]
    alpha: float
    critical_value: float


def run_test(
    sample: GroupedSample,
    spec: HypothesisSpec,
    method: str = "MC",
    repetitions: int = 1000,
    seed: int | None = None,
    alpha: float = 0.05,
    threads: int = 1,
    est: MomentEstimates | None = None,
) -> TestReport:
    """Full test run: estimate, contrast, resample, and summarize."""
    method = str(method).upper()
    if method not in _METHODS:
        raise ValueError(f"unknown method {method!r}; choose one of {', '.join(_METHODS)}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if method == "TAY" and spec.target != CORRELATION:
        raise ValueError("Taylor method applies to correlation targets only")
    seed = _normalize_seed(seed)
    if est is None:
        est = pool_estimates(sample, include_correlation=spec.target == CORRELATION)
    observed = ats(spec, est)
    if method == "MC":
        ref = mc_reference(spec, est, repetitions, seed)
    elif method == "BT":
        ref = bootstrap_reference(sample, spec, repetitions, seed, est=est, threads=threads)
    else:
        ref = taylor_reference(sample, spec, repetitions, seed, est=est, threads=threads)
    return TestReport(
        statistic=observed,
        p_value=float(np.mean(ref >= observed)),
        method=method,
        repetitions=repetitions,
        seed=seed,
        label=spec.label,
        target=spec.target,
        n=sample.n,
        alpha=alpha,
        critical_value=float(np.quantile(ref, 1.0 - alpha)),
    )
