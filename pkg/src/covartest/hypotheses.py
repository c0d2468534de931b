"""Builders for the testable hypotheses on covariance and correlation matrices.

Every hypothesis is a pair (C, zeta) acting on the stacked half-vectorized
group parameters, optionally after a smooth coordinate transform: the null
states C f(theta) = zeta.  Predefined multi-group equalities use centering
matrices; all other equality patterns difference successive entries.
Structural nulls (a single group) cover diagonal, spherical, compound
symmetric, Toeplitz and first-order autoregressive shapes; the
autoregressive ones are nonlinear and carry the transform with them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .linalg import (
    centering_matrix,
    full_length,
    kron,
    strict_length,
    vech,
    vech_diag_positions,
    vech_offdiag_positions,
    vech_subdiagonal_positions,
)

COVARIANCE = "covariance"
CORRELATION = "correlation"

_TARGETS = (COVARIANCE, CORRELATION)

PREDEFINED_NAMES = {
    COVARIANCE: (
        "equal",
        "equal-trace",
        "equal-diagonals",
        "given-trace",
        "given-matrix",
        "uncorrelated",
    ),
    CORRELATION: ("equal-correlated", "uncorrelated"),
}

STRUCTURE_ALIASES = {
    COVARIANCE: {
        "autoregressive": "autoregressive",
        "ar": "autoregressive",
        "fo-autoregressive": "fo-autoregressive",
        "fo-ar": "fo-autoregressive",
        "diagonal": "diagonal",
        "diag": "diagonal",
        "sphericity": "sphericity",
        "spher": "sphericity",
        "compoundsymmetry": "compoundsymmetry",
        "cs": "compoundsymmetry",
        "toeplitz": "toeplitz",
        "toep": "toeplitz",
    },
    CORRELATION: {
        "hautoregressive": "hautoregressive",
        "har": "hautoregressive",
        "htoeplitz": "htoeplitz",
        "htoep": "htoeplitz",
        "hcompoundsymmetry": "hcompoundsymmetry",
        "hcs": "hcompoundsymmetry",
        "diagonal": "diagonal",
        "diag": "diagonal",
    },
}


@dataclass(frozen=True)
class TransformSpec:
    """Smooth reparametrization theta -> f(theta) with its Jacobian.

    ``domain_check`` reports whether the transform is numerically safe at a
    point; evaluating ``map`` or ``jacobian`` outside the domain raises.
    """

    map: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    domain_check: Callable[[np.ndarray], bool]
    input_dim: int
    output_dim: int


@dataclass(frozen=True)
class HypothesisSpec:
    """One testable null C f(theta) = zeta for a given target and layout."""

    target: str
    C: np.ndarray
    zeta: np.ndarray
    label: str
    a: int
    d: int
    transform: TransformSpec | None = None

    def __post_init__(self) -> None:
        if self.target not in _TARGETS:
            raise ValueError(f"unknown target {self.target!r}")
        if self.a < 1:
            raise ValueError(f"group count must be positive, got {self.a}")
        if self.d < 1:
            raise ValueError(f"dimension must be positive, got {self.d}")
        C = np.asarray(self.C, dtype=float)
        zeta = np.asarray(self.zeta, dtype=float).ravel()
        if C.ndim != 2:
            raise ValueError("C must be a two-dimensional matrix")
        if C.shape[0] < 1:
            raise ValueError("C needs at least one row")
        if not np.all(np.isfinite(C)) or not np.all(np.isfinite(zeta)):
            raise ValueError("C and zeta must be finite")
        if np.any(np.all(C == 0.0, axis=1)):
            raise ValueError("C contains an all-zero row")
        expected = self.a * self.base_dim
        if self.transform is None:
            if C.shape[1] != expected:
                raise ValueError(
                    f"C has {C.shape[1]} columns but the {self.target} target "
                    f"with a={self.a}, d={self.d} needs {expected}"
                )
        else:
            if self.transform.input_dim != expected:
                raise ValueError(
                    f"transform expects input dimension {self.transform.input_dim}, "
                    f"but the target layout has {expected}"
                )
            if C.shape[1] != self.transform.output_dim:
                raise ValueError(
                    f"C has {C.shape[1]} columns but the transform produces "
                    f"{self.transform.output_dim}"
                )
        if len(zeta) != C.shape[0]:
            raise ValueError(
                f"zeta has length {len(zeta)} but C has {C.shape[0]} rows"
            )
        C = C.copy()
        C.setflags(write=False)
        zeta = zeta.copy()
        zeta.setflags(write=False)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "zeta", zeta)

    @property
    def base_dim(self) -> int:
        """Half-vector length per group: d(d+1)/2 or d(d-1)/2 by target."""
        return full_length(self.d) if self.target == COVARIANCE else strict_length(self.d)

    @property
    def m(self) -> int:
        return self.C.shape[0]


def _selector_rows(q: int, positions: np.ndarray) -> np.ndarray:
    C = np.zeros((len(positions), q))
    C[np.arange(len(positions)), positions] = 1.0
    return C


def _difference_rows(q: int, positions: np.ndarray) -> np.ndarray:
    """Rows e_pos[t] - e_pos[t+1] equating all listed coordinates."""
    positions = np.asarray(positions)
    m = max(len(positions) - 1, 0)
    C = np.zeros((m, q))
    t = np.arange(m)
    C[t, positions[:-1]] = 1.0
    C[t, positions[1:]] = -1.0
    return C


def _stack_or_empty(blocks: list[np.ndarray], q: int) -> np.ndarray:
    blocks = [b for b in blocks if b.shape[0] > 0]
    if not blocks:
        return np.zeros((0, q))
    return np.vstack(blocks)


def _toeplitz_rows(d: int, strict: bool) -> np.ndarray:
    """Equality of entries within every subdiagonal (and the diagonal if full)."""
    q = strict_length(d) if strict else full_length(d)
    blocks = []
    if not strict:
        blocks.append(_difference_rows(q, vech_diag_positions(d)))
    for h in range(1, d):
        blocks.append(_difference_rows(q, vech_subdiagonal_positions(d, h, strict=strict)))
    return _stack_or_empty(blocks, q)


def _ratio_transform(d: int, strict: bool) -> TransformSpec:
    """Appends the consecutive subdiagonal-mean ratios to the half-vector.

    Means m_0, ..., m_{d-1} average the entries of each subdiagonal; for the
    strict (correlation) variant m_0 is the constant 1.  The appended
    coordinates are rho_h = m_h / m_{h-1} for h = 1, ..., d-1.
    """
    q = strict_length(d) if strict else full_length(d)
    groups: list[np.ndarray | None] = []
    if strict:
        groups.append(None)  # m_0 == 1 by convention, no coordinates involved
    else:
        groups.append(vech_diag_positions(d))
    for h in range(1, d):
        groups.append(vech_subdiagonal_positions(d, h, strict=strict))

    def _means(theta: np.ndarray) -> np.ndarray:
        m = np.empty(d)
        for h, g in enumerate(groups):
            m[h] = 1.0 if g is None else theta[g].mean()
        return m

    def _check(m: np.ndarray) -> None:
        # denominators are m_0, ..., m_{d-2}
        if np.any(np.abs(m[: d - 1]) <= 1e-12 * abs(m[0])):
            raise ValueError(
                "subdiagonal-mean ratio undefined: a leading subdiagonal mean vanishes"
            )

    def fmap(theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        m = _means(theta)
        _check(m)
        return np.concatenate([theta, m[1:] / m[:-1]])

    def fjac(theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        m = _means(theta)
        _check(m)
        J = np.zeros((q + d - 1, q))
        J[:q] = np.eye(q)
        grad = np.zeros((d, q))
        for h, g in enumerate(groups):
            if g is not None:
                grad[h, g] = 1.0 / len(g)
        for h in range(1, d):
            J[q + h - 1] = grad[h] / m[h - 1] - m[h] / m[h - 1] ** 2 * grad[h - 1]
        return J

    def fdomain(theta: np.ndarray) -> bool:
        m = _means(np.asarray(theta, dtype=float))
        return bool(np.all(np.abs(m[: d - 1]) > 1e-12 * abs(m[0])))

    return TransformSpec(
        map=fmap, jacobian=fjac, domain_check=fdomain, input_dim=q, output_dim=q + d - 1
    )


def _autoregressive_spec(target: str, d: int, label: str) -> HypothesisSpec:
    if d < 3:
        raise ValueError(
            f"structure {label!r} needs d >= 3: fewer than two subdiagonal "
            "ratios leave nothing to compare"
        )
    strict = target == CORRELATION
    transform = _ratio_transform(d, strict=strict)
    q = transform.input_dim
    lin = _toeplitz_rows(d, strict=strict)
    ratio_diffs = _difference_rows(d - 1, np.arange(d - 1))
    C = np.zeros((lin.shape[0] + ratio_diffs.shape[0], transform.output_dim))
    C[: lin.shape[0], :q] = lin
    C[lin.shape[0]:, q:] = ratio_diffs
    return HypothesisSpec(
        target=target,
        C=C,
        zeta=np.zeros(C.shape[0]),
        label=label,
        a=1,
        d=d,
        transform=transform,
    )


def structure_hypothesis(name: str, target: str, d: int) -> HypothesisSpec:
    """Structural null for a single group: the named shape of V or R."""
    if target not in _TARGETS:
        raise ValueError(f"unknown target {target!r}")
    aliases = STRUCTURE_ALIASES[target]
    if name not in aliases:
        valid = sorted(set(aliases.values()))
        raise ValueError(
            f"unknown {target} structure {name!r}; valid structures: {', '.join(valid)}"
        )
    canonical = aliases[name]
    p = full_length(d)
    ps = strict_length(d)

    if canonical in ("autoregressive", "fo-autoregressive", "hautoregressive"):
        return _autoregressive_spec(target, d, canonical)

    if target == COVARIANCE:
        if canonical == "diagonal":
            if d < 2:
                raise ValueError("structure 'diagonal' needs d >= 2")
            C = _selector_rows(p, vech_offdiag_positions(d))
        elif canonical == "sphericity":
            if d < 2:
                raise ValueError("structure 'sphericity' needs d >= 2")
            C = np.vstack([
                _difference_rows(p, vech_diag_positions(d)),
                _selector_rows(p, vech_offdiag_positions(d)),
            ])
        elif canonical == "compoundsymmetry":
            if d < 2:
                raise ValueError("structure 'compoundsymmetry' needs d >= 2")
            C = _stack_or_empty(
                [
                    _difference_rows(p, vech_diag_positions(d)),
                    _difference_rows(p, vech_offdiag_positions(d)),
                ],
                p,
            )
        else:  # toeplitz
            if d < 2:
                raise ValueError("structure 'toeplitz' needs d >= 2")
            C = _toeplitz_rows(d, strict=False)
    else:
        if canonical == "diagonal":
            if d < 2:
                raise ValueError("structure 'diagonal' needs d >= 2")
            C = np.eye(ps)
        elif canonical == "hcompoundsymmetry":
            if d < 3:
                raise ValueError(
                    "structure 'hcompoundsymmetry' needs d >= 3: a single "
                    "correlation leaves nothing to compare"
                )
            C = _difference_rows(ps, np.arange(ps))
        else:  # htoeplitz
            if d < 3:
                raise ValueError(
                    "structure 'htoeplitz' needs d >= 3: subdiagonals of a 2x2 "
                    "matrix hold one entry each"
                )
            C = _toeplitz_rows(d, strict=True)

    return HypothesisSpec(
        target=target, C=C, zeta=np.zeros(C.shape[0]), label=canonical, a=1, d=d
    )


def _block_positions(block: int, width: int, positions: np.ndarray) -> np.ndarray:
    return block * width + np.asarray(positions)


def predefined_hypothesis(
    name: str, target: str, a: int, d: int, extra=None
) -> HypothesisSpec:
    """Named hypothesis from the built-in catalog.

    ``extra`` carries the parameter of the parametrized nulls: the positive
    trace for ``given-trace`` and the symmetric d x d matrix for
    ``given-matrix``.
    """
    if target not in _TARGETS:
        raise ValueError(f"unknown target {target!r}")
    if name not in PREDEFINED_NAMES[target]:
        valid = ", ".join(PREDEFINED_NAMES[target])
        raise ValueError(
            f"unknown {target} hypothesis {name!r}; valid names: {valid}"
        )
    if a < 1:
        raise ValueError(f"group count must be positive, got {a}")
    p = full_length(d)
    ps = strict_length(d)
    if extra is not None and name not in ("given-trace", "given-matrix"):
        raise ValueError(f"hypothesis {name!r} takes no extra parameter")

    C: np.ndarray
    zeta: np.ndarray

    if target == COVARIANCE:
        if name == "equal":
            if a == 1:
                if d < 2:
                    raise ValueError("hypothesis 'equal' with one group needs d >= 2")
                C = _difference_rows(p, vech_diag_positions(d))
            else:
                C = kron(centering_matrix(a), np.eye(p))
            zeta = np.zeros(C.shape[0])
        elif name == "equal-trace":
            if a < 2:
                raise ValueError("hypothesis 'equal-trace' needs at least two groups")
            diag = vech_diag_positions(d)
            C = np.zeros((a - 1, a * p))
            for i in range(a - 1):
                C[i, _block_positions(i, p, diag)] = 1.0
                C[i, _block_positions(i + 1, p, diag)] = -1.0
            zeta = np.zeros(a - 1)
        elif name == "equal-diagonals":
            if a < 2:
                raise ValueError("hypothesis 'equal-diagonals' needs at least two groups")
            diag = vech_diag_positions(d)
            C = np.zeros(((a - 1) * d, a * p))
            for i in range(a - 1):
                rows = np.arange(i * d, (i + 1) * d)
                C[rows, _block_positions(i, p, diag)] = 1.0
                C[rows, _block_positions(i + 1, p, diag)] = -1.0
            zeta = np.zeros((a - 1) * d)
        elif name == "given-trace":
            if a != 1:
                raise ValueError("hypothesis 'given-trace' is only defined for one group")
            if extra is None:
                raise ValueError("hypothesis 'given-trace' needs the target trace")
            gamma = float(extra)
            if not np.isfinite(gamma) or gamma <= 0.0:
                raise ValueError(f"the target trace must be positive, got {extra!r}")
            C = np.zeros((1, p))
            C[0, vech_diag_positions(d)] = 1.0
            zeta = np.array([gamma])
        elif name == "given-matrix":
            if a != 1:
                raise ValueError("hypothesis 'given-matrix' is only defined for one group")
            if extra is None:
                raise ValueError("hypothesis 'given-matrix' needs the target matrix")
            V = np.asarray(extra, dtype=float)
            if V.shape != (d, d):
                raise ValueError(f"the target matrix must be {d}x{d}, got shape {V.shape}")
            C = np.eye(p)
            zeta = vech(V).values  # raises if V is not symmetric
        else:  # uncorrelated
            if a != 1:
                raise ValueError("hypothesis 'uncorrelated' is only defined for one group")
            if d < 2:
                raise ValueError("hypothesis 'uncorrelated' needs d >= 2")
            C = _selector_rows(p, vech_offdiag_positions(d))
            zeta = np.zeros(C.shape[0])
    else:
        if d < 2:
            raise ValueError("correlation hypotheses need d >= 2")
        if name == "equal-correlated":
            if a == 1:
                if ps < 2:
                    raise ValueError(
                        "hypothesis 'equal-correlated' with one group needs d >= 3: "
                        "a single correlation leaves nothing to compare"
                    )
                C = centering_matrix(ps)
            else:
                C = kron(centering_matrix(a), np.eye(ps))
            zeta = np.zeros(C.shape[0])
        else:  # uncorrelated
            if a != 1:
                raise ValueError("hypothesis 'uncorrelated' is only defined for one group")
            C = np.eye(ps)
            zeta = np.zeros(ps)

    return HypothesisSpec(target=target, C=C, zeta=zeta, label=name, a=a, d=d)


def custom_hypothesis(C, zeta, target: str, a: int, d: int, label: str = "custom") -> HypothesisSpec:
    """User-supplied contrast matrix and right-hand side, validated for shape."""
    return HypothesisSpec(target=target, C=C, zeta=zeta, label=label, a=a, d=d)
