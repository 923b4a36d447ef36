"""Multilinear polynomials and the small-ball exponent recursion.

A multilinear polynomial p(x) = sum_I a_I * prod_{i in I} x_i (no repeated
variables inside a monomial) propagates anti-concentration: if each
coordinate has small-ball exponent theta, a degree-d polynomial of the
coordinates concentrates no faster than epsilon^{theta_d}. Two published
forms of theta_d coexist and disagree already at d = 1:

* ``recursion``   theta_1 = theta, theta_{k+1} = min(1/(8(k+1)), theta_k/2)
  (the form the inductive argument actually establishes; canonical here);
* ``closed_form`` (theta ^ 1/(8d)) * 2^-d.

Both are exposed and computed in the log2 domain; neither is silently
preferred in reports.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .logdomain import LogScalar, as_logscalar

Indices = frozenset[int]


@dataclass(frozen=True)
class MultilinearPolynomial:
    variable_count: int
    coefficients: dict[Indices, float]

    def __post_init__(self) -> None:
        for idx, coeff in self.coefficients.items():
            if coeff == 0.0:
                raise ValueError("zero coefficients must not be stored")
            if idx and (min(idx) < 0 or max(idx) >= self.variable_count):
                raise ValueError(f"monomial {sorted(idx)} out of range")

    @classmethod
    def from_terms(cls, variable_count: int, terms) -> "MultilinearPolynomial":
        """Build from (indices, coeff) pairs, merging duplicates."""
        acc: dict[Indices, float] = {}
        for indices, coeff in terms:
            key = frozenset(int(i) for i in indices)
            if len(key) != len(tuple(indices)):
                raise ValueError(f"repeated variable in monomial {indices}")
            acc[key] = acc.get(key, 0.0) + float(coeff)
        return cls(variable_count, {k: v for k, v in acc.items() if v != 0.0})

    @cached_property
    def degree(self) -> int:
        return max((len(i) for i in self.coefficients), default=0)

    def variance_identity(self) -> float:
        """Variance of p(U) for centered, variance-1, independent inputs."""
        return sum(c**2 for idx, c in self.coefficients.items() if idx)

    def constant_term(self) -> float:
        return self.coefficients.get(frozenset(), 0.0)

    def to_json(self) -> dict:
        ordered = sorted(self.coefficients.items(), key=lambda kv: sorted(kv[0]))
        return {
            "n": self.variable_count,
            "terms": [[sorted(idx), coeff] for idx, coeff in ordered],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MultilinearPolynomial":
        return cls.from_terms(int(obj["n"]), obj["terms"])


def load_polynomial(path) -> MultilinearPolynomial:
    with open(path) as fh:
        return MultilinearPolynomial.from_json(json.load(fh))


def evaluate(p: MultilinearPolynomial, x) -> np.ndarray | float:
    """p at x; x may be a vector or an (..., n) array of sample rows."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < p.variable_count:
        raise ValueError(
            f"need at least {p.variable_count} coordinates, got {x.shape[-1]}"
        )
    out = np.zeros(x.shape[:-1])
    for idx, coeff in p.coefficients.items():
        term = np.full(x.shape[:-1], coeff)
        for i in sorted(idx):
            term = term * x[..., i]
        out = out + term
    return float(out) if out.ndim == 0 else out


def partial_influence_poly(
    p: MultilinearPolynomial, i: int
) -> tuple[MultilinearPolynomial, MultilinearPolynomial]:
    """The pair (S_i, R_i) with p = x_i * S_i + R_i identically.

    S_i collects monomials containing i (with i removed), R_i the rest.
    """
    if not 0 <= i < p.variable_count:
        raise ValueError(f"index {i} out of range for n={p.variable_count}")
    with_i = {idx - {i}: c for idx, c in p.coefficients.items() if i in idx}
    without_i = {idx: c for idx, c in p.coefficients.items() if i not in idx}
    return (
        MultilinearPolynomial(p.variable_count, with_i),
        MultilinearPolynomial(p.variable_count, without_i),
    )


def theta_recursion(theta, d: int, mode: str = "recursion") -> LogScalar:
    """Small-ball exponent for degree-d polynomials of theta-coordinates."""
    theta = as_logscalar(theta)
    if theta.is_zero:
        raise ValueError("theta must be positive")
    if d < 1:
        raise ValueError(f"degree must be >= 1, got {d}")
    if mode == "recursion":
        log2_t = theta.log2
        for k in range(1, d):
            log2_t = min(-math.log2(8.0 * (k + 1)), log2_t - 1.0)
        return LogScalar(log2_t)
    if mode == "closed_form":
        return LogScalar(min(theta.log2, -math.log2(8.0 * d)) - d)
    raise ValueError(f"unknown mode {mode!r}")


def log_concave_exponent(d: int) -> LogScalar:
    """The sharper 1/d exponent available for log-concave coordinate laws."""
    if d < 1:
        raise ValueError(f"degree must be >= 1, got {d}")
    return LogScalar(-math.log2(d))


@dataclass(frozen=True)
class SmallBallRow:
    eps: float
    center: float
    p_hat: float


@dataclass(frozen=True)
class SmallBallTable:
    rows: list[SmallBallRow]
    sample_count: int
    center_grid_size: int

    @property
    def band(self) -> float:
        return 3.0 / math.sqrt(self.sample_count)

    def decay_slope(self) -> float:
        """Least-squares slope of log10 p_hat against log10 eps.

        Rows with empty counts are dropped; at least two populated rows are
        required.
        """
        pts = [(r.eps, r.p_hat) for r in self.rows if r.p_hat > 0]
        if len(pts) < 2:
            raise ValueError("not enough populated rows for a slope")
        lx = np.log10([e for e, _ in pts])
        ly = np.log10([p for _, p in pts])
        return float(np.polyfit(lx, ly, 1)[0])


def smallball_estimate(
    p: MultilinearPolynomial,
    law,
    eps_grid,
    sample_count: int,
    seed: int,
    center_grid_size: int = 256,
) -> SmallBallTable:
    """Monte Carlo concentration function sup_b P(|p(U) - b| <= eps).

    The sup over centers is approximated on ``center_grid_size``
    quantile-anchored points (the exact sup is out of numerical reach;
    concentration functions are unimodal in practice).
    """
    from .laws import sample_batch

    batch = sample_batch(
        law, p.variable_count, sample_count, seed=seed, standardize=True
    )
    values = np.sort(np.asarray(evaluate(p, batch.x)))
    probs = np.linspace(0.0, 1.0, center_grid_size + 2)[1:-1]
    centers = np.unique(np.quantile(values, probs))
    rows = []
    for eps in eps_grid:
        counts = np.searchsorted(values, centers + eps, side="right") - np.searchsorted(
            values, centers - eps, side="left"
        )
        best = int(np.argmax(counts))
        rows.append(
            SmallBallRow(
                eps=float(eps),
                center=float(centers[best]),
                p_hat=float(counts[best]) / sample_count,
            )
        )
    return SmallBallTable(
        rows=rows, sample_count=sample_count, center_grid_size=center_grid_size
    )
