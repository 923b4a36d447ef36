"""Symmetric operators (finite truncations) and their spectral quantities.

A symmetric operator A with eigenvalues (lambda_i) carries:

* the spectral radius  rho(A) = max |lambda_i|;
* the spectral remainders at order q, in two conventions:
  the *set* convention e_q(lambda^2), the elementary symmetric polynomial of
  the squared eigenvalues, and the *tuple* convention q! * e_q(lambda^2),
  which sums over distinct ordered index tuples;
* the partial influences tau_i = sum_j a_ij^2 and their max tau.

The set-convention remainder equals the sum of squared q x q minors
(Cauchy-Binet), which :func:`cauchy_binet_oracle` evaluates by direct
enumeration as an independent cross-check.

Infinite-dimensional operators are represented by finite truncations; the
caller fixes the dimension.
"""

from __future__ import annotations

import itertools
import json
import math
import threading
from dataclasses import dataclass

import numpy as np

#: eigen-solver residual is checked against this times max(1, frobenius norm)
EIG_RESIDUAL_TOL = 1e-8
#: asymmetry beyond this is rejected at construction / load
SYMMETRY_TOL = 1e-12

ORACLE_MAX_N = 12
ORACLE_MAX_Q = 6


class SymmetricOperator:
    """Dense symmetric matrix with a cached eigen-decomposition.

    Entries are symmetrized exactly at construction (inputs that are
    asymmetric beyond ``SYMMETRY_TOL`` are rejected) and frozen. The
    decomposition is computed once, behind a lock, on first use; eigenvalues
    are sorted by decreasing absolute value, ties broken by sign (positive
    first) then by position.
    """

    def __init__(self, entries) -> None:
        a = np.array(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("operator entries must be finite")
        gap = float(np.max(np.abs(a - a.T), initial=0.0))
        if gap > SYMMETRY_TOL:
            raise ValueError(f"asymmetry {gap:.3e} exceeds {SYMMETRY_TOL}")
        a = (a + a.T) / 2.0
        a.flags.writeable = False
        self.entries = a
        self.n = a.shape[0]
        self._eig_lock = threading.Lock()
        self._eig: tuple[np.ndarray, np.ndarray] | None = None

    # -- spectral data -----------------------------------------------------

    def eigendecomposition(self) -> tuple[np.ndarray, np.ndarray]:
        """(eigenvalues, eigenvectors th columns), |lambda| decreasing."""
        with self._eig_lock:
            if self._eig is None:
                vals, vecs = np.linalg.eigh(self.entries)
                order = np.lexsort(
                    (np.arange(vals.size), (vals < 0).astype(int), -np.abs(vals))
                )
                vals = vals[order]
                vecs = vecs[:, order]
                residual = np.max(
                    np.abs((vecs * vals) @ vecs.T - self.entries), initial=0.0
                )
                scale = max(1.0, float(np.linalg.norm(self.entries)))
                if residual > EIG_RESIDUAL_TOL * scale:
                    raise RuntimeError(
                        f"eigen-decomposition residual {residual:.3e} too large"
                    )
                vals.flags.writeable = False
                vecs.flags.writeable = False
                self._eig = (vals, vecs)
            return self._eig

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eigendecomposition()[0]

    def frobenius_sq(self) -> float:
        """tr A^2, computed from the entries (no decomposition needed)."""
        return float(np.sum(self.entries**2))

    def spectral_radius(self) -> float:
        return float(np.abs(self.eigenvalues[0])) if self.n else 0.0

    def rank(self, tol: float = 1e-12) -> int:
        vals = np.abs(self.eigenvalues)
        scale = max(1.0, float(vals[0]) if vals.size else 0.0)
        return int(np.sum(vals > tol * scale))

    def scaled(self, factor: float) -> "SymmetricOperator":
        return SymmetricOperator(self.entries * factor)

    def __repr__(self) -> str:
        return f"SymmetricOperator(n={self.n})"


def eigendecompose(op: SymmetricOperator) -> tuple[np.ndarray, np.ndarray]:
    return op.eigendecomposition()


def _esym_from_squares(lam_sq: np.ndarray, q_max: int) -> np.ndarray:
    """e_1..e_q_max of the given nonnegative values.

    Incremental multiplication of prod(1 + t*v_i): every term is nonnegative
    so there is no cancellation. O(n * q_max).
    """
    e = np.zeros(q_max + 1)
    e[0] = 1.0
    for v in lam_sq:
        e[1 : q_max + 1] += v * e[0:q_max]
    return e[1:]


def _log2_esym_from_squares(log2_lam_sq: np.ndarray, q_max: int) -> np.ndarray:
    """log2 of e_1..e_q_max; -inf marks exact zeros. Immune to underflow."""
    le = np.full(q_max + 1, -np.inf)
    le[0] = 0.0
    for lv in log2_lam_sq:
        le[1 : q_max + 1] = np.logaddexp2(le[1 : q_max + 1], lv + le[0:q_max])
    return le[1:]


def spectral_remainders(
    op: SymmetricOperator, q_max: int, convention: str = "set"
) -> np.ndarray:
    """Remainders for q = 1..q_max; element i is order q = i + 1.

    ``set`` returns e_q(lambda^2); ``tuple`` multiplies by q!.
    """
    if not 1 <= q_max <= op.n:
        raise ValueError(f"q_max must be in [1, {op.n}], got {q_max}")
    if convention not in ("set", "tuple"):
        raise ValueError(f"unknown convention {convention!r}")
    e = _esym_from_squares(op.eigenvalues**2, q_max)
    if convention == "tuple":
        e = e * np.array([math.factorial(q) for q in range(1, q_max + 1)])
    return e


def log2_spectral_remainders(op: SymmetricOperator, q_max: int) -> np.ndarray:
    """log2 of the set-convention remainders for q = 1..q_max.

    Needed when q is large enough (q' = 128q + 18 in the certificates) that
    e_q underflows a double.
    """
    if not 1 <= q_max <= op.n:
        raise ValueError(f"q_max must be in [1, {op.n}], got {q_max}")
    lam_sq = op.eigenvalues**2
    with np.errstate(divide="ignore"):
        log2_lam_sq = np.log2(lam_sq)
    return _log2_esym_from_squares(log2_lam_sq, q_max)


def influences(op: SymmetricOperator) -> tuple[np.ndarray, float]:
    """Row sums of squares tau_i and their maximum tau."""
    per_index = np.sum(op.entries**2, axis=1)
    return per_index, float(np.max(per_index, initial=0.0))


def extract(op: SymmetricOperator, rows, cols) -> np.ndarray:
    """The rectangular submatrix A(I, J); indices are 0-based."""
    rows = np.asarray(sorted(rows), dtype=int)
    cols = np.asarray(sorted(cols), dtype=int)
    for idx in (rows, cols):
        if idx.size and (idx.min() < 0 or idx.max() >= op.n):
            raise IndexError(f"index set out of range for n={op.n}")
    return op.entries[np.ix_(rows, cols)]


def minor_dets(op: SymmetricOperator, q: int) -> tuple[list[tuple[int, ...]], np.ndarray]:
    """All q x q minors det A(I, J) as a dense (m, m) array.

    Subsets are enumerated in colexicographic order; helper for the oracle
    and for the determinantal construction.
    """
    subsets = colex_subsets(op.n, q)
    subs = np.array(subsets, dtype=int)
    blocks = []
    for I in subs:
        rows = op.entries[I, :]                     # (q, n)
        gathered = rows[:, subs]                    # (q, m, q)
        blocks.append(np.linalg.det(np.transpose(gathered, (1, 0, 2))))
    return subsets, np.array(blocks)


def colex_subsets(n: int, q: int) -> list[tuple[int, ...]]:
    """q-subsets of range(n) in colexicographic order."""
    return sorted(itertools.combinations(range(n), q), key=lambda s: s[::-1])


def cauchy_binet_oracle(op: SymmetricOperator, q: int) -> float:
    """Sum of det(A(I,J))^2 over all pairs of q-subsets, by enumeration.

    Guarded to n <= 12, q <= 6; beyond that the C(n,q)^2 pair count explodes.
    """
    if op.n > ORACLE_MAX_N or q > ORACLE_MAX_Q:
        raise ValueError(
            f"minor enumeration limited to n <= {ORACLE_MAX_N}, q <= {ORACLE_MAX_Q}"
            f" (got n={op.n}, q={q})"
        )
    if not 1 <= q <= op.n:
        raise ValueError(f"q must be in [1, {op.n}], got {q}")
    _, dets = minor_dets(op, q)
    return float(np.sum(dets**2))


@dataclass(frozen=True)
class SpectrumSummary:
    frobenius_sq: float
    spectral_radius: float
    remainders_tuple: np.ndarray
    remainders_set: np.ndarray
    influences: np.ndarray
    max_influence: float

    def to_json(self) -> dict:
        return {
            "frobenius_sq": self.frobenius_sq,
            "spectral_radius": self.spectral_radius,
            "remainders_set": self.remainders_set.tolist(),
            "remainders_tuple": self.remainders_tuple.tolist(),
            "influences": self.influences.tolist(),
            "max_influence": self.max_influence,
        }


def summarize(op: SymmetricOperator, q_max: int) -> SpectrumSummary:
    per_index, tau = influences(op)
    return SpectrumSummary(
        frobenius_sq=op.frobenius_sq(),
        spectral_radius=op.spectral_radius(),
        remainders_tuple=spectral_remainders(op, q_max, "tuple"),
        remainders_set=spectral_remainders(op, q_max, "set"),
        influences=per_index,
        max_influence=tau,
    )


@dataclass(frozen=True)
class RadiusBoundReport:
    q: int
    remainder_tuple: float
    radius_product: float
    product_valid: bool
    max_influence: float
    radius_sq: float

    @property
    def remainder_ok(self) -> bool:
        return (not self.product_valid) or (
            self.remainder_tuple >= self.radius_product - 1e-10
        )

    @property
    def influence_ok(self) -> bool:
        return self.max_influence <= self.radius_sq + 1e-10


def spectral_radius_bounds_check(op: SymmetricOperator, q: int) -> RadiusBoundReport:
    """Check R_q >= prod_{k<q}(1 - k rho^2) and tau <= rho^2 for tr A^2 = 1.

    The remainder bound only follows when every factor 1 - k rho^2 is
    positive (the inductive step needs each one nonnegative), so the product
    is reported with a validity flag and only asserted in that regime.
    """
    tr = op.frobenius_sq()
    if abs(tr - 1.0) > 1e-10:
        raise ValueError(f"operator must be trace-normalized, tr A^2 = {tr!r}")
    rho_sq = op.spectral_radius() ** 2
    factors = [1.0 - k * rho_sq for k in range(1, q)]
    report = RadiusBoundReport(
        q=q,
        remainder_tuple=float(spectral_remainders(op, q, "tuple")[q - 1]),
        radius_product=float(np.prod(factors)) if factors else 1.0,
        product_valid=all(f > 0.0 for f in factors),
        max_influence=influences(op)[1],
        radius_sq=rho_sq,
    )
    if not report.remainder_ok or not report.influence_ok:
        raise RuntimeError(f"spectral radius bound violated: {report}")
    return report


# -- operator file format ---------------------------------------------------
#
# {"n": <int>, "format": "dense"|"sparse",
#  "data": <n x n array> | [[i, j, value], ...] (0-indexed)}


def operator_from_json(obj: dict) -> SymmetricOperator:
    n = int(obj["n"])
    fmt = obj.get("format", "dense")
    if fmt == "dense":
        data = np.array(obj["data"], dtype=float)
        if data.shape != (n, n):
            raise ValueError(f"dense data shape {data.shape} does not match n={n}")
    elif fmt == "sparse":
        data = np.zeros((n, n))
        seen: dict[tuple[int, int], float] = {}
        for i, j, value in obj["data"]:
            i, j, value = int(i), int(j), float(value)
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"sparse index ({i},{j}) out of range for n={n}")
            for key in ((i, j), (j, i)):
                if key in seen and abs(seen[key] - value) > SYMMETRY_TOL:
                    raise ValueError(f"conflicting sparse entries at {key}")
            seen[(i, j)] = value
            data[i, j] = value
            data[j, i] = value
    else:
        raise ValueError(f"unknown operator format {fmt!r}")
    return SymmetricOperator(data)


def load_operator(path) -> SymmetricOperator:
    with open(path) as fh:
        return operator_from_json(json.load(fh))


def save_operator(op: SymmetricOperator, path) -> None:
    with open(path, "w") as fh:
        json.dump({"n": op.n, "format": "dense", "data": op.entries.tolist()}, fh)
