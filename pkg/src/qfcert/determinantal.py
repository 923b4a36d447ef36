"""Operators indexed by q-subsets with squared-minor entries.

From a symmetric operator A one builds B with entries
b_IJ = det(A(I,J))^2 over pairs of q-subsets. Entries are nonnegative, so
the natural quantities are l1-type: the total mass sigma(B) (which equals
the set-convention spectral remainder of A, by Cauchy-Binet) and the
l1-influences upsilon_i(B), the mass touching a ground-set index.

Storage is sparse, keyed by (I, J) tuples; exact zeros are omitted, since
structured operators annihilate most minors. Subsets are enumerated
colexicographically, and that order is part of the on-disk format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .spectral import SymmetricOperator, colex_subsets, minor_dets

BUILD_MAX_N = 14
BUILD_MAX_Q = 5

Subset = tuple[int, ...]


def _colex_key(subset: Subset) -> Subset:
    return subset[::-1]


@dataclass(frozen=True)
class DeterminantalOperator:
    q: int
    ground_set_size: int
    entries: dict[tuple[Subset, Subset], float] = field(repr=False)

    def __post_init__(self) -> None:
        for (I, J), value in self.entries.items():
            if value < 0:
                raise ValueError(f"negative entry b[{I},{J}] = {value}")
            if len(I) != self.q or len(J) != self.q:
                raise ValueError(f"subset pair ({I},{J}) is not of size q={self.q}")

    @property
    def universe(self) -> list[Subset]:
        """All q-subsets of the ground set, in colex order."""
        return colex_subsets(self.ground_set_size, self.q)

    def support(self) -> list[Subset]:
        """Subsets carrying mass, in colex order."""
        seen = {I for I, _ in self.entries} | {J for _, J in self.entries}
        return sorted(seen, key=_colex_key)

    def total_mass(self) -> float:
        return float(sum(self.entries.values()))

    def restricted(self, family) -> "DeterminantalOperator":
        """B restricted to pairs inside the given subset family."""
        fam = set(family)
        kept = {k: v for k, v in self.entries.items() if k[0] in fam and k[1] in fam}
        return DeterminantalOperator(self.q, self.ground_set_size, kept)

    def restricted_mass(self, family) -> float:
        fam = set(family)
        return float(
            sum(v for (I, J), v in self.entries.items() if I in fam and J in fam)
        )

    def to_json(self) -> dict:
        ordered = sorted(
            self.entries.items(),
            key=lambda kv: (_colex_key(kv[0][0]), _colex_key(kv[0][1])),
        )
        return {
            "q": self.q,
            "n": self.ground_set_size,
            "entries": [[list(I), list(J), v] for (I, J), v in ordered],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DeterminantalOperator":
        entries = {
            (tuple(int(i) for i in I), tuple(int(j) for j in J)): float(v)
            for I, J, v in obj["entries"]
        }
        return cls(int(obj["q"]), int(obj["n"]), entries)


def load_determinantal(path) -> DeterminantalOperator:
    with open(path) as fh:
        return DeterminantalOperator.from_json(json.load(fh))


def build_from_operator(op: SymmetricOperator, q: int) -> DeterminantalOperator:
    """b_IJ = det(A(I,J))^2 for every pair of q-subsets; zeros omitted."""
    if op.n > BUILD_MAX_N or q > BUILD_MAX_Q:
        raise ValueError(
            f"determinantal build limited to n <= {BUILD_MAX_N}, q <= {BUILD_MAX_Q}"
            f" (got n={op.n}, q={q})"
        )
    if not 1 <= q <= op.n:
        raise ValueError(f"q must be in [1, {op.n}], got {q}")
    subsets, dets = minor_dets(op, q)
    b = dets**2
    entries: dict[tuple[Subset, Subset], float] = {}
    for a, I in enumerate(subsets):
        row = b[a]
        for c, J in enumerate(subsets):
            if row[c] != 0.0:
                entries[(I, J)] = float(row[c])
    out = DeterminantalOperator(q, op.n, entries)
    _check_transpose_symmetry(out)
    return out


def _check_transpose_symmetry(b: DeterminantalOperator, tol: float = 1e-12) -> None:
    # det A(I,J) = det A(J,I) for symmetric A; pivoting may differ, so allow
    # tiny drift relative to the entry size.
    for (I, J), value in b.entries.items():
        mirror = b.entries.get((J, I), 0.0)
        if abs(value - mirror) > tol * max(1.0, value):
            raise RuntimeError(
                f"squared minors not transpose-symmetric at ({I},{J}): "
                f"{value} vs {mirror}"
            )


def ell1_influences(b: DeterminantalOperator) -> tuple[np.ndarray, float]:
    """upsilon_i = sum of b_IJ over pairs with i in I union J, and their max."""
    per_index = np.zeros(b.ground_set_size)
    for (I, J), value in b.entries.items():
        for i in set(I) | set(J):
            per_index[i] += value
    return per_index, float(np.max(per_index, initial=0.0))


@dataclass(frozen=True)
class InfluenceBoundReport:
    q: int
    upsilon: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.upsilon <= self.bound + 1e-10


def influence_bound_check(op: SymmetricOperator, q: int) -> InfluenceBoundReport:
    """Check upsilon(B) <= 2 q tau(A) for a trace-normalized operator."""
    tr = op.frobenius_sq()
    if abs(tr - 1.0) > 1e-10:
        raise ValueError(f"operator must be trace-normalized, tr A^2 = {tr!r}")
    from .spectral import influences

    b = build_from_operator(op, q)
    _, upsilon = ell1_influences(b)
    _, tau = influences(op)
    report = InfluenceBoundReport(q=q, upsilon=upsilon, bound=2.0 * q * tau)
    if not report.ok:
        raise RuntimeError(f"influence bound violated: {report}")
    return report
