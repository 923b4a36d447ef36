"""Mass splitting of determinantal operators and its iteration.

A partition of the q-subset support into (L, complement) is *admissible*
when both restricted masses reach (sigma(B) - upsilon(B)) / 16. Existence is
a probabilistic-method fact: marking each subset with an independent fair
Bernoulli gives E[T * That] >= (sigma^2 - upsilon * sigma) / 16, so some
realization keeps both sides heavy. Two search strategies are provided:

* ``sampling`` draws seeded Bernoulli marks and retries (default 1024
  attempts); success is overwhelmingly likely when upsilon << sigma but is
  not guaranteed by the lemma, so exhaustion raises with the best attempt.
* ``greedy`` derandomizes by conditional expectations: subsets are decided
  in colex order, each time keeping the branch with the larger conditional
  value of E[T * That]. The conditional expectation never decreases, so the
  final split always meets the threshold. Cost is O(attempts-free) but
  quadratic-ish in the support size; meant for modest supports.

Iterating the split produces 2^k pairwise-disjoint blocks at depth k, and
the procedure stops as soon as some block mass drops below twice the
*original* operator's influence (that is the quantity the depth guarantee
needs), or at a requested depth. Every retained block keeps mass at least
sigma(B) / 32^k.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .determinantal import DeterminantalOperator, Subset, ell1_influences
from .rngstreams import derive_seed, stream

#: slack subtracted from the admissibility threshold
THRESHOLD_SLACK = 1e-12


class SplitError(RuntimeError):
    """Sampling exhausted max_attempts; carries the best attempt found."""

    def __init__(self, message: str, best: "SplitResult") -> None:
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class SplitResult:
    left: tuple[Subset, ...]
    right: tuple[Subset, ...]
    left_mass: float
    right_mass: float
    threshold: float
    attempts: int
    mode: str

    @property
    def admissible(self) -> bool:
        return self.left_mass >= self.threshold and self.right_mass >= self.threshold


def _entry_arrays(b: DeterminantalOperator, support: list[Subset]):
    index = {s: i for i, s in enumerate(support)}
    s1 = np.empty(len(b.entries), dtype=int)
    s2 = np.empty(len(b.entries), dtype=int)
    vals = np.empty(len(b.entries))
    for pos, ((I, J), v) in enumerate(b.entries.items()):
        s1[pos], s2[pos], vals[pos] = index[I], index[J], v
    return s1, s2, vals


def _result(support, marks, s1, s2, vals, threshold, attempts, mode) -> SplitResult:
    in_left = marks[s1] & marks[s2]
    in_right = ~marks[s1] & ~marks[s2]
    left = tuple(s for s, m in zip(support, marks) if m)
    right = tuple(s for s, m in zip(support, marks) if not m)
    return SplitResult(
        left=left,
        right=right,
        left_mass=float(vals[in_left].sum()),
        right_mass=float(vals[in_right].sum()),
        threshold=threshold,
        attempts=attempts,
        mode=mode,
    )


def split_once(
    b: DeterminantalOperator,
    rng_seed: int,
    max_attempts: int = 1024,
    mode: str = "sampling",
) -> SplitResult:
    """Find an admissible split of the support of ``b``.

    Deterministic given ``rng_seed``. Massless subsets (outside the support)
    carry no information and are left out of both sides.
    """
    sigma = b.total_mass()
    if sigma <= 0:
        raise ValueError("cannot split an operator with zero total mass")
    _, upsilon = ell1_influences(b)
    threshold = (sigma - upsilon) / 16.0 - THRESHOLD_SLACK
    support = b.support()
    s1, s2, vals = _entry_arrays(b, support)

    if mode == "greedy":
        marks = _greedy_marks(len(support), s1, s2, vals)
        return _result(support, marks, s1, s2, vals, threshold, 1, mode)
    if mode != "sampling":
        raise ValueError(f"unknown split mode {mode!r}")

    best: SplitResult | None = None
    for attempt in range(max_attempts):
        marks = stream(rng_seed, "split", attempt).random(len(support)) < 0.5
        candidate = _result(support, marks, s1, s2, vals, threshold, attempt + 1, mode)
        if candidate.admissible:
            return candidate
        if best is None or min(candidate.left_mass, candidate.right_mass) > min(
            best.left_mass, best.right_mass
        ):
            best = candidate
    raise SplitError(
        f"no admissible split in {max_attempts} attempts "
        f"(threshold {threshold:.3e}, best attempt kept)",
        best,  # type: ignore[arg-type]
    )


def _conditional_expectation(p, s1, s2, vals) -> float:
    """E[T * That] given partial marks; p[s] in {0, 1/2, 1}.

    Only pairs of entries with disjoint subset-sets contribute (a shared
    subset forces eps * (1 - eps) = 0), handled by inclusion-exclusion over
    one and two shared subsets. Each entry touches at most two subsets, so
    both corrections reduce to grouped sums.
    """
    diag = s1 == s2
    alpha = np.where(diag, p[s1], p[s1] * p[s2])
    comp = 1.0 - p
    beta = np.where(diag, comp[s1], comp[s1] * comp[s2])
    wa = vals * alpha
    wb = vals * beta

    total = wa.sum() * wb.sum()

    m = p.size
    xs = np.zeros(m)
    ys = np.zeros(m)
    np.add.at(xs, s1, wa)
    np.add.at(ys, s1, wb)
    off = ~diag
    np.add.at(xs, s2[off], wa[off])
    np.add.at(ys, s2[off], wb[off])
    single = float(np.dot(xs, ys))

    pair_id = np.minimum(s1[off], s2[off]) * m + np.maximum(s1[off], s2[off])
    _, inverse = np.unique(pair_id, return_inverse=True)
    xg = np.zeros(inverse.max() + 1 if inverse.size else 0)
    yg = np.zeros_like(xg)
    np.add.at(xg, inverse, wa[off])
    np.add.at(yg, inverse, wb[off])
    double = float(np.dot(xg, yg))

    return total - single + double


def _greedy_marks(m, s1, s2, vals) -> np.ndarray:
    p = np.full(m, 0.5)
    for s in range(m):
        p[s] = 1.0
        with_mark = _conditional_expectation(p, s1, s2, vals)
        p[s] = 0.0
        without_mark = _conditional_expectation(p, s1, s2, vals)
        p[s] = 1.0 if with_mark >= without_mark else 0.0
    return p > 0.5


@dataclass(frozen=True)
class SplitBlock:
    subsets: tuple[Subset, ...]
    mass: float


@dataclass(frozen=True)
class SplitTree:
    q: int
    ground_set_size: int
    sigma: float
    upsilon: float
    kappa: int
    stop_reason: str
    levels: list[list[SplitBlock]]

    def masses(self, level: int) -> list[float]:
        return [blk.mass for blk in self.levels[level]]

    def to_json(self) -> dict:
        return {
            "q": self.q,
            "n": self.ground_set_size,
            "sigma": self.sigma,
            "upsilon": self.upsilon,
            "kappa": self.kappa,
            "stop_reason": self.stop_reason,
            "levels": [
                [
                    {"subsets": [list(s) for s in blk.subsets], "mass": blk.mass}
                    for blk in level
                ]
                for level in self.levels
            ],
        }


def save_split_tree(tree: SplitTree, path) -> None:
    with open(path, "w") as fh:
        json.dump(tree.to_json(), fh)


def iterated_split(
    b: DeterminantalOperator,
    rng_seed: int,
    target_kappa: int | None = None,
    max_attempts: int = 1024,
    mode: str = "sampling",
) -> SplitTree:
    """Iterate admissible splits into 2^k disjoint blocks.

    Level 0 is the full support. Before splitting level k, the procedure
    stops if some block mass m_l satisfies upsilon(B) > m_l / 2 (upsilon of
    the *original* operator: that comparison is what makes every retained
    block keep mass >= sigma / 32^k), or if ``target_kappa`` is reached.
    Block (k, l) splits into children l and l + 2^k of level k + 1, each
    split drawing from its own (seed, level, block) stream.
    """
    sigma = b.total_mass()
    if sigma <= 0:
        raise ValueError("cannot split an operator with zero total mass")
    _, upsilon = ell1_influences(b)

    levels = [[SplitBlock(tuple(b.support()), sigma)]]
    while True:
        k = len(levels) - 1
        current = levels[-1]
        if any(upsilon > blk.mass / 2.0 for blk in current):
            stop_reason = "threshold"
            break
        if target_kappa is not None and k >= target_kappa:
            stop_reason = "depth-target"
            break
        nxt: list[SplitBlock | None] = [None] * (2 * len(current))
        for l, blk in enumerate(current):
            restricted = b.restricted(blk.subsets)
            res = split_once(
                restricted,
                derive_seed(rng_seed, "level", k, "block", l),
                max_attempts=max_attempts,
                mode=mode,
            )
            nxt[l] = SplitBlock(res.left, res.left_mass)
            nxt[l + len(current)] = SplitBlock(res.right, res.right_mass)
        levels.append(nxt)  # type: ignore[arg-type]

    return SplitTree(
        q=b.q,
        ground_set_size=b.ground_set_size,
        sigma=sigma,
        upsilon=upsilon,
        kappa=len(levels) - 1,
        stop_reason=stop_reason,
        levels=levels,
    )
