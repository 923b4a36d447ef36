"""Conditionally Gaussian derivative simulation and exact CF identities.

For F = f(X_1..X_n) the derivative in a Gaussian direction is

    D_G F = sum_i d_i f(X) * gamma_i^(1/2) * G_i,

with fresh standard Gaussians G independent of X. Conditionally on X this
is centered Gaussian with variance Gamma(F, F) = sum_i (d_i f)^2 gamma_i,
which yields the Fourier-Laplace identity

    E[exp(i t D_G F) | X] = exp(-t^2 Gamma(F, F) / 2)

exactly, per sample. Markov's inequality then converts CF decay of D_G F
into small-ball control of Gamma(F, F):

    P(Gamma(F, F) < 1/xi) <= e * E[exp(-xi Gamma(F, F))].

For quadratic functionals <X, A X>, the second-derivative object whose
spectrum controls regularity reduces (after discarding the diagonal part,
which splits off by disjoint-support additivity of the remainders) to

    M = Gamma^(1/2) (2 A_offdiag) Gamma^(1/2),

sample by sample. Gaussian quadratic forms themselves have the exact CF
modulus prod_k (1 + 4 xi^2 lambda_k^2)^(-1/4), bounded by
(4^q xi^(2q) e_q(lambda^2))^(-1/4) for every q; both are computed in the
log domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .laws import DirichletVariable, SampleBatch
from .rngstreams import stream
from .spectral import SymmetricOperator, _log2_esym_from_squares

#: per-sample remainders below 2^FLOOR_LOG2 are flagged, not silently used
FLOOR_LOG2 = -512.0

FD_POINTS = 20
FD_STEP = 1e-4
FD_REL_TOL = 1e-5


@dataclass(frozen=True)
class VectorSmoothMap:
    """f: R^n -> R with explicit gradient and Hessian callables.

    ``value`` maps (..., n) -> (...,); ``gradient`` -> (..., n);
    ``hessian`` -> (..., n, n).
    """

    name: str
    value: Callable
    gradient: Callable
    hessian: Callable


def coordinate_map(i: int, n: int) -> VectorSmoothMap:
    def grad(x):
        g = np.zeros_like(np.asarray(x, float))
        g[..., i] = 1.0
        return g

    def hess(x):
        x = np.asarray(x, float)
        return np.zeros(x.shape[:-1] + (n, n))

    return VectorSmoothMap(f"x{i}", lambda x: np.asarray(x, float)[..., i], grad, hess)


def coordinate_square_map(i: int, n: int) -> VectorSmoothMap:
    def grad(x):
        x = np.asarray(x, float)
        g = np.zeros_like(x)
        g[..., i] = 2.0 * x[..., i]
        return g

    def hess(x):
        x = np.asarray(x, float)
        h = np.zeros(x.shape[:-1] + (n, n))
        h[..., i, i] = 2.0
        return h

    return VectorSmoothMap(
        f"x{i}^2", lambda x: np.asarray(x, float)[..., i] ** 2, grad, hess
    )


def quadratic_form_map(op: SymmetricOperator) -> VectorSmoothMap:
    a = op.entries

    def value(x):
        x = np.asarray(x, float)
        return np.einsum("...i,ij,...j->...", x, a, x)

    def grad(x):
        return 2.0 * np.asarray(x, float) @ a

    def hess(x):
        x = np.asarray(x, float)
        return np.broadcast_to(2.0 * a, x.shape[:-1] + a.shape).copy()

    return VectorSmoothMap("quadratic_form", value, grad, hess)


@dataclass(frozen=True)
class CylinderFunctional:
    """F = f(X_1..X_n) over a product law.

    Gradient and Hessian callables are checked against central finite
    differences at construction (disable with ``validate=False`` for maps
    with expensive Hessians).
    """

    n: int
    f: VectorSmoothMap
    law: DirichletVariable
    validate: bool = True

    def __post_init__(self) -> None:
        if self.validate:
            _check_derivatives(self.n, self.f)

    def carre_du_champ(self, batch: SampleBatch) -> np.ndarray:
        """Gamma(F, F) per sample, by the chain rule."""
        grad = np.asarray(self.f.gradient(batch.x), dtype=float)
        return np.einsum("mi,mi->m", grad**2, batch.gamma)


def _check_derivatives(n: int, f: VectorSmoothMap) -> None:
    g = stream(185812, "fd-check", f.name, n)
    pts = g.uniform(0.05, 0.85, size=(FD_POINTS, n))
    grad = np.asarray(f.gradient(pts), dtype=float)
    hess = np.asarray(f.hessian(pts), dtype=float)
    for i in range(n):
        e = np.zeros(n)
        e[i] = FD_STEP
        fd_grad = (f.value(pts + e) - f.value(pts - e)) / (2.0 * FD_STEP)
        _fd_close(fd_grad, grad[:, i], f"gradient[{i}] of {f.name}")
        fd_hess_col = (
            np.asarray(f.gradient(pts + e), float)
            - np.asarray(f.gradient(pts - e), float)
        ) / (2.0 * FD_STEP)
        _fd_close(fd_hess_col, hess[:, :, i], f"hessian[:, {i}] of {f.name}")


def _fd_close(approx, exact, label: str) -> None:
    scale = np.maximum(np.abs(exact), 1e-2)
    if np.any(np.abs(approx - exact) > FD_REL_TOL * scale + 1e-7):
        raise ValueError(f"{label} disagrees with finite differences")


@dataclass(frozen=True)
class QuadraticFunctional:
    """F = <X, A X> over a product law."""

    operator: SymmetricOperator
    law: DirichletVariable
    require_zero_diagonal: bool = False

    def __post_init__(self) -> None:
        if self.require_zero_diagonal and np.any(np.diag(self.operator.entries) != 0.0):
            raise ValueError("operator has nonzero diagonal entries")

    def cylinder(self) -> CylinderFunctional:
        return CylinderFunctional(
            n=self.operator.n,
            f=quadratic_form_map(self.operator),
            law=self.law,
            validate=False,
        )


def _coefficients(F: CylinderFunctional, batch: SampleBatch) -> np.ndarray:
    if np.any(batch.gamma < 0):
        raise AssertionError("negative carre du champ values in batch")
    grad = np.asarray(F.f.gradient(batch.x), dtype=float)
    return grad * np.sqrt(batch.gamma)


def derivative_samples(
    F: CylinderFunctional, batch: SampleBatch, g_seed: int
) -> np.ndarray:
    """One draw of D_G F per batch row, fresh Gaussians keyed by g_seed."""
    coeffs = _coefficients(F, batch)
    g = stream(g_seed, "gauss-direction").standard_normal(coeffs.shape)
    return np.einsum("mi,mi->m", coeffs, g)


@dataclass(frozen=True)
class CfIdentityReport:
    lam: float
    lhs: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)
    max_abs_gap: float


def conditional_cf_identity(
    F: CylinderFunctional, batch: SampleBatch, lam: float
) -> CfIdentityReport:
    """Both sides of the per-sample Fourier-Laplace identity.

    lhs: the X-conditional CF of D_G F, i.e. the Gaussian CF evaluated at
    the conditional variance assembled from the derivative's coefficient
    vector. rhs: exp(-lam^2 Gamma(F,F)/2) with Gamma computed independently
    through the chain rule. Equal per sample up to rounding.
    """
    coeffs = _coefficients(F, batch)
    conditional_variance = np.einsum("mi,mi->m", coeffs, coeffs)
    lhs = np.exp(-(lam**2) * conditional_variance / 2.0)
    rhs = np.exp(-(lam**2) * F.carre_du_champ(batch) / 2.0)
    return CfIdentityReport(
        lam=lam, lhs=lhs, rhs=rhs, max_abs_gap=float(np.max(np.abs(lhs - rhs), initial=0.0))
    )


@dataclass(frozen=True)
class MarkovBoundRow:
    xi: float
    p_hat: float
    bound: float
    band: float

    @property
    def ok(self) -> bool:
        return self.p_hat <= self.bound + self.band


def markov_smallball_bound(
    F: CylinderFunctional, batch: SampleBatch, xi_grid
) -> list[MarkovBoundRow]:
    """P(Gamma(F,F) < 1/xi) against the bound e * E[exp(-xi Gamma(F,F))].

    Both sides are estimated on the same batch; the row band is four
    combined standard errors.
    """
    gamma_f = F.carre_du_champ(batch)
    m = gamma_f.size
    rows = []
    for xi in xi_grid:
        xi = float(xi)
        indicator = gamma_f < (np.inf if xi == 0 else 1.0 / xi)
        p_hat = float(np.mean(indicator))
        weights = np.exp(-xi * gamma_f)
        bound = math.e * float(np.mean(weights))
        se = math.sqrt(p_hat * (1.0 - p_hat) / m) + math.e * float(
            np.std(weights) / math.sqrt(m)
        )
        rows.append(MarkovBoundRow(xi=xi, p_hat=p_hat, bound=bound, band=4.0 * se + 1e-12))
    bad = [r for r in rows if not r.ok]
    if bad:
        raise RuntimeError(f"Markov small-ball bound violated at xi={bad[0].xi}")
    return rows


@dataclass(frozen=True)
class GaussianCfBound:
    xi: float
    modulus: float
    log2_modulus: float
    bounds: np.ndarray
    log2_bounds: np.ndarray


def gaussian_quadratic_cf(lambdas, xi: float) -> GaussianCfBound:
    """Exact |E exp(i xi <N, Lambda N>)| and its remainder bounds.

    modulus = prod_k (1 + 4 xi^2 lambda_k^2)^(-1/4); for every q up to
    len(lambdas), modulus <= (4^q xi^(2q) e_q(lambda^2))^(-1/4), an exact
    consequence of expanding the product. Everything is computed in log2.
    """
    lam = np.asarray(lambdas, dtype=float)
    if lam.ndim != 1 or lam.size == 0:
        raise ValueError("lambdas must be a nonempty 1-d list")
    log2_modulus = float(-0.25 * np.sum(np.log2(1.0 + 4.0 * xi**2 * lam**2)))
    with np.errstate(divide="ignore"):
        log2_lam_sq = np.log2(lam**2)
    log2_e = _log2_esym_from_squares(log2_lam_sq, lam.size)
    q = np.arange(1, lam.size + 1)
    if xi == 0.0:
        log2_bounds = np.full(lam.size, np.inf)
    else:
        log2_bounds = -0.25 * (2.0 * q + 2.0 * q * math.log2(abs(xi)) + log2_e)
    if np.any(log2_modulus > log2_bounds + 1e-9):
        raise RuntimeError("remainder bound violated for the exact CF modulus")
    finite = np.isfinite(log2_bounds)
    bounds = np.full(lam.size, np.inf)
    bounds[finite] = np.exp2(np.clip(log2_bounds[finite], -1074.0, 1023.0))
    return GaussianCfBound(
        xi=float(xi),
        modulus=2.0**log2_modulus,
        log2_modulus=log2_modulus,
        bounds=bounds,
        log2_bounds=log2_bounds,
    )


def hessian_main_term(
    F: QuadraticFunctional, batch: SampleBatch
) -> list[SymmetricOperator]:
    """Per sample: Gamma^(1/2) (2 A_offdiag) Gamma^(1/2).

    The Hessian of <x, A x> is 2A; the diagonal part is deliberately
    dropped (its contribution separates by disjoint-support additivity of
    the spectral remainders).
    """
    a_off = F.operator.entries.copy()
    np.fill_diagonal(a_off, 0.0)
    sq = np.sqrt(batch.gamma)
    out = []
    for m in range(batch.sample_count):
        d = sq[m]
        out.append(SymmetricOperator(2.0 * a_off * np.outer(d, d)))
    return out


def iterated_derivative_samples(
    F: QuadraticFunctional,
    batch: SampleBatch,
    gh_seed: int,
    include_diagonal: bool = False,
) -> np.ndarray:
    """One draw per row of the iterated derivative's reduced form.

    The law-determining main term is <G, M H> with
    M = Gamma^(1/2) (2 A_offdiag) Gamma^(1/2) and fresh independent Gaussian
    vectors G, H. ``include_diagonal`` adds the printed diagonal part
    (1/2) sum_i d_i f(X) Gamma_i^(-1/2) G_i Hcheck_i with
    Hcheck_i ~ N(0, Gamma(Gamma_i, Gamma_i)), available in closed form for
    the built-in kinds.
    """
    from .laws import carre_of_carre

    mats = hessian_main_term(F, batch)
    m, n = batch.x.shape
    g = stream(gh_seed, "iterated-G").standard_normal((m, n))
    h = stream(gh_seed, "iterated-H").standard_normal((m, n))
    out = np.array(
        [float(g[k] @ mats[k].entries @ h[k]) for k in range(m)]
    )
    if include_diagonal:
        grad = 2.0 * np.einsum("mj,ij->mi", batch.x, F.operator.entries)
        ccc = carre_of_carre(F.law, batch.x, underlying=batch.aux)
        h2 = stream(gh_seed, "iterated-H2").standard_normal((m, n))
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_sqrt_gamma = np.where(batch.gamma > 0, batch.gamma**-0.5, 0.0)
        out = out + 0.5 * np.einsum(
            "mi,mi,mi,mi->m", grad, inv_sqrt_gamma, g, np.sqrt(ccc) * h2
        )
    return out


@dataclass(frozen=True)
class NegativeMomentEstimate:
    value: float
    log2_value: float
    q: int
    power: float
    floor_fraction: float
    sample_count: int


def remainder_negative_moment(
    samples, q: int, power: float
) -> NegativeMomentEstimate:
    """Monte Carlo E[R_q(M)^(-power)] over per-sample operators.

    Accumulated in the log domain. Samples whose remainder underflows
    2^FLOOR_LOG2 are clipped to the floor and counted in
    ``floor_fraction``; if every sample sits at the floor the moment is
    presumed infinite and this raises.
    """
    from .spectral import log2_spectral_remainders

    log2_terms = []
    floored = 0
    for op in samples:
        if not isinstance(op, SymmetricOperator):
            op = SymmetricOperator(op)
        if q > op.n:
            raise ValueError(f"q={q} exceeds dimension {op.n}")
        lr = float(log2_spectral_remainders(op, q)[q - 1])
        if lr < FLOOR_LOG2:
            floored += 1
            lr = FLOOR_LOG2
        log2_terms.append(-power * lr)
    if not log2_terms:
        raise ValueError("no samples")
    if floored == len(log2_terms):
        raise ValueError(
            f"all {floored} samples below the 2^{FLOOR_LOG2:.0f} floor; "
            f"the negative moment at q={q} is likely infinite"
        )
    arr = np.array(log2_terms)
    hi = float(np.max(arr))
    log2_mean = hi + math.log2(float(np.sum(np.exp2(arr - hi)))) - math.log2(arr.size)
    return NegativeMomentEstimate(
        value=float(2.0**log2_mean) if log2_mean < 1023 else math.inf,
        log2_value=log2_mean,
        q=q,
        power=power,
        floor_fraction=floored / arr.size,
        sample_count=arr.size,
    )
