"""Concrete one-dimensional Dirichlet structures and their samplers.

Each law bundles together its sampler, the closed-form carre du champ
Gamma(X, X), the generator action L, and an admissible small-ball exponent
for Gamma(X, X):

======================  =================  ==========================  =========
kind                    Gamma(X, X)        L u                         theta
======================  =================  ==========================  =========
gaussian                1                  u'' - x u'                  +inf
beta(a, b) on [-1, 1]   1 - x^2            (1-x^2) u''                 < a ^ b
                                           - [(a+b) x + a - b] u'
gamma(a) on [0, inf)    x                  x u'' + (a - x) u'          < a
phi of gaussian         phi'(t)^2          chain rule through phi      declared
chaos p(Y_1..Y_k)       sum S_l(Y)^2 G_l   (not supported)             composed
======================  =================  ==========================  =========

The Beta law lives on [-1, 1] with density proportional to
(1-x)^(a-1) (1+x)^(b-1), which is what makes Gamma = 1 - x^2.

Sign note for the Gamma(a) generator: the drift is +(a - x) u'. The
opposite sign, which one sometimes sees written, fails the defining
integration-by-parts property (E[L u] = 0 already breaks for u = x^2,
since E[2x - (a-x) 2x] = 4a != 0), while the sign used here satisfies
E[L u] = 0 and E[Gamma(u, u)] = -E[u L u] for all polynomial u. With this
convention L(X - a) = -(X - a), matching L x = -x for the Gaussian.

Small-ball exponents carry a slack factor (1 - 1e-3): the supremum exponent
a ^ b (resp. a) is itself not admissible, only values strictly below it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import ndtr

from .logdomain import LogScalar, as_logscalar, minimum
from .multilinear import (
    MultilinearPolynomial,
    evaluate,
    partial_influence_poly,
    theta_recursion,
)
from .rngstreams import map_chunks, stream

#: multiplicative slack keeping declared exponents strictly admissible
THETA_SLACK = 1e-3

KINDS = ("gaussian", "beta", "gamma", "phi_gaussian", "chaos")


@dataclass(frozen=True)
class SmoothMap:
    """A named map with explicit first and second derivatives.

    No symbolic differentiation: the maps needed here are polynomials and a
    handful of special functions whose derivatives are known.
    """

    name: str
    f: Callable
    df: Callable
    d2f: Callable


IDENTITY = SmoothMap("identity", lambda x: x, lambda x: np.ones_like(np.asarray(x, float)), lambda x: np.zeros_like(np.asarray(x, float)))
SQUARE = SmoothMap("square", lambda x: x**2, lambda x: 2.0 * x, lambda x: np.full_like(np.asarray(x, float), 2.0))
CUBE = SmoothMap("cube", lambda x: x**3, lambda x: 3.0 * x**2, lambda x: 6.0 * x)


def _std_normal_pdf(t):
    return np.exp(-np.asarray(t, float) ** 2 / 2.0) / math.sqrt(2.0 * math.pi)


GAUSSIAN_CDF = SmoothMap(
    "gaussian_cdf",
    lambda t: ndtr(t),
    _std_normal_pdf,
    lambda t: -np.asarray(t, float) * _std_normal_pdf(t),
)

#: admissible exponent for the Gamma(X,X) of the gaussian_cdf map:
#: the defining integral is finite exactly for theta < 1/2
GAUSSIAN_CDF_THETA = 0.5 * (1.0 - THETA_SLACK)

_NAMED_MAPS = {m.name: m for m in (IDENTITY, SQUARE, CUBE, GAUSSIAN_CDF)}


@dataclass(frozen=True)
class DirichletVariable:
    kind: str
    alpha: float | None = None
    beta_param: float | None = None
    phi: SmoothMap | None = None
    declared_theta: LogScalar | None = None
    base: tuple["DirichletVariable", ...] | None = None
    poly: MultilinearPolynomial | None = None
    mean: float = 0.0
    variance: float = 1.0

    # -- constructors ------------------------------------------------------

    @classmethod
    def gaussian(cls) -> "DirichletVariable":
        return cls(kind="gaussian", mean=0.0, variance=1.0)

    @classmethod
    def beta(cls, alpha: float, beta: float) -> "DirichletVariable":
        if alpha <= 0 or beta <= 0:
            raise ValueError("beta parameters must be positive")
        s = alpha + beta
        return cls(
            kind="beta",
            alpha=float(alpha),
            beta_param=float(beta),
            mean=(beta - alpha) / s,
            variance=4.0 * alpha * beta / (s**2 * (s + 1.0)),
        )

    @classmethod
    def gamma(cls, alpha: float) -> "DirichletVariable":
        if alpha <= 0:
            raise ValueError("gamma parameter must be positive")
        return cls(kind="gamma", alpha=float(alpha), mean=float(alpha), variance=float(alpha))

    @classmethod
    def phi_of_gaussian(
        cls,
        phi: SmoothMap,
        theta: float | LogScalar | None = None,
        mean: float | None = None,
        variance: float | None = None,
    ) -> "DirichletVariable":
        if phi.name == "gaussian_cdf":
            theta = GAUSSIAN_CDF_THETA if theta is None else theta
            mean = 0.5 if mean is None else mean
            variance = 1.0 / 12.0 if variance is None else variance
        if mean is None or variance is None:
            raise ValueError(
                f"no closed-form moments for phi={phi.name!r}; pass mean and variance"
            )
        return cls(
            kind="phi_gaussian",
            phi=phi,
            declared_theta=None if theta is None else as_logscalar(theta),
            mean=float(mean),
            variance=float(variance),
        )

    @classmethod
    def chaos(cls, base, poly: MultilinearPolynomial) -> "DirichletVariable":
        base = tuple(base)
        if len(base) < poly.variable_count:
            raise ValueError(
                f"chaos needs {poly.variable_count} base laws, got {len(base)}"
            )
        return cls(
            kind="chaos",
            base=base,
            poly=poly,
            # base laws enter standardized, so the multilinear moment
            # identities are exact
            mean=poly.constant_term(),
            variance=poly.variance_identity(),
        )

    def __repr__(self) -> str:
        if self.kind == "beta":
            return f"DirichletVariable(beta, a={self.alpha}, b={self.beta_param})"
        if self.kind == "gamma":
            return f"DirichletVariable(gamma, a={self.alpha})"
        if self.kind == "phi_gaussian":
            return f"DirichletVariable(phi_gaussian, phi={self.phi.name})"
        return f"DirichletVariable({self.kind})"


@dataclass(frozen=True)
class SampleBatch:
    """Aligned samples x and carre du champ values gamma, both (M, n).

    ``aux`` carries the underlying Gaussian points for the phi kind (the
    functional relation gamma = phi'(t)^2 is only computable from t).
    """

    x: np.ndarray
    gamma: np.ndarray
    seed: int
    standardized: bool
    law: DirichletVariable
    aux: np.ndarray | None = field(default=None, repr=False)

    @property
    def sample_count(self) -> int:
        return self.x.shape[0]

    @property
    def coordinate_count(self) -> int:
        return self.x.shape[1]


def carre_du_champ(v: DirichletVariable, x, underlying=None):
    """Gamma(X, X) evaluated at x (raw, unstandardized coordinates).

    The phi kind needs the underlying Gaussian point(s) t; the chaos kind
    needs ``underlying = (y, gamma_y)``, the standardized base coordinates
    and their carre du champ values along the last axis.
    """
    x = np.asarray(x, dtype=float)
    if v.kind == "gaussian":
        return np.ones_like(x) if x.ndim else 1.0
    if v.kind == "beta":
        if np.any(np.abs(x) > 1.0 + 1e-12):
            raise ValueError("beta law is supported on [-1, 1]")
        return 1.0 - x**2
    if v.kind == "gamma":
        if np.any(x < -1e-12):
            raise ValueError("gamma law is supported on [0, inf)")
        return np.maximum(x, 0.0)
    if v.kind == "phi_gaussian":
        if underlying is None:
            raise ValueError("phi kind needs the underlying gaussian point")
        return np.asarray(v.phi.df(underlying), dtype=float) ** 2
    if v.kind == "chaos":
        if underlying is None:
            raise ValueError("chaos kind needs (y, gamma_y) along the last axis")
        y, gamma_y = underlying
        return _chaos_gamma(v.poly, np.asarray(y, float), np.asarray(gamma_y, float))
    raise ValueError(f"unknown kind {v.kind!r}")


def _chaos_gamma(poly: MultilinearPolynomial, y, gamma_y):
    """Chain rule: Gamma(p(Y), p(Y)) = sum_l (d_l p)(Y)^2 * Gamma_l."""
    out = np.zeros(y.shape[:-1])
    for l in range(poly.variable_count):
        s_l, _ = partial_influence_poly(poly, l)
        if s_l.coefficients:
            out = out + np.asarray(evaluate(s_l, y)) ** 2 * gamma_y[..., l]
    return out


def generator_apply(v: DirichletVariable, u: SmoothMap, x, underlying=None):
    """The generator L acting on u, evaluated pointwise at x.

    See the module docstring for the Gamma-law sign convention. The chaos
    kind has no closed-form generator here and is rejected.
    """
    x = np.asarray(x, dtype=float)
    if v.kind == "gaussian":
        return u.d2f(x) - x * u.df(x)
    if v.kind == "beta":
        a, b = v.alpha, v.beta_param
        return (1.0 - x**2) * u.d2f(x) - ((a + b) * x + (a - b)) * u.df(x)
    if v.kind == "gamma":
        return x * u.d2f(x) + (v.alpha - x) * u.df(x)
    if v.kind == "phi_gaussian":
        if underlying is None:
            raise ValueError("phi kind needs the underlying gaussian point")
        t = np.asarray(underlying, dtype=float)
        df, d2f = v.phi.df(t), v.phi.d2f(t)
        return df**2 * u.d2f(x) + (d2f - t * df) * u.df(x)
    raise ValueError(f"generator not available for kind {v.kind!r}")


def carre_of_carre(v: DirichletVariable, x, underlying=None):
    """Gamma(Gamma(X,X), Gamma(X,X)) in closed form, per kind.

    Needed by the iterated-derivative diagonal term. Chain rule through the
    closed-form Gamma: gaussian -> 0 (constant), beta -> 4 x^2 (1 - x^2),
    gamma -> x, phi -> (2 phi' phi'')^2 at the underlying point.
    """
    x = np.asarray(x, dtype=float)
    if v.kind == "gaussian":
        return np.zeros_like(x)
    if v.kind == "beta":
        return 4.0 * x**2 * (1.0 - x**2)
    if v.kind == "gamma":
        return np.maximum(x, 0.0)
    if v.kind == "phi_gaussian":
        if underlying is None:
            raise ValueError("phi kind needs the underlying gaussian point")
        t = np.asarray(underlying, dtype=float)
        return (2.0 * v.phi.df(t) * v.phi.d2f(t)) ** 2
    raise ValueError(f"no closed-form Gamma(Gamma, Gamma) for kind {v.kind!r}")


def drift_polynomial(v: DirichletVariable) -> np.polynomial.Polynomial:
    """b(x) with L u = Gamma(x) u'' + b(x) u', for the polynomial-Gamma kinds."""
    P = np.polynomial.Polynomial
    if v.kind == "gaussian":
        return P([0.0, -1.0])
    if v.kind == "beta":
        a, b = v.alpha, v.beta_param
        return P([b - a, -(a + b)])
    if v.kind == "gamma":
        return P([v.alpha, -1.0])
    raise ValueError(f"no polynomial drift for kind {v.kind!r}")


def carre_polynomial(v: DirichletVariable) -> np.polynomial.Polynomial:
    """Gamma(X, X) as a polynomial in x, for the scalar closed-form kinds."""
    P = np.polynomial.Polynomial
    if v.kind == "gaussian":
        return P([1.0])
    if v.kind == "beta":
        return P([1.0, 0.0, -1.0])
    if v.kind == "gamma":
        return P([0.0, 1.0])
    raise ValueError(f"no polynomial carre du champ for kind {v.kind!r}")


def smallball_exponent(v: DirichletVariable) -> LogScalar:
    """An admissible theta with P(Gamma(X,X) <= eps) <~ eps^theta."""
    if v.kind == "gaussian":
        return LogScalar.infinite()
    if v.kind == "beta":
        return LogScalar.from_float(min(v.alpha, v.beta_param) * (1.0 - THETA_SLACK))
    if v.kind == "gamma":
        return LogScalar.from_float(v.alpha * (1.0 - THETA_SLACK))
    if v.kind == "phi_gaussian":
        if v.declared_theta is None:
            raise ValueError(
                "phi kind has no automatic exponent; declare theta from the "
                "negative-moment integrability of phi'"
            )
        return v.declared_theta
    if v.kind == "chaos":
        base_theta = LogScalar.infinite()
        for component in v.base:
            base_theta = minimum(base_theta, smallball_exponent(component))
        # Gamma of the chaos is a polynomial of degree <= 2 deg(p) in the
        # base coordinates; the composed exponent is computed at that degree
        # (conservative: theta_d decreases in d).
        return theta_recursion(base_theta, max(1, 2 * v.poly.degree))
    raise ValueError(f"unknown kind {v.kind!r}")


# -- sampling ----------------------------------------------------------------


def _draw_raw(v: DirichletVariable, seed: int, path: tuple, shape):
    """Raw (unstandardized) draws: (x, gamma, aux)."""
    if v.kind == "gaussian":
        g = stream(seed, *path)
        x = g.standard_normal(shape)
        return x, np.ones_like(x), None
    if v.kind == "beta":
        g = stream(seed, *path)
        x = 2.0 * g.beta(v.beta_param, v.alpha, size=shape) - 1.0
        return x, 1.0 - x**2, None
    if v.kind == "gamma":
        g = stream(seed, *path)
        x = g.gamma(v.alpha, 1.0, size=shape)
        return x, x, None
    if v.kind == "phi_gaussian":
        g = stream(seed, *path)
        t = g.standard_normal(shape)
        x = np.asarray(v.phi.f(t), dtype=float)
        return x, np.asarray(v.phi.df(t), dtype=float) ** 2, t
    if v.kind == "chaos":
        k = v.poly.variable_count
        y = np.empty(shape + (k,))
        gamma_y = np.empty_like(y)
        for l in range(k):
            component = v.base[l]
            xo, go, _ = _draw_raw(component, seed, path + ("base", l), shape)
            scale = math.sqrt(component.variance)
            y[..., l] = (xo - component.mean) / scale
            gamma_y[..., l] = go / component.variance
        x = np.asarray(evaluate(v.poly, y))
        return x, _chaos_gamma(v.poly, y, gamma_y), None
    raise ValueError(f"unknown kind {v.kind!r}")


def sample_batch(
    v: DirichletVariable,
    n: int,
    sample_count: int,
    seed: int,
    standardize: bool = True,
    threads: int | None = None,
) -> SampleBatch:
    """i.i.d. coordinates, (sample_count, n), with aligned gamma values.

    Rows are generated in fixed-size chunks with per-(seed, chunk) streams,
    so the output is identical whatever the thread count. Standardization
    uses the law's closed-form moments and rescales gamma by 1/variance
    (chain rule through x -> (x - mean)/sd).
    """
    if v.variance <= 0:
        raise ValueError("law must have positive variance")

    def draw(chunk_index, lo, hi):
        return _draw_raw(v, seed, ("rows", chunk_index), (hi - lo, n))

    parts = map_chunks(draw, sample_count, threads=threads)
    x = np.concatenate([p[0] for p in parts], axis=0)
    gamma = np.concatenate([p[1] for p in parts], axis=0)
    aux = (
        np.concatenate([p[2] for p in parts], axis=0)
        if parts and parts[0][2] is not None
        else None
    )
    if standardize:
        scale = math.sqrt(v.variance)
        x = (x - v.mean) / scale
        gamma = gamma / v.variance
    return SampleBatch(
        x=x, gamma=gamma, seed=seed, standardized=standardize, law=v, aux=aux
    )


# -- law spec files ----------------------------------------------------------
#
# {"kind": "gaussian"|"beta"|"gamma"|"phi_gaussian"|"chaos",
#  "params": {...}, "standardize": bool}


def law_from_json(obj: dict) -> tuple[DirichletVariable, bool]:
    kind = obj["kind"]
    params = obj.get("params", {})
    standardize = bool(obj.get("standardize", True))
    if kind == "gaussian":
        return DirichletVariable.gaussian(), standardize
    if kind == "beta":
        return DirichletVariable.beta(params["alpha"], params["beta"]), standardize
    if kind == "gamma":
        return DirichletVariable.gamma(params["alpha"]), standardize
    if kind == "phi_gaussian":
        phi = _NAMED_MAPS.get(params.get("phi", "gaussian_cdf"))
        if phi is None:
            raise ValueError(f"unknown named map {params.get('phi')!r}")
        return (
            DirichletVariable.phi_of_gaussian(
                phi,
                theta=params.get("theta"),
                mean=params.get("mean"),
                variance=params.get("variance"),
            ),
            standardize,
        )
    if kind == "chaos":
        base = tuple(law_from_json(spec)[0] for spec in params["base"])
        poly = MultilinearPolynomial.from_json(params["poly"])
        return DirichletVariable.chaos(base, poly), standardize
    raise ValueError(f"unknown law kind {kind!r}")
