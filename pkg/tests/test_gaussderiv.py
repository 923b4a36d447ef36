import math

import numpy as np
import pytest
from scipy.special import ndtr

from qfcert.estimation import ecf, ks_distance
from qfcert.gaussderiv import (
    CylinderFunctional,
    QuadraticFunctional,
    VectorSmoothMap,
    conditional_cf_identity,
    coordinate_map,
    coordinate_square_map,
    derivative_samples,
    gaussian_quadratic_cf,
    hessian_main_term,
    markov_smallball_bound,
    quadratic_form_map,
    remainder_negative_moment,
)
from qfcert.laws import DirichletVariable, sample_batch
from qfcert.rngstreams import stream
from qfcert.spectral import SymmetricOperator, spectral_remainders

from conftest import random_symmetric
from oracles import gaussian_square_cf_modulus

GAUSS = DirichletVariable.gaussian()


def test_derivative_variance_coordinate():
    F = CylinderFunctional(2, coordinate_map(0, 2), GAUSS)
    batch = sample_batch(GAUSS, 2, 50_000, seed=1)
    d = derivative_samples(F, batch, g_seed=2)
    assert d.var() == pytest.approx(1.0, abs=0.03)


def test_derivative_square_conditional_variance():
    F = CylinderFunctional(1, coordinate_square_map(0, 1), GAUSS)
    batch = sample_batch(GAUSS, 1, 10_000, seed=3)
    gamma_f = F.carre_du_champ(batch)
    assert np.allclose(gamma_f, 4.0 * batch.x[:, 0] ** 2)


def test_quadratic_carre_two_routes():
    op = random_symmetric(4, 5)
    law = DirichletVariable.gamma(2.0)
    F = QuadraticFunctional(op, law).cylinder()
    batch = sample_batch(law, 4, 2_000, seed=6)
    via_chain = F.carre_du_champ(batch)
    direct = np.einsum(
        "mi,mi->m", (2.0 * batch.x @ op.entries) ** 2, batch.gamma
    )
    assert np.max(np.abs(via_chain - direct)) <= 1e-10 * np.max(np.abs(direct))


def test_cf_identity_examples():
    batch = sample_batch(GAUSS, 2, 5_000, seed=7)
    F = CylinderFunctional(2, coordinate_map(0, 2), GAUSS)
    rep = conditional_cf_identity(F, batch, 1.0)
    assert rep.max_abs_gap <= 1e-12
    assert np.allclose(rep.lhs, math.exp(-0.5))

    F2 = CylinderFunctional(2, coordinate_square_map(0, 2), GAUSS)
    rep2 = conditional_cf_identity(F2, batch, 2.0)
    assert rep2.max_abs_gap <= 1e-12
    assert np.allclose(rep2.rhs, np.exp(-8.0 * batch.x[:, 0] ** 2))

    rep0 = conditional_cf_identity(F2, batch, 0.0)
    assert np.all(rep0.lhs == 1.0) and np.all(rep0.rhs == 1.0)


def test_cf_identity_all_kinds():
    for law in (GAUSS, DirichletVariable.beta(2, 2), DirichletVariable.gamma(1.0)):
        batch = sample_batch(law, 3, 2_000, seed=8)
        F = CylinderFunctional(3, coordinate_square_map(1, 3), law)
        rep = conditional_cf_identity(F, batch, 1.7)
        assert rep.max_abs_gap <= 1e-12, law.kind


def test_derivative_law_matches_gaussian_mixture():
    # KS between samples of the derivative and the mixture CDF rebuilt from
    # the same batch's conditional variances
    law = DirichletVariable.gamma(2.0)
    F = CylinderFunctional(2, coordinate_square_map(0, 2), law)
    m = 20_000
    batch = sample_batch(law, 2, m, seed=9)
    d = derivative_samples(F, batch, g_seed=10)
    sd = np.sqrt(F.carre_du_champ(batch))
    grid = np.linspace(d.min() - 0.5, d.max() + 0.5, 4096)

    def mixture_cdf(t):
        t = np.asarray(t, dtype=float)
        out = np.empty_like(t)
        for lo in range(0, t.size, 256):
            block = t[lo : lo + 256]
            out[lo : lo + 256] = np.mean(ndtr(block[:, None] / sd[None, :]), axis=1)
        return out

    empirical = np.searchsorted(np.sort(d), grid, side="right") / m
    gap = np.max(np.abs(empirical - mixture_cdf(grid)))
    assert gap <= 2.0 / math.sqrt(m) + 0.01


def test_markov_bound_examples():
    batch = sample_batch(GAUSS, 1, 5_000, seed=11)
    F = CylinderFunctional(1, coordinate_map(0, 1), GAUSS)  # Gamma == 1
    rows = markov_smallball_bound(F, batch, [2.0])
    assert rows[0].p_hat == 0.0
    assert rows[0].bound == pytest.approx(math.e * math.exp(-2.0))

    F2 = CylinderFunctional(1, coordinate_square_map(0, 1), GAUSS)
    rows = markov_smallball_bound(F2, batch, [1.0, 10.0, 100.0])
    assert all(r.ok for r in rows)

    rows = markov_smallball_bound(F2, batch, [0.0])
    assert rows[0].bound == pytest.approx(math.e)
    assert rows[0].p_hat <= 1.0


def test_gaussian_cf_examples():
    assert gaussian_quadratic_cf([1.0], 0.0).modulus == 1.0
    got = gaussian_quadratic_cf([1.0], 1.0)
    assert got.modulus == pytest.approx(5.0**-0.25)
    # large-xi decay rates coincide for q = n
    big = gaussian_quadratic_cf([1.0, 1.0], 1e3)
    assert big.modulus == pytest.approx((4.0 * 1e6) ** -0.5, rel=1e-5)
    assert big.bounds[1] == pytest.approx((16.0 * 1e12) ** -0.25, rel=1e-12)
    assert big.modulus <= big.bounds[1] * (1.0 + 1e-9)


def test_gaussian_cf_matches_oracle_and_bounds():
    g = stream(12, "spectra")
    for _ in range(10):
        lam = g.uniform(-1.0, 1.0, size=6)
        lam /= np.linalg.norm(lam)
        for xi in (0.0, 0.3, 2.0, 17.0):
            got = gaussian_quadratic_cf(lam, xi)
            assert got.modulus == pytest.approx(
                gaussian_square_cf_modulus(lam, xi), rel=1e-12
            )
            assert np.all(got.log2_modulus <= got.log2_bounds + 1e-9)


def test_gaussian_cf_vs_monte_carlo():
    g = stream(13, "mc")
    lam = np.array([0.8, -0.5, 0.3])
    m = 100_000
    samples = (g.standard_normal((m, 3)) ** 2 * lam).sum(axis=1)
    grid = np.linspace(-6.0, 6.0, 25)
    table = ecf(samples, grid)
    exact = np.array([gaussian_quadratic_cf(lam, x).modulus for x in grid])
    assert np.max(np.abs(table.modulus() - exact)) <= 3.0 / math.sqrt(m)


def test_orthogonal_mixing_invariance():
    # <N, A N> and <N, Lambda N> have the same law
    op = random_symmetric(4, 20)
    lam = op.eigenvalues
    g = stream(21, "mix")
    m = 100_000
    x = g.standard_normal((m, 4))
    q_full = np.einsum("mi,ij,mj->m", x, op.entries, x)
    y = stream(22, "mix2").standard_normal((m, 4))
    q_diag = (y**2 * lam).sum(axis=1)
    grid = np.linspace(-4.0, 4.0, 17)
    gap = np.abs(ecf(q_full, grid).values() - ecf(q_diag, grid).values())
    assert np.max(gap) <= 6.0 / math.sqrt(m)


def test_hessian_main_term():
    a = SymmetricOperator([[0.4, 0.2, 0.0], [0.2, 0.0, -0.3], [0.0, -0.3, 0.1]])
    qf = QuadraticFunctional(a, GAUSS)
    batch = sample_batch(GAUSS, 3, 7, seed=23)
    mats = hessian_main_term(qf, batch)
    off = a.entries.copy()
    np.fill_diagonal(off, 0.0)
    for m in mats:
        assert np.array_equal(m.entries, m.entries.T)
        assert np.allclose(m.entries, 2.0 * off)  # Gamma == 1 for the gaussian law

    gamma_law = DirichletVariable.gamma(1.0)
    off2 = SymmetricOperator([[0.0, 2**-0.5], [2**-0.5, 0.0]])
    batch2 = sample_batch(gamma_law, 2, 5, seed=24, standardize=False)
    mats2 = hessian_main_term(QuadraticFunctional(off2, gamma_law), batch2)
    expected = 2.0 * 2**-0.5 * np.sqrt(batch2.x[:, 0] * batch2.x[:, 1])
    assert np.allclose([m.entries[0, 1] for m in mats2], expected)


def test_iterated_derivative_conditional_variance():
    # E[<G, M H>^2 | X] = ||M||_F^2: empirical variance matches the mean
    # squared Frobenius norm of the per-sample main-term matrices
    a = SymmetricOperator([[0.0, 0.4, -0.2], [0.4, 0.0, 0.1], [-0.2, 0.1, 0.0]])
    law = DirichletVariable.gamma(2.0)
    qf = QuadraticFunctional(a, law)
    batch = sample_batch(law, 3, 4_000, seed=30)
    from qfcert.gaussderiv import iterated_derivative_samples

    samples = iterated_derivative_samples(qf, batch, gh_seed=31)
    mats = hessian_main_term(qf, batch)
    target = np.mean([np.sum(m.entries**2) for m in mats])
    assert samples.mean() == pytest.approx(0.0, abs=4 * samples.std() / math.sqrt(samples.size))
    assert samples.var() == pytest.approx(target, rel=0.15)


def test_iterated_derivative_diagonal_term():
    # gaussian law: Gamma(Gamma, Gamma) = 0, so the diagonal term vanishes
    a = SymmetricOperator([[0.0, 0.5], [0.5, 0.0]])
    qf = QuadraticFunctional(a, GAUSS)
    batch = sample_batch(GAUSS, 2, 500, seed=32)
    from qfcert.gaussderiv import iterated_derivative_samples

    plain = iterated_derivative_samples(qf, batch, gh_seed=33)
    with_diag = iterated_derivative_samples(qf, batch, gh_seed=33, include_diagonal=True)
    assert np.array_equal(plain, with_diag)
    # beta law: the closed-form diagonal term changes the draw
    beta = DirichletVariable.beta(2, 2)
    batch_b = sample_batch(beta, 2, 500, seed=34, standardize=False)
    qf_b = QuadraticFunctional(a, beta)
    plain_b = iterated_derivative_samples(qf_b, batch_b, gh_seed=35)
    with_diag_b = iterated_derivative_samples(qf_b, batch_b, gh_seed=35, include_diagonal=True)
    assert not np.array_equal(plain_b, with_diag_b)


def test_zero_diagonal_flag():
    with pytest.raises(ValueError, match="diagonal"):
        QuadraticFunctional(SymmetricOperator(np.eye(2)), GAUSS, require_zero_diagonal=True)


def test_negative_moment_deterministic():
    a = SymmetricOperator([[0.0, 0.3], [0.3, 0.1]])
    batch = sample_batch(GAUSS, 2, 40, seed=25)
    mats = hessian_main_term(QuadraticFunctional(a, GAUSS), batch)
    est = remainder_negative_moment(mats, 1, 0.25)
    tr = 4.0 * 2 * 0.3**2  # frobenius^2 of the doubled off-diagonal part
    assert est.value == pytest.approx(tr**-0.25, rel=1e-12)
    assert est.floor_fraction == 0.0
    # gaussian law: remainders are sample-constant
    remainders = [spectral_remainders(m, 1, "set")[0] for m in mats]
    assert np.ptp(remainders) == 0.0


def test_negative_moment_floor_flagging():
    ops = [SymmetricOperator(np.diag([2.0**-300, 2.0**-300])), SymmetricOperator(np.eye(2))]
    est = remainder_negative_moment(ops, 2, 0.25)
    assert est.floor_fraction == pytest.approx(0.5)
    with pytest.raises(ValueError, match="infinite"):
        remainder_negative_moment([SymmetricOperator(np.diag([2.0**-300, 2.0**-300]))], 2, 0.25)


def test_finite_difference_validation_rejects_wrong_gradient():
    bad = VectorSmoothMap(
        "bad",
        lambda x: np.asarray(x, float)[..., 0] ** 2,
        lambda x: np.ones_like(np.asarray(x, float)),  # wrong gradient
        lambda x: np.zeros(np.asarray(x, float).shape[:-1] + (1, 1)),
    )
    with pytest.raises(ValueError, match="finite differences"):
        CylinderFunctional(1, bad, GAUSS)
    # the honest version passes
    CylinderFunctional(1, coordinate_square_map(0, 1), GAUSS)
