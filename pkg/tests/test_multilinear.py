import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qfcert.laws import DirichletVariable
from qfcert.logdomain import LogScalar
from qfcert.multilinear import (
    MultilinearPolynomial,
    evaluate,
    load_polynomial,
    log_concave_exponent,
    partial_influence_poly,
    smallball_estimate,
    theta_recursion,
)
from qfcert.rngstreams import stream

from oracles import naive_poly_eval


def poly(n, *terms):
    return MultilinearPolynomial.from_terms(n, terms)


def test_evaluate_examples():
    p = poly(2, ((0, 1), 1.0))
    assert evaluate(p, [2.0, 3.0]) == pytest.approx(6.0)
    p = poly(1, ((), 1.0), ((0,), 1.0))
    assert evaluate(p, [5.0]) == pytest.approx(6.0)


@st.composite
def random_poly_and_point(draw):
    n = draw(st.integers(1, 5))
    term_count = draw(st.integers(1, 6))
    terms = []
    for _ in range(term_count):
        size = draw(st.integers(0, n))
        indices = tuple(sorted(draw(st.permutations(range(n)))[:size]))
        coeff = draw(st.floats(-5, 5, allow_nan=False).filter(lambda c: c != 0))
        terms.append((indices, coeff))
    x = [draw(st.floats(-3, 3, allow_nan=False)) for _ in range(n)]
    return n, terms, x


@settings(max_examples=80, deadline=None)
@given(random_poly_and_point())
def test_evaluate_matches_naive(case):
    n, terms, x = case
    p = MultilinearPolynomial.from_terms(n, terms)
    merged = [(sorted(idx), c) for idx, c in p.coefficients.items()]
    assert evaluate(p, x) == pytest.approx(naive_poly_eval(merged, x), rel=1e-10, abs=1e-10)


def test_no_zero_coefficients_stored():
    p = poly(2, ((0,), 1.0), ((0,), -1.0), ((1,), 2.0))
    assert frozenset({1}) in p.coefficients and len(p.coefficients) == 1
    with pytest.raises(ValueError):
        MultilinearPolynomial(1, {frozenset(): 0.0})


def test_degree_and_variance_identity():
    p = poly(3, ((), 4.0), ((0, 2), 2.0), ((1,), -1.0))
    assert p.degree == 2
    assert p.variance_identity() == pytest.approx(5.0)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        evaluate(poly(3, ((2,), 1.0)), [1.0, 2.0])


def test_partial_influence_examples():
    p = poly(3, ((0, 1), 1.0), ((2,), 1.0))
    s, r = partial_influence_poly(p, 0)
    assert s.coefficients == {frozenset({1}): 1.0}
    assert r.coefficients == {frozenset({2}): 1.0}

    none = poly(3, ((1, 2), 1.0))
    s, _ = partial_influence_poly(none, 0)
    assert s.coefficients == {}


@settings(max_examples=50, deadline=None)
@given(random_poly_and_point())
def test_decomposition_identity(case):
    n, terms, x = case
    p = MultilinearPolynomial.from_terms(n, terms)
    for i in range(n):
        s, r = partial_influence_poly(p, i)
        lhs = evaluate(p, x)
        rhs = x[i] * evaluate(s, x) + evaluate(r, x)
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


def test_theta_examples():
    assert theta_recursion(1.0, 1).to_float() == pytest.approx(1.0)
    assert theta_recursion(1.0, 2).to_float() == pytest.approx(1.0 / 16)
    assert theta_recursion(1.0, 2, "closed_form").to_float() == pytest.approx(1.0 / 64)
    assert theta_recursion(LogScalar.from_log2(-20.0), 3).log2 == -22.0


def test_theta_modes_agree_on_small_theta():
    # once theta <= 1/16 and the 1/(8k) branch never binds, both modes halve
    theta = LogScalar.from_log2(-8.0)
    for d in (1, 2, 3):
        rec = theta_recursion(theta, d)
        if d == 1:
            continue  # the closed form disagrees at the base case by design
        closed = theta_recursion(theta, d, "closed_form")
        assert rec.log2 == pytest.approx(theta.log2 - (d - 1))
        assert closed.log2 == pytest.approx(theta.log2 - d)


def test_theta_monotone_decreasing():
    for mode in ("recursion", "closed_form"):
        values = [theta_recursion(0.7, d, mode).log2 for d in range(1, 12)]
        assert all(a > b for a, b in zip(values, values[1:]))


def test_theta_infinite_base():
    assert theta_recursion(LogScalar.infinite(), 2).to_float() == pytest.approx(1.0 / 16)


def test_log_concave_exponent():
    assert log_concave_exponent(4).to_float() == pytest.approx(0.25)


def test_json_round_trip(tmp_path):
    p = poly(3, ((0, 2), 1.5), ((), -2.0))
    path = tmp_path / "p.json"
    with open(path, "w") as fh:
        json.dump(p.to_json(), fh)
    assert load_polynomial(path).coefficients == pytest.approx(p.coefficients)


def test_smallball_gaussian_linear():
    p = poly(1, ((0,), 1.0))
    table = smallball_estimate(
        p, DirichletVariable.gaussian(), [0.1], 200_000, seed=4
    )
    expected = 2.0 * (0.5398278372770290 - 0.5)  # 2 Phi(0.1) - 1
    assert table.rows[0].p_hat == pytest.approx(expected, abs=4 * table.band)


def test_smallball_constant_polynomial():
    p = poly(1, ((), 3.0))
    table = smallball_estimate(p, DirichletVariable.gaussian(), [0.1, 0.01], 1000, seed=1)
    for row in table.rows:
        assert row.p_hat == 1.0
        assert row.center == pytest.approx(3.0)


def test_smallball_product_slope_one_sided():
    p = poly(2, ((0, 1), 1.0))
    table = smallball_estimate(
        p, DirichletVariable.gaussian(), [1e-1, 1e-2, 1e-3], 300_000, seed=6
    )
    theta_2 = theta_recursion(LogScalar.infinite(), 2).to_float()
    assert table.decay_slope() >= theta_2 - 0.1


def test_variance_identity_monte_carlo():
    p = poly(3, ((0,), 1.0), ((1, 2), 2.0), ((0, 1, 2), 0.5))
    g = stream(99, "var-check")
    x = g.standard_normal((400_000, 3))
    values = evaluate(p, x)
    expected = p.variance_identity()
    se = values.var() * math.sqrt(2.0 / values.size) * 5
    assert values.var() == pytest.approx(expected, abs=5 * se + 0.02)
