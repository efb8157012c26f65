"""Goodness statistics, disk-chain certificates, subdivision selection."""
import math
from fractions import Fraction

import numpy as np
import pytest

from ternlab.errors import (
    ConstraintViolation,
    DiskOutOfRange,
    GridTooCoarse,
    HypothesisFailed,
    IncompleteChain,
    NonIntegerSquare,
    SelectionStranded,
    ValidationError,
    ZeroBeta,
)
from ternlab.geometry import Square, build_params
from ternlab.growth import (
    AdiChain,
    GoodnessField,
    GridField,
    SelectionChain,
    adi_certify,
    default_B,
    goodness_stats,
    levsasha_select,
    lower_bound_report,
    mean_value_step,
    submean_check,
    submean_sweep,
)
from ternlab.subharmonic import SubharmonicEvaluator, u_eval


def logplus_abs(z):
    return np.maximum(np.log(np.maximum(np.abs(z), 1e-300)), 0.0)


@pytest.fixture(scope="module")
def logplus_field():
    return GridField.from_function(Square(0, 0, 8), 512, logplus_abs)


@pytest.fixture(scope="module")
def u2_field():
    params = build_params("geometric", depth=3)
    ev = SubharmonicEvaluator(params, B=3.0)
    f = GridField.from_function(Square(0, 0, 8), 512, lambda Z: u_eval(ev, 2, Z))
    f.values -= f.values.min()  # zero set = the exact minimum locus
    return f


# -- goodness ---------------------------------------------------------------


def test_goodness_constant_fields():
    ones = GridField(Square(0, 0, 2), np.ones((64, 64)))
    assert goodness_stats(ones, 0.5).beta == 0  # no zero set anywhere
    zeros = GridField(Square(0, 0, 2), np.zeros((64, 64)))
    assert goodness_stats(zeros, 0.5).beta == 0  # max never reaches 1


def test_goodness_striped_field():
    # left 13/32 of every unit square is 0, the rest is 2
    def fn(Z):
        frac = Z.real - np.floor(Z.real)
        return np.where(frac < 0.4, 0.0, 2.0)

    f = GridField.from_function(Square(2, 2, 2), 128, fn)
    g = goodness_stats(f, 0.4)
    assert g.L == 4
    assert g.beta == 1
    assert np.all(g.zero_area >= 0.4)
    assert np.all(g.max_value == 2.0)


def test_goodness_validation():
    f = GridField(Square(0, 0, 2), np.ones((16, 16)))
    with pytest.raises(ValidationError):
        goodness_stats(f, 1.5)
    f2 = GridField(Square(Fraction(1, 2), 0, 2), np.ones((16, 16)))
    with pytest.raises(NonIntegerSquare):
        goodness_stats(f2, 0.5)
    with pytest.raises(ValidationError):
        GridField(Square(0, 0, 2), np.ones((16, 8)))
    with pytest.raises(ValidationError):
        GoodnessField.from_good_matrix(np.ones((4, 6), dtype=bool))


# -- mean value step and disk chain ----------------------------------------


def test_mean_value_step_logplus(logplus_field):
    # zero disk |z|<=1 and D(3,2) are tangent: zero share is negligible
    r = mean_value_step(logplus_field, 3 + 0j, 2)
    assert r["holds"]
    assert r["zero_area"] < 0.01
    assert r["factor_bound"] < 1.01
    assert abs(r["value_at_center"] - math.log(3)) < 0.01
    assert abs(r["max_disk"] - math.log(5)) < 0.01
    with pytest.raises(DiskOutOfRange):
        mean_value_step(logplus_field, 7 + 0j, 2)


def test_adi_logplus_chain(logplus_field):
    chain = adi_certify(logplus_field, gamma=0.5, alpha=16, p=3)
    # only the four unit squares at the origin are zero-rich
    assert chain.exceptional_count == 252
    assert chain.N == 8
    assert all(chain.eqmax_ok)
    # M(1)=0 (log+ vanishes on the unit disk) so the chain starts at j=2
    assert chain.M[1] == 0.0
    assert chain.chain == [2]
    expected = math.log(chain.M[5] / chain.M[2])
    assert chain.certified_log_growth == pytest.approx(expected, rel=1e-15)
    assert chain.certified_log_growth >= chain.bound_log > 0


def test_adi_u2_chain(u2_field):
    chain = adi_certify(u2_field, gamma=0.5, alpha=13, p=3)
    # 96 unit squares overlap the flat minimum locus in area >= 1/2
    assert chain.exceptional_count == 256 - 96
    assert all(chain.eqmax_ok)
    assert len(chain.chain) >= 1
    assert chain.certified_log_growth >= chain.bound_log > 0
    # growth is genuinely super-linear along the chain
    assert chain.certified_log_growth > 1.0


def test_adi_validation(logplus_field):
    coarse = GridField.from_function(Square(0, 0, 8), 16, logplus_abs)
    with pytest.raises(GridTooCoarse):
        adi_certify(coarse, gamma=0.5, alpha=16, p=3)
    with pytest.raises(ValidationError):
        adi_certify(logplus_field, gamma=0.5, alpha=16, p=1)
    with pytest.raises(ValidationError):
        adi_certify(logplus_field, gamma=1.5, alpha=16, p=3)
    off = GridField.from_function(Square(1, 0, 8), 64, logplus_abs)
    with pytest.raises(NonIntegerSquare):
        adi_certify(off, gamma=0.5, alpha=16, p=3)


def test_adi_hypothesis_failed():
    f = GridField(Square(0, 0, 8), np.ones((64, 64)))
    with pytest.raises(HypothesisFailed):
        adi_certify(f, gamma=0.5, alpha=3, p=3)


# -- sub-mean-value ----------------------------------------------------------


def test_submean_quadratic_oracle():
    f = GridField.from_function(Square(0, 0, 2), 256, lambda Z: np.abs(Z) ** 2)
    r = submean_check(f, 0j, 1.0)
    assert r["holds"]
    assert abs(r["defect"] - 0.5) < 0.02  # disk mean of |z|^2 is r^2/2
    bad = GridField.from_function(Square(0, 0, 2), 256, lambda Z: -np.abs(Z) ** 2)
    rb = submean_check(bad, 0j, 1.0)
    assert not rb["holds"]
    assert abs(rb["defect"] + 0.5) < 0.02


def test_submean_harmonic_oracle():
    f = GridField.from_function(Square(0, 0, 2), 256, lambda Z: Z.real)
    r = submean_check(f, 0.3 + 0.2j, 0.5)
    assert abs(r["defect"]) < 1e-10
    s = submean_sweep(f, 10 * f.h)
    assert s["fraction_holds"] == 1.0
    assert s["measured_C"] < 1e-6


def test_submean_u1_sweep():
    params = build_params("geometric", depth=2)
    ev = SubharmonicEvaluator(params, B=3.0)
    sq = params.square(1).inflate(3 * params.d(1))
    f = GridField.from_function(sq, 256, lambda Z: u_eval(ev, 1, Z))
    s = submean_sweep(f, 5 * f.h)
    assert s["fraction_holds"] >= 0.999
    assert s["measured_C"] < 10


def test_submean_validation():
    f = GridField.from_function(Square(0, 0, 2), 64, lambda Z: Z.real)
    with pytest.raises(ValidationError):
        submean_check(f, 0j, f.h)
    with pytest.raises(DiskOutOfRange):
        submean_check(f, 1.9 + 0j, 0.5)
    with pytest.raises(DiskOutOfRange):
        submean_sweep(f, 3.0)


# -- subdivision selection ---------------------------------------------------


def test_default_B_oracle():
    assert default_B(Fraction(1, 2), 4) == 4
    assert default_B(Fraction(1), 4) == 2
    with pytest.raises(ZeroBeta):
        default_B(Fraction(0), 4)


def test_select_uniform_all_case3():
    g = GoodnessField.from_good_matrix(np.ones((256, 256), dtype=bool))
    chain = levsasha_select(g)
    assert chain.k == 4
    assert chain.sides == [256, 64, 16, 4, 1]
    assert chain.cases == [3, 3, 3, 3]
    assert all(b == 1 for b in chain.betas)
    assert not chain.restricted


def test_select_zero_beta():
    g = GoodnessField.from_good_matrix(np.zeros((256, 256), dtype=bool))
    with pytest.raises(ZeroBeta):
        levsasha_select(g)


def test_select_constraint_violation():
    g = GoodnessField.from_good_matrix(np.ones((256, 256), dtype=bool))
    with pytest.raises(ConstraintViolation):
        levsasha_select(g, B=4, theta=Fraction(1, 4))


def test_select_random_fields_guarantees():
    for seed in range(10):
        rng = np.random.Generator(np.random.Philox(seed))
        g = GoodnessField.from_good_matrix(rng.random((256, 256)) < 0.5)
        chain = levsasha_select(g)
        assert len(chain.cases) == chain.k == 4
        b0 = chain.betas[0]
        assert all(b >= b0 / 3 for b in chain.betas)
        assert chain.case3_count >= 2
        assert chain.sides[-1] == 1


def test_select_restricted_region():
    rng = np.random.Generator(np.random.Philox(1234))
    g = GoodnessField.from_good_matrix(rng.random((300, 300)) < 0.5)
    chain = levsasha_select(g)
    assert chain.restricted
    assert chain.k == 4
    assert chain.sides[0] == 256


def test_lower_bound_report():
    g = GoodnessField.from_good_matrix(np.ones((256, 256), dtype=bool))
    chain = levsasha_select(g)
    rep = lower_bound_report(chain, adi_constant=0.25)
    assert rep["certified_log_growth"] == pytest.approx(chain.case3_count * 0.25 * 4)
    assert rep["k"] == 4
    assert rep["certified_log_growth"] > 0
    broken = SelectionChain(
        k=4, L=256, B=2, theta=Fraction(1, 8), restricted=False,
        origins=[(0, 0)], sides=[256], betas=[Fraction(1)], cases=[3],
    )
    with pytest.raises(IncompleteChain):
        lower_bound_report(broken, adi_constant=0.25)
