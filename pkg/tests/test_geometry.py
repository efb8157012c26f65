"""Exact-arithmetic checks for the nested square layout.

Expected values below were computed by hand from the recursion
a_n = 3 a_{n-1} (1 + eps_n), d_n = a_{n-1} eps_n with eps_j = 3^-j and are
frozen as exact rationals.
"""
from fractions import Fraction

import pytest

from ternlab.errors import (
    DepthExceeded,
    Epsilon1TooLarge,
    RatioViolation,
    ValidationError,
)
from ternlab.geometry import (
    OMEGA,
    PointClass,
    Square,
    TernaryParams,
    TranslationIndex,
    box_minus_squares,
    build_params,
    classify_point,
    corridor_rects,
    level_area_exact,
    min_copy_gap_exact,
    relative_area,
    translate_center,
    translate_center_exact,
    union_area,
)

# frozen: geometric scales eps_j = 3^-j
A_EXPECT = [Fraction(1), Fraction(4), Fraction(40, 3), Fraction(1120, 27)]
D_EXPECT = [None, Fraction(1, 3), Fraction(4, 9), Fraction(40, 81)]


@pytest.fixture(scope="module")
def geo():
    return build_params("geometric", depth=6)


def test_geometric_scales_exact(geo):
    for n, a in enumerate(A_EXPECT):
        assert geo.a(n) == a
    for n in (1, 2, 3):
        assert geo.d(n) == D_EXPECT[n]
    assert geo.a_f[2] == pytest.approx(40 / 3, rel=0, abs=0)
    # d ratio oracle: 3 (1 + eps_n) eps_{n+1} / eps_n
    assert geo.d(2) / geo.d(1) == Fraction(4, 3)
    assert geo.d(3) / geo.d(2) == Fraction(10, 9)


def test_d_ratio_band_strict(geo):
    for n in range(1, geo.depth):
        r = geo.d(n + 1) / geo.d(n)
        assert Fraction(1) < r < Fraction(6)
    # equalities in the eps band are allowed and keep the d band strict
    p = TernaryParams([Fraction(1, 2), Fraction(1, 2), Fraction(1, 6)])
    assert p.d(2) / p.d(1) == Fraction(9, 2)
    assert p.d(3) / p.d(2) == Fraction(3, 2)


def test_parameter_validation():
    with pytest.raises(Epsilon1TooLarge):
        TernaryParams([Fraction(1)])
    with pytest.raises(RatioViolation):
        TernaryParams([Fraction(1, 4), Fraction(1, 2)])  # increases
    with pytest.raises(RatioViolation):
        TernaryParams([Fraction(1, 2), Fraction(1, 8)])  # drops below a third
    with pytest.raises(ValidationError):
        TernaryParams([])
    with pytest.raises(ValidationError):
        build_params("geometric")  # named mode needs a depth
    p = build_params("geometric", depth=2)
    with pytest.raises(DepthExceeded):
        p.a(3)
    with pytest.raises(DepthExceeded):
        p.d(0)


def test_thm1b_mode_valid():
    p = build_params("thm1b", depth=12)
    assert p.depth == 12
    assert 0 < p.eps_f[12] < p.eps_f[1] < 1


def test_translate_oracles(geo):
    # level 1, direction +1: a_0 (2 + 3 eps_1) = 3
    assert geo.w_exact(1, 1) == (Fraction(3), Fraction(0))
    assert geo.w(1, 1) == 3 + 0j
    # composite (+1 at level 1) + (+1 at level 2): 3 + 4 (2 + 1/3) = 37/3
    idx = TranslationIndex(0, 2, (1, 1))
    assert idx.encode() == 10
    assert TranslationIndex.decode(10, 0, 2) == idx
    assert translate_center_exact(geo, idx) == (Fraction(37, 3), Fraction(0))
    assert translate_center(geo, idx) == pytest.approx(37 / 3)


def test_index_roundtrip():
    for j in range(81):
        idx = TranslationIndex.decode(j, 0, 2)
        assert idx.encode() == j
    idx = TranslationIndex(2, 5, (8, 0, 3))
    assert TranslationIndex.decode(idx.encode(), 2, 5) == idx
    with pytest.raises(ValidationError):
        TranslationIndex(0, 1, (9,))
    with pytest.raises(ValidationError):
        TranslationIndex.decode(81, 0, 2)


def test_copies_touch_outer_boundary(geo):
    # a_{n-1} (3 + 3 eps_n) = a_n: outermost copy edges lie on the boundary
    for n in range(1, geo.depth + 1):
        for c in geo.copy_squares(n)[1:]:
            assert max(abs(c.cx), abs(c.cy)) + c.hs == geo.a(n)


def test_copy_gaps_exact(geo):
    # adjacent copies are separated by exactly 3 d_n, at every level
    for n in range(1, geo.depth + 1):
        assert min_copy_gap_exact(geo, n) == 3 * geo.d(n)


def test_level_area_exact(geo):
    # nine disjoint copies per level: area 4 * 9^n, proved by recursion
    for n in range(5):
        assert level_area_exact(geo, n) == 4 * Fraction(9) ** n


def test_copy_fraction_oracles(geo):
    # fraction of S_2 covered by the nine level-1 copies: 9 a_1^2 / a_2^2
    region = [c.rect() for c in geo.copy_squares(2)]
    assert relative_area(region, geo.square(2)) == Fraction(81, 100)
    # fraction covered by the 81 base copies: 81 a_0^2 / a_2^2
    rects = []
    for j in range(81):
        wx, wy = translate_center_exact(geo, TranslationIndex.decode(j, 0, 2))
        rects.append(Square(-wx, -wy, Fraction(1)).rect())
    assert union_area(rects) == Fraction(81) * 4
    assert relative_area(rects, geo.square(2)) == Fraction(729, 1600)


def test_classify_point(geo):
    pc = classify_point(geo, 1.5, 1)
    assert pc == PointClass("corridor", level=1)
    # the gap persists at deeper levels
    assert classify_point(geo, 1.5 + 0j, 2) == PointClass("corridor", level=1)
    pc = classify_point(geo, 0j, 2)
    assert pc.kind == "copy" and pc.index.digits == (0, 0)
    # center of the composite copy indexed (1, 1)
    wx, wy = translate_center_exact(geo, TranslationIndex(0, 2, (1, 1)))
    pc = classify_point(geo, (-wx, -wy), 2)
    assert pc.kind == "copy" and pc.index.digits == (1, 1)
    # base-square coordinates recover via z + w
    assert float(-wx + wx) == 0.0
    # frame of width 3 d_n around S_n is corridor at the top level
    x_frame = geo.a(2) + geo.d(2)
    assert classify_point(geo, (x_frame, 0), 2) == PointClass("corridor", level=2)
    beyond = geo.a(2) + 3 * geo.d(2) + Fraction(1, 1000)
    assert classify_point(geo, (beyond, 0), 2) == PointClass("outside")


def test_classify_point_boundary_is_copy(geo):
    # copies are closed: the touching point on the outer boundary counts in
    pc = classify_point(geo, (geo.a(1), 0), 1)
    assert pc.kind == "copy" and pc.index.digits == (2,)


def test_square_inflate_deflate_roundtrip():
    s = Square(Fraction(1, 3), Fraction(-2, 7), Fraction(5, 4))
    assert s.inflate(Fraction(1, 10)).deflate(Fraction(1, 10)) == s
    assert s.inflate(0.1).deflate(0.1) == s  # floats convert exactly
    with pytest.raises(ValidationError):
        s.deflate(Fraction(5, 4))
    assert s.dist_linf(10, 0) == Fraction(10) - Fraction(1, 3) - Fraction(5, 4)
    assert s.dist_linf(Fraction(1, 3), 0) == 0


def test_union_area_overlap():
    r1 = (Fraction(0), Fraction(2), Fraction(0), Fraction(2))
    r2 = (Fraction(1), Fraction(3), Fraction(1), Fraction(3))
    assert union_area([r1, r2]) == Fraction(7)
    assert union_area([]) == 0
    assert union_area([r1, r1]) == Fraction(4)


def test_box_minus_squares_basic():
    box = Square(Fraction(0), Fraction(0), Fraction(2))
    hole = Square(Fraction(0), Fraction(0), Fraction(1))
    parts = box_minus_squares(box, [hole])
    assert union_area(parts) == Fraction(12)
    for x0, x1, y0, y1 in parts:
        # no remaining rectangle meets the open hole
        assert x1 <= -1 or x0 >= 1 or y1 <= -1 or y0 >= 1


def test_corridor_area_exact(geo):
    # A(K_n) = (2 (a_n + 3 d_n))^2 - 9 (2 a_{n-1})^2
    for n in (1, 2, 3):
        expect = (2 * (geo.a(n) + 3 * geo.d(n))) ** 2 - 9 * (2 * geo.a(n - 1)) ** 2
        assert union_area(corridor_rects(geo, n)) == expect
    # deflated corridor: shrink the frame, inflate the holes
    eta = geo.d(2) / 2
    expect = (2 * (geo.a(2) + 3 * geo.d(2) - eta)) ** 2 - 9 * (2 * (geo.a(1) + eta)) ** 2
    assert union_area(corridor_rects(geo, 2, eta)) == expect
    with pytest.raises(ValidationError):
        corridor_rects(geo, 2, 2 * geo.d(2))


def test_fatness_profile(geo):
    sums = geo.fatness_partial_sums()
    assert sums[-1] < 0.5  # geometric scales sum below 1/2
    # relative area of the level set inside S_n decreases but stays bounded
    fracs = [Fraction(9) ** n / geo.a(n) ** 2 for n in range(geo.depth + 1)]
    assert all(f1 > f2 for f1, f2 in zip(fracs, fracs[1:]))
    assert fracs[-1] > Fraction(9, 25)


def test_omega_ordering():
    assert OMEGA[0] == 0
    assert OMEGA[1] == 1 and OMEGA[2] == -1
    assert OMEGA[3] == 1j and OMEGA[4] == -1j
    assert len(set(OMEGA)) == 9
