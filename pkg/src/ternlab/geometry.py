"""Ternary square systems.

A system is driven by a scale sequence eps_1 > eps_2 > ... with eps_1 < 1 and
eps_n/3 <= eps_{n+1} <= eps_n.  Side lengths follow a_0 = 1,
a_n = 3 a_{n-1} (1 + eps_n), gaps are d_n = a_{n-1} eps_n, and level n is
assembled from nine translated copies of level n-1 separated by corridors of
width exactly 3 d_n.

All derived quantities are kept as exact rationals (binary floats convert to
Fraction losslessly), so containment, disjointness and area statements below
are exact, not approximate.  Float mirrors are provided for numeric code.

Translation conventions, used consistently everywhere:
  for sets       tau_w X = {z - w : z in X}   (copy j sits at center -w_j)
  for functions  (tau_w F)(z) = F(z + w)
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import DepthExceeded, Epsilon1TooLarge, RatioViolation, ValidationError

# The nine translation directions; index 0 is the identity so that an all-zero
# digit string encodes "no displacement".
OMEGA = (0 + 0j, 1 + 0j, -1 + 0j, 1j, -1j, 1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j)
OMEGA_EXACT = ((0, 0), (1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1))

RatPair = tuple[Fraction, Fraction]


def _frac(x) -> Fraction:
    """Exact conversion; binary floats are dyadic rationals, so nothing is lost."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValidationError(f"non-finite coordinate {x!r}")
        return Fraction(x)
    raise ValidationError(f"cannot convert {type(x).__name__} to an exact rational")


@dataclass(frozen=True)
class Square:
    """Closed axis-parallel square, center (cx, cy), half side hs; exact fields."""

    cx: Fraction
    cy: Fraction
    hs: Fraction

    def __post_init__(self):
        object.__setattr__(self, "cx", _frac(self.cx))
        object.__setattr__(self, "cy", _frac(self.cy))
        object.__setattr__(self, "hs", _frac(self.hs))
        if self.hs <= 0:
            raise ValidationError("square half side must be positive")

    @property
    def center(self) -> complex:
        return complex(float(self.cx), float(self.cy))

    @property
    def half_side(self) -> float:
        return float(self.hs)

    @property
    def side(self) -> Fraction:
        return 2 * self.hs

    def area(self) -> Fraction:
        return self.side * self.side

    def inflate(self, eta) -> "Square":
        eta = _frac(eta)
        if self.hs + eta <= 0:
            raise ValidationError("inflation would collapse the square")
        return Square(self.cx, self.cy, self.hs + eta)

    def deflate(self, eta) -> "Square":
        return self.inflate(-_frac(eta))

    def contains(self, x, y) -> bool:
        """Closed containment, exact."""
        x, y = _frac(x), _frac(y)
        return abs(x - self.cx) <= self.hs and abs(y - self.cy) <= self.hs

    def rect(self) -> tuple[Fraction, Fraction, Fraction, Fraction]:
        return (self.cx - self.hs, self.cx + self.hs, self.cy - self.hs, self.cy + self.hs)

    def dist_linf(self, x, y) -> Fraction:
        """Exact sup-norm distance from (x, y) to this (solid) square."""
        x, y = _frac(x), _frac(y)
        dx = abs(x - self.cx) - self.hs
        dy = abs(y - self.cy) - self.hs
        d = max(dx, dy)
        return d if d > 0 else Fraction(0)


@dataclass(frozen=True)
class TranslationIndex:
    """Composite translate w_j(k, n) = w_{j_1}(k+1) + ... + w_{j_{n-k}}(n).

    digits[l-1] is the direction used at level k+l; the packed integer form is
    sum_l digits[l-1] * 9**(l-1).
    """

    k: int
    n: int
    digits: tuple[int, ...]

    def __post_init__(self):
        if self.k < 0 or self.n < self.k:
            raise ValidationError("need 0 <= k <= n")
        if len(self.digits) != self.n - self.k:
            raise ValidationError("digit count must equal n - k")
        if any(not (0 <= j <= 8) for j in self.digits):
            raise ValidationError("digits must lie in 0..8")

    def encode(self) -> int:
        j = 0
        for l, dig in enumerate(self.digits):
            j += dig * 9**l
        return j

    @classmethod
    def decode(cls, j: int, k: int, n: int) -> "TranslationIndex":
        if not 0 <= j < 9 ** (n - k):
            raise ValidationError(f"packed index {j} out of range for levels {k}..{n}")
        digits = []
        for _ in range(n - k):
            digits.append(j % 9)
            j //= 9
        return cls(k, n, tuple(digits))


class TernaryParams:
    """Scale sequence plus all derived side lengths and gaps, exact."""

    def __init__(self, epsilon: Sequence[Fraction], mode: str = "explicit"):
        eps = [_frac(e) for e in epsilon]
        if not eps:
            raise ValidationError("need at least one scale parameter")
        if any(e <= 0 for e in eps):
            raise ValidationError("scale parameters must be positive")
        if eps[0] >= 1:
            raise Epsilon1TooLarge(f"eps_1 = {float(eps[0]):.6g} must be < 1")
        for i in range(1, len(eps)):
            r = eps[i] / eps[i - 1]
            if not (Fraction(1, 3) <= r <= 1):
                raise RatioViolation(
                    f"eps_{i + 1}/eps_{i} = {float(r):.6g} outside [1/3, 1]"
                )
        self.mode = mode
        self.depth = len(eps)
        self._eps = [None] + eps  # 1-based
        a = [Fraction(1)]
        d: list[Fraction | None] = [None]
        for n in range(1, self.depth + 1):
            d.append(a[n - 1] * eps[n - 1])
            a.append(3 * a[n - 1] * (1 + eps[n - 1]))
        self._a = a
        self._d = d
        # guaranteed by the ratio band, asserted exactly anyway
        for n in range(1, self.depth):
            r = self._d[n + 1] / self._d[n]
            if not (1 < r < 6):
                raise RatioViolation(f"d_{n + 1}/d_{n} = {float(r):.6g} outside (1, 6)")
        self.eps_f = np.array([math.nan] + [float(e) for e in eps])
        self.a_f = np.array([float(x) for x in a])
        self.d_f = np.array([math.nan] + [float(x) for x in d[1:]])

    def _check_level(self, n: int, lo: int = 0):
        if not lo <= n <= self.depth:
            raise DepthExceeded(f"level {n} outside {lo}..{self.depth}")

    def eps(self, n: int) -> Fraction:
        self._check_level(n, lo=1)
        return self._eps[n]

    def a(self, n: int) -> Fraction:
        self._check_level(n)
        return self._a[n]

    def d(self, n: int) -> Fraction:
        self._check_level(n, lo=1)
        return self._d[n]

    def square(self, n: int) -> Square:
        """S_n = [-a_n, a_n]^2."""
        return Square(Fraction(0), Fraction(0), self.a(n))

    def step_exact(self, n: int) -> Fraction:
        """Magnitude a_{n-1} (2 + 3 eps_n) of the level n side translates."""
        self._check_level(n, lo=1)
        return self._a[n - 1] * (2 + 3 * self._eps[n])

    def w_exact(self, j: int, n: int) -> RatPair:
        """Level n translate w_j(n) = a_{n-1} (2 + 3 eps_n) omega_j, exact."""
        if not 0 <= j <= 8:
            raise ValidationError("direction index must lie in 0..8")
        s = self.step_exact(n)
        ox, oy = OMEGA_EXACT[j]
        return (s * ox, s * oy)

    def w(self, j: int, n: int) -> complex:
        wx, wy = self.w_exact(j, n)
        return complex(float(wx), float(wy))

    def copy_squares(self, n: int) -> list[Square]:
        """The nine level n copies of S_{n-1}; copy j is centered at -w_j(n)."""
        self._check_level(n, lo=1)
        out = []
        for j in range(9):
            wx, wy = self.w_exact(j, n)
            out.append(Square(-wx, -wy, self._a[n - 1]))
        return out

    def fatness_partial_sums(self) -> np.ndarray:
        """Partial sums of eps_n; bounded iff the limit set has positive area."""
        return np.cumsum(self.eps_f[1:])


def build_params(spec, depth: int | None = None) -> TernaryParams:
    """Construct parameters from a named mode or an explicit sequence.

    spec is "geometric" (eps_j = 3^-j), "thm1b" (eps_j = 1/((j+10) ln^3(j+10)),
    natural log), or an iterable of values.  depth is required for named modes.
    """
    if isinstance(spec, str):
        if depth is None or depth < 1:
            raise ValidationError("named modes need a positive depth")
        if spec == "geometric":
            eps = [Fraction(1, 3**j) for j in range(1, depth + 1)]
        elif spec == "thm1b":
            eps = [_frac(1.0 / ((j + 10) * math.log(j + 10) ** 3)) for j in range(1, depth + 1)]
        else:
            raise ValidationError(f"unknown mode {spec!r}")
        return TernaryParams(eps, mode=spec)
    eps = list(spec)
    if depth is not None and depth != len(eps):
        raise ValidationError("depth disagrees with the explicit sequence length")
    return TernaryParams(eps, mode="explicit")


def translate_center_exact(params: TernaryParams, idx: TranslationIndex) -> RatPair:
    """Exact center of the composite translate w_j(k, n)."""
    if idx.n > params.depth:
        raise DepthExceeded(f"index reaches level {idx.n} beyond depth {params.depth}")
    wx, wy = Fraction(0), Fraction(0)
    for l, dig in enumerate(idx.digits):
        px, py = params.w_exact(dig, idx.k + l + 1)
        wx += px
        wy += py
    return wx, wy


def translate_center(params: TernaryParams, idx: TranslationIndex) -> complex:
    wx, wy = translate_center_exact(params, idx)
    return complex(float(wx), float(wy))


@dataclass(frozen=True)
class PointClass:
    """Outcome of classify_point: kind is "copy", "corridor" or "outside"."""

    kind: str
    level: int | None = None
    index: TranslationIndex | None = None


def classify_point(params: TernaryParams, z, n: int) -> PointClass:
    """Locate z in the level n decomposition, exactly.

    The plane splits into the exterior of S_n^{+3 d_n}, the corridors, and the
    nine copies of level n-1, recursively down to level 0.  A corridor answer
    carries the level m at which the point fell between copies (in the local
    coordinates of the copy chain walked so far).  Copies are closed, and the
    corridor gaps are open between them, so the classification is unambiguous.
    """
    params._check_level(n)
    if isinstance(z, complex):
        x, y = _frac(z.real), _frac(z.imag)
    elif isinstance(z, (tuple, list)):
        x, y = _frac(z[0]), _frac(z[1])
    else:
        x, y = _frac(z), Fraction(0)
    if max(abs(x), abs(y)) > params.a(n) + (3 * params.d(n) if n >= 1 else 0):
        return PointClass("outside")
    digits_rev: list[int] = []
    for m in range(n, 0, -1):
        hit = None
        for j in range(9):
            wx, wy = params.w_exact(j, m)
            if abs(x + wx) <= params.a(m - 1) and abs(y + wy) <= params.a(m - 1):
                hit = j
                break
        if hit is None:
            return PointClass("corridor", level=m)
        wx, wy = params.w_exact(hit, m)
        x, y = x + wx, y + wy
        digits_rev.append(hit)
    return PointClass("copy", level=0, index=TranslationIndex(0, n, tuple(reversed(digits_rev))))


# ---------------------------------------------------------------------------
# exact rectangle-union arithmetic
# ---------------------------------------------------------------------------

Rect = tuple[Fraction, Fraction, Fraction, Fraction]  # (x0, x1, y0, y1)


def _as_rect(r) -> Rect:
    x0, x1, y0, y1 = (_frac(v) for v in r)
    if x1 < x0 or y1 < y0:
        raise ValidationError("rectangle has negative extent")
    return (x0, x1, y0, y1)


def _merge_intervals(iv: list[tuple[Fraction, Fraction]]) -> Fraction:
    """Total length of a union of closed intervals."""
    if not iv:
        return Fraction(0)
    iv.sort()
    total = Fraction(0)
    lo, hi = iv[0]
    for a, b in iv[1:]:
        if a > hi:
            total += hi - lo
            lo, hi = a, b
        elif b > hi:
            hi = b
    total += hi - lo
    return total


def union_area(rects: Iterable) -> Fraction:
    """Exact area of a union of axis-parallel rectangles (coordinate sweep)."""
    rs = [_as_rect(r) for r in rects]
    rs = [r for r in rs if r[0] < r[1] and r[2] < r[3]]
    if not rs:
        return Fraction(0)
    xs = sorted({r[0] for r in rs} | {r[1] for r in rs})
    total = Fraction(0)
    for x0, x1 in zip(xs, xs[1:]):
        cover = [(r[2], r[3]) for r in rs if r[0] <= x0 and r[1] >= x1]
        total += (x1 - x0) * _merge_intervals(cover)
    return total


def clip_rect(r: Rect, s: Square) -> Rect | None:
    x0, x1, y0, y1 = r
    bx0, bx1, by0, by1 = s.rect()
    cx0, cx1 = max(x0, bx0), min(x1, bx1)
    cy0, cy1 = max(y0, by0), min(y1, by1)
    if cx0 >= cx1 or cy0 >= cy1:
        return None
    return (cx0, cx1, cy0, cy1)


def relative_area(region: Iterable, square: Square) -> Fraction:
    """Exact A(region ∩ square) / A(square) for a rectangle-union region."""
    clipped = []
    for r in region:
        c = clip_rect(_as_rect(r), square)
        if c is not None:
            clipped.append(c)
    return union_area(clipped) / square.area()


def box_minus_squares(box: Square, holes: Sequence[Square]) -> list[Rect]:
    """Exact rectangle decomposition of box minus a union of squares.

    Coordinate compression: every hole edge becomes a cut, so within each
    x-slab each hole either spans the slab or misses it, and the uncovered
    part is a plain interval complement.
    """
    bx0, bx1, by0, by1 = box.rect()
    xs = {bx0, bx1}
    for h in holes:
        hx0, hx1, _, _ = h.rect()
        if hx1 > bx0 and hx0 < bx1:
            xs.add(max(hx0, bx0))
            xs.add(min(hx1, bx1))
    cuts = sorted(xs)
    out: list[Rect] = []
    for x0, x1 in zip(cuts, cuts[1:]):
        if x0 >= x1:
            continue
        cover = []
        for h in holes:
            hx0, hx1, hy0, hy1 = h.rect()
            if hx0 <= x0 and hx1 >= x1 and hy1 > by0 and hy0 < by1:
                cover.append((max(hy0, by0), min(hy1, by1)))
        cover.sort()
        y = by0
        for a, b in cover:
            if a > y:
                out.append((x0, x1, y, a))
            y = max(y, b)
        if y < by1:
            out.append((x0, x1, y, by1))
    return out


def corridor_rects(params: TernaryParams, n: int, deflation=Fraction(0)) -> list[Rect]:
    """Exact rectangles covering K_n^{-eta}: the level n corridor region
    S_n^{+3 d_n - eta} minus the nine copies inflated by eta."""
    eta = _frac(deflation)
    d = params.d(n)
    if not 0 <= eta < Fraction(3, 2) * d:
        raise ValidationError("deflation must lie in [0, 3 d_n / 2)")
    box = params.square(n).inflate(3 * d - eta)
    holes = [c.inflate(eta) for c in params.copy_squares(n)] if eta else params.copy_squares(n)
    return box_minus_squares(box, holes)


def level_area_exact(params: TernaryParams, n: int) -> Fraction:
    """Exact area of the level n set: nine disjoint copies of level n-1.

    Disjointness of the nine copies is verified exactly at every level (the
    gap between adjacent copies is 3 d_n > 0), so the recursion
    A(E_n) = 9 A(E_{n-1}) is a theorem of the checked layout, giving 4 * 9^n.
    """
    params._check_level(n)
    area = Fraction(4)
    for m in range(1, n + 1):
        copies = params.copy_squares(m)
        s = union_area([c.rect() for c in copies])
        if s != 9 * (2 * params.a(m - 1)) ** 2:
            raise ValidationError(f"level {m} copies overlap")  # pragma: no cover
        area *= 9
    return area


def min_copy_gap_exact(params: TernaryParams, n: int) -> Fraction:
    """Exact minimum sup-norm gap between distinct level n copies."""
    copies = params.copy_squares(n)
    best: Fraction | None = None
    for i in range(9):
        for j in range(i + 1, 9):
            a, b = copies[i], copies[j]
            gx = abs(a.cx - b.cx) - a.hs - b.hs
            gy = abs(a.cy - b.cy) - a.hs - b.hs
            g = max(gx, gy)
            best = g if best is None else min(best, g)
    assert best is not None
    return best
