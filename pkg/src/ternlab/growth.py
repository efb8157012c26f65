"""Growth certificates from grid statistics.

Three executable procedures over cell-sampled fields on integer-cornered
squares:

* goodness bookkeeping: a unit square is good when its share of the zero set
  has area >= gamma and its max is >= 1; beta(Q) is the per-area density of
  good squares, kept as an exact rational (counts over integer areas).
* a disk-chain certificate: walk maximizers of M_u(j) = max{u : |z| <= j}
  outward in steps of an integer disk radius p; on steps whose disk traps a
  zero-rich unit square the max must grow by the factor (1 - gamma/(pi p^2))^-1,
  and a greedy non-overlapping subchain multiplies the measured factors into
  a certified lower bound on log growth.
* a three-case square subdivision selection: repeatedly descend from side
  k^k to side 1 through k^2-fold subdivisions, choosing a subsquare by case
  rules that either raise beta by (1 + B/(2k)) or keep it above (1 - 1/k) of
  the parent, with exact rational beta accounting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import ndimage

from .errors import (
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
from .geometry import Square


@dataclass
class GridField:
    """Cell-centered samples of a real field over a square."""

    square: Square
    values: np.ndarray
    log_domain: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ValidationError("values must be a square 2-D array")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def h(self) -> float:
        return float(self.square.side) / self.n

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        x0, _, y0, _ = (float(v) for v in self.square.rect())
        h = self.h
        xs = x0 + (np.arange(self.n) + 0.5) * h
        ys = y0 + (np.arange(self.n) + 0.5) * h
        return xs, ys

    def grid(self) -> np.ndarray:
        xs, ys = self.axes()
        return xs[None, :] + 1j * ys[:, None]

    @classmethod
    def from_function(cls, square: Square, n: int, fn: Callable[[np.ndarray], np.ndarray], log_domain: bool = False) -> "GridField":
        f = cls(square, np.zeros((n, n)), log_domain)
        f.values = np.asarray(fn(f.grid()), dtype=float)
        return f


def _integer_layout(field: GridField) -> tuple[int, int, int]:
    """Side length and integer corner of the field square; rejects squares
    without integer-valued corners."""
    x0, x1, y0, y1 = field.square.rect()
    for v in (x0, x1, y0, y1):
        if v.denominator != 1:
            raise NonIntegerSquare(f"square corner {v} is not an integer")
    if x1 - x0 != y1 - y0:
        raise NonIntegerSquare("square sides disagree")  # pragma: no cover
    return int(x1 - x0), int(x0), int(y0)


@dataclass
class GoodnessField:
    """Per-unit-square statistics: zero-set area, max, goodness flags, and
    the exact density beta = (good count)/area."""

    gamma: float
    L: int
    origin: tuple[int, int]
    zero_area: np.ndarray
    max_value: np.ndarray
    good: np.ndarray
    beta: Fraction

    @classmethod
    def from_good_matrix(cls, good: np.ndarray, gamma: float = 0.5) -> "GoodnessField":
        good = np.asarray(good, dtype=bool)
        if good.ndim != 2 or good.shape[0] != good.shape[1]:
            raise ValidationError("good matrix must be square")
        L = good.shape[0]
        count = int(good.sum())
        return cls(
            gamma=gamma,
            L=L,
            origin=(0, 0),
            zero_area=np.where(good, 1.0, 0.0),
            max_value=np.where(good, 1.0, 0.0),
            good=good,
            beta=Fraction(count, L * L),
        )


def goodness_stats(field: GridField, gamma: float, zero_tol: float = 0.0) -> GoodnessField:
    """Classify every integer-aligned unit square of the field's square."""
    if not 0 < gamma < 1:
        raise ValidationError("gamma must lie in (0,1)")
    L, gx0, gy0 = _integer_layout(field)
    xs, ys = field.axes()
    ix = np.clip(np.floor(xs - gx0).astype(int), 0, L - 1)
    iy = np.clip(np.floor(ys - gy0).astype(int), 0, L - 1)
    flat = iy[:, None] * L + ix[None, :]
    zero = field.values <= zero_tol
    h2 = field.h * field.h
    zero_area = np.bincount(flat.ravel(), weights=zero.ravel().astype(float), minlength=L * L) * h2
    maxv = np.full(L * L, -np.inf)
    np.maximum.at(maxv, flat.ravel(), field.values.ravel())
    zero_area = zero_area.reshape(L, L)
    maxv = maxv.reshape(L, L)
    good = (zero_area >= gamma) & (maxv >= 1.0)
    return GoodnessField(
        gamma=gamma,
        L=L,
        origin=(gx0, gy0),
        zero_area=zero_area,
        max_value=maxv,
        good=good,
        beta=Fraction(int(good.sum()), L * L),
    )


# ---------------------------------------------------------------------------
# disk-chain certificate
# ---------------------------------------------------------------------------


@dataclass
class AdiChain:
    L: int
    N: int
    p: int
    gamma: float
    alpha: float
    q: float
    exceptional_count: int
    points: list[complex]
    M: np.ndarray
    normal: list[bool]
    factors: list[float]
    eqmax_ok: list[bool]
    chain: list[int]
    certified_log_growth: float
    bound_log: float


def _disk_maxima(field: GridField, N: int) -> tuple[np.ndarray, list[complex]]:
    """M[j] = max over cells with |center| <= j, and the maximizer per j,
    ties broken by smallest angle then row-major index."""
    Z = field.grid()
    dist = np.abs(Z)
    M = np.zeros(N + 1)
    pts: list[complex] = [0j]
    vals = field.values
    for j in range(1, N + 1):
        m = dist <= j
        sel = vals[m]
        best = float(sel.max())
        M[j] = best
        cand = np.flatnonzero(m.ravel() & (vals.ravel() == best))
        zf = Z.ravel()[cand]
        order = np.lexsort((cand, np.angle(zf)))
        pts.append(complex(zf[order[0]]))
    return M, pts


def _contains_nonexceptional(zj: complex, p: int, exceptional: np.ndarray, gx0: int, gy0: int) -> bool:
    L = exceptional.shape[0]
    cx, cy = zj.real, zj.imag
    ax0 = max(gx0, int(math.floor(cx - p)) - 1)
    ax1 = min(gx0 + L - 1, int(math.ceil(cx + p)))
    ay0 = max(gy0, int(math.floor(cy - p)) - 1)
    ay1 = min(gy0 + L - 1, int(math.ceil(cy + p)))
    for gy in range(ay0, ay1 + 1):
        for gx in range(ax0, ax1 + 1):
            if exceptional[gy - gy0, gx - gx0]:
                continue
            corners = ((gx, gy), (gx + 1, gy), (gx, gy + 1), (gx + 1, gy + 1))
            if all((x - cx) ** 2 + (y - cy) ** 2 <= p * p for x, y in corners):
                return True
    return False


def adi_certify(field: GridField, gamma: float, alpha: float, p: int, zero_tol: float = 0.0, rtol: float = 1e-3) -> AdiChain:
    """Disk-chain growth certificate.

    Hypothesis: at most alpha*L unit squares have zero-set share below gamma.
    An index j is normal when the disk of radius p around the measured
    maximizer of M(j) contains (entirely) some non-exceptional unit square;
    there M(j+p) must exceed (1 - gamma/(pi p^2))^-1 M(j).  The certificate
    multiplies measured factors along a greedy subchain with steps >= p.
    """
    if not isinstance(p, (int, np.integer)) or p < 2:
        raise ValidationError("p must be an integer >= 2")
    if not 0 < gamma < 1:
        raise ValidationError("gamma must lie in (0,1)")
    if math.pi * p * p <= gamma:
        raise ValidationError("need pi p^2 > gamma")
    L, gx0, gy0 = _integer_layout(field)
    if field.square.cx != 0 or field.square.cy != 0:
        raise NonIntegerSquare("disk chain needs a square centered at the origin")
    if field.h > p / 4:
        raise GridTooCoarse(f"spacing {field.h:.4g} exceeds p/4 = {p / 4}")

    stats_zero = goodness_stats(field, gamma, zero_tol)
    exceptional = ~(stats_zero.zero_area >= gamma)
    exc_count = int(exceptional.sum())
    if exc_count > alpha * L:
        raise HypothesisFailed(f"{exc_count} exceptional unit squares exceed alpha*L = {alpha * L:.6g}")

    N = L // 2
    if N - p < 1:
        raise ValidationError("square too small for the chosen p")
    M, pts = _disk_maxima(field, N)
    q = 1.0 / (1.0 - gamma / (math.pi * p * p))

    normal, factors, eqmax_ok = [], [], []
    for j in range(1, N - p + 1):
        is_n = _contains_nonexceptional(pts[j], p, exceptional, gx0, gy0)
        normal.append(is_n)
        f = math.inf if M[j] == 0 else M[j + p] / M[j]
        factors.append(f)
        if not is_n:
            eqmax_ok.append(True)
        elif M[j] == 0:
            eqmax_ok.append(M[j + p] >= 0.0)  # additive-safe: q*0 = 0
        else:
            eqmax_ok.append(M[j + p] >= q * M[j] * (1.0 - rtol))

    chain: list[int] = []
    certified = 0.0
    last = -10 * p
    for j in range(1, N - p + 1):
        if normal[j - 1] and M[j] > 0 and j >= last + p:
            chain.append(j)
            certified += math.log(M[j + p] / M[j])
            last = j
    return AdiChain(
        L=L,
        N=N,
        p=p,
        gamma=gamma,
        alpha=alpha,
        q=q,
        exceptional_count=exc_count,
        points=pts,
        M=M,
        normal=normal,
        factors=factors,
        eqmax_ok=eqmax_ok,
        chain=chain,
        certified_log_growth=certified,
        bound_log=len(chain) * math.log(q),
    )


def mean_value_step(field: GridField, z0: complex, p: float, zero_tol: float = 0.0, rtol: float = 1e-3) -> dict:
    """One mean-value growth step: measure the zero-set share of the disk
    D(z0, p) and check max over the disk >= (1 - share/(pi p^2))^-1 u(z0)."""
    Z = field.grid()
    dist = np.abs(Z - z0)
    m = dist <= p
    if not m.any():
        raise DiskOutOfRange("disk contains no grid cells")
    x0, x1, y0, y1 = (float(v) for v in field.square.rect())
    if z0.real - p < x0 or z0.real + p > x1 or z0.imag - p < y0 or z0.imag + p > y1:
        raise DiskOutOfRange("disk leaves the field square")
    h2 = field.h**2
    zero_area = float(np.count_nonzero(field.values[m] <= zero_tol)) * h2
    disk_area = math.pi * p * p
    max_disk = float(field.values[m].max())
    idx = int(np.argmin(dist))
    u0 = float(field.values.ravel()[idx])
    factor = 1.0 / (1.0 - min(zero_area, 0.99 * disk_area) / disk_area)
    return {
        "zero_area": zero_area,
        "max_disk": max_disk,
        "value_at_center": u0,
        "factor_bound": factor,
        "holds": max_disk >= factor * u0 * (1.0 - rtol),
    }


# ---------------------------------------------------------------------------
# sub-mean-value checks
# ---------------------------------------------------------------------------


def _disk_footprint(r: float, h: float) -> np.ndarray:
    k = int(math.floor(r / h))
    oy, ox = np.mgrid[-k : k + 1, -k : k + 1]
    return (ox * ox + oy * oy) * (h * h) <= r * r


def submean_check(field: GridField, z: complex, r: float, tol: float | None = None) -> dict:
    """Compare u(z) against the count-mean of u over grid cells within r.

    defect = mean - u(z) (absolute); defect_rel normalizes by the max
    magnitude over the disk; holds iff defect_rel >= -tol (default 10 h^2).
    """
    h = field.h
    if r < 2 * h:
        raise ValidationError("radius must be at least two cells")
    fp = _disk_footprint(r, h)
    k = fp.shape[0] // 2
    xs, ys = field.axes()
    ix = int(np.argmin(np.abs(xs - z.real)))
    iy = int(np.argmin(np.abs(ys - z.imag)))
    if ix - k < 0 or iy - k < 0 or ix + k >= field.n or iy + k >= field.n:
        raise DiskOutOfRange("disk leaves the sampled square")
    patch = field.values[iy - k : iy + k + 1, ix - k : ix + k + 1]
    sel = patch[fp]
    mean = float(sel.mean())
    u0 = float(field.values[iy, ix])
    defect = mean - u0
    scale = max(float(np.abs(sel).max()), 1e-300)
    defect_rel = defect / scale
    if tol is None:
        tol = 10.0 * h * h
    return {"holds": defect_rel >= -tol, "defect": defect, "defect_rel": defect_rel, "tol": tol}


def submean_sweep(field: GridField, r: float, tol: float | None = None) -> dict:
    """Vectorized sub-mean-value check at every admissible grid point (disk
    fully inside the square).  Returns the pass fraction and the measured
    defect constant C = max(0, -min defect_rel)/h^2."""
    h = field.h
    if r < 2 * h:
        raise ValidationError("radius must be at least two cells")
    fp = _disk_footprint(r, h)
    k = fp.shape[0] // 2
    if 2 * k + 1 > field.n:
        raise DiskOutOfRange("disk larger than the sampled square")
    if tol is None:
        tol = 10.0 * h * h
    cnt = int(fp.sum())
    sums = ndimage.convolve(field.values, fp.astype(float), mode="constant")
    means = sums / cnt
    scale = ndimage.maximum_filter(np.abs(field.values), footprint=fp, mode="constant")
    interior = (slice(k, field.n - k), slice(k, field.n - k))
    defect = means[interior] - field.values[interior]
    rel = defect / np.maximum(scale[interior], 1e-300)
    holds = rel >= -tol
    worst = float(rel.min())
    return {
        "fraction_holds": float(np.mean(holds)),
        "checked": int(holds.size),
        "measured_C": max(0.0, -worst) / (h * h),
        "worst_defect_rel": worst,
        "tol": tol,
    }


# ---------------------------------------------------------------------------
# three-case subdivision selection
# ---------------------------------------------------------------------------


@dataclass
class SelectionChain:
    k: int
    L: int
    B: int
    theta: Fraction
    restricted: bool
    origins: list[tuple[int, int]]
    sides: list[int]
    betas: list[Fraction]
    cases: list[int] = dc_field(default_factory=list)

    @property
    def case3_count(self) -> int:
        return sum(1 for c in self.cases if c == 3)

    @property
    def beta_floats(self) -> list[float]:
        return [float(b) for b in self.betas]


def default_B(beta0: Fraction, k: int) -> int:
    """Smallest integer B >= 2 forcing at least k/2 third-case steps: if
    more than half the steps raised beta by (1 + B/(2k)), beta would leave
    [0, 1]."""
    if beta0 <= 0:
        raise ZeroBeta("beta must be positive")
    m = k // 2 + 1
    B = 2
    while beta0 * (1 + Fraction(B, 2 * k)) ** m * (1 - Fraction(1, k)) ** (k - m) <= 1:
        B += 1
    return B


def levsasha_select(goodness: GoodnessField, B: int | None = None, theta: Fraction | None = None) -> SelectionChain:
    """Descend from the k^k square to a unit square through k subdivision
    steps, selecting per the three-case rules; beta bookkeeping is exact."""
    L = goodness.L
    k = 1
    while (k + 1) ** (k + 1) <= L:
        k += 1
    if k < 2:
        raise ValidationError("square too small: need side >= 4")
    side0 = k**k

    good = goodness.good
    # prefix sums for O(1) rectangle counts
    ps = np.zeros((L + 1, L + 1), dtype=np.int64)
    ps[1:, 1:] = np.cumsum(np.cumsum(good.astype(np.int64), axis=0), axis=1)

    def count(x, y, s):
        return int(ps[y + s, x + s] - ps[y, x + s] - ps[y + s, x] + ps[y, x])

    restricted = side0 < L
    ox, oy = 0, 0
    if restricted:
        best = -1
        for yy in range(L - side0 + 1):
            for xx in range(L - side0 + 1):
                c = count(xx, yy, side0)
                if c > best:
                    best, ox, oy = c, xx, yy
    c0 = count(ox, oy, side0)
    if c0 == 0:
        raise ZeroBeta("no good unit squares in the selected region")
    beta0 = Fraction(c0, side0 * side0)

    if B is None:
        B = default_B(beta0, k)
    if theta is None:
        theta = Fraction(1, 4 * B)
    theta = Fraction(theta)
    if B * theta >= Fraction(1, 2):
        raise ConstraintViolation(f"B*theta = {float(B * theta):.3g} must be < 1/2")
    if not 0 < theta < 1:
        raise ConstraintViolation("theta must lie in (0,1)")

    chain = SelectionChain(
        k=k, L=L, B=B, theta=theta, restricted=restricted,
        origins=[(ox, oy)], sides=[side0], betas=[beta0],
    )

    x, y, side, beta_prev = ox, oy, side0, beta0
    for _ in range(k):
        s = side // k
        subs = []
        total = 0
        for jy in range(k):
            for jx in range(k):
                c = count(x + jx * s, y + jy * s, s)
                total += c
                subs.append((jx, jy, c, Fraction(c, s * s)))
        assert total == count(x, y, side)  # exact beta bookkeeping identity

        half = beta_prev / 2
        low_count = sum(1 for _, _, _, b in subs if b < half)
        # containment of a subsquare in the theta-shrunk parent, exact
        inner = [
            t for t in subs
            if t[0] * s >= theta * side / 2 and (t[0] + 1) * s <= side - theta * side / 2
            and t[1] * s >= theta * side / 2 and (t[1] + 1) * s <= side - theta * side / 2
        ]
        decay = (1 - Fraction(1, k)) * beta_prev
        grow = (1 + Fraction(B, 2 * k)) * beta_prev

        if low_count >= B * k:
            case = 1
            pick = max(subs, key=lambda t: (t[3], -t[1], -t[0]))
            if pick[3] < grow:
                raise SelectionStranded(
                    f"case 1 fired but no subsquare reaches (1+B/2k)*beta = {float(grow):.4g}"
                )
        elif all(t[3] < decay for t in inner):
            case = 2
            pick = max(subs, key=lambda t: (t[3], -t[1], -t[0]))
            if pick[3] < grow:
                raise SelectionStranded(
                    f"case 2 fired but no subsquare reaches (1+B/2k)*beta = {float(grow):.4g}"
                )
        else:
            case = 3
            pool = [t for t in inner if t[3] >= decay]
            pick = max(pool, key=lambda t: (t[3], -t[1], -t[0]))

        x, y = x + pick[0] * s, y + pick[1] * s
        side, beta_prev = s, pick[3]
        chain.origins.append((x, y))
        chain.sides.append(side)
        chain.betas.append(beta_prev)
        chain.cases.append(case)

    assert all(b >= beta0 / 3 for b in chain.betas), "beta dropped below a third of its start"
    assert 2 * chain.case3_count >= k, "fewer than k/2 third-case steps"
    return chain


def lower_bound_report(chain: SelectionChain, adi_constant: float) -> dict:
    """Compose per-step disk-chain growth over the third-case steps and
    compare with the (log L / log log L)^2 form."""
    if len(chain.cases) != chain.k:
        raise IncompleteChain(f"chain has {len(chain.cases)} of {chain.k} steps")
    k = chain.k
    certified = chain.case3_count * adi_constant * k
    logL = k * math.log(k)
    ratio = logL / math.log(logL)
    return {
        "k": k,
        "case3_count": chain.case3_count,
        "certified_log_growth": certified,
        "paper_form_log": adi_constant * ratio * ratio,
        "k_vs_loglog_ratio": k / ratio,
    }
