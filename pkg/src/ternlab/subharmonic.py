"""Glued subharmonic envelopes over a ternary square system.

Two scales drive the construction: a majorant ladder
log M(n) = B n + pi sum_{j<=n} 1/eps_j (doubly exponential in linear form, so
always handled in log domain) and, per level, an eight-strip envelope v_n
assembled from the subharmonic block h(z) = cosh x cos y restricted to the
horizontal strip |y| < pi/2.  The hull u_n glues majorant-scaled copies of
v_n with translated copies of u_{n-1} over the inflated level squares.

Evaluation accepts an exact rational shift carried separately from the float
coordinates.  The recursion adds translate offsets to the shift, never to the
coordinate array, so evaluating u_n at grid + (-w_j) replays the u_{n-1}
recursion on the same floats bit for bit.  Inside an inflated copy the
envelope is rewritten in terms of the distance to the copy itself, which
makes it vanish exactly on the closed copy; the naive strip formula there
multiplies cos(nearly pi/2) rounding noise by a potentially astronomical
cosh and would poison the glued maximum.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, NamedTuple

import numpy as np

from .errors import (
    DepthExceeded,
    Overflow,
    QuadratureFailure,
    ValidationError,
)
from .geometry import RatPair, TernaryParams, corridor_rects

_LOG2 = math.log(2.0)
_LOG3 = math.log(3.0)
_EXP_MAX = math.log(sys.float_info.max)  # ~709.78
ZERO_SHIFT = (Fraction(0), Fraction(0))


def _normalize(z) -> tuple[np.ndarray, bool]:
    arr = np.asarray(z, dtype=complex)
    if arr.ndim == 0:
        return arr.reshape(1), True
    return arr, False


def _exp_checked(log_values, message: str):
    if np.isscalar(log_values) or np.asarray(log_values).ndim == 0:
        if log_values > _EXP_MAX:
            raise Overflow(message)
        return math.exp(float(log_values))
    arr = np.asarray(log_values, dtype=float)
    if np.any(arr > _EXP_MAX):
        raise Overflow(message)
    return np.exp(arr)


def h_eval(z):
    """cosh x * cos y on the open strip |y| < pi/2, zero elsewhere."""
    arr, scalar = _normalize(z)
    x, y = arr.real, arr.imag
    out = np.zeros(arr.shape)
    m = np.abs(y) < math.pi / 2
    out[m] = np.cosh(x[m]) * np.cos(y[m])
    return float(out[0]) if scalar else out


class MajorantTable:
    """log M(n) = B n + pi sum_{j<=n} 1/eps_j and the increments
    delta_n = exp(-M(n-1)/10), all in log domain.

    log delta_n = -exp(log M(n-1))/10 is itself a float; once log M(n-1)
    passes the exp range it is stored as -inf and flagged.
    """

    def __init__(self, params: TernaryParams, B):
        if B < 0:
            raise ValidationError("majorant slope B must be >= 0")
        self.params = params
        self.B = float(B)
        inv_sum = Fraction(0)
        logm = [0.0]
        for n in range(1, params.depth + 1):
            inv_sum += 1 / params.eps(n)
            logm.append(self.B * n + math.pi * float(inv_sum))
        self._logM = logm
        self._logdelta: list[float] = [math.nan]
        self._dunder = [False]
        for n in range(1, params.depth + 1):
            m = logm[n - 1]
            if m > _EXP_MAX:
                self._logdelta.append(-math.inf)
                self._dunder.append(True)
            else:
                self._logdelta.append(-math.exp(m) / 10.0)
                self._dunder.append(False)

    def logM(self, n: int) -> float:
        self.params._check_level(n)
        return self._logM[n]

    def logdelta(self, n: int) -> float:
        self.params._check_level(n, lo=1)
        return self._logdelta[n]

    def delta_underflow(self, n: int) -> bool:
        self.params._check_level(n, lo=1)
        return self._dunder[n]

    def M(self, n: int) -> float:
        lm = self.logM(n)
        if lm > _EXP_MAX:
            raise Overflow(f"M({n}) exceeds float range, use logM")
        return math.exp(lm)

    def delta(self, n: int) -> float:
        return math.exp(self.logdelta(n))  # underflows to 0.0 deep in the ladder


@dataclass(frozen=True)
class VEnvelope:
    """Per-level strip geometry: midline offset xi_n = a_{n-1} + (3/2) d_n,
    strip half-width (3/2) d_n, scale factor s = pi/(3 d_n)."""

    level: int
    d: Fraction
    xi: Fraction
    a_prev: Fraction
    w_exact: tuple[RatPair, ...]
    s: float
    xi_f: float
    xi3_f: float
    a_prev_f: float
    mask_half_f: float  # a_{n-1} + d_n/2: the inflated-copy radius

    @classmethod
    def from_params(cls, params: TernaryParams, n: int) -> "VEnvelope":
        d = params.d(n)
        a_prev = params.a(n - 1)
        xi = a_prev + Fraction(3, 2) * d
        w = tuple(params.w_exact(j, n) for j in range(9))
        return cls(
            level=n,
            d=d,
            xi=xi,
            a_prev=a_prev,
            w_exact=w,
            s=math.pi / (3.0 * float(d)),
            xi_f=float(xi),
            xi3_f=float(3 * xi),
            a_prev_f=float(a_prev),
            mask_half_f=float(a_prev + d / 2),
        )


def _logcosh(t: np.ndarray) -> np.ndarray:
    at = np.abs(t)
    return at + np.log1p(np.exp(-2.0 * at)) - _LOG2


def _v_global_log(env: VEnvelope, xg: np.ndarray, yg: np.ndarray) -> np.ndarray:
    """Eight-strip envelope, log domain: horizontal and vertical strips with
    midlines at +-xi_n and +-3 xi_n."""
    out = np.full(xg.shape, -np.inf)
    half = math.pi / 2
    for c in (env.xi_f, -env.xi_f, env.xi3_f, -env.xi3_f):
        t = (yg - c) * env.s
        m = np.abs(t) < half
        if m.any():
            val = _logcosh(xg[m] * env.s) + np.log(np.cos(t[m]))
            out[m] = np.maximum(out[m], val)
        t = (xg - c) * env.s
        m = np.abs(t) < half
        if m.any():
            val = _logcosh(yg[m] * env.s) + np.log(np.cos(t[m]))
            out[m] = np.maximum(out[m], val)
    return out


def _v_local_log(env: VEnvelope, X: np.ndarray, Y: np.ndarray, xg: np.ndarray, yg: np.ndarray) -> np.ndarray:
    """Envelope near one copy, rewritten through the per-axis distance to the
    copy: cos(s*(offset from midline)) = sin(s * distance-to-copy), exactly
    zero on the closed copy.  X, Y are coordinates relative to the copy
    center; xg, yg are global coordinates (the strip runs globally)."""
    out = np.full(X.shape, -np.inf)
    dx = np.abs(X) - env.a_prev_f
    dy = np.abs(Y) - env.a_prev_f
    m = dx > 0
    if m.any():
        out[m] = np.log(np.sin(env.s * dx[m])) + _logcosh(yg[m] * env.s)
    m = dy > 0
    if m.any():
        val = np.log(np.sin(env.s * dy[m])) + _logcosh(xg[m] * env.s)
        out[m] = np.maximum(out[m], val)
    return out


class SubharmonicEvaluator:
    """Pointwise evaluator for the glued hulls u_n, deterministic and pure.

    u_0 = 1/3; on each inflated copy of level n, u_n is the max of the scaled
    envelope M(n-1) v_n and the translated u_{n-1}; elsewhere it equals the
    scaled envelope.
    """

    def __init__(self, params: TernaryParams, majorants: MajorantTable | None = None, B=20.0):
        self.params = params
        self.majorants = majorants if majorants is not None else MajorantTable(params, B)
        if self.majorants.params is not params:
            raise ValidationError("majorant table was built for different parameters")
        self._env = {n: VEnvelope.from_params(params, n) for n in range(1, params.depth + 1)}

    def envelope(self, n: int) -> VEnvelope:
        self.params._check_level(n, lo=1)
        return self._env[n]

    # -- envelope -----------------------------------------------------------

    def v_log(self, n, z, shift: tuple[Fraction, Fraction] = ZERO_SHIFT):
        env = self.envelope(n)
        arr, scalar = _normalize(z)
        sx, sy = shift
        xg = arr.real + float(sx)
        yg = arr.imag + float(sy)
        out = _v_global_log(env, xg, yg)
        for wx, wy in env.w_exact:
            rx, ry = sx + wx, sy + wy
            X = arr.real + float(rx)
            Y = arr.imag + float(ry)
            m = (np.abs(X) <= env.mask_half_f) & (np.abs(Y) <= env.mask_half_f)
            if m.any():
                out[m] = _v_local_log(env, X[m], Y[m], xg[m], yg[m])
        return float(out[0]) if scalar else out

    def v(self, n, z, shift=ZERO_SHIFT):
        lv = self.v_log(n, z, shift)
        return _exp_checked(lv, "envelope exceeds float range, use v_log")

    # -- glued hull ----------------------------------------------------------

    def u_log(self, n, z, shift: tuple[Fraction, Fraction] = ZERO_SHIFT):
        self.params._check_level(n)
        arr, scalar = _normalize(z)
        out = self._u_rec(n, arr, shift[0], shift[1])
        return float(out[0]) if scalar else out

    def _u_rec(self, n: int, arr: np.ndarray, sx: Fraction, sy: Fraction) -> np.ndarray:
        if n == 0:
            return np.full(arr.shape, -_LOG3)
        env = self._env[n]
        logm_prev = self.majorants.logM(n - 1)
        xg = arr.real + float(sx)
        yg = arr.imag + float(sy)
        out = logm_prev + _v_global_log(env, xg, yg)
        for wx, wy in env.w_exact:
            rx, ry = sx + wx, sy + wy
            X = arr.real + float(rx)
            Y = arr.imag + float(ry)
            m = (np.abs(X) <= env.mask_half_f) & (np.abs(Y) <= env.mask_half_f)
            if m.any():
                vloc = logm_prev + _v_local_log(env, X[m], Y[m], xg[m], yg[m])
                sub = self._u_rec(n - 1, arr[m], rx, ry)
                out[m] = np.maximum(vloc, sub)
        return out

    def u(self, n, z, shift=ZERO_SHIFT):
        lu = self.u_log(n, z, shift)
        return _exp_checked(lu, "hull value exceeds float range, use u_log")


# -- spec-level operation wrappers -------------------------------------------


def v_eval(params: TernaryParams, n: int, z, log_domain: bool = False):
    """Envelope v_n without a majorant table attached."""
    params._check_level(n, lo=1)
    env = VEnvelope.from_params(params, n)
    arr, scalar = _normalize(z)
    xg, yg = arr.real.copy(), arr.imag.copy()
    out = _v_global_log(env, xg, yg)
    for wx, wy in env.w_exact:
        X = arr.real + float(wx)
        Y = arr.imag + float(wy)
        m = (np.abs(X) <= env.mask_half_f) & (np.abs(Y) <= env.mask_half_f)
        if m.any():
            out[m] = _v_local_log(env, X[m], Y[m], xg[m], yg[m])
    if not log_domain:
        if np.any(out > _EXP_MAX):
            raise Overflow("envelope exceeds float range, use log_domain=True")
        out = np.exp(out)
    return float(out[0]) if scalar else out


def u_eval(evaluator: SubharmonicEvaluator, n: int, z, log_domain: bool = False):
    return evaluator.u_log(n, z) if log_domain else evaluator.u(n, z)


# -- grids over the deflated corridor ----------------------------------------


def corridor_grid(params: TernaryParams, n: int, deflation, resolution: int, placement: str = "centers") -> np.ndarray:
    """Sample points covering the corridor region deflated by `deflation`,
    taken rect-by-rect from the exact decomposition.  "centers" puts points
    strictly inside each rectangle; "nodes" includes rectangle boundaries
    with odd per-axis counts, so midlines and extreme offsets are hit
    exactly."""
    if placement not in ("centers", "nodes"):
        raise ValidationError("placement must be 'centers' or 'nodes'")
    defl = deflation if isinstance(deflation, Fraction) else Fraction(deflation)
    rects = corridor_rects(params, n, defl)
    extent = 2.0 * float(params.a(n) + 3 * params.d(n) - defl)
    h = extent / resolution
    pts = []
    for x0, x1, y0, y1 in rects:
        wx, wy = float(x1 - x0), float(y1 - y0)
        fx0, fy0 = float(x0), float(y0)
        if placement == "centers":
            nx = max(1, math.ceil(wx / h))
            ny = max(1, math.ceil(wy / h))
            xs = fx0 + (np.arange(nx) + 0.5) * (wx / nx)
            ys = fy0 + (np.arange(ny) + 0.5) * (wy / ny)
        else:
            nx = max(3, math.ceil(wx / h) + 1)
            ny = max(3, math.ceil(wy / h) + 1)
            nx += 1 - nx % 2
            ny += 1 - ny % 2
            xs = np.linspace(fx0, float(x1), nx)
            ys = np.linspace(fy0, float(y1), ny)
        pts.append((xs[None, :] + 1j * ys[:, None]).ravel())
    return np.concatenate(pts)


def corridor_envelope_min(params: TernaryParams, n: int, resolution: int = 512) -> dict:
    """Sampled min of v_n over the corridor deflated by d_n/2, with the
    predicted minimizers (offset d_n from a midline, centered along the
    strip) evaluated directly."""
    d = params.d(n)
    pts = corridor_grid(params, n, d / 2, resolution, placement="nodes")
    vals = v_eval(params, n, pts)
    i = int(np.argmin(vals))
    xi = params.a(n - 1) + Fraction(3, 2) * d
    predicted = [
        complex(float(xi + d), 0.0),
        complex(float(xi - d), 0.0),
        complex(0.0, float(xi + d)),
        complex(float(3 * xi + d), 0.0),
    ]
    pred_vals = [float(v_eval(params, n, p)) for p in predicted]
    return {
        "level": n,
        "min_value": float(vals[i]),
        "argmin": (float(pts[i].real), float(pts[i].imag)),
        "predicted_points": [(p.real, p.imag) for p in predicted],
        "predicted_values": pred_vals,
        "samples": int(vals.size),
    }


# -- verification -------------------------------------------------------------


def _square_grid(half: float, resolution: int) -> np.ndarray:
    ax = np.linspace(-half, half, resolution)
    return ax[None, :] + 1j * ax[:, None]


def _square_boundary(half: float, resolution: int) -> np.ndarray:
    ax = np.linspace(-half, half, resolution)
    return np.concatenate([
        ax + 1j * half, ax - 1j * half, half + 1j * ax, -half + 1j * ax,
    ])


def verify_sh(evaluator: SubharmonicEvaluator, n: int, grid_resolution: int = 256) -> dict:
    """Check the three hull properties at level n on grids.

    (i) each translate of u_n restricted to the base square reproduces
    u_{n-1}: max relative deviation over all 9 translates;
    (ii) max of u_n over the level square inflated by d_{n+1} stays below
    exp(-B+10) M(n), log-domain margin;
    (iii) min of u_n over the corridor deflated by d_n/2 stays above
    (1/2) M(n-1), log-domain margin, sampled at interior cell centers.

    Also reports the gluing margin: on the boundary of the inflated base
    square, the translated-hull branch must sit strictly below the scaled
    envelope branch.
    """
    if grid_resolution < 64:
        raise ValidationError("grid_resolution must be at least 64")
    params = evaluator.params
    params._check_level(n, lo=1)
    if n + 1 > params.depth:
        raise DepthExceeded(f"level {n} check needs depth >= {n + 1} (inflation by d_{n + 1})")
    table = evaluator.majorants

    # (i): exact-shift evaluation replays the base recursion
    grid_prev = _square_grid(float(params.a(n - 1)), grid_resolution)
    base = evaluator.u_log(n - 1, grid_prev)
    prop_i = 0.0
    for j in range(9):
        wx, wy = params.w_exact(j, n)
        shifted = evaluator.u_log(n, grid_prev, shift=(-wx, -wy))
        prop_i = max(prop_i, float(np.max(np.abs(np.expm1(shifted - base)))))

    # (ii)
    grid_out = _square_grid(float(params.a(n) + params.d(n + 1)), grid_resolution)
    measured_ii = float(np.max(evaluator.u_log(n, grid_out)))
    bound_ii = table.logM(n) - table.B + 10.0
    # (iii)
    pts = corridor_grid(params, n, params.d(n) / 2, grid_resolution, placement="centers")
    measured_iii = float(np.min(evaluator.u_log(n, pts)))
    bound_iii = math.log(0.5) + table.logM(n - 1)

    # gluing claim on the boundary of the inflated base square
    bpts = _square_boundary(float(params.a(n - 1) + params.d(n) / 2), grid_resolution)
    glue = (table.logM(n - 1) + float(np.min(evaluator.v_log(n, bpts)))) - float(
        np.max(evaluator.u_log(n - 1, bpts))
    )

    return {
        "level": n,
        "grid": grid_resolution,
        "B": table.B,
        "prop_i_maxdiff": prop_i,
        "prop_ii_margin_log": bound_ii - measured_ii,
        "prop_ii_measured_log": measured_ii,
        "prop_iii_margin_log": measured_iii - bound_iii,
        "prop_iii_measured_log": measured_iii,
        "glue_margin_log": glue,
    }


# -- radially averaged loglog integral ----------------------------------------


class LogLogEstimate(NamedTuple):
    value: float
    error: float

    def __float__(self):
        return self.value


def loglog_integral(
    field: Callable[[np.ndarray], np.ndarray],
    R: float,
    eps: float,
    n_r: int = 256,
    n_t: int = 512,
    rtol: float | None = None,
    field_is_log: bool = False,
) -> LogLogEstimate:
    """Disk average (1/A(R D)) integral of (log_+ field)^(1+eps) by polar
    midpoint quadrature; the error estimate compares against the half
    resolution value.  Pass field_is_log=True when the handle returns
    log(field), for fields beyond float range."""
    if R <= 0:
        raise ValidationError("R must be positive")
    if eps <= 0:
        raise ValidationError("eps must be positive")

    def estimate(nr: int, nt: int) -> float:
        r = (np.arange(nr) + 0.5) * (R / nr)
        th = (np.arange(nt) + 0.5) * (2 * math.pi / nt)
        Z = r[:, None] * np.exp(1j * th)[None, :]
        vals = np.asarray(field(Z), dtype=float)
        if field_is_log:
            logu = vals
        else:
            with np.errstate(divide="ignore"):
                logu = np.log(np.clip(vals, 0.0, None))
        integrand = np.clip(logu, 0.0, None) ** (1.0 + eps)
        radial = integrand.sum(axis=1) * r
        total = radial.sum() * (R / nr) * (2 * math.pi / nt)
        return total / (math.pi * R * R)

    v_full = float(estimate(n_r, n_t))
    v_half = float(estimate(max(2, n_r // 2), max(4, n_t // 2)))
    err = abs(v_full - v_half) / 3.0
    if rtol is not None and err > rtol * max(abs(v_full), 1e-300):
        raise QuadratureFailure(
            f"estimated error {err:.3g} exceeds rtol*value at the configured budget"
        )
    return LogLogEstimate(v_full, err)
