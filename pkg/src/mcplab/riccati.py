"""Matrix Riccati machinery for the contraction analysis.

Everything here lives at the parameter level: a geodesic enters only through
two scalars and the fiber dimension,

    b = -(eps/2) * |horizontal speed|   (so b <= 0 for actual geodesics),
    c = (1/2) * <velocity, vertical field>,
    n = number of horizontal pairs (frame dimension is 2n + 1).

The moving-frame drift ``W`` and the curvature operator ``R`` along a
geodesic decompose into a 3x3 block (vertical direction, velocity direction,
its rotation) and a scalar multiple of the identity on the remaining 2n - 2
directions.  The distortion matrix A(t) solves the row-vector Jacobi system

    A'' + 2 A' W + A (W^2 + R) = 0,   A(0) = 0,  A'(0) = I,

and F = A^{-1} A' + W solves the Riccati equation

    F' = -R - F^2 - F W - W^T F.

The branch of interest blows up at time 1 (the contraction endpoint), so it
is integrated through its inverse G(t) = F(1 - t)^{-1}, which starts at 0 and
satisfies

    G' = -G R G - I - W G - G W^T.

Closed forms for F(1 - t) are expressed through the scaled cotangent

    k2hat(x) = (x cot x - 1) / x**2,

which is analytic at x = 0; this keeps small-|c| evaluation stable without
case splits.  All scalar helpers accept arrays and broadcast.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, OutOfRegimeError, SingularityError

# Grid-scan and root-polish defaults for conjugate-time detection.
CONJUGATE_SCAN_STEP = 1e-3
CONJUGATE_BISECT_TOL = 1e-12

# Below this |x| the scaled-cotangent helpers switch to truncated series.
# The direct expressions are accurate well below x = 1e-2; the series with
# terms through x^6 is accurate well above it, so the crossover is safe on
# both sides.
_SERIES_CUT = 5e-2


def _k2hat(x):
    """(x cot x - 1) / x**2, analytic at 0 with value -1/3."""
    x = np.asarray(x, dtype=float)
    x2 = x * x
    series = -(1.0 / 3.0) - x2 / 45.0 - 2.0 * x2 * x2 / 945.0 - x2 * x2 * x2 / 4725.0
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (x * np.cos(x) / np.sin(x) - 1.0) / x2
    return np.where(np.abs(x) <= _SERIES_CUT, series, direct)


def _xcot(x):
    """x cot x, analytic at 0 with value 1."""
    x = np.asarray(x, dtype=float)
    return 1.0 + x * x * _k2hat(x)


def _sinc(x):
    """sin x / x, analytic at 0 with value 1."""
    return np.sinc(np.asarray(x, dtype=float) / np.pi)


def _sxc(x):
    """(sin x - x cos x) / x**3, analytic at 0 with value 1/3."""
    x = np.asarray(x, dtype=float)
    x2 = x * x
    series = 1.0 / 3.0 - x2 / 30.0 + x2 * x2 / 840.0 - x2 * x2 * x2 / 45360.0
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (np.sin(x) - x * np.cos(x)) / (x2 * x)
    return np.where(np.abs(x) <= _SERIES_CUT, series, direct)


def _check_sin_regular(x, what="sin(c*t)"):
    """Raise if x is (numerically) a nonzero multiple of pi."""
    k = np.round(float(x) / np.pi)
    if k != 0 and abs(float(x) - k * np.pi) < 1e-12:
        raise SingularityError(what)


@dataclass(frozen=True)
class RiccatiParams:
    """Scalar data of one geodesic direction.

    b and c may carry either sign; every scalar output below is even under
    b -> -b and c -> -c separately (the matrices themselves transform by a
    diagonal sign conjugation, see build_blocks).
    """

    b: float
    c: float
    n: int = 1

    def __post_init__(self):
        if not (np.isfinite(self.b) and np.isfinite(self.c)):
            raise DomainError("b and c must be finite")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be an integer >= 1, got {self.n!r}")
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "n", int(self.n))


@dataclass(frozen=True)
class BlockMatrices:
    """Drift and curvature blocks along a geodesic.

    W1 is the 3x3 drift of the adapted frame (the remaining 2n - 2
    directions are parallel, so their drift block is zero).  R1 and R3 are
    the curvature blocks in the same splitting; R3 acts as a full
    (2n-2) x (2n-2) matrix.
    """

    W1: np.ndarray
    R1: np.ndarray
    R3: np.ndarray

    @property
    def dim(self) -> int:
        return 3 + self.R3.shape[0]

    def full_W(self) -> np.ndarray:
        W = np.zeros((self.dim, self.dim))
        W[:3, :3] = self.W1
        return W

    def full_R(self) -> np.ndarray:
        R = np.zeros((self.dim, self.dim))
        R[:3, :3] = self.R1
        R[3:, 3:] = self.R3
        return R


def build_blocks(params: RiccatiParams, rbar1=None, rbar3=None) -> BlockMatrices:
    """Assemble W and R blocks from (b, c, n) and optional ambient curvature.

    rbar1 (3x3) and rbar3 ((2n-2) x (2n-2)) are the curvature blocks of the
    ambient connection in the adapted frame; they default to zero, which is
    the exact value for the model group.  Both must be symmetric.

    Flipping the sign of b conjugates W1 and R1 by diag(-1, 1, 1); flipping
    c conjugates by diag(1, -1, 1).  Traces, determinants and eigenvalues
    are therefore even in each of b, c.
    """
    b, c, n = params.b, params.c, params.n
    m = 2 * n - 2
    if rbar1 is None:
        rbar1 = np.zeros((3, 3))
    if rbar3 is None:
        rbar3 = np.zeros((m, m))
    rbar1 = np.asarray(rbar1, dtype=float)
    rbar3 = np.asarray(rbar3, dtype=float)
    if rbar1.shape != (3, 3):
        raise DomainError(f"rbar1 must be 3x3, got {rbar1.shape}")
    if rbar3.shape != (m, m):
        raise DomainError(f"rbar3 must be {m}x{m} for n = {n}, got {rbar3.shape}")
    if np.max(np.abs(rbar1 - rbar1.T), initial=0.0) > 1e-9:
        raise DomainError("rbar1 must be symmetric")
    if np.max(np.abs(rbar3 - rbar3.T), initial=0.0) > 1e-9:
        raise DomainError("rbar3 must be symmetric")

    W1 = np.array([[0.0, 0.0, b], [0.0, 0.0, c], [-b, -c, 0.0]])
    R1 = rbar1 + np.array(
        [
            [b * b, b * c, 0.0],
            [b * c, c * c, 0.0],
            [0.0, 0.0, c * c - 3.0 * b * b],
        ]
    )
    R3 = rbar3 + c * c * np.eye(m)
    return BlockMatrices(W1=W1, R1=R1, R3=R3)


def riccati_rhs(F: np.ndarray, W: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Right-hand side -R - F^2 - FW - W^T F of the Riccati equation."""
    F = np.asarray(F, dtype=float)
    W = np.asarray(W, dtype=float)
    R = np.asarray(R, dtype=float)
    return -R - F @ F - F @ W - W.T @ F


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def _f1_pieces(b, c, t):
    """Entrywise closed form of F1(1 - t), scaled-cotangent version.

    With x = c t, k2h = k2hat(x) and k1h = b^2 t^2 k2h - 1 (which stays
    <= -1 for |x| < pi), the entries of F1(1 - t) are rational in these
    quantities; the raw expressions with K2 = x^2 k2h and K1 = c^2 k1h are
    algebraically identical but lose all accuracy as c -> 0.
    """
    x = c * t
    k2h = _k2hat(x)
    k1h = b * b * t * t * k2h - 1.0
    xc = 1.0 + x * x * k2h
    f00 = 1.0 / (t * k1h)
    # The (0,1) entry must be odd in c: flipping c conjugates the blocks by
    # diag(1,-1,1).  A c-even form here fails the ODE cross-check whenever
    # c != 1.
    f01 = b * c * t * k2h / k1h
    f02 = b ** 3 * t * t * k2h / k1h
    f11 = (1.0 + (c * c - b * b) * t * t * k2h) / (t * k1h)
    f12 = c * b * b * t * t * k2h / k1h
    f22 = t * b * b / k1h - xc / t
    return f00, f01, f02, f11, f12, f22, xc, k1h


def _trace_f1(b, c, t):
    f00, _, _, f11, _, f22, _, _ = _f1_pieces(b, c, t)
    return f00 + f11 + f22


def _trace_f3(c, t, n):
    return -(2 * n - 2) * _xcot(c * t) / t


def closed_forms(params: RiccatiParams, t: float):
    """Closed-form (F1(1 - t), per-direction F3(1 - t)) for zero ambient
    curvature.

    t is time-to-endpoint: the returned matrices are the blow-up-at-1
    Riccati branch evaluated at time 1 - t.  Requires 0 < t < 1 and
    c*t away from nonzero multiples of pi (SingularityError naming the
    offending factor otherwise; the factor "K1" can only vanish past the
    first such multiple).
    """
    if not (0.0 < t < 1.0):
        raise DomainError(f"t must lie in (0, 1), got {t!r}")
    b, c = params.b, params.c
    x = c * t
    _check_sin_regular(x)
    if abs(float(b * b * t * t * _k2hat(x) - 1.0)) < 1e-14:
        raise SingularityError("K1")
    f00, f01, f02, f11, f12, f22, xc, _ = (float(v) for v in _f1_pieces(b, c, t))
    F1 = np.array([[f00, f01, f02], [f01, f11, f12], [f02, f12, f22]])
    return F1, float(-xc / t)


def f3_tilde(params: RiccatiParams, t: float) -> float:
    """Comparison trace for the parallel block: the solution of

        f' = -(2n - 2) c^2 - f^2 / (2n - 2)

    with the same blow-down normalization, namely -(2n-2) c cot(c t).
    Returns 0.0 for n = 1 (the block is empty).
    """
    if not (0.0 < t < 1.0):
        raise DomainError(f"t must lie in (0, 1), got {t!r}")
    if params.n == 1:
        return 0.0
    _check_sin_regular(params.c * t)
    return float(_trace_f3(params.c, t, params.n))


@dataclass(frozen=True)
class TraceBounds:
    """Traces of both blocks at one (b, c, t) with the sharp-bound flags."""

    t: float
    tr_F1: float
    tr_F3: float
    f1_ok: bool
    f3_ok: bool

    @property
    def ok(self) -> bool:
        return self.f1_ok and self.f3_ok


def trace_bounds(params: RiccatiParams, t: float, tol: float = 1e-9) -> TraceBounds:
    """Evaluate tr F1(1 - t) and tr F3(1 - t) and check the model bounds

        t * tr F1(1 - t) >= -5,      t * tr F3(1 - t) >= -(2n - 2),

    within tol.  Requires |c| < pi (OutOfRegimeError otherwise: past that
    the blow-down branch hits a conjugate point before time 1) and
    0 < t <= 1.
    """
    if not (0.0 < t <= 1.0):
        raise DomainError(f"t must lie in (0, 1], got {t!r}")
    if abs(params.c) >= np.pi:
        raise OutOfRegimeError(
            f"trace bounds require |c| < pi, got c = {params.c!r}"
        )
    tr1 = float(_trace_f1(params.b, params.c, t))
    tr3 = float(_trace_f3(params.c, t, params.n))
    m = 2 * params.n - 2
    return TraceBounds(
        t=float(t),
        tr_F1=tr1,
        tr_F3=tr3,
        f1_ok=bool(t * tr1 >= -5.0 - tol),
        f3_ok=bool(t * tr3 >= -float(m) - tol),
    )


@dataclass
class TraceScanReport:
    """Grid minimum of t * tr F over (b, c, t), with the argmin."""

    n: int
    tol: float
    b_values: np.ndarray
    c_values: np.ndarray
    t_values: np.ndarray
    min_t_tr_F1: float
    argmin_F1: tuple
    min_t_tr_F3: float
    argmin_F3: tuple
    f1_ok: bool
    f3_ok: bool

    @property
    def ok(self) -> bool:
        return self.f1_ok and self.f3_ok

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "tol": self.tol,
            "b_range": [float(self.b_values.min()), float(self.b_values.max())],
            "c_range": [float(self.c_values.min()), float(self.c_values.max())],
            "t_range": [float(self.t_values.min()), float(self.t_values.max())],
            "grid_shape": [
                len(self.b_values),
                len(self.c_values),
                len(self.t_values),
            ],
            "min_t_tr_F1": self.min_t_tr_F1,
            "argmin_F1": {
                "b": self.argmin_F1[0],
                "c": self.argmin_F1[1],
                "t": self.argmin_F1[2],
            },
            "bound_F1": -5.0,
            "min_t_tr_F3": self.min_t_tr_F3,
            "argmin_F3": {
                "b": self.argmin_F3[0],
                "c": self.argmin_F3[1],
                "t": self.argmin_F3[2],
            },
            "bound_F3": -float(2 * self.n - 2),
            "f1_ok": self.f1_ok,
            "f3_ok": self.f3_ok,
            "ok": self.ok,
        }


def trace_scan(
    n: int,
    b_values,
    c_values,
    t_values,
    tol: float = 1e-9,
) -> TraceScanReport:
    """Vectorized minimum of t * tr F1(1 - t) and t * tr F3(1 - t) over a
    (b, c, t) grid.  c must stay inside (-pi, pi) and t inside (0, 1]."""
    b_values = np.atleast_1d(np.asarray(b_values, dtype=float))
    c_values = np.atleast_1d(np.asarray(c_values, dtype=float))
    t_values = np.atleast_1d(np.asarray(t_values, dtype=float))
    if np.max(np.abs(c_values)) >= np.pi:
        raise OutOfRegimeError("c grid must stay inside (-pi, pi)")
    if np.min(t_values) <= 0.0 or np.max(t_values) > 1.0:
        raise DomainError("t grid must stay inside (0, 1]")
    if n < 1:
        raise DomainError("n must be >= 1")

    b = b_values[:, None, None]
    c = c_values[None, :, None]
    t = t_values[None, None, :]
    q1 = t * _trace_f1(b, c, t)
    q3 = t * _trace_f3(c, t, n) * np.ones_like(b)

    i1 = np.unravel_index(int(np.argmin(q1)), q1.shape)
    i3 = np.unravel_index(int(np.argmin(q3)), q3.shape)
    min1 = float(q1[i1])
    min3 = float(q3[i3])
    m = 2 * n - 2
    return TraceScanReport(
        n=n,
        tol=tol,
        b_values=b_values,
        c_values=c_values,
        t_values=t_values,
        min_t_tr_F1=min1,
        argmin_F1=(
            float(b_values[i1[0]]),
            float(c_values[i1[1]]),
            float(t_values[i1[2]]),
        ),
        min_t_tr_F3=min3,
        argmin_F3=(
            float(b_values[i3[0]]),
            float(c_values[i3[1]]),
            float(t_values[i3[2]]),
        ),
        f1_ok=bool(min1 >= -5.0 - tol),
        f3_ok=bool(min3 >= -float(m) - tol),
    )


# ---------------------------------------------------------------------------
# determinant factors of the distortion matrix
# ---------------------------------------------------------------------------

def det_block1(params: RiccatiParams, t):
    """Closed-form determinant of the 3x3 block of A(t):

        t^3 sinc(ct)^2 + b^2 t^5 sinc(ct) sxc(ct),

    which equals t^3 at c = 0 up to the factor (1 + b^2 t^2 / 3).  Accepts
    array t and broadcasts."""
    t = np.asarray(t, dtype=float)
    x = params.c * t
    s = _sinc(x)
    return t ** 3 * s * s + params.b ** 2 * t ** 5 * s * _sxc(x)


def det_block3(params: RiccatiParams, t):
    """Closed-form determinant (t sinc(ct))^{2n-2} of the parallel block."""
    t = np.asarray(t, dtype=float)
    return (t * _sinc(params.c * t)) ** (2 * params.n - 2)


def det_distortion(params: RiccatiParams, t):
    """det A(t) = det_block1 * det_block3; equals t^{2n+1} at b = c = 0."""
    return det_block1(params, t) * det_block3(params, t)


def distortion_factor_raw(params: RiccatiParams, t):
    """The unnormalized scalar profile

        g(t) = t (b^2 + c^2)(cos 2ct - 1) + t^2 b^2 c sin 2ct,

    equal to -2 c^4 det_block1(t).  Its logarithmic derivative is
    -tr F1(1 - t); kept in raw form for finite-difference cross-checks."""
    t = np.asarray(t, dtype=float)
    b, c = params.b, params.c
    return t * (b * b + c * c) * (np.cos(2 * c * t) - 1.0) + t * t * b * b * c * np.sin(
        2 * c * t
    )


# ---------------------------------------------------------------------------
# conjugate time
# ---------------------------------------------------------------------------

def _scan_roots(f, fprime, grid, bisect_tol):
    """Roots of f on a grid: sign-change brackets bisected to bisect_tol,
    plus exact zeros on grid nodes and a root abutting the last node.

    No interior near-zero tolerance: both factors scanned by
    conjugate_time have simple roots only (h = h' = 0 would force
    sin(ct) = 0 and cos(ct) = 0 together), and h legitimately passes
    through arbitrarily small values near t = 0 at large b, where any
    absolute threshold misfires."""
    vals = f(grid)
    roots = []
    for i in np.nonzero(vals == 0.0)[0]:
        roots.append(float(grid[i]))
    idx = np.nonzero((vals[:-1] * vals[1:]) < 0.0)[0]
    # A root within float roundoff past the last node (e.g. c = np.pi,
    # t_max = 1) produces no bracket; a Newton-step proximity test at the
    # endpoint catches it without reintroducing an absolute threshold.
    v_end, s_end = float(vals[-1]), float(fprime(grid[-1]))
    if (
        s_end != 0.0
        and abs(v_end) <= 4.0 * np.finfo(float).eps * abs(s_end) * grid[-1]
    ):
        roots.append(float(grid[-1]))
    for i in idx:
        lo, hi = float(grid[i]), float(grid[i + 1])
        flo = float(vals[i])
        while hi - lo > bisect_tol:
            mid = 0.5 * (lo + hi)
            fm = float(f(mid))
            if fm == 0.0:
                lo = hi = mid
                break
            if (flo < 0.0) == (fm < 0.0):
                lo, flo = mid, fm
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    return roots


def conjugate_time(
    params: RiccatiParams,
    t_max: float = 1.0,
    step: float = CONJUGATE_SCAN_STEP,
    bisect_tol: float = CONJUGATE_BISECT_TOL,
):
    """First zero of det A in (0, t_max], or None.

    det_block1 factors as the product of sin(ct) and
    h(t) = (b^2 + c^2) sin(ct) - t b^2 c cos(ct) (up to a nonvanishing
    normalization), and det_block3 vanishes only with sin(ct).  The two
    factors are scanned separately: at b = 0 the sin factor appears
    squared in det A, so the determinant itself touches zero without a
    sign change and a product-level scan would miss it.

    At c = 0 the profile degenerates identically (the normalized
    determinant t^3 (1 + b^2 t^2 / 3) has no positive zero), so the answer
    is None without scanning.
    """
    if t_max <= 0.0:
        raise DomainError("t_max must be positive")
    b, c = params.b, params.c
    if c == 0.0:
        return None
    # Keep several grid points below the first sin zero.
    if abs(c) * step > np.pi / 8.0:
        step = np.pi / (8.0 * abs(c))
    npts = max(int(np.ceil(t_max / step)), 8)
    grid = np.linspace(step, t_max, npts)

    def f_sin(t):
        return np.sin(c * np.asarray(t, dtype=float))

    def fp_sin(t):
        return c * np.cos(c * np.asarray(t, dtype=float))

    def f_h(t):
        t = np.asarray(t, dtype=float)
        return (b * b + c * c) * np.sin(c * t) - t * b * b * c * np.cos(c * t)

    def fp_h(t):
        t = np.asarray(t, dtype=float)
        return c ** 3 * np.cos(c * t) + t * b * b * c * c * np.sin(c * t)

    roots = _scan_roots(f_sin, fp_sin, grid, bisect_tol)
    roots += _scan_roots(f_h, fp_h, grid, bisect_tol)
    roots = [r for r in roots if 0.0 < r <= t_max]
    return min(roots) if roots else None


# ---------------------------------------------------------------------------
# inverse-Riccati integration
# ---------------------------------------------------------------------------

@dataclass
class RiccatiSolution:
    """Inverse-Riccati blocks on a grid, with F recovered where regular.

    F1/F3 hold NaN at grid points flagged in ``singular`` (always at
    t = 0, where G vanishes by construction)."""

    params: RiccatiParams
    t_grid: np.ndarray
    G1: np.ndarray
    G3: np.ndarray
    F1: np.ndarray
    F3: np.ndarray
    tr_F1: np.ndarray
    tr_F3: np.ndarray
    singular: np.ndarray


def _validate_grid(t_grid):
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 2:
        raise DomainError("t_grid must be a 1-d array with at least 2 points")
    if t_grid[0] != 0.0:
        raise DomainError("t_grid must start at 0")
    if np.any(np.diff(t_grid) <= 0.0):
        raise DomainError("t_grid must be strictly increasing")
    if t_grid[-1] >= 1.0:
        raise DomainError("t_grid must stay below 1")
    return t_grid


# Chart-switch threshold for the Riccati flow.  The flow passes through
# infinity in either representation (G where F(1-t) has a kernel, F at
# conjugate points); whenever the current matrix exceeds this size the
# integrator inverts it and continues in the other chart.
_CHART_CAP = 1e6
_DET_FLOOR = 1e-12


def _integrate_riccati_block(W, R, t_grid, rtol, atol, method):
    """Follow the blow-up-at-1 Riccati branch for one block.

    Starts in the inverse chart G (G(0) = 0, G' = -GRG - I - WG - GW^T)
    and switches to the direct chart F(1-t) (F' = R + F^2 + FW + W^T F in
    the t variable) and back whenever the current matrix grows past
    _CHART_CAP.  Returns (G, F, f_ok, g_ok) arrays on the grid; f_ok is
    False where F is not representable (det G below _DET_FLOOR, e.g. at
    t = 0), g_ok False where G is not (at points passed in the F chart
    with det F below the floor).
    """
    d = W.shape[0]
    N = len(t_grid)
    G = np.full((N, d, d), np.nan)
    F = np.full((N, d, d), np.nan)
    f_ok = np.zeros(N, dtype=bool)
    g_ok = np.zeros(N, dtype=bool)
    if d == 0:
        return G, F, f_ok, g_ok
    Id = np.eye(d)

    def rhs_G(_t, y):
        M = y.reshape(d, d)
        return (-M @ R @ M - Id - W @ M - M @ W.T).ravel()

    def rhs_F(_t, y):
        M = y.reshape(d, d)
        return (R + M @ M + M @ W + W.T @ M).ravel()

    def too_big(_t, y):
        return np.max(np.abs(y)) - _CHART_CAP

    too_big.terminal = True
    too_big.direction = 1.0

    def record(chart, t_idx, y):
        M = y.reshape(d, d)
        det = np.linalg.det(M)
        inv = np.linalg.inv(M) if abs(det) > _DET_FLOOR else None
        if chart == "G":
            G[t_idx] = M
            g_ok[t_idx] = True
            if inv is not None:
                F[t_idx] = inv
                f_ok[t_idx] = True
        else:
            F[t_idx] = M
            f_ok[t_idx] = True
            if inv is not None:
                G[t_idx] = inv
                g_ok[t_idx] = True

    chart = "G"
    y = np.zeros(d * d)
    t_now = float(t_grid[0])
    record(chart, 0, y)
    next_idx = 1
    t_end = float(t_grid[-1])
    for _segment in range(64):
        if t_now >= t_end or next_idx >= N:
            break
        t_eval = t_grid[next_idx:][t_grid[next_idx:] > t_now]
        sol = solve_ivp(
            rhs_G if chart == "G" else rhs_F,
            (t_now, t_end),
            y,
            t_eval=t_eval,
            events=too_big,
            method=method,
            rtol=rtol,
            atol=atol,
        )
        if not sol.success and sol.status != 1:
            raise DomainError(f"Riccati integration failed: {sol.message}")
        for j, tj in enumerate(sol.t):
            record(chart, next_idx, sol.y[:, j])
            next_idx += 1
            assert t_grid[next_idx - 1] == tj
        if sol.status != 1:
            break
        # hit the cap: invert and continue in the other chart
        t_now = float(sol.t_events[0][0])
        M = sol.y_events[0][0].reshape(d, d)
        y = np.linalg.inv(M).ravel()
        chart = "F" if chart == "G" else "G"
    else:
        raise DomainError("Riccati integration exceeded the segment budget")
    return G, F, f_ok, g_ok


def integrate_inverse_riccati(
    params: RiccatiParams,
    blocks: BlockMatrices,
    t_grid,
    *,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    method: str = "DOP853",
) -> RiccatiSolution:
    """Integrate G1' = -G1 R1 G1 - I - W1 G1 - G1 W1^T and
    G3' = -G3 R3 G3 - I from G(0) = 0, then invert to F(1 - t) where the
    blocks are regular.

    Direct integration of F from 0 is impossible (the branch is normalized
    by its blow-up at the endpoint), which is why the inverse variable
    starts the march; the integrator hops to the direct variable and back
    when either representation passes through infinity, so grids crossing
    zero-eigenvalue points of F(1 - t) (|c| > pi/2) or conjugate points
    (|c| > pi) remain usable.

    Grid points where F is not representable (|det G| < 1e-12, always the
    start) are flagged in ``singular`` and carry NaN in F1/F3 and the
    traces.  The G blocks stay symmetric; the mixed block of the full
    system is identically zero, which is why only the two diagonal blocks
    are integrated.
    """
    t_grid = _validate_grid(t_grid)
    m = blocks.R3.shape[0]
    if m != 2 * params.n - 2:
        raise DomainError(
            f"R3 is {m}x{m} but params.n = {params.n} implies {2 * params.n - 2}"
        )
    G1, F1, f1_ok, _ = _integrate_riccati_block(
        blocks.W1, blocks.R1, t_grid, rtol, atol, method
    )
    N = len(t_grid)
    if m:
        G3, F3, f3_ok, _ = _integrate_riccati_block(
            np.zeros((m, m)), blocks.R3, t_grid, rtol, atol, method
        )
    else:
        G3 = np.zeros((N, 0, 0))
        F3 = np.zeros((N, 0, 0))
        f3_ok = np.ones(N, dtype=bool)
    singular = ~(f1_ok & f3_ok)
    tr_F1 = np.trace(F1, axis1=1, axis2=2)
    tr_F3 = np.trace(F3, axis1=1, axis2=2) if m else np.zeros(N)
    tr_F1[singular] = np.nan
    if m:
        tr_F3[singular] = np.nan
    return RiccatiSolution(
        params=params,
        t_grid=t_grid,
        G1=G1,
        G3=G3,
        F1=F1,
        F3=F3,
        tr_F1=tr_F1,
        tr_F3=tr_F3,
        singular=singular,
    )


def integrate_inverse_riccati_full(
    params: RiccatiParams,
    blocks: BlockMatrices,
    t_grid,
    *,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    method: str = "DOP853",
) -> np.ndarray:
    """Same integration without exploiting the block split: the full
    (2n+1) x (2n+1) G is evolved (with chart hops as above).  Returns G on
    the grid, shape (N, d, d), NaN where G is not representable.  Used to
    confirm that the mixed block stays zero."""
    t_grid = _validate_grid(t_grid)
    G, _F, _f_ok, _g_ok = _integrate_riccati_block(
        blocks.full_W(), blocks.full_R(), t_grid, rtol, atol, method
    )
    return G


def psd_compare(F: np.ndarray, Ftilde: np.ndarray, tol: float = 1e-9) -> bool:
    """True when F - Ftilde is positive semidefinite within tol.

    Both inputs must be symmetric within 1e-9 (DomainError otherwise);
    they are symmetrized before the eigenvalue check to shed integration
    noise."""
    F = np.asarray(F, dtype=float)
    Ftilde = np.asarray(Ftilde, dtype=float)
    for name, M in (("F", F), ("Ftilde", Ftilde)):
        if M.shape[0] != M.shape[1]:
            raise DomainError(f"{name} must be square")
        if np.max(np.abs(M - M.T), initial=0.0) > 1e-9:
            raise DomainError(f"{name} is not symmetric within 1e-9")
    S = 0.5 * (F + F.T) - 0.5 * (Ftilde + Ftilde.T)
    return bool(np.linalg.eigvalsh(S).min() >= -tol)


def write_trace_csv(path, params: RiccatiParams, t_values) -> None:
    """Closed-form trace profile as CSV with columns
    t, trF1, trF3, bound5, boundF3 (bounds are -5/t and -(2n-2)/t)."""
    t_values = np.atleast_1d(np.asarray(t_values, dtype=float))
    if np.min(t_values) <= 0.0 or np.max(t_values) > 1.0:
        raise DomainError("t values must lie in (0, 1]")
    m = 2 * params.n - 2
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "trF1", "trF3", "bound5", "boundF3"])
        for t in t_values:
            w.writerow(
                [
                    repr(float(t)),
                    repr(float(_trace_f1(params.b, params.c, t))),
                    repr(float(_trace_f3(params.c, t, params.n))),
                    repr(-5.0 / float(t)),
                    repr(-float(m) / float(t)),
                ]
            )
