"""Volume-contraction density and the MCP(0, 2n+3) inequality.

The contraction toward a point maps the time-1 endpoint of each geodesic to
its time-(1-t) point.  Along a geodesic with scalars (b, c) the volume
density of that map is

    D(t) = det A(1 - t) / det A(1),

where A is the distortion (Jacobi) matrix with A(0) = 0, A'(0) = I; the
closed form of det A is the product of the two block determinants in the
riccati module, so D is evaluated in closed form, stays exact in the
c -> 0 and b -> 0 limits, and is even in b and in c.  The inequality under
test is

    D(t) >= (1 - t)^(2n+3)         for |c| < pi, t in [0, 1),

with equality approached as b -> infinity, c -> 0 (the exponent is the
vertical 5 plus 2n - 2 parallel directions, not the dimension 2n + 1).

Three independent evaluations are provided: the closed form (density and
the grid scans), per-sample ODE integration driven by Monte Carlo sampling
of a velocity set, and deterministic quadrature of the closed form over
the same set.  Sums use numpy's pairwise reduction, so results are
deterministic for a fixed seed and sample count.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, OutOfRegimeError, VelocitySpecError
from .heisenberg import HeisenbergModel
from .riccati import RiccatiParams, _sinc, _sxc

_MAX_REJECT_FRACTION = 0.01


def _det_blocks(b, c, n, s):
    """Vectorized det A(s) = det_block1 * det_block3 for broadcastable
    (b, c, s) arrays; block 3 contributes (s sinc(cs))^(2n-2)."""
    x = c * s
    sc = _sinc(x)
    d1 = s**3 * sc * sc + b * b * s**5 * sc * _sxc(x)
    if n == 1:
        return d1
    return d1 * (s * sc) ** (2 * n - 2)


def density(params: RiccatiParams, t):
    """Contraction density D(t) = det A(1 - t) / det A(1) in closed form.

    Accepts scalar or array t in [0, 1); requires |c| < pi so that the
    normalization det A(1) is positive (OutOfRegimeError otherwise).
    D(0) = 1 exactly."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr >= 1.0):
        raise DomainError("t must lie in [0, 1)")
    if abs(params.c) >= np.pi:
        raise OutOfRegimeError(
            f"density requires |c| < pi, got c = {params.c!r}"
        )
    b, c, n = params.b, params.c, params.n
    denom = float(_det_blocks(b, c, n, 1.0))
    if denom <= 0.0:
        raise OutOfRegimeError("det A(1) is not positive for these scalars")
    out = _det_blocks(b, c, n, 1.0 - t_arr) / denom
    return out if out.ndim else float(out)


def contraction_bound(n: int, t):
    """The MCP comparison profile (1 - t)^(2n+3)."""
    return (1.0 - np.asarray(t, dtype=float)) ** (2 * n + 3)


@dataclass
class DensityProfile:
    """Density, bound and their ratio on a t grid for one (b, c, n)."""

    params: RiccatiParams
    t_grid: np.ndarray
    density: np.ndarray
    bound: np.ndarray
    ratio: np.ndarray

    def write_csv(self, path) -> None:
        """Columns b, c, t, density, bound, ratio (b, c constant)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["b", "c", "t", "density", "bound", "ratio"])
            for tk, dk, bk, rk in zip(self.t_grid, self.density, self.bound, self.ratio):
                w.writerow(
                    [
                        repr(self.params.b),
                        repr(self.params.c),
                        repr(float(tk)),
                        repr(float(dk)),
                        repr(float(bk)),
                        repr(float(rk)),
                    ]
                )


def density_profile(params: RiccatiParams, t_grid) -> DensityProfile:
    """Evaluate density, bound, ratio over a t grid in [0, 1)."""
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    dens = np.atleast_1d(density(params, t_grid))
    bound = contraction_bound(params.n, t_grid)
    return DensityProfile(
        params=params,
        t_grid=t_grid,
        density=dens,
        bound=bound,
        ratio=dens / bound,
    )


# ---------------------------------------------------------------------------
# grid scans
# ---------------------------------------------------------------------------

def _density_readings(n: int) -> dict:
    """Both readings of the two-block density display at a reference point.

    The per-block factors D1, D3 multiply to exp of the integrated full
    trace (the reading implemented everywhere here); their sum is the
    other literal reading of the displayed formula.  Recorded so the
    discrepancy is documented rather than silently patched; the product
    is the one that matches the ODE oracle."""
    b, c, t = 1.0, 1.0, 0.5
    d1 = float(_det_blocks(b, c, 1, 1.0 - t) / _det_blocks(b, c, 1, 1.0))
    x1 = c * (1.0 - t)
    d3 = float((np.sin(x1) / np.sin(c)) ** (2 * n - 2))
    return {
        "reference_point": {"b": b, "c": c, "t": t},
        "block1_factor": d1,
        "block3_factor": d3,
        "product_reading": d1 * d3,
        "sum_reading": d1 + d3,
        "implemented": "product",
    }


@dataclass
class ScanReport:
    """Minimum of density/bound over a (b, c, t) grid."""

    n: int
    tol: float
    b_values: np.ndarray
    c_values: np.ndarray
    t_values: np.ndarray
    min_ratio: float
    argmin: tuple
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations

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
            "exponent": 2 * self.n + 3,
            "min_ratio": self.min_ratio,
            "argmin": {
                "b": self.argmin[0],
                "c": self.argmin[1],
                "t": self.argmin[2],
            },
            "violations": list(self.violations),
            "ok": self.ok,
            "density_readings": _density_readings(self.n),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)


def mcp_scan(
    n: int,
    b_range=(0.0, 10.0),
    c_range=(-3.0, 3.0),
    t_range=(0.05, 0.95),
    resolution: int = 50,
    tol: float = 1e-9,
) -> ScanReport:
    """Evaluate ratio = D(t) / (1-t)^(2n+3) on a full (b, c, t) grid.

    The c range must stay strictly inside (-pi, pi) and the t range inside
    [0, 1).  Violations below 1 - tol are collected with their grid
    coordinates; the expected outcome is an empty list."""
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    if resolution < 2:
        raise DomainError("resolution must be >= 2")
    b_lo, b_hi = map(float, b_range)
    c_lo, c_hi = map(float, c_range)
    t_lo, t_hi = map(float, t_range)
    if not (b_lo <= b_hi) or not (c_lo < c_hi) or not (t_lo < t_hi):
        raise DomainError("ranges must be ordered")
    if max(abs(c_lo), abs(c_hi)) >= np.pi:
        raise DomainError("c range must stay strictly inside (-pi, pi)")
    if t_lo < 0.0 or t_hi >= 1.0:
        raise DomainError("t range must stay inside [0, 1)")

    b_values = np.linspace(b_lo, b_hi, resolution)
    c_values = np.linspace(c_lo, c_hi, resolution)
    t_values = np.linspace(t_lo, t_hi, resolution)
    b = b_values[:, None, None]
    c = c_values[None, :, None]
    t = t_values[None, None, :]

    dens = _det_blocks(b, c, n, 1.0 - t) / _det_blocks(b, c, n, 1.0)
    ratio = dens / (1.0 - t) ** (2 * n + 3)

    i = np.unravel_index(int(np.argmin(ratio)), ratio.shape)
    min_ratio = float(ratio[i])
    argmin = (float(b_values[i[0]]), float(c_values[i[1]]), float(t_values[i[2]]))
    violations = [
        {
            "b": float(b_values[j[0]]),
            "c": float(c_values[j[1]]),
            "t": float(t_values[j[2]]),
            "ratio": float(ratio[j]),
        }
        for j in np.argwhere(ratio < 1.0 - tol)
    ]
    return ScanReport(
        n=n,
        tol=tol,
        b_values=b_values,
        c_values=c_values,
        t_values=t_values,
        min_ratio=min_ratio,
        argmin=argmin,
        violations=violations,
    )


def sharpness_scan(
    n: int,
    t: float,
    b_max: float = 1e4,
    b_points: int = 160,
    c_points: int = 200,
) -> float:
    """Infimum estimate of D(t) / (1-t)^(2n+3) over b in [0, b_max]
    (log-spaced plus zero) and c in (0, pi).

    The minimum approaches 1 from above as b grows and c shrinks, which is
    the empirical sharpness of the exponent 2n + 3; on the b = 0 slice
    alone the ratio never drops below (1-t)^(-2)."""
    if not (0.0 < t < 1.0):
        raise DomainError(f"t must lie in (0, 1), got {t!r}")
    b = np.concatenate(([0.0], np.geomspace(1e-2, b_max, b_points)))[:, None]
    c = np.geomspace(1e-4, np.pi - 1e-9, c_points)[None, :]
    dens = _det_blocks(b, c, n, 1.0 - t) / _det_blocks(b, c, n, 1.0)
    ratio = dens / (1.0 - t) ** (2 * n + 3)
    return float(np.min(ratio))


# ---------------------------------------------------------------------------
# Monte Carlo and quadrature over a velocity set
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VelocitySet:
    """Product set of initial velocities at a point: the horizontal part
    ranges over the ball |w_H| <= horizontal_radius, the vertical part over
    |<w, V>| <= vertical_momentum.  The scalars of a member are
    b = -eps |w_H| / 2 and c = <w, V> / 2."""

    horizontal_radius: float
    vertical_momentum: float

    def __post_init__(self):
        if not (self.horizontal_radius > 0.0 and np.isfinite(self.horizontal_radius)):
            raise VelocitySpecError("horizontal_radius must be a positive real")
        if not (self.vertical_momentum >= 0.0 and np.isfinite(self.vertical_momentum)):
            raise VelocitySpecError("vertical_momentum must be >= 0")

    @property
    def c_max(self) -> float:
        return 0.5 * self.vertical_momentum


def _batched_jacobi_dets(b, c, n, s_values, steps: int = 320):
    """det A(s) at each s in s_values for per-sample scalars b, c.

    Integrates the second-order distortion system for all samples at once
    with classical fixed-step RK4 (the per-sample blocks W, R are constant,
    so the stage count is the only cost driver).  Returns an array of
    shape (len(s_values), len(b))."""
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    N = len(b)
    d = 2 * n + 1
    W = np.zeros((N, d, d))
    W[:, 0, 2] = b
    W[:, 1, 2] = c
    W[:, 2, 0] = -b
    W[:, 2, 1] = -c
    R = np.zeros((N, d, d))
    R[:, 0, 0] = b * b
    R[:, 0, 1] = R[:, 1, 0] = b * c
    R[:, 1, 1] = c * c
    R[:, 2, 2] = c * c - 3.0 * b * b
    for k in range(3, d):
        R[:, k, k] = c * c
    M = np.matmul(W, W) + R

    def rhs(A, B):
        return B, -2.0 * np.matmul(B, W) - np.matmul(A, M)

    s_values = np.asarray(s_values, dtype=float)
    order = np.argsort(s_values)
    targets = s_values[order]
    A = np.zeros((N, d, d))
    B = np.broadcast_to(np.eye(d), (N, d, d)).copy()
    out = np.empty((len(targets), N))
    s_now = 0.0
    total = float(targets[-1])
    for ti, s_target in enumerate(targets):
        seg = s_target - s_now
        if seg > 0.0:
            nsteps = max(int(np.ceil(steps * seg / total)), 1)
            h = seg / nsteps
            for _ in range(nsteps):
                k1a, k1b = rhs(A, B)
                k2a, k2b = rhs(A + 0.5 * h * k1a, B + 0.5 * h * k1b)
                k3a, k3b = rhs(A + 0.5 * h * k2a, B + 0.5 * h * k2b)
                k4a, k4b = rhs(A + h * k3a, B + h * k3b)
                A = A + (h / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
                B = B + (h / 6.0) * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
            s_now = float(s_target)
        out[ti] = np.linalg.det(A)
    undo = np.empty_like(out)
    undo[order] = out  # restore caller's ordering of s_values
    return undo


@dataclass
class MonteCarloResult:
    """Sampled contraction ratio with its bootstrap uncertainty.

    Iterable as (ratio, std_error) for tuple unpacking."""

    ratio: float
    std_error: float
    t: float
    samples_used: int
    rejected_fraction: float
    bound: float
    seed: int

    @property
    def passes(self) -> bool:
        return self.ratio >= self.bound * (1.0 - 3.0 * self.std_error)

    def __iter__(self):
        return iter((self.ratio, self.std_error))

    def to_dict(self) -> dict:
        return {
            "ratio": self.ratio,
            "std_error": self.std_error,
            "t": self.t,
            "samples_used": self.samples_used,
            "rejected_fraction": self.rejected_fraction,
            "bound": self.bound,
            "seed": self.seed,
            "passes": self.passes,
        }


def monte_carlo_contraction(
    model: HeisenbergModel,
    x0,
    spec: VelocitySet,
    t: float,
    samples: int = 100_000,
    seed: int = 0,
    steps: int = 320,
    bootstrap: int = 200,
) -> MonteCarloResult:
    """Estimate mu(U_t) / mu(U_0) for U_0 the exponential image of the
    velocity set at x0, by uniform sampling of the set and per-sample ODE
    integration of the distortion determinant:

        ratio = sum_w det A_w(1 - t) / sum_w det A_w(1).

    By left-invariance the result does not depend on x0 (it is validated
    and recorded only).  Samples whose vertical scalar reaches |c| >= pi
    lie past their first conjugate time before the endpoint; they are
    rejected and counted, and more than 1% rejections aborts with
    VelocitySpecError.  The standard error comes from a seeded bootstrap
    over the sampled determinant pairs."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.dim,) or not np.all(np.isfinite(x0)):
        raise DomainError(f"x0 must be {model.dim} finite coordinates")
    if not (0.0 < t < 1.0):
        raise DomainError(f"t must lie in (0, 1), got {t!r}")
    if samples < 1000:
        raise DomainError("samples must be >= 1000")
    if bootstrap < 10:
        raise DomainError("bootstrap must be >= 10")
    rng = np.random.default_rng(seed)

    n = model.n
    rho = spec.horizontal_radius * rng.random(samples) ** (1.0 / (2 * n))
    p = spec.vertical_momentum * (2.0 * rng.random(samples) - 1.0)
    b = -0.5 * model.eps * rho
    c = 0.5 * p

    keep = np.abs(c) < np.pi - 1e-9
    rejected = int(samples - np.count_nonzero(keep))
    frac = rejected / samples
    if frac > _MAX_REJECT_FRACTION:
        raise VelocitySpecError(
            f"{100 * frac:.1f}% of sampled velocities pass their conjugate "
            "time before the endpoint; shrink the vertical momentum bound"
        )
    b, c = b[keep], c[keep]

    dets = _batched_jacobi_dets(b, c, n, [1.0 - t, 1.0], steps=steps)
    det_t, det_1 = dets[0], dets[1]
    ratio = float(np.sum(det_t) / np.sum(det_1))

    N = len(b)
    reps = np.empty(bootstrap)
    for k in range(bootstrap):
        idx = rng.integers(0, N, N)
        reps[k] = np.sum(det_t[idx]) / np.sum(det_1[idx])
    std_error = float(np.std(reps, ddof=1))

    return MonteCarloResult(
        ratio=ratio,
        std_error=std_error,
        t=float(t),
        samples_used=N,
        rejected_fraction=float(frac),
        bound=float((1.0 - t) ** (2 * n + 3)),
        seed=seed,
    )


def quadrature_contraction(
    model: HeisenbergModel, spec: VelocitySet, t: float, nodes: int = 64
) -> float:
    """Deterministic cross-check of monte_carlo_contraction: the same
    ratio via Gauss-Legendre quadrature of the closed-form determinant
    over (|w_H|, vertical momentum), with the sphere factor |w_H|^(2n-1).

    Requires the whole set inside the conjugate-time regime
    (c_max < pi)."""
    if not (0.0 < t < 1.0):
        raise DomainError(f"t must lie in (0, 1), got {t!r}")
    if spec.c_max >= np.pi:
        raise VelocitySpecError(
            "quadrature needs the full set inside |c| < pi"
        )
    n = model.n
    xr, wr = np.polynomial.legendre.leggauss(nodes)
    rho = 0.5 * spec.horizontal_radius * (xr + 1.0)
    w_rho = 0.5 * spec.horizontal_radius * wr
    if spec.vertical_momentum > 0.0:
        p = spec.vertical_momentum * xr
        w_p = spec.vertical_momentum * wr
    else:
        p = np.zeros(1)
        w_p = np.ones(1)
    b = -0.5 * model.eps * rho[:, None]
    c = 0.5 * p[None, :]
    weight = (rho ** (2 * n - 1))[:, None] * w_rho[:, None] * w_p[None, :]
    num = float(np.sum(weight * _det_blocks(b, c, n, 1.0 - t)))
    den = float(np.sum(weight * _det_blocks(b, c, n, 1.0)))
    return num / den
