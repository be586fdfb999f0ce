"""Coordinate model of the scaled Heisenberg group: geodesics, adapted
frames, and Jacobi determinants.

Coordinates are (x_1..x_n, y_1..y_n, z) and the orthonormal frame is

    v0  = (1/eps) d_z,
    X_i = d_{x_i} - (y_i/2) d_z,
    Y_i = d_{y_i} + (x_i/2) d_z,

so that [X_i, Y_i] = d_z = eps v0.  Geodesics are integrated in
frame-velocity form: the coefficients u of the velocity in this frame
satisfy the autonomous system u'_k = -Gamma^k(u, u) with constant
connection coefficients, and the position follows by applying the frame
matrix.  Both |u| and the vertical coefficient u_0 are first integrals.

Along a geodesic with nonvanishing horizontal velocity the adapted moving
frame is v0, v1 = u_H/|u_H|, v2 = J v1, completed by J-paired parallel
vectors.  Its drift is the constant W block of the riccati module with

    b = -eps |u_H| / 2,      c = eps u_0 / 2,

and the distortion matrix in this frame solves the row-vector system
A'' + 2 A' W + A (W^2 + R) = 0 with A(0) = 0, A'(0) = I.  Its determinant
is integrated here directly and serves as the independent oracle for the
closed-form determinant and trace profiles in the riccati module.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DegenerateDirectionError, DomainError, IntegrationError
from .frame_algebra import build_heisenberg_algebra, levi_civita
from .riccati import RiccatiParams, build_blocks

# Horizontal speeds below this fraction of the total speed count as
# vertical: the adapted frame needs a direction for v1.
_DEGENERATE_FRACTION = 1e-10


@dataclass(frozen=True)
class HeisenbergModel:
    """The group H^{2n+1} with vertical length eps."""

    n: int
    eps: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n!r}")
        if not (self.eps > 0.0 and np.isfinite(self.eps)):
            raise DomainError(f"eps must be a positive real, got {self.eps!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "eps", float(self.eps))

    @property
    def dim(self) -> int:
        return 2 * self.n + 1

    @cached_property
    def structure(self):
        return build_heisenberg_algebra(self.n, self.eps)

    @cached_property
    def gamma(self) -> np.ndarray:
        alg, _ = self.structure
        return levi_civita(alg).gamma

    @property
    def J(self) -> np.ndarray:
        return self.structure[1].J


@dataclass(frozen=True)
class GeodesicState:
    """Position in coordinates, velocity as frame coefficients.

    pos = (x_1..x_n, y_1..y_n, z); vel = (u_0, u_{X_1}..u_{X_n},
    u_{Y_1}..u_{Y_n}) in the orthonormal frame at pos."""

    pos: np.ndarray
    vel: np.ndarray

    def __post_init__(self):
        pos = np.array(self.pos, dtype=float)
        vel = np.array(self.vel, dtype=float)
        if pos.shape != vel.shape or pos.ndim != 1:
            raise DomainError("pos and vel must be 1-d arrays of equal length")
        d = len(pos)
        if d < 3 or d % 2 == 0:
            raise DomainError(f"state dimension must be odd and >= 3, got {d}")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(vel))):
            raise DomainError("state entries must be finite")
        object.__setattr__(self, "pos", pos)
        object.__setattr__(self, "vel", vel)

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.vel))

    @property
    def vertical_coefficient(self) -> float:
        return float(self.vel[0])

    @property
    def horizontal_speed(self) -> float:
        return float(np.linalg.norm(self.vel[1:]))


def frame_matrix(model: HeisenbergModel, pos) -> np.ndarray:
    """Rows are the coordinate components of (v0, X_i, Y_i) at pos."""
    pos = np.asarray(pos, dtype=float)
    n, d = model.n, model.dim
    if pos.shape != (d,):
        raise DomainError(f"pos must have shape ({d},), got {pos.shape}")
    F = np.zeros((d, d))
    F[0, 2 * n] = 1.0 / model.eps
    for i in range(n):
        F[1 + i, i] = 1.0
        F[1 + i, 2 * n] = -0.5 * pos[n + i]
        F[1 + n + i, n + i] = 1.0
        F[1 + n + i, 2 * n] = 0.5 * pos[i]
    return F


@dataclass
class Trajectory:
    """Dense geodesic solution sampled on a grid.

    pos and vel have shape (len(t), dim); the dense interpolant is kept for
    off-grid evaluation via at()."""

    model: HeisenbergModel
    t: np.ndarray
    pos: np.ndarray
    vel: np.ndarray
    _sol: object

    def at(self, time: float) -> GeodesicState:
        lo, hi = float(np.min(self.t)), float(np.max(self.t))
        if not (lo <= time <= hi):
            raise DomainError(f"time {time!r} outside the integrated span [{lo}, {hi}]")
        y = self._sol(time)
        d = self.model.dim
        return GeodesicState(pos=y[:d], vel=y[d:])

    def states(self) -> list:
        return [GeodesicState(pos=p, vel=v) for p, v in zip(self.pos, self.vel)]

    def conservation_drift(self) -> dict:
        """Maximum drift of the two first integrals over the sample grid."""
        speed = np.linalg.norm(self.vel, axis=1)
        return {
            "speed": float(np.max(np.abs(speed - speed[0]))),
            "vertical": float(np.max(np.abs(self.vel[:, 0] - self.vel[0, 0]))),
        }

    def write_csv(self, path) -> None:
        """Columns t, x_1..x_n, y_1..y_n, z, u_0..u_{2n}."""
        n = self.model.n
        header = (
            ["t"]
            + [f"x{i}" for i in range(1, n + 1)]
            + [f"y{i}" for i in range(1, n + 1)]
            + ["z"]
            + [f"u{k}" for k in range(2 * n + 1)]
        )
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for tk, pk, vk in zip(self.t, self.pos, self.vel):
                w.writerow(
                    [repr(float(tk))]
                    + [repr(float(v)) for v in pk]
                    + [repr(float(v)) for v in vk]
                )


def geodesic_flow(
    model: HeisenbergModel,
    start: GeodesicState,
    T: float,
    tol: float = 1e-10,
    samples: int = 201,
) -> Trajectory:
    """Integrate the geodesic through start for time T (either sign).

    The velocity subsystem is u'_k = -Gamma^k(u, u); the position moves by
    u applied to the frame matrix.  Local error is controlled at tol by an
    adaptive high-order Runge-Kutta scheme with dense output."""
    d = model.dim
    if len(start.pos) != d:
        raise DomainError(
            f"state dimension {len(start.pos)} does not match the model ({d})"
        )
    if not (np.isfinite(T) and T != 0.0):
        raise DomainError(f"T must be finite and nonzero, got {T!r}")
    if tol <= 0.0:
        raise DomainError("tol must be positive")
    if samples < 2:
        raise DomainError("samples must be >= 2")
    gamma = model.gamma

    def rhs(_t, y):
        pos, u = y[:d], y[d:]
        pos_dot = u @ frame_matrix(model, pos)
        u_dot = -np.einsum("i,j,ijk->k", u, u, gamma)
        return np.concatenate((pos_dot, u_dot))

    y0 = np.concatenate((start.pos, start.vel))
    sol = solve_ivp(
        rhs,
        (0.0, float(T)),
        y0,
        method="DOP853",
        rtol=tol,
        atol=tol,
        dense_output=True,
        t_eval=np.linspace(0.0, float(T), samples),
    )
    if not sol.success or not np.all(np.isfinite(sol.y)):
        last = float(sol.t[-1]) if len(sol.t) else 0.0
        raise IntegrationError(
            f"geodesic integration stopped: {sol.message}", last_good_time=last
        )
    return Trajectory(
        model=model, t=sol.t.copy(), pos=sol.y[:d].T.copy(), vel=sol.y[d:].T.copy(),
        _sol=sol.sol,
    )


def adapted_params(model: HeisenbergModel, state: GeodesicState) -> RiccatiParams:
    """Scalars (b, c, n) of the adapted frame along the geodesic through
    state: b = -eps |u_H| / 2, c = eps u_0 / 2.

    Raises DegenerateDirectionError for (numerically) vertical velocities,
    where the adapted frame has no v1."""
    if len(state.pos) != model.dim:
        raise DomainError("state dimension does not match the model")
    h = state.horizontal_speed
    if h <= _DEGENERATE_FRACTION * max(state.speed, 1.0):
        raise DegenerateDirectionError(
            "adapted frame undefined for vertical velocity (|u_H| = 0)"
        )
    return RiccatiParams(
        b=-0.5 * model.eps * h, c=0.5 * model.eps * state.vel[0], n=model.n
    )


@dataclass
class AdaptedFrame:
    """Moving frame along a geodesic: rows of frames[k] are the frame
    coefficients of (v0, v1, v2, ...) at t[k]; W is the constant drift
    matrix (covariant derivative along the geodesic), nonzero only in its
    leading 3x3 block; max_residual is the verified bound on
    |Dv/dt - W v| along the trajectory."""

    params: RiccatiParams
    t: np.ndarray
    frames: np.ndarray
    W: np.ndarray
    max_residual: float

    @property
    def b(self) -> float:
        return self.params.b

    @property
    def c(self) -> float:
        return self.params.c


def adapted_frame(
    model: HeisenbergModel,
    traj: Trajectory,
    fd_step: float = 1e-6,
    check_points: int = 25,
) -> AdaptedFrame:
    """Construct the adapted frame along a trajectory and verify its drift.

    v0 is constant in frame coefficients; v1 tracks the normalized
    horizontal velocity; v2 = J v1; the remaining rows rotate at rate c in
    their J-planes, which is exactly parallel transport here.  The drift
    equation Dv/dt = W v is verified by central finite differences of the
    frame plus the connection term, at check_points interior times."""
    d = model.dim
    start = traj.at(float(traj.t[0]))
    params = adapted_params(model, start)
    c = params.c
    J = model.J
    gamma = model.gamma

    # J-paired orthonormal completion of span{v1, v2} at t = 0
    u0h = np.concatenate(([0.0], start.vel[1:]))
    v1_0 = u0h / np.linalg.norm(u0h)
    comp = []
    basis = [v1_0, J @ v1_0]
    for k in range(1, d):
        if len(comp) == 2 * model.n - 2:
            break
        w = np.eye(d)[k]
        for b_vec in basis:
            w = w - (w @ b_vec) * b_vec
        nw = np.linalg.norm(w)
        if nw < 1e-8:
            continue
        w = w / nw
        jw = J @ w
        comp.extend([w, jw])
        basis.extend([w, jw])
    comp = np.array(comp).reshape(2 * model.n - 2, d)

    def frames_at(tval):
        y = traj._sol(tval)
        u = y[d:]
        uh = np.concatenate(([0.0], u[1:]))
        v1 = uh / np.linalg.norm(uh)
        rows = np.empty((d, d))
        rows[0] = np.eye(d)[0]
        rows[1] = v1
        rows[2] = J @ v1
        if len(comp):
            ct, st = np.cos(c * tval), np.sin(c * tval)
            rows[3:] = ct * comp + st * (comp @ J.T)
        return rows, u

    frames = np.array([frames_at(tk)[0] for tk in traj.t])

    blocks = build_blocks(params)
    W = blocks.full_W()

    lo, hi = float(np.min(traj.t)), float(np.max(traj.t))
    delta = fd_step * max(hi - lo, 1.0)
    ts = np.linspace(lo + delta, hi - delta, check_points)
    residual = 0.0
    for s in ts:
        Fm, u = frames_at(s)
        Fp, _ = frames_at(s + delta)
        Fms, _ = frames_at(s - delta)
        dF = (Fp - Fms) / (2.0 * delta)
        covariant = dF + np.einsum("i,aj,ijk->ak", u, Fm, gamma)
        residual = max(residual, float(np.max(np.abs(covariant - W @ Fm))))
    return AdaptedFrame(
        params=params, t=traj.t.copy(), frames=frames, W=W, max_residual=residual
    )


# ---------------------------------------------------------------------------
# distortion (Jacobi) matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JacobiMatrix:
    """Distortion matrix A(t) in the adapted frame (A(0) = 0, A'(0) = I)."""

    t: float
    A: np.ndarray

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.A))


def _validate_times(ts):
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    if ts.ndim != 1 or len(ts) == 0:
        raise DomainError("need at least one evaluation time")
    if np.any(ts <= 0.0) or not np.all(np.isfinite(ts)):
        raise DomainError("evaluation times must be positive finite reals")
    if np.any(np.diff(ts) <= 0.0):
        raise DomainError("evaluation times must be strictly increasing")
    return ts


def jacobi_matrices_from_params(b, c, ts, n: int = 1, tol: float = 1e-10):
    """Integrate A'' + 2 A' W + A (W^2 + R) = 0, A(0) = 0, A'(0) = I and
    return the stack of A(t) over the (strictly increasing, positive)
    times ts.  W, R are the constant blocks built from (b, c, n) with zero
    ambient curvature."""
    params = RiccatiParams(b=b, c=c, n=n)
    ts = _validate_times(ts)
    if tol <= 0.0:
        raise DomainError("tol must be positive")
    blocks = build_blocks(params)
    W = blocks.full_W()
    WWR = W @ W + blocks.full_R()
    d = blocks.dim
    d2 = d * d

    def rhs(_t, y):
        A = y[:d2].reshape(d, d)
        B = y[d2:].reshape(d, d)
        return np.concatenate((B.ravel(), (-2.0 * B @ W - A @ WWR).ravel()))

    y0 = np.concatenate((np.zeros(d2), np.eye(d).ravel()))
    sol = solve_ivp(
        rhs, (0.0, float(ts[-1])), y0, t_eval=ts, method="DOP853", rtol=tol, atol=tol
    )
    if not sol.success:
        last = float(sol.t[-1]) if len(sol.t) else 0.0
        raise IntegrationError(
            f"distortion integration failed: {sol.message}", last_good_time=last
        )
    return sol.y[:d2].T.reshape(len(ts), d, d)


def jacobi_determinants_from_params(b, c, ts, n: int = 1, tol: float = 1e-10):
    """det A(t) over the times ts; the ODE-level oracle for the
    closed-form determinant profile."""
    mats = jacobi_matrices_from_params(b, c, ts, n=n, tol=tol)
    return np.linalg.det(mats)


def jacobi_matrix_from_params(
    b, c, t: float, n: int = 1, tol: float = 1e-10
) -> JacobiMatrix:
    mats = jacobi_matrices_from_params(b, c, [t], n=n, tol=tol)
    return JacobiMatrix(t=float(t), A=mats[0])


def jacobi_determinant(
    model: HeisenbergModel, start: GeodesicState, t: float, tol: float = 1e-10
) -> float:
    """det A(t) along the geodesic through start (scalars b, c read off the
    initial velocity).  Negative or zero values mean t is at or beyond the
    first conjugate time; the caller interprets the sign."""
    params = adapted_params(model, start)
    return float(
        jacobi_determinants_from_params(params.b, params.c, [t], n=model.n, tol=tol)[0]
    )
