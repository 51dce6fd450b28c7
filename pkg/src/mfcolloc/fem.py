"""Group finite element (GFE) solver for the forced viscous Burgers equation.

Piecewise-linear hat functions on a uniform mesh of ``[0, 1]`` with
homogeneous Dirichlet conditions; only the ``N`` interior coefficients are
unknowns. The quadratic flux is grouped, ``u^2 ~ sum_j alpha_j^2 beta_j``,
so the semi-discrete system reads

    M alpha' = -mu A alpha - 1/2 Nmat (alpha * alpha) + V(t).

Time stepping is Crank-Nicolson with a Newton solve per step.
"""

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimMismatch, InputError, InvalidMesh, NewtonDivergence
from .forcing import ForcingSpec, RandomPoint, basis_values, forcing_eval
from .linalg import cholesky_spd, tridiag_matvec, tridiag_solve

NEWTON_TOL = 1e-12
NEWTON_MAXITER = 25

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(3)


@dataclass(frozen=True)
class Mesh1D:
    """Uniform mesh with ``n_interior`` unknown nodes (``n_interior + 1`` intervals)."""

    n_interior: int

    def __post_init__(self):
        if int(self.n_interior) != self.n_interior or self.n_interior < 2:
            raise InvalidMesh(f"need at least 2 interior nodes, got {self.n_interior}")

    @classmethod
    def from_intervals(cls, intervals):
        return cls(int(intervals) - 1)

    @property
    def intervals(self):
        return self.n_interior + 1

    @property
    def h(self):
        return 1.0 / self.intervals

    @property
    def nodes(self):
        return np.arange(self.intervals + 1) * self.h

    @property
    def interior(self):
        return self.nodes[1:-1]


@dataclass(frozen=True, eq=False)
class FemOperators:
    """Assembled hat-function matrices (dense) and their three diagonals."""

    mesh: Mesh1D
    mu: float
    mass: np.ndarray
    stiffness: np.ndarray
    advection: np.ndarray
    chol: np.ndarray
    mass_bands: tuple
    stiffness_bands: tuple

    @property
    def n(self):
        return self.mesh.n_interior


def _tridiag_dense(n, lo, d, up):
    return np.diag(np.full(n, d)) + np.diag(np.full(n - 1, lo), -1) + np.diag(np.full(n - 1, up), 1)


def assemble(mesh, mu):
    """Exact mass, stiffness and advection matrices for hat functions.

    ``advection[i, j] = (beta_j', beta_i)``, which has ``-1/2`` below and
    ``+1/2`` above the diagonal.
    """
    if not mu > 0:
        raise InputError("viscosity must be positive")
    n, h = mesh.n_interior, mesh.h
    mass = _tridiag_dense(n, h / 6.0, 2.0 * h / 3.0, h / 6.0)
    stiff = _tridiag_dense(n, -1.0 / h, 2.0 / h, -1.0 / h)
    adv = _tridiag_dense(n, -0.5, 0.0, 0.5)
    mass_bands = (np.full(n - 1, h / 6.0), np.full(n, 2.0 * h / 3.0), np.full(n - 1, h / 6.0))
    stiff_bands = (np.full(n - 1, -1.0 / h), np.full(n, 2.0 / h), np.full(n - 1, -1.0 / h))
    return FemOperators(mesh, float(mu), mass, stiff, adv, cholesky_spd(mass), mass_bands, stiff_bands)


def group_nonlinearity(alpha, ops):
    """``G(alpha) = Nmat diag(alpha) alpha``."""
    sq = np.asarray(alpha, dtype=float) ** 2
    return _advect(sq)


def _advect(v):
    # Nmat @ v for the fixed (-1/2, 0, 1/2) stencil
    out = np.zeros_like(v)
    out[:-1] += 0.5 * v[1:]
    out[1:] -= 0.5 * v[:-1]
    return out


def quadrature_points(mesh):
    """3-point Gauss points per element with weights and hat values.

    Returns ``(x, w, phi_left, phi_right)``, each of shape
    ``(intervals, 3)``.
    """
    h = mesh.h
    left = mesh.nodes[:-1, None]
    x = left + 0.5 * h * (1.0 + _GAUSS_X[None, :])
    w = np.broadcast_to(0.5 * h * _GAUSS_W, x.shape)
    phi_r = (x - left) / h
    return x, w, 1.0 - phi_r, phi_r


def project_load(fn, mesh):
    """``[(fn, beta_i)]`` for the interior hat functions by 3-point Gauss per element."""
    x, w, phi_l, phi_r = quadrature_points(mesh)
    fx = np.asarray(fn(x), dtype=float) * w
    right_part = (fx * phi_r).sum(axis=1)  # element e feeds its right node e+1
    left_part = (fx * phi_l).sum(axis=1)  # element e feeds its left node e
    return right_part[:-1] + left_part[1:]


def _expcos_u0(x):
    x = np.asarray(x, dtype=float)
    return (np.exp(np.cos(5.0 * np.pi * x)) - 1.5) * np.sin(np.pi * x)


def _zero_u0(x):
    return np.zeros_like(np.asarray(x, dtype=float))


U0_BUILTINS = {"expcos": _expcos_u0, "zero": _zero_u0}


def resolve_u0(u0):
    if callable(u0):
        return u0
    try:
        return U0_BUILTINS[u0]
    except KeyError:
        raise InputError(f"unknown initial condition {u0!r}; choose from {sorted(U0_BUILTINS)}") from None


def initial_state(u0, ops, mesh=None):
    """L2 projection of ``u0`` onto the FE space: solve ``M alpha0 = [(u0, beta_i)]``."""
    mesh = ops.mesh if mesh is None else mesh
    rhs = project_load(resolve_u0(u0), mesh)
    return tridiag_solve(*ops.mass_bands, rhs)


def load_vector(point, spec, t, mesh):
    """``[(f_d(t, .), beta_i)]`` at a single time."""
    if point.dim != spec.dim:
        raise DimMismatch(f"point has {point.dim} coordinates, forcing expects {spec.dim}")
    return project_load(lambda x: forcing_eval(point, spec, t, x), mesh)


@dataclass(frozen=True, eq=False)
class SolverConfig:
    """Everything a deterministic solve needs apart from the random point."""

    mesh: Mesh1D
    mu: float
    steps: int
    forcing: ForcingSpec
    u0: object = "expcos"

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise InputError("steps must be a positive integer")

    @property
    def horizon(self):
        return self.forcing.horizon

    @property
    def dt(self):
        return self.horizon / self.steps

    @cached_property
    def times(self):
        return np.arange(self.steps + 1) * self.dt

    @cached_property
    def ops(self):
        return assemble(self.mesh, self.mu)

    @cached_property
    def sigma_load(self):
        """``[(sigma, beta_i)]``; the load at ``t`` is this times ``sum_k xi_k h_k(t)``."""
        return project_load(self.forcing.sigma_at, self.mesh)

    @cached_property
    def alpha0(self):
        return initial_state(self.u0, self.ops)

    @cached_property
    def time_basis(self):
        """Temporal basis at every time level, shape ``(steps + 1, dim)``."""
        return basis_values(self.times, self.forcing.dim, self.horizon)

    def amplitudes(self, point):
        if point.dim != self.forcing.dim:
            raise DimMismatch(f"point has {point.dim} coordinates, forcing expects {self.forcing.dim}")
        return self.time_basis @ point.coords


@dataclass(frozen=True, eq=False)
class Trajectory:
    """FE coefficients at every time level; ``states[k]`` belongs to ``times[k]``."""

    times: np.ndarray
    states: np.ndarray
    point: RandomPoint = None
    config: SolverConfig = None

    @property
    def final(self):
        return self.states[-1]


def _gfe_rhs_const(ops, alpha, c):
    """Explicit half of the Crank-Nicolson residual at the old level."""
    mu = ops.mu
    return -tridiag_matvec(*ops.mass_bands, alpha) + c * (mu * tridiag_matvec(*ops.stiffness_bands, alpha) + 0.5 * _advect(alpha * alpha))


def solve_gfe(point, cfg):
    """Integrate the GFE system at ``point`` over ``cfg.steps`` Crank-Nicolson steps.

    Each step solves

        M (x - a) + dt/2 [mu A (x + a) + 1/2 G(x) + 1/2 G(a) - V_new - V_old] = 0

    by Newton's method (Jacobian ``M + dt/2 (mu A + Nmat diag(x))``) until
    the residual infinity norm is at most ``NEWTON_TOL``.
    """
    ops = cfg.ops
    mu = ops.mu
    c = 0.5 * cfg.dt
    load = cfg.sigma_load
    amps = cfg.amplitudes(point)
    mlo, mdi, mup = ops.mass_bands
    slo, sdi, sup = ops.stiffness_bands
    jdiag = mdi + c * mu * sdi

    states = np.empty((cfg.steps + 1, ops.n))
    a = cfg.alpha0.copy()
    states[0] = a
    for k in range(cfg.steps):
        fixed = _gfe_rhs_const(ops, a, c) - c * (amps[k] + amps[k + 1]) * load
        x = a.copy()
        for it in range(NEWTON_MAXITER + 1):
            res = tridiag_matvec(mlo, mdi, mup, x) + c * (mu * tridiag_matvec(slo, sdi, sup, x) + 0.5 * _advect(x * x)) + fixed
            rnorm = np.max(np.abs(res))
            if rnorm <= NEWTON_TOL:
                break
            if it == NEWTON_MAXITER or not np.isfinite(rnorm):
                raise NewtonDivergence(f"GFE Newton stalled at step {k + 1} (residual {rnorm:.3e})", step=k + 1, residual=rnorm)
            upper = mup + c * (mu * sup + 0.5 * x[1:])
            lower = mlo + c * (mu * slo - 0.5 * x[:-1])
            x = x - tridiag_solve(lower, jdiag, upper, res)
        states[k + 1] = x
        a = x
    return Trajectory(cfg.times.copy(), states, point, cfg)


def energy(states, ops):
    """``1/2 alpha^T M alpha`` for each row of ``states``."""
    states = np.atleast_2d(states)
    return 0.5 * np.einsum("ki,ij,kj->k", states, ops.mass, states)


def mass_norm(v, ops):
    v = np.asarray(v, dtype=float)
    return float(np.sqrt(max(v @ (ops.mass @ v), 0.0)))


def fmt(value):
    return format(float(value), ".17g")


def write_trajectory_csv(traj, path):
    n = traj.states.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t"] + [f"x_{i}" for i in range(1, n + 1)])
        for t, row in zip(traj.times, traj.states):
            writer.writerow([fmt(t)] + [fmt(v) for v in row])


def read_trajectory_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return Trajectory(data[:, 0], data[:, 1:])
