"""Group-POD reduced-order model built from GFE snapshots.

The reduced state ``a`` describes the fluctuation ``v = u - U`` around the
snapshot mean ``U`` in a mass-orthonormal mode basis ``psi``. The quadratic
term is grouped through nodal values: with ``Gamma = psi`` (hat functions
interpolate) the nodal square of ``Gamma a`` is ``Gamma_hat quad_pack(a)``,
and the reduced operator ``Nhat = Gamma^T Nmat Gamma_hat`` is precomputed.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import BadCount, DimMismatch, MeshMismatch, NewtonDivergence, RankDeficient
from .fem import NEWTON_MAXITER, NEWTON_TOL, Trajectory, _advect, fmt
from .forcing import RandomPoint
from .linalg import gram_eig_jacobi

MODE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PodBasis:
    """POD modes of one trajectory plus everything needed to differentiate them.

    ``eig`` is the full decomposition of the correlation matrix; ``eigvals``
    and ``eigvecs`` are its leading ``M`` pairs.
    """

    modes: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    mean_flow: np.ndarray
    snapshots: np.ndarray
    snapshot_times: np.ndarray
    eig: object
    correlation: np.ndarray
    source_point: RandomPoint = None
    snapshot_levels: np.ndarray = None

    @property
    def snapshot_count(self):
        return self.snapshots.shape[1]

    @property
    def n_modes(self):
        return self.modes.shape[1]


def snapshot_indices(steps, count, include_initial=False):
    """Time-level indices of ``count`` equally spaced snapshots, ending at the final level.

    With ``include_initial`` the level ``0`` is prepended, giving ``count + 1``
    columns.
    """
    if count < 1 or count > steps or steps % count:
        raise BadCount(f"cannot take {count} equally spaced snapshots from {steps} steps")
    stride = steps // count
    idx = np.arange(1, count + 1) * stride
    return np.concatenate([[0], idx]) if include_initial else idx


def build_snapshots(traj, count, include_initial=False):
    """Snapshot matrix ``Y`` (``N x S``) and its times.

    By default ``t = 0`` is excluded. Including it lets the modes represent
    the initial state, which otherwise limits ROM accuracy for rough
    initial data.
    """
    idx = snapshot_indices(len(traj.times) - 1, count, include_initial)
    return traj.states[idx].T.copy(), traj.times[idx].copy()


def correlation(Y, mass_chol):
    """``K = (1/S) (L^T Y)^T (L^T Y)``, the mass-weighted snapshot Gram matrix."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or mass_chol.shape[0] != Y.shape[0]:
        raise DimMismatch("snapshot matrix and mass factor disagree")
    Yt = mass_chol.T @ Y
    K = (Yt.T @ Yt) / Y.shape[1]
    return 0.5 * (K + K.T)


def pod_modes(Y, eig, count, n_modes, mode_tol=MODE_TOL):
    """``psi = Y Z (S Lambda)^(-1/2)`` for the leading ``n_modes`` pairs."""
    lam = eig.values
    _check_rank(lam, n_modes, mode_tol)
    Z = eig.vectors[:, :n_modes]
    return (Y @ Z) / np.sqrt(count * lam[:n_modes])


def _check_rank(lam, n_modes, mode_tol):
    if n_modes < 1 or n_modes > lam.shape[0]:
        raise RankDeficient(f"requested {n_modes} modes from {lam.shape[0]} snapshots")
    if not lam[n_modes - 1] > mode_tol * lam[0]:
        raise RankDeficient(f"eigenvalue {n_modes} is {lam[n_modes - 1]:.3e}, below {mode_tol:g} x {lam[0]:.3e}")


def pod_eig(Y, mass_chol):
    """Eigenpairs of the correlation matrix without forming it.

    One-sided Jacobi on the weighted snapshots ``L^T Y`` yields the same
    eigenpairs as decomposing ``K``; it also returns ``L^T Y Z`` with
    columns orthogonal to working precision relative to their own norms.
    """
    return gram_eig_jacobi(mass_chol.T @ Y, scale=1.0 / Y.shape[1])


def mean_flow(Y):
    return np.asarray(Y, dtype=float).mean(axis=1)


def build_pod_basis(traj, count, n_modes, mode_tol=MODE_TOL, include_initial=False):
    ops = traj.config.ops
    levels = snapshot_indices(len(traj.times) - 1, count, include_initial)
    Y, times = traj.states[levels].T.copy(), traj.times[levels].copy()
    K = correlation(Y, ops.chol)
    eig, weighted = pod_eig(Y, ops.chol)
    _check_rank(eig.values, n_modes, mode_tol)
    # Y Z (S Lambda)^(-1/2), with each column scaled by its computed mass norm
    norms = np.sqrt(np.einsum("ij,ij->j", weighted[:, :n_modes], weighted[:, :n_modes]))
    psi = (Y @ eig.vectors[:, :n_modes]) / norms
    return PodBasis(
        modes=psi,
        eigvals=eig.values[:n_modes].copy(),
        eigvecs=eig.vectors[:, :n_modes].copy(),
        mean_flow=mean_flow(Y),
        snapshots=Y,
        snapshot_times=times,
        eig=eig,
        correlation=K,
        source_point=traj.point,
        snapshot_levels=levels,
    )


def numerical_rank(eigvals, mode_tol=MODE_TOL):
    return int(np.count_nonzero(eigvals > mode_tol * eigvals[0]))


def quad_pack(a):
    """``[a1 a1, a1 a2, ..., a1 aM, a2 a2, ..., aM aM]``."""
    a = np.asarray(a, dtype=float)
    i, j = np.triu_indices(a.shape[0])
    return a[i] * a[j]


def gamma_hat(gamma):
    """Rows ``[g1 g1, 2 g1 g2, ..., 2 g1 gM, g2 g2, ...]`` of nodal mode products."""
    m = gamma.shape[1]
    i, j = np.triu_indices(m)
    return gamma[:, i] * gamma[:, j] * np.where(i == j, 1.0, 2.0)


@dataclass(frozen=True, eq=False)
class RomOperators:
    """Reduced matrices for ``mass_r a' = -lin_r a - 1/2 nhat quad_pack(a) - V(t)``.

    The load is ``V(t) = load_const - amp(t) * load_sigma`` where ``amp`` is the
    temporal amplitude of the forcing at the target point.
    """

    modes: np.ndarray
    mean_flow: np.ndarray
    mass_r: np.ndarray
    lin_r: np.ndarray
    nhat: np.ndarray
    gamma: np.ndarray
    gamma_hat: np.ndarray
    load_const: np.ndarray
    load_sigma: np.ndarray
    quad_tensor: np.ndarray

    @property
    def n_modes(self):
        return self.modes.shape[1]


def assemble_rom(basis, cfg):
    """Project the GFE operators onto ``basis.modes`` around ``basis.mean_flow``.

    Convection terms involving the mean flow are grouped the same way as
    in the full model, ``(U v)_x ~ Nmat (U * v)`` and
    ``(U U')  ~ 1/2 Nmat (U * U)``, so a basis spanning the whole FE space
    reproduces the GFE dynamics.
    """
    ops = cfg.ops
    psi = np.asarray(basis.modes, dtype=float)
    U = np.asarray(basis.mean_flow, dtype=float)
    if psi.shape[0] != ops.n or U.shape[0] != ops.n:
        raise MeshMismatch(f"basis has {psi.shape[0]} nodes, mesh has {ops.n}")
    mu = ops.mu
    gamma = psi
    ghat = gamma_hat(gamma)
    nhat = gamma.T @ ops.advection @ ghat
    mass_r = psi.T @ ops.mass @ psi
    lin_r = mu * psi.T @ ops.stiffness @ psi + psi.T @ ops.advection @ (U[:, None] * psi)
    load_const = 0.5 * psi.T @ _advect(U * U) + mu * psi.T @ (ops.stiffness @ U)
    load_sigma = psi.T @ cfg.sigma_load

    m = psi.shape[1]
    i, j = np.triu_indices(m)
    T = np.zeros((m, m, m))
    T[:, i, j] = nhat
    quad_tensor = T + T.transpose(0, 2, 1)
    return RomOperators(psi, U, mass_r, lin_r, nhat, gamma, ghat, load_const, load_sigma, quad_tensor)


@dataclass(frozen=True, eq=False)
class RomSolution:
    times: np.ndarray
    coeffs: np.ndarray
    states: np.ndarray
    point: RandomPoint = None

    @property
    def final(self):
        return self.states[-1]

    def as_trajectory(self):
        return Trajectory(self.times, self.states, self.point)


def initial_coeffs(rom, alpha0, ops):
    """Galerkin projection of ``alpha0 - U`` onto the modes."""
    rhs = rom.modes.T @ (ops.mass @ (alpha0 - rom.mean_flow))
    return np.linalg.solve(rom.mass_r, rhs)


def solve_rom(zeta, rom, cfg):
    """Crank-Nicolson + Newton on the reduced system at the point ``zeta``.

    Returns the reduced coefficients and the lifted FE coefficients
    ``U + modes @ a`` at every time level.
    """
    c = 0.5 * cfg.dt
    amps = cfg.amplitudes(zeta)
    Mr, Lr, Nh, Tq = rom.mass_r, rom.lin_r, rom.nhat, rom.quad_tensor
    jac_lin = Mr + c * Lr

    coeffs = np.empty((cfg.steps + 1, rom.n_modes))
    a = initial_coeffs(rom, cfg.alpha0, cfg.ops)
    coeffs[0] = a
    for k in range(cfg.steps):
        v_sum = 2.0 * rom.load_const - (amps[k] + amps[k + 1]) * rom.load_sigma
        fixed = -Mr @ a + c * (Lr @ a + 0.5 * Nh @ quad_pack(a) + v_sum)
        x = a.copy()
        for it in range(NEWTON_MAXITER + 1):
            res = Mr @ x + c * (Lr @ x + 0.5 * Nh @ quad_pack(x)) + fixed
            rnorm = np.max(np.abs(res))
            if rnorm <= NEWTON_TOL:
                break
            if it == NEWTON_MAXITER or not np.isfinite(rnorm):
                raise NewtonDivergence(f"ROM Newton stalled at step {k + 1} (residual {rnorm:.3e})", step=k + 1, residual=rnorm)
            J = jac_lin + (0.5 * c) * (Tq @ x)
            x = x - np.linalg.solve(J, res)
        coeffs[k + 1] = x
        a = x
    states = rom.mean_flow[None, :] + coeffs @ rom.modes.T
    return RomSolution(cfg.times.copy(), coeffs, states, zeta)


def relative_error(approx, exact, ops):
    """Relative mass-weighted L2 error of FE coefficient vectors (or rows of them)."""
    approx = np.atleast_2d(approx)
    exact = np.atleast_2d(exact)
    diff = approx - exact
    num = np.einsum("ki,ij,kj->", diff, ops.mass, diff)
    den = np.einsum("ki,ij,kj->", exact, ops.mass, exact)
    return float(np.sqrt(num / den))


def write_modes_csv(basis, mesh, path):
    psi = basis.modes
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x"] + [f"psi_{j}" for j in range(1, psi.shape[1] + 1)] + ["U"])
        for x, row, u in zip(mesh.interior, psi, basis.mean_flow):
            writer.writerow([fmt(x)] + [fmt(v) for v in row] + [fmt(u)])
