"""Sensitivity of POD eigenpairs and modes along a direction in the random space.

For the line ``xi + theta (zeta - xi)``, the snapshot derivative ``Y_theta``
comes from the linearized Burgers equation

    z_t + (z u)_x = mu z_xx + d/dtheta f,   z(0) = 0,

discretized as the exact derivative of the Crank-Nicolson GFE step, so the
result agrees with finite differences of :func:`mfcolloc.fem.solve_gfe`.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBasis, DimMismatch, GridMismatch, NearDegenerateEigenvalue, RankDeficient
from .fem import _advect
from .forcing import RandomPoint
from .linalg import minnorm_solve, mass_orthonormalize, tridiag_matvec, tridiag_solve, EigDecomposition
from .rom import MODE_TOL, snapshot_indices

GAP_TOL = 1e-6
NULL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class SensitivityBundle:
    y_theta: np.ndarray
    k_theta: np.ndarray
    lam_theta: np.ndarray
    z_theta: np.ndarray
    psi_theta: np.ndarray
    direction: np.ndarray
    base: object

    @property
    def n_modes(self):
        return self.psi_theta.shape[1]


@dataclass(frozen=True, eq=False)
class ImprovedBasis:
    kind: str
    modes: np.ndarray
    mean_flow: np.ndarray
    delta_theta: float
    dropped: tuple = ()
    degenerate: bool = False

    @property
    def n_modes(self):
        return self.modes.shape[1]


def solve_sensitivity_pde(xi, zeta, traj, cfg=None):
    """Sensitivity trajectory ``z`` (all time levels) of the GFE solve at ``xi``.

    Each step solves the linear system

        [M + dt/2 (mu A + Nmat diag(alpha_new))] z_new
            = [M - dt/2 (mu A + Nmat diag(alpha_old))] z_old + dt/2 (D_new + D_old)

    with ``alpha`` read from ``traj`` and ``D`` the load of the forcing
    derivative.
    """
    cfg = traj.config if cfg is None else cfg
    if traj.states.shape != (cfg.steps + 1, cfg.ops.n) or not np.array_equal(traj.times, cfg.times):
        raise GridMismatch("trajectory was not produced on this mesh/time grid")
    if xi.dim != zeta.dim:
        raise DimMismatch("direction endpoints differ in dimension")
    ops = cfg.ops
    mu = ops.mu
    c = 0.5 * cfg.dt
    dirs = cfg.amplitudes(RandomPoint(zeta.coords - xi.coords)) if np.any(zeta.coords != xi.coords) else np.zeros(cfg.steps + 1)
    load = cfg.sigma_load
    mlo, mdi, mup = ops.mass_bands
    slo, sdi, sup = ops.stiffness_bands
    jdiag = mdi + c * mu * sdi
    alpha = traj.states

    z = np.zeros_like(alpha)
    if not np.any(dirs):
        return z
    for k in range(cfg.steps):
        zo, ao = z[k], alpha[k]
        rhs = tridiag_matvec(mlo, mdi, mup, zo) - c * (mu * tridiag_matvec(slo, sdi, sup, zo) + _advect(ao * zo))
        rhs += c * (dirs[k] + dirs[k + 1]) * load
        an = alpha[k + 1]
        upper = mup + c * (mu * sup + 0.5 * an[1:])
        lower = mlo + c * (mu * slo - 0.5 * an[:-1])
        z[k + 1] = tridiag_solve(lower, jdiag, upper, rhs)
    return z


def snapshot_sensitivity(xi, zeta, traj, count, cfg=None, include_initial=False, levels=None):
    """``Y_theta``: the sensitivity trajectory sampled at the snapshot times.

    ``levels`` (as stored on a :class:`PodBasis`) overrides ``count``.
    """
    z = solve_sensitivity_pde(xi, zeta, traj, cfg)
    idx = snapshot_indices(len(traj.times) - 1, count, include_initial) if levels is None else levels
    return z[idx].T.copy()


def correlation_sensitivity(Y, y_theta, mass_chol):
    """``K_theta = (1/S) (Yw_theta^T Yw + Yw^T Yw_theta)`` with ``Yw = L^T Y``."""
    Y = np.asarray(Y, dtype=float)
    y_theta = np.asarray(y_theta, dtype=float)
    if Y.shape != y_theta.shape or mass_chol.shape[0] != Y.shape[0]:
        raise DimMismatch("snapshots, their sensitivity and the mass factor disagree")
    Yw = mass_chol.T @ Y
    Yw_t = mass_chol.T @ y_theta
    C = Yw_t.T @ Yw
    return (C + C.T) / Y.shape[1]


def check_gaps(values, n_modes, gap_tol=GAP_TOL):
    """Raise :class:`NearDegenerateEigenvalue` for a retained eigenvalue without a clear gap.

    The gap is measured relative to the larger of the two eigenvalues, so
    graded spectra are accepted as long as neighbours are well separated
    on their own scale.
    """
    lam = np.asarray(values)
    for k in range(n_modes):
        others = np.delete(np.arange(lam.shape[0]), k)
        gaps = np.abs(lam[k] - lam[others])
        scale = np.maximum(np.abs(lam[k]), np.abs(lam[others]))
        bad = gaps <= gap_tol * scale
        if np.any(bad):
            j = int(others[np.argmax(bad)])
            raise NearDegenerateEigenvalue(f"eigenvalues {k} and {j} are not separated ({lam[k]:.6e} vs {lam[j]:.6e})", pair=(k, j))


def eigen_sensitivity(K, k_theta, eig, n_modes, null_tol=NULL_TOL, gap_tol=GAP_TOL):
    """Derivatives of the leading ``n_modes`` eigenpairs of ``K``.

    ``lam_theta[k] = Z_k^T K_theta Z_k``; the eigenvector derivative is the
    minimum-norm solution ``S_k`` of
    ``(K - lam_k I) x = -(K_theta - lam_theta[k] I) Z_k`` with its component
    along ``Z_k`` removed. The null space of ``K - lam_k I`` is detected
    relative to ``|lam_k|``.
    """
    check_gaps(eig.values, n_modes, gap_tol)
    Z = eig.vectors
    lam = eig.values
    S = Z.shape[0]
    lam_theta = np.empty(n_modes)
    z_theta = np.empty((S, n_modes))
    eye = np.eye(S)
    for k in range(n_modes):
        zk = Z[:, k]
        lt = zk @ k_theta @ zk
        lam_theta[k] = lt
        rhs = -(k_theta @ zk - lt * zk)
        shifted = EigDecomposition(lam - lam[k], Z)
        spread = np.max(np.abs(shifted.values))
        tol = null_tol * abs(lam[k]) / spread if spread > 0 else null_tol
        sk = minnorm_solve(K - lam[k] * eye, rhs, null_tol=tol, eig=shifted)
        z_theta[:, k] = sk - (zk @ sk) * zk
    return lam_theta, z_theta


def mode_sensitivity(basis, y_theta, z_theta, lam_theta, mode_tol=MODE_TOL):
    """Derivative of ``psi = Y Z (S Lambda)^(-1/2)``:

        Y_theta Z (S Lambda)^(-1/2) + Y Z_theta (S Lambda)^(-1/2) - 1/2 psi Lambda_theta Lambda^(-1)
    """
    m = lam_theta.shape[0]
    lam = basis.eig.values[:m]
    if not lam[m - 1] > mode_tol * basis.eig.values[0]:
        raise RankDeficient(f"eigenvalue {m} too small for a mode derivative")
    S = basis.snapshot_count
    scale = 1.0 / np.sqrt(S * lam)
    Z = basis.eig.vectors[:, :m]
    psi = basis.modes[:, :m]
    return (y_theta @ Z) * scale + (basis.snapshots @ z_theta) * scale - 0.5 * psi * (lam_theta / lam)


def compute_bundle(basis, traj, zeta, n_modes=None, cfg=None, direction_scale=1.0):
    """Full sensitivity chain for the direction ``direction_scale * (zeta - xi)``.

    ``xi`` is the source point of ``basis``/``traj``. Use
    ``direction_scale = 1 / ||zeta - xi||`` for a unit direction.
    """
    cfg = traj.config if cfg is None else cfg
    xi = traj.point
    n_modes = basis.n_modes if n_modes is None else n_modes
    target = RandomPoint(xi.coords + direction_scale * (zeta.coords - xi.coords))
    y_theta = snapshot_sensitivity(xi, target, traj, basis.snapshot_count, cfg, levels=basis.snapshot_levels)
    k_theta = correlation_sensitivity(basis.snapshots, y_theta, cfg.ops.chol)
    lam_theta, z_theta = eigen_sensitivity(basis.correlation, k_theta, basis.eig, n_modes)
    psi_theta = mode_sensitivity(basis, y_theta, z_theta, lam_theta)
    return SensitivityBundle(y_theta, k_theta, lam_theta, z_theta, psi_theta, target.coords - xi.coords, basis)


def improve_basis(basis, bundle, kind, delta_theta, mass, strict=False):
    """Extrapolated (``psi + dtheta psi_theta``) or expanded (``[psi | psi_theta]``) basis.

    Both are mass-orthonormalized by twice-applied modified Gram-Schmidt.
    For the expanded basis, sensitivity columns that vanish after
    projection are dropped; if all of them vanish the original modes are
    returned with ``degenerate=True`` (or :class:`DegenerateBasis` is raised
    when ``strict``).
    """
    m = bundle.n_modes
    psi = basis.modes[:, :m]
    if kind == "extrapolated":
        modes, dropped = mass_orthonormalize(psi + delta_theta * bundle.psi_theta, mass)
        if dropped:
            raise DegenerateBasis(f"extrapolated modes {dropped} became linearly dependent")
        return ImprovedBasis(kind, modes, basis.mean_flow, float(delta_theta))
    if kind == "expanded":
        modes, dropped = mass_orthonormalize(np.hstack([psi, bundle.psi_theta]), mass)
        degenerate = modes.shape[1] == m
        if degenerate:
            if strict:
                raise DegenerateBasis("every sensitivity column vanished after projection")
            warnings.warn("expanded basis: all sensitivity columns dropped, returning the original modes", stacklevel=2)
        return ImprovedBasis(kind, modes, basis.mean_flow, float(delta_theta), tuple(dropped), degenerate)
    raise ValueError(f"unknown basis kind {kind!r}")
