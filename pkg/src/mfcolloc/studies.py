"""Sensitivity studies: finite-difference check of the derivative chain and the
basis-improvement comparison along a line in the random space."""

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .fem import fmt, solve_gfe
from .forcing import RandomPoint
from .rom import assemble_rom, build_pod_basis, relative_error, solve_rom
from .sensitivity import compute_bundle, improve_basis

VARIANTS = ("pod10", "extrapolated10", "expanded10", "pod20", "extrapolated20")


def study_points(seed, d):
    """Source point and unit direction drawn from ``default_rng(seed)``."""
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal(d)
    zeta = rng.standard_normal(d)
    u = (zeta - xi) / np.linalg.norm(zeta - xi)
    return RandomPoint(xi), u


def _rel(a, b):
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / nb) if nb > 0 else float(np.linalg.norm(a))


@dataclass(frozen=True)
class FdReport:
    y_error: float
    lam_errors: np.ndarray
    z_errors: np.ndarray
    psi_errors: np.ndarray
    orthogonality: float

    @property
    def worst(self):
        return max(self.y_error, self.lam_errors.max(), self.z_errors.max(), self.psi_errors.max())


def fd_check(cfg, xi, direction, snapshots, modes, h=1e-3, include_initial=False):
    """Compare analytic sensitivities with central differences of the POD pipeline.

    Relative errors are per mode (2-norm); eigenvector signs follow the
    library's convention on both sides, so no extra alignment is needed
    unless the spectrum is degenerate.
    """
    traj = solve_gfe(xi, cfg)
    basis = build_pod_basis(traj, snapshots, modes, include_initial=include_initial)
    target = RandomPoint(xi.coords + direction)
    bundle = compute_bundle(basis, traj, target, n_modes=modes, cfg=cfg)

    def at(t):
        tr = solve_gfe(RandomPoint(xi.coords + t * direction), cfg)
        return build_pod_basis(tr, snapshots, modes, include_initial=include_initial)

    bp, bm = at(h), at(-h)
    y_fd = (bp.snapshots - bm.snapshots) / (2 * h)
    lam_fd = (bp.eigvals - bm.eigvals) / (2 * h)
    signs = np.sign(np.sum(bp.eigvecs * bm.eigvecs, axis=0))
    z_fd = (bp.eigvecs - bm.eigvecs * signs) / (2 * h)
    psi_fd = (bp.modes - bm.modes * signs) / (2 * h)
    lam_err = np.abs(bundle.lam_theta - lam_fd) / np.abs(lam_fd)
    z_err = np.array([_rel(bundle.z_theta[:, k], z_fd[:, k]) for k in range(modes)])
    psi_err = np.array([_rel(bundle.psi_theta[:, k], psi_fd[:, k]) for k in range(modes)])
    D = bundle.psi_theta.T @ cfg.ops.mass @ basis.modes
    return FdReport(_rel(bundle.y_theta, y_fd), lam_err, z_err, psi_err, float(np.abs(D + D.T).max()))


def space_time_error(sol, ref, ops):
    """Relative mass-weighted L2 error over every time level after the first."""
    return relative_error(sol.states[1:], ref.states[1:], ops)


def basis_comparison(cfg, xi, direction, thetas, snapshots, include_initial=False):
    """ROM errors of plain, extrapolated and expanded bases along ``xi + theta * direction``.

    The sensitivity bundle is taken along the actual displacement
    ``theta * direction`` with a unit step, so at ``theta = 0`` every
    variant reduces to the plain POD basis.
    Returns ``{theta: {variant: error}}`` using :func:`space_time_error`.
    """
    traj = solve_gfe(xi, cfg)
    b10 = build_pod_basis(traj, snapshots, 10, include_initial=include_initial)
    b20 = build_pod_basis(traj, snapshots, 20, include_initial=include_initial)
    mass = cfg.ops.mass
    out = {}
    for th in thetas:
        point = RandomPoint(xi.coords + th * direction)
        ref = solve_gfe(point, cfg)
        bun10 = compute_bundle(b10, traj, point, n_modes=10, cfg=cfg)
        bun20 = compute_bundle(b20, traj, point, n_modes=20, cfg=cfg)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            bases = {
                "pod10": b10,
                "extrapolated10": improve_basis(b10, bun10, "extrapolated", 1.0, mass),
                "expanded10": improve_basis(b10, bun10, "expanded", 1.0, mass),
                "pod20": b20,
                "extrapolated20": improve_basis(b20, bun20, "extrapolated", 1.0, mass),
            }
        row = {}
        for name, basis in bases.items():
            sol = solve_rom(point, assemble_rom(basis, cfg), cfg)
            row[name] = space_time_error(sol, ref, cfg.ops)
        out[float(th)] = row
    return out


def write_comparison_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["theta", *VARIANTS])
        for th, row in rows.items():
            writer.writerow([fmt(th)] + [fmt(row[v]) for v in VARIANTS])


def write_fd_csv(report, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["mode", "lambda_rel_error", "z_rel_error", "psi_rel_error"])
        for k in range(report.lam_errors.shape[0]):
            writer.writerow([k + 1, fmt(report.lam_errors[k]), fmt(report.z_errors[k]), fmt(report.psi_errors[k])])
        writer.writerow(["Y", fmt(report.y_error), "", ""])
