import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfcolloc.errors import BadCount, MeshMismatch, RankDeficient
from mfcolloc.fem import Mesh1D, Trajectory, assemble, solve_gfe
from mfcolloc.forcing import RandomPoint
from mfcolloc.linalg import eig_sym
from mfcolloc.rom import (
    PodBasis,
    assemble_rom,
    build_pod_basis,
    build_snapshots,
    correlation,
    gamma_hat,
    initial_coeffs,
    mean_flow,
    pod_modes,
    quad_pack,
    relative_error,
    snapshot_indices,
    solve_rom,
    write_modes_csv,
)

from conftest import make_cfg


def test_snapshot_selection(study_traj):
    Y, t = build_snapshots(study_traj, 20)
    np.testing.assert_array_equal(Y, study_traj.states[1:].T)
    Y1, t1 = build_snapshots(study_traj, 1)
    np.testing.assert_array_equal(Y1[:, 0], study_traj.final)
    assert t1[0] == study_traj.times[-1]
    np.testing.assert_array_equal(snapshot_indices(20, 10), np.arange(2, 21, 2))
    np.testing.assert_array_equal(snapshot_indices(20, 10, include_initial=True), np.r_[0, np.arange(2, 21, 2)])
    with pytest.raises(BadCount):
        snapshot_indices(20, 3)


def test_correlation_examples(study_cfg, rng):
    ops = study_cfg.ops
    w = rng.standard_normal(ops.n)
    K = correlation(w[:, None], ops.chol)
    assert K[0, 0] == pytest.approx(w @ ops.mass @ w, rel=1e-13)
    K2 = correlation(np.column_stack([w, w]), ops.chol)
    e = eig_sym(K2).values
    assert e[1] <= 1e-12 * e[0]
    Y = rng.standard_normal((ops.n, 4))
    np.testing.assert_allclose(correlation(Y, ops.chol), Y.T @ ops.mass @ Y / 4, rtol=1e-12, atol=1e-15)


def test_pod_single_snapshot(study_cfg, rng):
    ops = study_cfg.ops
    w = rng.standard_normal(ops.n)
    Y = w[:, None]
    psi = pod_modes(Y, eig_sym(correlation(Y, ops.chol)), 1, 1)
    np.testing.assert_allclose(np.abs(psi[:, 0]), np.abs(w) / np.sqrt(w @ ops.mass @ w), rtol=1e-12)


def test_pod_invariants(study_traj, study_cfg):
    ops = study_cfg.ops
    b = build_pod_basis(study_traj, 20, 10)
    assert np.abs(b.modes.T @ ops.mass @ b.modes - np.eye(10)).max() <= 1e-10
    assert np.all(b.eig.values >= 0)
    np.testing.assert_allclose(np.linalg.norm(b.eigvecs, axis=0), 1.0, atol=1e-14)
    energy = np.mean(np.einsum("ij,ik,kj->j", b.snapshots, ops.mass, b.snapshots))
    assert abs(b.eig.values.sum() - energy) <= 1e-10 * energy


def test_full_rank_reconstruction():
    # 7 unknowns and 20 snapshots: rank(Y) = 7 exactly
    cfg = make_cfg(intervals=8)
    ops = cfg.ops
    from mfcolloc.rom import numerical_rank

    tr = solve_gfe(RandomPoint([0.4, -0.7, 1.1]), cfg)
    b0 = build_pod_basis(tr, 20, 1)
    r = numerical_rank(b0.eig.values)
    assert r == ops.n
    b = build_pod_basis(tr, 20, r)
    proj = b.modes @ (b.modes.T @ ops.mass @ b.snapshots)
    assert np.linalg.norm(proj - b.snapshots) <= 1e-8 * np.linalg.norm(b.snapshots)


def test_rank_deficient(study_traj):
    with pytest.raises(RankDeficient):
        build_pod_basis(study_traj, 20, 20)


def test_mean_flow():
    a, b = np.array([1.0, 2.0]), np.array([3.0, -2.0])
    np.testing.assert_array_equal(mean_flow(np.column_stack([a, a])), a)
    np.testing.assert_array_equal(mean_flow(np.column_stack([a, b])), (a + b) / 2)


def test_quad_pack_examples():
    np.testing.assert_array_equal(quad_pack([2.0, 3.0]), [4.0, 6.0, 9.0])
    np.testing.assert_array_equal(quad_pack([0.0, 1.0, 0.0]), [0, 0, 0, 1, 0, 0])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_packing_identity(m, seed):
    r = np.random.default_rng(seed)
    gamma = r.standard_normal((9, m))
    a = r.standard_normal(m)
    lhs = gamma_hat(gamma) @ quad_pack(a)
    rhs = (gamma @ a) ** 2
    assert np.abs(lhs - rhs).max() <= 1e-13 * max(1.0, np.abs(rhs).max())


def test_assemble_rom_properties(study_traj, study_cfg):
    ops = study_cfg.ops
    b1 = build_pod_basis(study_traj, 20, 1)
    r1 = assemble_rom(b1, study_cfg)
    assert r1.nhat.shape == (1, 1)
    np.testing.assert_allclose(r1.nhat[:, 0], b1.modes.T @ ops.advection @ (b1.modes[:, 0] ** 2), rtol=1e-13)
    b = build_pod_basis(study_traj, 20, 10)
    rom = assemble_rom(b, study_cfg)
    assert rom.nhat.shape == (10, 55)
    np.testing.assert_allclose(rom.mass_r, np.eye(10), atol=1e-10)
    np.testing.assert_allclose(rom.nhat, rom.gamma.T @ ops.advection @ rom.gamma_hat)
    zero_u = PodBasis(b.modes, b.eigvals, b.eigvecs, np.zeros(ops.n), b.snapshots, b.snapshot_times, b.eig, b.correlation)
    lin = assemble_rom(zero_u, study_cfg).lin_r
    np.testing.assert_allclose(lin, lin.T, atol=1e-12)
    assert np.all(np.linalg.eigvalsh(0.5 * (lin + lin.T)) > 0)


def test_mesh_mismatch(study_traj):
    b = build_pod_basis(study_traj, 20, 4)
    with pytest.raises(MeshMismatch):
        assemble_rom(b, make_cfg(intervals=16))


def test_full_basis_rom_reproduces_gfe():
    cfg = make_cfg(intervals=8, steps=20)
    xi = RandomPoint([0.3, -1.2, 0.8])
    tr = solve_gfe(xi, cfg)
    b = build_pod_basis(tr, 20, cfg.ops.n)
    sol = solve_rom(xi, assemble_rom(b, cfg), cfg)
    idx = snapshot_indices(20, 20)
    assert relative_error(sol.states[idx], tr.states[idx], cfg.ops) <= 1e-6


def test_study_rom_accuracy_with_initial_snapshot(study_cfg):
    xi = RandomPoint([0.4, -0.7, 1.1])
    tr = solve_gfe(xi, study_cfg)
    b = build_pod_basis(tr, 20, 10, include_initial=True)
    sol = solve_rom(xi, assemble_rom(b, study_cfg), study_cfg)
    assert relative_error(sol.final, tr.final, study_cfg.ops) < 0.01


def test_unforced_rom_from_mean(study_traj, study_cfg):
    b = build_pod_basis(study_traj, 20, 6)
    rom = assemble_rom(b, study_cfg)
    a0 = initial_coeffs(rom, b.mean_flow, study_cfg.ops)
    assert np.abs(a0).max() < 1e-12


def test_modes_csv(study_traj, study_cfg, tmp_path):
    b = build_pod_basis(study_traj, 20, 3)
    path = tmp_path / "modes.csv"
    write_modes_csv(b, study_cfg.mesh, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,psi_1,psi_2,psi_3,U"
    assert len(lines) == study_cfg.ops.n + 1
