"""Multi-fidelity collocation: reuse nearby high-fidelity solves through improved ROMs.

Nodes are visited in plan order (ascending Smolyak level, then
lexicographic coordinates). A node with a cached high-fidelity solve in its
max-norm ``eta``-ball is computed by a reduced model whose basis is the
donor's POD basis extrapolated toward the node; every other node is solved
by the GFE model and cached.
"""

import csv
import json
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, MfcError, NearDegenerateEigenvalue, NodeFailure, RankDeficient
from .fem import fmt, solve_gfe
from .forcing import RandomPoint
from .rom import assemble_rom, build_pod_basis, build_snapshots, numerical_rank, pod_eig, relative_error, solve_rom
from .sensitivity import compute_bundle, improve_basis
from .sparse_grid import LEVEL_CONVENTION, moments

HIGH = "high-fidelity"
REDUCED = "reduced"


@dataclass(frozen=True)
class MultifidSettings:
    snapshots: int = 20
    modes: int = 10
    kind: str = "extrapolated"
    delta_theta: float = 1.0
    extrapolate_mean: bool = False
    include_initial: bool = True


@dataclass(frozen=True, eq=False)
class CacheEntry:
    point: RandomPoint
    trajectory: object
    basis: object
    node: int


class SolveCache:
    """High-fidelity solves keyed by their random point, searched in the max-norm ball."""

    def __init__(self, eta, dim):
        self.eta = float(eta)
        self.entries = []
        self._pts = np.empty((0, dim))

    def __len__(self):
        return len(self.entries)

    def insert(self, entry):
        if len(self.entries) == self._pts.shape[0]:
            grown = np.empty((max(16, 2 * self._pts.shape[0]), self._pts.shape[1]))
            grown[: len(self.entries)] = self._pts[: len(self.entries)]
            self._pts = grown
        self._pts[len(self.entries)] = entry.point.coords
        self.entries.append(entry)

    def lookup(self, zeta):
        n = len(self.entries)
        if n == 0:
            return None
        diff = self._pts[:n] - zeta.coords
        inside = np.max(np.abs(diff), axis=1) < self.eta
        if not inside.any():
            return None
        d2 = np.where(inside, np.einsum("ij,ij->i", diff, diff), np.inf)
        return self.entries[int(np.argmin(d2))]  # argmin keeps the earliest on ties


def neighborhood_lookup(cache, zeta):
    """Nearest (Euclidean) cached entry with max-coordinate distance ``< eta``, or ``None``."""
    return cache.lookup(zeta)


@dataclass(eq=False)
class RunReport:
    eta: float
    fe_calls: int
    rom_calls: int
    tags: list
    donors: np.ndarray
    finals: np.ndarray
    mean: np.ndarray
    second_moment: np.ndarray
    diagnostics: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)
    convention: str = LEVEL_CONVENTION

    @property
    def variance(self):
        return self.second_moment - self.mean**2

    @property
    def node_count(self):
        return len(self.tags)


def _reduced_solve(entry, zeta, cfg, settings, diagnostics, index):
    basis = entry.basis
    m = basis.n_modes
    while True:
        try:
            bundle = compute_bundle(basis, entry.trajectory, zeta, n_modes=m, cfg=cfg)
            break
        except NearDegenerateEigenvalue as exc:
            m = min(exc.pair)
            diagnostics.append({"node": index, "event": "modes truncated", "modes": m, "pair": list(exc.pair)})
            if m < 1:
                raise
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        improved = improve_basis(basis, bundle, settings.kind, settings.delta_theta, cfg.ops.mass)
    if settings.extrapolate_mean:
        shift = settings.delta_theta * bundle.y_theta.mean(axis=1)
        improved = type(improved)(improved.kind, improved.modes, basis.mean_flow + shift, improved.delta_theta, improved.dropped, improved.degenerate)
    rom = assemble_rom(improved, cfg)
    return solve_rom(zeta, rom, cfg).final


def _high_solve(index, zeta, cfg, settings, memo):
    if memo is not None and index in memo:
        return memo[index]
    traj = solve_gfe(zeta, cfg)
    inc = settings.include_initial
    try:
        basis = build_pod_basis(traj, settings.snapshots, settings.modes, include_initial=inc)
    except RankDeficient:
        # fewer informative snapshots than requested modes: keep what is there
        Y, _ = build_snapshots(traj, settings.snapshots, inc)
        rank = numerical_rank(pod_eig(Y, cfg.ops.chol)[0].values)
        basis = build_pod_basis(traj, settings.snapshots, min(settings.modes, rank), include_initial=inc)
    if memo is not None:
        memo[index] = (traj, basis)
    return traj, basis


def run_multifid(plan, eta, cfg, settings=None, memo=None, progress=None):
    """Multi-fidelity sweep over ``plan`` with neighbourhood radius ``eta``.

    ``memo`` (a dict keyed by node index) shares high-fidelity solves and
    their bases between runs on the same plan and configuration; results
    are unaffected because those solves are deterministic.
    """
    settings = MultifidSettings() if settings is None else settings
    if plan.dim != cfg.forcing.dim:
        raise DimMismatch(f"plan has dimension {plan.dim}, forcing has {cfg.forcing.dim}")
    cache = SolveCache(eta, plan.dim)
    n = plan.size
    finals = np.empty((n, cfg.ops.n))
    tags = []
    donors = np.full(n, -1, dtype=np.int64)
    diagnostics = []
    t_high = t_red = 0.0
    for i in range(n):
        zeta = RandomPoint(plan.nodes[i])
        try:
            entry = cache.lookup(zeta)
            if entry is None:
                t0 = time.perf_counter()
                traj, basis = _high_solve(i, zeta, cfg, settings, memo)
                t_high += time.perf_counter() - t0
                cache.insert(CacheEntry(zeta, traj, basis, i))
                finals[i] = traj.final
                tags.append(HIGH)
            else:
                t0 = time.perf_counter()
                finals[i] = _reduced_solve(entry, zeta, cfg, settings, diagnostics, i)
                t_red += time.perf_counter() - t0
                donors[i] = entry.node
                tags.append(REDUCED)
        except MfcError as exc:
            if isinstance(exc, NodeFailure):
                raise
            raise NodeFailure(i, exc) from exc
        if progress is not None:
            progress(i, tags[-1])
    fe = tags.count(HIGH)
    return RunReport(
        eta=float(eta),
        fe_calls=fe,
        rom_calls=n - fe,
        tags=tags,
        donors=donors,
        finals=finals,
        mean=moments(plan, finals, 1),
        second_moment=moments(plan, finals, 2),
        diagnostics=diagnostics,
        timing={"high_fidelity_s": t_high, "reduced_s": t_red},
    )


def reference_full_run(plan, cfg, memo=None, settings=None):
    """High-fidelity solve at every node (the ``eta = 0`` limit)."""
    return run_multifid(plan, 0.0, cfg, settings=settings, memo=memo)


def moment_errors(report, reference, ops):
    """Relative mass-weighted L2 errors of the moment fields at the final time."""
    return {
        "mean": relative_error(report.mean, reference.mean, ops),
        "second_moment": relative_error(report.second_moment, reference.second_moment, ops),
        "variance": relative_error(report.variance, reference.variance, ops),
    }


def check_coverage(report, plan):
    """Every reduced node has a high-fidelity donor within ``eta`` in the max norm."""
    for i, tag in enumerate(report.tags):
        if tag == REDUCED:
            j = report.donors[i]
            if j < 0 or report.tags[j] != HIGH:
                return False
            if not np.max(np.abs(plan.nodes[i] - plan.nodes[j])) < report.eta:
                return False
    return True


def summary_dict(report, errors=None):
    out = {"eta": report.eta, "fe_calls": report.fe_calls, "rom_calls": report.rom_calls, "level_convention": report.convention}
    if errors is not None:
        out["errors"] = errors
    return out


def write_summary_json(report, path, errors=None):
    with open(path, "w") as fh:
        json.dump(summary_dict(report, errors), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_moments_csv(mean, second_moment, mesh, path, se_mean=None):
    header = ["x", "mean", "second_moment"] + (["se_mean"] if se_mean is not None else [])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        cols = [mesh.interior, mean, second_moment] + ([se_mean] if se_mean is not None else [])
        for row in zip(*cols):
            writer.writerow([fmt(v) for v in row])
