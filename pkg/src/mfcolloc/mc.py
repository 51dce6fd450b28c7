"""Monte Carlo reference moments of the final-time solution.

Sample ``i`` of a run with seed ``s`` draws its standard normals from
``Philox(SeedSequence([s, i]))``, a counter-based generator whose stream is
fixed by the two integers alone. Samples can therefore be produced in any
order (or in parallel) without changing the result.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InputError, MfcError, NodeFailure
from .fem import SolverConfig, solve_gfe
from .forcing import RandomPoint


def sample_point(seed, index, d):
    """Deterministic standard-normal point for ``(seed, index)``."""
    if seed < 0 or index < 0:
        raise InputError("seed and index must be non-negative")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))
    return RandomPoint(rng.standard_normal(int(d)))


@dataclass(frozen=True)
class McConfig:
    samples: int
    seed: int
    solver: SolverConfig

    def __post_init__(self):
        if int(self.samples) != self.samples or self.samples < 1:
            raise InputError("samples must be a positive integer")


@dataclass(frozen=True, eq=False)
class McResult:
    mean: np.ndarray
    second_moment: np.ndarray
    se_mean: np.ndarray
    samples: int

    @property
    def variance(self):
        return self.second_moment - self.mean**2


def mc_moments(cfg, progress=None):
    """Sample mean, sample second moment and standard error of the mean of ``u(T, .)``.

    Accumulation is in index order. The standard error uses the unbiased
    sample variance; with a single sample it is ``nan``.
    """
    solver = cfg.solver
    n = cfg.samples
    acc1 = np.zeros(solver.ops.n)
    acc2 = np.zeros(solver.ops.n)
    dev1 = np.zeros(solver.ops.n)  # deviations from the first sample, for a stable variance
    dev2 = np.zeros(solver.ops.n)
    shift = None
    for i in range(n):
        point = sample_point(cfg.seed, i, solver.forcing.dim)
        try:
            u = solve_gfe(point, solver).final
        except MfcError as exc:
            raise NodeFailure(i, exc) from exc
        acc1 += u
        acc2 += u * u
        if shift is None:
            shift = u.copy()
        dv = u - shift
        dev1 += dv
        dev2 += dv * dv
        if progress is not None:
            progress(i)
    mean = acc1 / n
    second = acc2 / n
    if n > 1:
        var = np.maximum(dev2 - dev1**2 / n, 0.0) / (n - 1)
        se = np.sqrt(var / n)
    else:
        se = np.full_like(mean, np.nan)
    return McResult(mean, second, se, n)
