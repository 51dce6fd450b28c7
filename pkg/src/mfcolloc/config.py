"""Study configuration: a JSON document with flat sections.

Example::

    {"problem": {"T": 0.8, "mu": 0.01, "sigma": "cos4pi", "u0": "expcos", "d": 3},
     "discretization": {"intervals": 32, "steps": 20, "snapshots": 20, "modes": 10},
     "collocation": {"q": 8, "L": 4.0, "eta": [16, 4, 1, 0.5, 0.25]},
     "mc": {"n": 10000, "seed": 0},
     "outputs": {"directory": "out", "formats": ["csv", "json"]}}

Missing keys take the defaults below; unknown keys are rejected.
"""

import json
from dataclasses import asdict, dataclass, field, fields, replace

from .errors import ConfigError
from .fem import Mesh1D, SolverConfig
from .forcing import SIGMA_BUILTINS, ForcingSpec
from .fem import U0_BUILTINS
from .multifid import MultifidSettings


@dataclass(frozen=True)
class Problem:
    T: float = 0.8
    mu: float = 0.01
    sigma: object = "cos4pi"
    u0: str = "expcos"
    d: int = 3


@dataclass(frozen=True)
class Discretization:
    intervals: int = 32
    steps: int = 20
    snapshots: int = 20
    modes: int = 10
    include_initial: bool = True


@dataclass(frozen=True)
class Collocation:
    q: int = 8
    L: float = 4.0
    eta: tuple = (16.0, 4.0, 1.0, 0.5, 0.25)
    kind: str = "extrapolated"
    extrapolate_mean: bool = False
    max_nodes: int = 250_000


@dataclass(frozen=True)
class Mc:
    n: int = 10_000
    seed: int = 0


@dataclass(frozen=True)
class Sensitivity:
    seed: int = 7
    thetas: tuple = (-0.5, -0.4, -0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
    h: float = 1e-3


@dataclass(frozen=True)
class Point:
    xi: tuple = None
    zeta: tuple = None


@dataclass(frozen=True)
class Outputs:
    directory: str = "out"
    formats: tuple = ("csv", "json")


SECTIONS = {
    "problem": Problem,
    "discretization": Discretization,
    "collocation": Collocation,
    "mc": Mc,
    "sensitivity": Sensitivity,
    "point": Point,
    "outputs": Outputs,
}


@dataclass(frozen=True)
class StudyConfig:
    problem: Problem = field(default_factory=Problem)
    discretization: Discretization = field(default_factory=Discretization)
    collocation: Collocation = field(default_factory=Collocation)
    mc: Mc = field(default_factory=Mc)
    sensitivity: Sensitivity = field(default_factory=Sensitivity)
    point: Point = field(default_factory=Point)
    outputs: Outputs = field(default_factory=Outputs)

    def solver(self):
        p, disc = self.problem, self.discretization
        forcing = ForcingSpec(float(p.T), int(p.d), sigma=p.sigma if isinstance(p.sigma, str) else tuple(p.sigma))
        return SolverConfig(Mesh1D.from_intervals(disc.intervals), float(p.mu), int(disc.steps), forcing, u0=p.u0)

    def multifid_settings(self):
        disc, col = self.discretization, self.collocation
        return MultifidSettings(
            snapshots=disc.snapshots,
            modes=disc.modes,
            kind=col.kind,
            extrapolate_mean=col.extrapolate_mean,
            include_initial=disc.include_initial,
        )

    def to_dict(self):
        return asdict(self)


PRESETS = {
    "table1": {},
    "figure1": {
        "problem": {"d": 10},
        "discretization": {"intervals": 64, "steps": 200, "snapshots": 200, "modes": 10},
    },
}


def _positive(name, value, kind=float, allow_zero=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, "must be a number")
    if kind is int and int(value) != value:
        raise ConfigError(name, "must be an integer")
    if not (value >= 0 if allow_zero else value > 0):
        raise ConfigError(name, "must be positive" if not allow_zero else "must be non-negative")
    return kind(value)


def _validate(cfg):
    p, disc, col, mc, sens = cfg.problem, cfg.discretization, cfg.collocation, cfg.mc, cfg.sensitivity
    _positive("problem.T", p.T)
    _positive("problem.mu", p.mu)
    _positive("problem.d", p.d, int)
    if isinstance(p.sigma, str):
        if p.sigma not in SIGMA_BUILTINS:
            raise ConfigError("problem.sigma", f"unknown name {p.sigma!r}; choose from {sorted(SIGMA_BUILTINS)}")
    elif not isinstance(p.sigma, (list, tuple)) or len(p.sigma) < 2 or not all(isinstance(v, (int, float)) for v in p.sigma):
        raise ConfigError("problem.sigma", "must be a built-in name or a list of at least 2 numbers")
    if p.u0 not in U0_BUILTINS:
        raise ConfigError("problem.u0", f"unknown name {p.u0!r}; choose from {sorted(U0_BUILTINS)}")
    _positive("discretization.intervals", disc.intervals, int)
    if disc.intervals < 3:
        raise ConfigError("discretization.intervals", "need at least 3 intervals")
    _positive("discretization.steps", disc.steps, int)
    _positive("discretization.snapshots", disc.snapshots, int)
    _positive("discretization.modes", disc.modes, int)
    if disc.steps % disc.snapshots:
        raise ConfigError("discretization.snapshots", f"{disc.snapshots} does not divide {disc.steps} steps")
    if not isinstance(disc.include_initial, bool):
        raise ConfigError("discretization.include_initial", "must be true or false")
    _positive("collocation.q", col.q, int, allow_zero=True)
    _positive("collocation.L", col.L)
    _positive("collocation.max_nodes", col.max_nodes, int)
    if not isinstance(col.eta, (list, tuple)) or not col.eta:
        raise ConfigError("collocation.eta", "must be a non-empty list")
    for v in col.eta:
        _positive("collocation.eta", v)
    if col.kind not in ("extrapolated", "expanded"):
        raise ConfigError("collocation.kind", "must be 'extrapolated' or 'expanded'")
    if not isinstance(col.extrapolate_mean, bool):
        raise ConfigError("collocation.extrapolate_mean", "must be true or false")
    _positive("mc.n", mc.n, int)
    _positive("mc.seed", mc.seed, int, allow_zero=True)
    _positive("sensitivity.seed", sens.seed, int, allow_zero=True)
    _positive("sensitivity.h", sens.h)
    if not isinstance(sens.thetas, (list, tuple)) or not sens.thetas:
        raise ConfigError("sensitivity.thetas", "must be a non-empty list")
    for name in ("xi", "zeta"):
        v = getattr(cfg.point, name)
        if v is not None and (not isinstance(v, (list, tuple)) or len(v) != p.d):
            raise ConfigError(f"point.{name}", f"must be a list of {p.d} numbers")
    if not isinstance(cfg.outputs.directory, str):
        raise ConfigError("outputs.directory", "must be a string")
    return cfg


def _merge(base, overrides):
    kwargs = {}
    for sec, values in overrides.items():
        if sec not in SECTIONS:
            raise ConfigError(sec, "unknown section")
        if not isinstance(values, dict):
            raise ConfigError(sec, "section must be an object")
        cls = SECTIONS[sec]
        known = {f.name for f in fields(cls)}
        for key in values:
            if key not in known:
                raise ConfigError(f"{sec}.{key}", "unknown key")
        current = getattr(base, sec)
        conv = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
        kwargs[sec] = replace(current, **conv)
    return replace(base, **kwargs)


def from_dict(data, preset=None):
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be an object")
    base = StudyConfig()
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError("preset", f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        base = _merge(base, PRESETS[preset])
    return _validate(_merge(base, data))


def load(path, preset=None):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return from_dict(data, preset)


def override(cfg, section, **values):
    """Replace keys of one section and re-validate (used for command-line flags)."""
    return _validate(_merge(cfg, {section: values}))
