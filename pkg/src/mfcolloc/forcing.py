"""Truncated Brownian forcing ``sigma(x) * sum_k xi_k h_k(t)`` on a cosine basis."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, InputError, OutOfRange


@dataclass(frozen=True)
class RandomPoint:
    """One realization of the ``d`` standard-normal coordinates."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float).reshape(-1)
        if c.size < 1:
            raise InputError("a random point needs at least one coordinate")
        if not np.all(np.isfinite(c)):
            raise InputError("random point coordinates must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def dim(self):
        return self.coords.shape[0]

    def __sub__(self, other):
        return RandomPoint(self.coords - other.coords)

    def __eq__(self, other):
        return isinstance(other, RandomPoint) and np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash(self.coords.tobytes())


def _cos4pi_sigma(x):
    return 0.1 * np.cos(4.0 * np.pi * np.asarray(x, dtype=float))


def _unit_sigma(x):
    return np.ones_like(np.asarray(x, dtype=float))


def _zero_sigma(x):
    return np.zeros_like(np.asarray(x, dtype=float))


SIGMA_BUILTINS = {"cos4pi": _cos4pi_sigma, "one": _unit_sigma, "zero": _zero_sigma}


@dataclass(frozen=True)
class ForcingSpec:
    """Spatial amplitude, time horizon and truncation dimension.

    ``sigma`` is either the name of a built-in amplitude (``"cos4pi"`` is
    ``0.1 cos(4 pi x)``) or a sequence of values tabulated on a uniform grid
    over ``[0, 1]`` and interpolated linearly.
    """

    horizon: float
    dim: int
    sigma: object = "cos4pi"
    basis: str = "trig"
    _sigma_fn: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.horizon > 0:
            raise InputError("horizon must be positive")
        if int(self.dim) != self.dim or self.dim < 1:
            raise InputError("dim must be a positive integer")
        if self.basis != "trig":
            raise InputError(f"unknown temporal basis {self.basis!r}")
        if isinstance(self.sigma, str):
            try:
                fn = SIGMA_BUILTINS[self.sigma]
            except KeyError:
                raise InputError(f"unknown sigma {self.sigma!r}; choose from {sorted(SIGMA_BUILTINS)}") from None
        else:
            values = np.array(self.sigma, dtype=float)
            if values.ndim != 1 or values.size < 2:
                raise InputError("tabulated sigma needs at least two values")
            grid = np.linspace(0.0, 1.0, values.size)
            object.__setattr__(self, "sigma", tuple(values))

            def fn(x, _g=grid, _v=values):
                return np.interp(x, _g, _v)

        object.__setattr__(self, "_sigma_fn", fn)

    def sigma_at(self, x):
        return self._sigma_fn(x)


def basis_eval(k, t, spec):
    """Value of the ``k``-th temporal basis function (1-based) at time ``t``."""
    T = spec.horizon
    if not 1 <= k <= spec.dim:
        raise OutOfRange(f"basis index {k} outside 1..{spec.dim}")
    if not 0.0 <= t <= T:
        raise OutOfRange(f"time {t} outside [0, {T}]")
    if k == 1:
        return 1.0 / np.sqrt(T)
    return np.sqrt(2.0 / T) * np.cos((k - 1) * np.pi * t / T)


def basis_values(t, dim, horizon):
    """All ``dim`` basis functions at the times ``t``; shape ``(len(t), dim)``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    k = np.arange(dim)
    out = np.sqrt(2.0 / horizon) * np.cos(np.outer(t, k) * np.pi / horizon)
    out[:, 0] = 1.0 / np.sqrt(horizon)
    return out


def _check_dim(point, spec):
    if point.dim != spec.dim:
        raise DimMismatch(f"point has {point.dim} coordinates, forcing expects {spec.dim}")


def temporal_amplitude(point, spec, t):
    """``sum_k xi_k h_k(t)``; vectorized over ``t``."""
    _check_dim(point, spec)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0) or np.any(t > spec.horizon):
        raise OutOfRange(f"time outside [0, {spec.horizon}]")
    amp = basis_values(t.reshape(-1), spec.dim, spec.horizon) @ point.coords
    return amp.reshape(t.shape)


def forcing_eval(point, spec, t, x):
    return spec.sigma_at(x) * temporal_amplitude(point, spec, t)


def forcing_theta_derivative(xi, zeta, spec, t, x):
    """Derivative of the forcing along ``xi + theta (zeta - xi)``."""
    _check_dim(xi, spec)
    _check_dim(zeta, spec)
    return forcing_eval(zeta - xi, spec, t, x)


def basis_antiderivative(k, s, horizon):
    """``int_0^s h_k``, closed form."""
    if k == 1:
        return s / np.sqrt(horizon)
    w = (k - 1) * np.pi / horizon
    return np.sqrt(2.0 / horizon) * np.sin(w * s) / w


def truncation_variance(d, s, horizon):
    """Mean-square error of the ``d``-term expansion of ``W(s)``."""
    if not 0.0 <= s <= horizon:
        raise OutOfRange(f"s={s} outside [0, {horizon}]")
    if d < 1:
        raise OutOfRange("d must be at least 1")
    c = np.array([basis_antiderivative(k, s, horizon) for k in range(1, d + 1)])
    return max(s - float(c @ c), 0.0)
