"""Linear observation model ``y = H x0 + n`` with ``n ~ N(0, sigma_y2 I_p)``."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ._linalg import COND_LIMIT, spd_inv, spd_solve, sym
from .errors import ConfigError, NumericalGuardError


def pinv(H) -> np.ndarray:
    """Right pseudo-inverse ``H^T (H H^T)^{-1}`` of a full-row-rank ``H``.

    Rank-deficient or badly conditioned ``H`` raises instead of falling back to SVD.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    p, d = H.shape
    if p > d:
        raise ConfigError(f"H must be wide or square (got {p}x{d})")
    gram = H @ H.T
    try:
        return spd_solve(gram, H, name="H H^T").T
    except NumericalGuardError as exc:
        raise NumericalGuardError(f"H is rank deficient or ill conditioned: {exc}") from None


@dataclass(frozen=True, eq=False)
class LinearObservation:
    H: np.ndarray
    sigma_y2: float
    y: np.ndarray
    H_pinv: np.ndarray = field(init=False, repr=False)
    P: np.ndarray = field(init=False, repr=False)
    Pc: np.ndarray = field(init=False, repr=False)
    canonical: bool = field(init=False)

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        p, d = H.shape
        if y.shape != (p,):
            raise ConfigError(f"y must have length {p} (got shape {y.shape})")
        if not self.sigma_y2 >= 0:
            raise ConfigError("sigma_y2 must be nonnegative")
        Hp = pinv(H)
        P = sym(Hp @ H)
        Pc = np.eye(d) - P
        canonical = np.array_equal(H, np.hstack([np.eye(p), np.zeros((p, d - p))]))
        for name, arr in (("H", H), ("y", y), ("H_pinv", Hp), ("P", P), ("Pc", Pc)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "sigma_y2", float(self.sigma_y2))
        object.__setattr__(self, "canonical", bool(canonical))

    @classmethod
    def identity_prefix(cls, p: int, d: int, sigma_y2: float, y) -> "LinearObservation":
        """``H = [I_p 0]``: observe the first ``p`` coordinates."""
        if not 1 <= p <= d:
            raise ConfigError(f"need 1 <= p <= d (got p={p}, d={d})")
        return cls(np.hstack([np.eye(p), np.zeros((p, d - p))]), sigma_y2, y)

    @property
    def p(self) -> int:
        return self.H.shape[0]

    @property
    def d(self) -> int:
        return self.H.shape[1]

    @property
    def Hy(self) -> np.ndarray:
        """``H^dagger y``, the observation lifted into ``range(P)``."""
        return self.H_pinv @ self.y

    @property
    def noise_cov(self) -> np.ndarray:
        """``H^dagger (H^dagger)^T``."""
        return self.H_pinv @ self.H_pinv.T

    def with_(self, **changes) -> "LinearObservation":
        kw = {"H": self.H, "sigma_y2": self.sigma_y2, "y": self.y}
        kw.update(changes)
        return LinearObservation(**kw)

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (self.H, self.y, np.array([self.sigma_y2])):
            h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return h.hexdigest()[:16]

    def q0y_exists(self) -> bool:
        """Whether the conditional data law has a density (canonical H, positive noise)."""
        return self.canonical and self.sigma_y2 > 0


def sigma_t0y(model: LinearObservation, sched, t: int) -> np.ndarray:
    """``alpha_bar_t sigma_y2 H^dagger H^dagger^T + (1 - alpha_bar_t) I``."""
    ab = sched.alpha_bar_at(t)
    if t == 0:
        raise IndexError("step 0 has no forward noise")
    return ab * model.sigma_y2 * model.noise_cov + sched.one_minus_alpha_bar_at(t) * np.eye(model.d)


def sigma_t0y_inv(model: LinearObservation, sched, t: int) -> np.ndarray:
    return spd_inv(sigma_t0y(model, sched, t), name="Sigma_{t|0,y}")


def conditional_forward_params(model: LinearObservation, sched, t: int, x0):
    """Mean and covariance of ``x_t`` given ``(x0, y)`` under the conditional forward model."""
    x0 = np.asarray(x0, dtype=float)
    s = np.sqrt(sched.alpha_bar_at(t))
    mean = s * (x0 @ model.Pc.T + model.Hy)
    return mean, sigma_t0y(model, sched, t)


def parse_model(spec: dict, d: int | None = None) -> LinearObservation:
    """Build a model from config: explicit ``H`` or ``identity_prefix`` plus ``sigma_y2`` and ``y``."""
    spec = dict(spec)
    allowed = {"H", "identity_prefix", "d", "sigma_y2", "y"}
    unknown = set(spec) - allowed
    if unknown:
        raise ConfigError(f"model: unknown keys {sorted(unknown)}")
    if ("H" in spec) == ("identity_prefix" in spec):
        raise ConfigError("model: give exactly one of 'H' or 'identity_prefix'")
    for key in ("sigma_y2", "y"):
        if key not in spec:
            raise ConfigError(f"model: missing key {key!r}")
    if "H" in spec:
        return LinearObservation(np.asarray(spec["H"], dtype=float), spec["sigma_y2"], spec["y"])
    dim = spec.get("d", d)
    if dim is None:
        raise ConfigError("model: identity_prefix needs 'd'")
    return LinearObservation.identity_prefix(int(spec["identity_prefix"]), int(dim), spec["sigma_y2"], spec["y"])


__all__ = [
    "COND_LIMIT",
    "LinearObservation",
    "conditional_forward_params",
    "parse_model",
    "pinv",
    "sigma_t0y",
    "sigma_t0y_inv",
]
