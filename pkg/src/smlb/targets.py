"""Analytic Gaussian and Gaussian-mixture targets.

Everything here is closed form. A mixture with shared covariance stays a mixture with
shared covariance under both the unconditional noising and the conditional forward
model, so one set of helpers (``_mix_*``) serves both target types; a Gaussian is
handled as a single-component mixture.

Batched inputs are ``(n, d)`` arrays; a single ``(d,)`` point is also accepted and
returns unbatched results.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from ._linalg import check_spd, spd_factor, spd_inv, sym
from .errors import ConfigError, NumericalGuardError

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class GaussianTarget:
    mu0: np.ndarray
    Sigma0: np.ndarray

    def __post_init__(self):
        mu0 = np.atleast_1d(np.asarray(self.mu0, dtype=float))
        S = np.atleast_2d(np.asarray(self.Sigma0, dtype=float))
        if S.shape != (mu0.size, mu0.size):
            raise ConfigError(f"Sigma0 must be {mu0.size}x{mu0.size}")
        check_spd(S, "Sigma0")
        mu0.setflags(write=False)
        S.setflags(write=False)
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "Sigma0", S)

    @property
    def d(self) -> int:
        return self.mu0.size

    @property
    def weights(self) -> np.ndarray:
        return np.ones(1)

    @property
    def means(self) -> np.ndarray:
        return self.mu0[None, :]

    def digest(self) -> str:
        return _digest(self.mu0, self.Sigma0)


@dataclass(frozen=True, eq=False)
class MixtureTarget:
    """Equal-covariance Gaussian mixture ``sum_n pi_n N(mu_n, Sigma0)``."""

    weights: np.ndarray
    means: np.ndarray
    Sigma0: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        M = np.atleast_2d(np.asarray(self.means, dtype=float))
        S = np.atleast_2d(np.asarray(self.Sigma0, dtype=float))
        if M.shape[0] != w.size:
            raise ConfigError(f"{w.size} weights but {M.shape[0]} means")
        if S.shape != (M.shape[1], M.shape[1]):
            raise ConfigError(f"Sigma0 must be {M.shape[1]}x{M.shape[1]}")
        if np.any(w < 0) or not np.isclose(w.sum(), 1.0, rtol=0, atol=1e-12):
            raise ConfigError("mixture weights must be nonnegative and sum to 1")
        check_spd(S, "Sigma0")
        for name, arr in (("weights", w), ("means", M), ("Sigma0", S)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def d(self) -> int:
        return self.means.shape[1]

    def digest(self) -> str:
        return _digest(self.weights, self.means, self.Sigma0)


@dataclass(frozen=True)
class ConditionedGaussianLaw:
    mean: np.ndarray
    cov: np.ndarray


def _digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return h.hexdigest()[:16]


def correlated_covariance(variances, p: int, rho: float, within: float | None = None) -> np.ndarray:
    """Covariance with given per-coordinate variances and cross-block correlation ``rho``.

    Every pair ``(i, j)`` with ``i < p <= j`` gets correlation ``rho``. Pairs inside a
    block get ``within`` (default ``rho``), which keeps the matrix SPD for all
    ``rho in [0, 1)``.
    """
    v = np.asarray(variances, dtype=float)
    d = v.size
    if not 1 <= p < d:
        raise ConfigError(f"need 1 <= p < d (got p={p}, d={d})")
    if np.any(v <= 0):
        raise ConfigError("variances must be positive")
    within = rho if within is None else within
    R = np.full((d, d), float(within))
    R[:p, p:] = rho
    R[p:, :p] = rho
    np.fill_diagonal(R, 1.0)
    sd = np.sqrt(v)
    S = R * np.outer(sd, sd)
    try:
        check_spd(S, "Sigma0")
    except NumericalGuardError as exc:
        raise ConfigError(f"rho={rho}, within={within} does not give an SPD covariance: {exc}") from None
    return S


# --- shared mixture machinery -------------------------------------------------


def _as_batch(x):
    x = np.asarray(x, dtype=float)
    return (x[None, :], True) if x.ndim == 1 else (x, False)


def _mix_log_components(weights, means, cov, x):
    """``log pi_n + log N(x; m_n, cov)`` as an ``(n, N)`` array, plus the Cholesky factor."""
    c, lower = spd_factor(cov, "component covariance")
    d = cov.shape[0]
    logdet = 2.0 * np.sum(np.log(np.diag(c)))
    diff = x[:, None, :] - means[None, :, :]  # (n, N, d)
    z = linalg.solve_triangular(c, diff.reshape(-1, d).T, lower=lower).T.reshape(diff.shape)
    quad = np.einsum("nkd,nkd->nk", z, z)
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    return logw[None, :] - 0.5 * (quad + logdet + d * LOG_2PI), (c, lower)


def _mix_logpdf(weights, means, cov, x):
    lc, _ = _mix_log_components(weights, means, cov, x)
    return logsumexp(lc, axis=1)


def _mix_resp_T(weights, means, prec, x):
    """Responsibilities laid out component-major, shape ``(N, n)``.

    With a shared covariance the ``-x'Px/2`` term is common to every component and
    cancels in the normalisation, so the logits are affine in ``x``. Reducing over
    the leading axis keeps the softmax fast when ``N`` is small.
    """
    mp = means @ prec
    with np.errstate(divide="ignore"):
        offset = np.log(weights) - 0.5 * np.einsum("kd,kd->k", mp, means)
    r = mp @ x.T + offset[:, None]
    r -= r.max(axis=0)
    np.exp(r, out=r)
    r /= r.sum(axis=0)
    return r, mp


def _mix_responsibilities(weights, means, cov, x):
    prec = spd_inv(cov, "component covariance")
    r, _ = _mix_resp_T(weights, means, prec, x)
    return r.T


def _mix_score(weights, means, cov, x):
    prec = spd_inv(cov, "component covariance")
    if weights.size == 1:
        return (means[0] - x) @ prec
    r, mp = _mix_resp_T(weights, means, prec, x)
    return r.T @ mp - x @ prec


def _mix_sample(weights, means, cov, n, rng):
    d = cov.shape[0]
    comp = rng.choice(weights.size, size=n, p=weights) if weights.size > 1 else np.zeros(n, dtype=int)
    L = np.linalg.cholesky(cov)
    return means[comp] + rng.standard_normal((n, d)) @ L.T


# --- laws at time t -----------------------------------------------------------


def marginal_components(target, sched, t: int):
    """Component means and shared covariance of the noised marginal ``Q_t``."""
    ab = sched.alpha_bar_at(t)
    cov = ab * target.Sigma0 + sched.one_minus_alpha_bar_at(t) * np.eye(target.d)
    return np.sqrt(ab) * target.means, sym(cov)


def signal_cov(target, model, sched, t: int) -> np.ndarray:
    """``alpha_bar_t Pc Sigma0 Pc + (1 - alpha_bar_t) I``."""
    ab = sched.alpha_bar_at(t)
    Pc = model.Pc
    return sym(ab * Pc @ target.Sigma0 @ Pc + sched.one_minus_alpha_bar_at(t) * np.eye(target.d))


def conditioned_components(target, model, sched, t: int):
    """Component means and shared covariance of ``Q_{t|y}``.

    The conditional data law keeps the prior weights and replaces each component by
    ``N(Pc mu_n + H^dagger y, Pc Sigma0 Pc + sigma_y2 H^dagger H^dagger^T)``.
    """
    _check_dims(target, model)
    ab = sched.alpha_bar_at(t)
    means = np.sqrt(ab) * (target.means @ model.Pc.T + model.Hy)
    cov = signal_cov(target, model, sched, t) + ab * model.sigma_y2 * model.noise_cov
    return means, sym(cov)


def conditioned_law(target: GaussianTarget, model, sched, t: int) -> ConditionedGaussianLaw:
    if not isinstance(target, GaussianTarget):
        raise ConfigError("conditioned_law is defined for Gaussian targets only")
    means, cov = conditioned_components(target, model, sched, t)
    return ConditionedGaussianLaw(means[0], cov)


def _check_dims(target, model):
    if target.d != model.d:
        raise ConfigError(f"target dimension {target.d} does not match model dimension {model.d}")


def _require_cond_density(model, t):
    if t == 0 and not model.q0y_exists():
        raise NumericalGuardError("q_{0|y} has no density unless H = [I_p 0] and sigma_y2 > 0")


# --- public oracles -----------------------------------------------------------


def sample_prior(target, rng, n: int) -> np.ndarray:
    if n < 1:
        raise ConfigError("n must be positive")
    return _mix_sample(target.weights, target.means, target.Sigma0, n, rng)


def logpdf_t(target, sched, t: int, x):
    """``log q_t(x)``; ``t = 0`` is the target density itself."""
    xb, single = _as_batch(x)
    if t == 0:
        means, cov = target.means, target.Sigma0
    else:
        means, cov = marginal_components(target, sched, t)
    out = _mix_logpdf(target.weights, means, cov, xb)
    return out[0] if single else out


def logpdf_cond(target, model, sched, t: int, x):
    """``log q_{t|y}(x)``."""
    _require_cond_density(model, t)
    xb, single = _as_batch(x)
    means, cov = conditioned_components(target, model, sched, t)
    out = _mix_logpdf(target.weights, means, cov, xb)
    return out[0] if single else out


def responsibilities(target, sched, t: int, x, model=None):
    """Posterior component weights at ``x`` under ``Q_t`` (or ``Q_{t|y}`` when ``model`` is given)."""
    xb, single = _as_batch(x)
    if model is None:
        means, cov = marginal_components(target, sched, t) if t else (target.means, target.Sigma0)
    else:
        _require_cond_density(model, t)
        means, cov = conditioned_components(target, model, sched, t)
    r = _mix_responsibilities(target.weights, means, cov, xb)
    return r[0] if single else r


def score_uncond(target, sched, t: int, x):
    """``grad log q_t(x)``."""
    xb, single = _as_batch(x)
    if t == 0:
        means, cov = target.means, target.Sigma0
    else:
        means, cov = marginal_components(target, sched, t)
    out = _mix_score(target.weights, means, cov, xb)
    return out[0] if single else out


def score_cond(target, model, sched, t: int, x):
    """``grad log q_{t|y}(x)``."""
    _require_cond_density(model, t)
    xb, single = _as_batch(x)
    means, cov = conditioned_components(target, model, sched, t)
    out = _mix_score(target.weights, means, cov, xb)
    return out[0] if single else out


def posterior_mean(target, model, sched, t: int, x):
    """Tweedie mean ``E[X_{t-1} | x_t, y] = (x + (1 - alpha_t) score_cond) / sqrt(alpha_t)``.

    ``t = 1`` maps onto the data level and therefore needs ``q_{0|y}`` to exist.
    """
    if t < 1:
        raise IndexError("posterior mean needs t >= 1")
    if t == 1:
        _require_cond_density(model, 0)
    x = np.asarray(x, dtype=float)
    a = sched.alpha_at(t)
    return (x + sched.beta_at(t) * score_cond(target, model, sched, t, x)) / np.sqrt(a)


def sample_cond(target, model, sched, t: int, n: int, rng) -> np.ndarray:
    """Draw ``n`` points from ``Q_{t|y}`` (component first, then the Gaussian)."""
    _require_cond_density(model, t)
    if n < 1:
        raise ConfigError("n must be positive")
    means, cov = conditioned_components(target, model, sched, t)
    return _mix_sample(target.weights, means, cov, n, rng)


# --- config parsing -----------------------------------------------------------


def _cov_from_spec(spec, d, where):
    if "Sigma0" in spec:
        return np.asarray(spec["Sigma0"], dtype=float)
    try:
        variances = spec["variances"]
        p = int(spec["p"])
        rho = float(spec["rho"])
    except KeyError as exc:
        raise ConfigError(f"{where}: need 'Sigma0' or 'variances' + 'p' + 'rho' (missing {exc.args[0]!r})") from None
    if len(variances) != d:
        raise ConfigError(f"{where}.variances: expected {d} entries")
    return correlated_covariance(variances, p, rho, spec.get("within"))


def parse_target(spec: dict):
    spec = dict(spec)
    kind = spec.get("kind")
    cov_keys = {"Sigma0", "variances", "p", "rho", "within"}
    if kind == "gaussian":
        allowed = {"kind", "mu0"} | cov_keys
        unknown = set(spec) - allowed
        if unknown:
            raise ConfigError(f"target: unknown keys {sorted(unknown)}")
        if "mu0" not in spec:
            raise ConfigError("target: missing key 'mu0'")
        mu0 = np.asarray(spec["mu0"], dtype=float)
        return GaussianTarget(mu0, _cov_from_spec(spec, mu0.size, "target"))
    if kind == "mixture":
        allowed = {"kind", "weights", "means"} | cov_keys
        unknown = set(spec) - allowed
        if unknown:
            raise ConfigError(f"target: unknown keys {sorted(unknown)}")
        for key in ("weights", "means"):
            if key not in spec:
                raise ConfigError(f"target: missing key {key!r}")
        means = np.atleast_2d(np.asarray(spec["means"], dtype=float))
        return MixtureTarget(spec["weights"], means, _cov_from_spec(spec, means.shape[1], "target"))
    raise ConfigError(f"target.kind: expected 'gaussian' or 'mixture' (got {kind!r})")
