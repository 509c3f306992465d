"""Noise schedules for the DDPM forward process.

Two families are provided: a constant step ``1 - alpha_t = c ln(T) / T`` and the
exponential-then-constant schedule that starts at ``1 - alpha_1 = delta`` and grows
geometrically until it saturates at ``c ln(T) / T``. Cumulative products are kept in
the log domain so that ``alpha_bar_t ** p`` stays representable at large ``T``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class ScheduleReport:
    max_scaled_step: float  # max_t (1 - alpha_t) * T / ln T
    alpha_bar_T_times_T: float
    crossover: int | None = None  # first t with 1 - alpha_t == c ln T / T
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Retention factors ``alpha_t`` for ``t = 1..T`` plus cached cumulative logs.

    ``beta`` holds ``1 - alpha_t`` directly, which is more accurate than forming
    ``1 - alpha`` when steps are tiny.
    """

    T: int
    beta: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)
    report: ScheduleReport | None = None

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        if beta.shape != (self.T,):
            raise ConfigError(f"expected {self.T} step sizes, got shape {beta.shape}")
        if not np.all((beta > 0) & (beta < 1)):
            raise ConfigError("every 1 - alpha_t must lie in (0, 1)")
        beta.setflags(write=False)
        log_alpha = np.log1p(-beta)
        # Extended-precision accumulation keeps exp(log_alpha_bar) within ~1e-15 of
        # the serial product even for long schedules.
        log_alpha_bar = np.cumsum(log_alpha.astype(np.longdouble)).astype(float)
        log_alpha.setflags(write=False)
        log_alpha_bar.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "log_alpha", log_alpha)
        object.__setattr__(self, "log_alpha_bar", log_alpha_bar)

    @property
    def alpha(self) -> np.ndarray:
        return 1.0 - self.beta

    @property
    def alpha_bar(self) -> np.ndarray:
        return np.exp(self.log_alpha_bar)

    def _check(self, t, allow_zero=False):
        lo = 0 if allow_zero else 1
        if not (lo <= t <= self.T):
            raise IndexError(f"step {t} outside [{lo}, {self.T}]")

    def alpha_at(self, t: int) -> float:
        self._check(t)
        return float(1.0 - self.beta[t - 1])

    def beta_at(self, t: int) -> float:
        self._check(t)
        return float(self.beta[t - 1])

    def alpha_bar_at(self, t: int) -> float:
        """``alpha_bar_t``; ``t = 0`` gives 1."""
        self._check(t, allow_zero=True)
        return 1.0 if t == 0 else float(math.exp(self.log_alpha_bar[t - 1]))

    def one_minus_alpha_bar_at(self, t: int) -> float:
        self._check(t, allow_zero=True)
        return 0.0 if t == 0 else float(-math.expm1(self.log_alpha_bar[t - 1]))

    def sigma_at(self, t: int) -> float:
        return sigma_t(self, t)

    def describe(self) -> str:
        inner = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{self.kind}(T={self.T}, {inner})"

    def rows(self):
        """Yield ``(t, alpha_t, alpha_bar_t, sigma_t)`` for CSV export."""
        ab = self.alpha_bar
        for t in range(1, self.T + 1):
            yield t, 1.0 - self.beta[t - 1], ab[t - 1], sigma_t(self, t)


def _report(T, beta, log_alpha_bar, crossover=None, notes=()):
    return ScheduleReport(
        max_scaled_step=float(np.max(beta) * T / math.log(T)),
        alpha_bar_T_times_T=float(math.exp(log_alpha_bar[-1]) * T),
        crossover=crossover,
        warnings=tuple(notes),
    )


def make_constant(T: int, c: float) -> NoiseSchedule:
    """Constant schedule ``1 - alpha_t = c ln(T) / T`` with ``c > 1``."""
    T = int(T)
    if T < 2:
        raise ConfigError("T must be at least 2")
    if not c > 1:
        raise ConfigError(f"c must exceed 1 (got {c}); alpha_bar_T would not be o(1/T)")
    step = c * math.log(T) / T
    if not step < 1:
        raise ConfigError(f"T={T} too small for c={c}: c ln(T)/T = {step:.3f} >= 1")
    beta = np.full(T, step)
    sched = NoiseSchedule(T, beta, "constant", {"c": float(c)})
    report = _report(T, beta, sched.log_alpha_bar, crossover=1)
    object.__setattr__(sched, "report", report)
    return sched


def make_exp_then_const(T: int, c: float, delta: float, strict: bool = False) -> NoiseSchedule:
    """Exponential-then-constant schedule.

    ``1 - alpha_1 = delta`` and, for ``t >= 2``,
    ``1 - alpha_t = a * min(delta * (1 + a)**t, 1)`` with ``a = c ln(T) / T``.

    The theory asks for ``delta * e**c > 1``. Commonly used settings (``c=3``,
    ``delta=1e-4``) break it, so by default a violation is recorded in the report
    and warned about; ``strict=True`` turns it into an error.
    """
    T = int(T)
    if T < 2:
        raise ConfigError("T must be at least 2")
    if not c > 1:
        raise ConfigError(f"c must exceed 1 (got {c})")
    if not 0 < delta < 1:
        raise ConfigError(f"delta must lie in (0, 1) (got {delta})")
    a = c * math.log(T) / T
    if not a < 1:
        raise ConfigError(f"T={T} too small for c={c}: c ln(T)/T = {a:.3f} >= 1")
    notes = []
    if not delta * math.exp(c) > 1:
        msg = f"delta*e^c = {delta * math.exp(c):.4g} <= 1"
        if strict:
            raise ConfigError(msg)
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)

    t = np.arange(2, T + 1, dtype=float)
    log_growth = math.log(delta) + t * math.log1p(a)
    beta = np.empty(T)
    beta[0] = delta
    beta[1:] = a * np.exp(np.minimum(log_growth, 0.0))
    saturated = np.nonzero(log_growth >= 0.0)[0]
    crossover = int(saturated[0]) + 2 if saturated.size else None

    sched = NoiseSchedule(T, beta, "exp_then_const", {"c": float(c), "delta": float(delta)})
    report = _report(T, beta, sched.log_alpha_bar, crossover=crossover, notes=notes)
    object.__setattr__(sched, "report", report)
    return sched


def sigma_t(sched: NoiseSchedule, t: int) -> float:
    """Reverse-step standard deviation ``sqrt((1 - alpha_t) / alpha_t)``."""
    b = sched.beta_at(t)
    return math.sqrt(b / (1.0 - b))


def coefficient_sum(sched: NoiseSchedule, p: float) -> float:
    """``sum_{t=2}^T (1 - alpha_t) * alpha_bar_t**p`` summed in ascending ``t``."""
    if not p > 0:
        raise ConfigError("p must be positive")
    if sched.kind == "exp_then_const" and not sched.params["delta"] * p < 1:
        raise ConfigError("need delta * p < 1 for the exponential-then-constant schedule")
    terms = sched.beta[1:] * np.exp(p * sched.log_alpha_bar[1:])
    return float(math.fsum(terms))


def constant_sum_closed_form(T: int, c: float, p: float) -> float:
    """Asymptotic value ``(1/p)(1 - 2 p c ln T / T)`` claimed for the constant schedule."""
    return (1.0 - 2.0 * p * c * math.log(T) / T) / p


def constant_sum_second_order(T: int, c: float, p: float) -> float:
    """Same expansion keeping the ``(p - 1) a / 2`` term the closed form above omits."""
    a = c * math.log(T) / T
    return (1.0 - 2.0 * p * a + 0.5 * (p - 1.0) * a) / p


def exp_sum_upper_bound(T: int, c: float, p: float) -> float:
    """Upper bound ``1/p - (1 + (p+1)/(2p)) c ln T / T`` for small ``delta``."""
    return 1.0 / p - (1.0 + (p + 1.0) / (2.0 * p)) * c * math.log(T) / T


def make_schedule(spec: dict) -> NoiseSchedule:
    """Build a schedule from a config mapping (``kind``, ``T``, ``c``[, ``delta``, ``strict``])."""
    spec = dict(spec)
    kind = spec.pop("kind", "exp_then_const")
    allowed = {"constant": {"T", "c"}, "exp_then_const": {"T", "c", "delta", "strict"}}
    if kind not in allowed:
        raise ConfigError(f"schedule.kind: unknown kind {kind!r}")
    unknown = set(spec) - allowed[kind]
    if unknown:
        raise ConfigError(f"schedule: unknown keys {sorted(unknown)}")
    missing = allowed[kind] - {"strict"} - set(spec)
    if missing:
        raise ConfigError(f"schedule: missing keys {sorted(missing)}")
    if kind == "constant":
        return make_constant(spec["T"], spec["c"])
    return make_exp_then_const(spec["T"], spec["c"], spec["delta"], strict=spec.get("strict", False))
