"""Zero-shot conditional DDPM samplers and exact law propagation for Gaussian targets.

A reverse step maps ``x_t`` to ``(x + (1 - alpha_t) g(x)) / sqrt(alpha_t) + sigma_t z``.
For the zero-shot kinds the drift is ``g = Pc s_t(x) + f(x)`` where ``s_t`` is the
(possibly perturbed) unconditional score and ``f`` is a rectifier living in
``range(P)``. The oracle kind uses the true conditional score instead.
"""

from __future__ import annotations

import os
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import targets as tg
from ._linalg import spd_inv, sym
from .errors import ConfigError
from .linear_model import sigma_t0y, sigma_t0y_inv

KINDS = ("oracle", "ccdf", "ddnm", "ddnmplus", "boddnm")
_ALIASES = {"ddnm+": "ddnmplus", "bo-ddnm": "boddnm", "bo_ddnm": "boddnm", "ddnm_plus": "ddnmplus"}

# Chains are processed in fixed-size blocks, each with its own RNG stream keyed by
# (seed, block index). Changing this changes every sample, so it is part of the
# reproducibility contract and is recorded in run metadata.
BLOCK_SIZE = 8192

DUMP_MAGIC = b"SMLB"
DUMP_VERSION = 1


def canonical_kind(kind: str) -> str:
    k = str(kind).lower()
    k = _ALIASES.get(k, k)
    if k not in KINDS:
        raise ConfigError(f"unknown sampler kind {kind!r}; expected one of {KINDS}")
    return k


@dataclass(frozen=True)
class SamplerSpec:
    """Sampler kind plus score source.

    ``eps > 0`` perturbs the unconditional score with i.i.d. ``N(0, eps^2)`` noise at
    every step (a stand-in for a learned score's estimation error).
    """

    kind: str
    eps: float = 0.0
    stop_t: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", canonical_kind(self.kind))
        if not self.eps >= 0:
            raise ConfigError("eps must be nonnegative")
        if self.stop_t not in (0, 1):
            raise ConfigError("stop_t must be 0 or 1")

    @property
    def exact(self) -> bool:
        return self.eps == 0

    def validate(self, model):
        if self.kind == "ddnmplus" and not model.canonical:
            raise ConfigError("DDNM+ is only defined for H = [I_p 0]")
        if self.stop_t == 0 and not model.q0y_exists():
            raise ConfigError("stop_t = 0 needs H = [I_p 0] and sigma_y2 > 0")

    def label(self) -> str:
        return self.kind if self.exact else f"{self.kind}(eps={self.eps:g})"


def parse_sampler(spec) -> SamplerSpec:
    if isinstance(spec, str):
        return SamplerSpec(spec)
    spec = dict(spec)
    unknown = set(spec) - {"kind", "eps", "stop_t"}
    if unknown:
        raise ConfigError(f"sampler: unknown keys {sorted(unknown)}")
    if "kind" not in spec:
        raise ConfigError("sampler: missing key 'kind'")
    return SamplerSpec(spec["kind"], float(spec.get("eps", 0.0)), int(spec.get("stop_t", 1)))


# --- rectifiers ---------------------------------------------------------------


def ddnmplus_scale(model, sched, t: int) -> float:
    """Weight on ``H^dagger y`` in the observed block for DDNM+ (1 means plain DDNM)."""
    a = np.sqrt(sched.alpha_bar_at(t - 1)) * sched.beta_at(t) / sched.one_minus_alpha_bar_at(t)
    noise = a * np.sqrt(model.sigma_y2)
    st = sched.sigma_at(t)
    return 1.0 if st >= noise else st / noise


def f_ty(kind, model, sched, t: int, x, x0t=None):
    """Rectifier ``f_{t,y}(x)``; ``x0t`` is the data-level estimate, used by DDNM+ only."""
    kind = canonical_kind(kind)
    x = np.asarray(x, dtype=float)
    ab = sched.alpha_bar_at(t)
    sab = np.sqrt(ab)
    Px = x @ model.P.T
    if kind == "boddnm":
        return (sab * model.Hy - Px) @ sigma_t0y_inv(model, sched, t).T
    if kind == "ddnm":
        return (sab * model.Hy - Px) / sched.one_minus_alpha_bar_at(t)
    if kind == "ccdf":
        a = sched.alpha_at(t)
        return (np.sqrt(a) * sab * model.Hy - Px) / sched.beta_at(t)
    if kind == "ddnmplus":
        if not model.canonical:
            raise ConfigError("DDNM+ is only defined for H = [I_p 0]")
        if x0t is None:
            raise ValueError("DDNM+ needs the data-level estimate x0t")
        lam = ddnmplus_scale(model, sched, t)
        anchor = lam * model.Hy + (1.0 - lam) * (np.asarray(x0t) @ model.P.T)
        return (sab * anchor - Px) / sched.one_minus_alpha_bar_at(t)
    raise ConfigError("the oracle sampler has no rectifier; use the conditional score")


def x0_estimate(sched, t: int, x, score):
    """Tweedie estimate of ``x_0`` from ``x_t``."""
    ab = sched.alpha_bar_at(t)
    return (x + sched.one_minus_alpha_bar_at(t) * score) / np.sqrt(ab)


def drift(spec: SamplerSpec, target, model, sched, t: int, x, rng=None):
    """Effective score ``g_{t,y}(x)`` used by the reverse step."""
    if spec.kind == "oracle":
        return tg.score_cond(target, model, sched, t, x)
    s = tg.score_uncond(target, sched, t, x)
    if spec.eps > 0:
        s = s + spec.eps * rng.standard_normal(s.shape)
    x0t = x0_estimate(sched, t, x, s) if spec.kind == "ddnmplus" else None
    return s @ model.Pc.T + f_ty(spec.kind, model, sched, t, x, x0t)


def reverse_step(spec: SamplerSpec, target, model, sched, t: int, x, rng=None, z=None):
    """One ancestral step ``x_t -> x_{t-1}``.

    Pass ``z`` to fix the injected noise (``z=0`` gives the deterministic mean map).
    """
    x = np.asarray(x, dtype=float)
    a = sched.alpha_at(t)
    g = drift(spec, target, model, sched, t, x, rng)
    mean = (x + sched.beta_at(t) * g) / np.sqrt(a)
    if z is None:
        z = rng.standard_normal(x.shape)
    return mean + sched.sigma_at(t) * z


# --- batched runs -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ReverseRun:
    samples: np.ndarray
    seed: int
    n: int
    spec: SamplerSpec
    metadata: dict = field(default_factory=dict)

    def to_csv(self, path):
        d = self.samples.shape[1]
        header = ",".join(f"x{i + 1}" for i in range(d))
        np.savetxt(path, self.samples, delimiter=",", header=header, comments="", fmt="%.17g")

    def to_binary(self, path):
        write_dump(path, self.samples)


def write_dump(path, samples):
    """Row-major little-endian float64 dump behind a 16-byte header."""
    samples = np.ascontiguousarray(samples, dtype="<f8")
    n, d = samples.shape
    with open(path, "wb") as fh:
        fh.write(DUMP_MAGIC + struct.pack("<III", DUMP_VERSION, n, d))
        fh.write(samples.tobytes())


def read_dump(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) != 16 or head[:4] != DUMP_MAGIC:
            raise ValueError(f"{path}: not a sample dump")
        version, n, d = struct.unpack("<III", head[4:])
        if version != DUMP_VERSION:
            raise ValueError(f"{path}: unsupported dump version {version}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n * d:
        raise ValueError(f"{path}: expected {n * d} values, found {data.size}")
    return data.reshape(n, d).astype(float)


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(block)]))


def _run_block(args):
    spec, target, model, sched, seed, block, size = args
    rng = block_rng(seed, block)
    x = rng.standard_normal((size, model.d))
    for t in range(sched.T, spec.stop_t, -1):
        x = reverse_step(spec, target, model, sched, t, x, rng)
    return x


def resolve_workers(workers=None) -> int:
    if workers is None:
        workers = int(os.environ.get("SMLB_WORKERS", "1") or 1)
    return max(1, int(workers))


def run_reverse(spec: SamplerSpec, target, model, sched, n: int, seed: int, workers=None) -> ReverseRun:
    """Run ``n`` chains from ``x_T ~ N(0, I)`` down to ``spec.stop_t``.

    The output depends only on ``(spec, target, model, sched, n, seed)``; blocks are
    seeded independently and concatenated in block order whatever ``workers`` is.
    """
    if n < 1:
        raise ConfigError("n must be positive")
    spec.validate(model)
    tg._check_dims(target, model)
    sizes = [min(BLOCK_SIZE, n - start) for start in range(0, n, BLOCK_SIZE)]
    jobs = [(spec, target, model, sched, seed, b, s) for b, s in enumerate(sizes)]
    workers = min(resolve_workers(workers), len(jobs))
    if workers == 1:
        parts = [_run_block(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, jobs))
    meta = {
        "schedule": sched.describe(),
        "model": model.digest(),
        "target": target.digest(),
        "block_size": BLOCK_SIZE,
    }
    return ReverseRun(np.vstack(parts), int(seed), int(n), spec, meta)


# --- exact propagation for Gaussian targets ----------------------------------


@dataclass(frozen=True, eq=False)
class AffineLawSequence:
    """Means and covariances of the sampler's law, indexed by ``t`` (entries below ``stop_t`` are NaN)."""

    means: np.ndarray  # (T + 1, d)
    covs: np.ndarray  # (T + 1, d, d)
    stop_t: int

    def at(self, t: int):
        if t < self.stop_t:
            raise IndexError(f"law not propagated below t={self.stop_t}")
        return self.means[t], self.covs[t]

    @property
    def terminal(self):
        return self.at(self.stop_t)


def affine_drift(spec: SamplerSpec, target: tg.GaussianTarget, model, sched, t: int):
    """``(G, g0)`` with ``g_{t,y}(x) = G x + g0`` for a Gaussian target and exact scores."""
    d = target.d
    eye = np.eye(d)
    ab = sched.alpha_bar_at(t)
    sab = np.sqrt(ab)
    oma = sched.one_minus_alpha_bar_at(t)
    P, Pc, Hy = model.P, model.Pc, model.Hy
    if spec.kind == "oracle":
        means, cov = tg.conditioned_components(target, model, sched, t)
        prec = spd_inv(cov, "Sigma_{t|y}")
        return -prec, prec @ means[0]
    cov_t = ab * target.Sigma0 + oma * eye
    S = -spd_inv(cov_t, "Sigma_t")
    s0 = -S @ (sab * target.mu0)
    if spec.kind == "boddnm":
        K = spd_inv(sigma_t0y(model, sched, t), "Sigma_{t|0,y}")
        F, f0 = -K @ P, sab * K @ Hy
    elif spec.kind == "ddnm":
        F, f0 = -P / oma, sab * Hy / oma
    elif spec.kind == "ccdf":
        b = sched.beta_at(t)
        F, f0 = -P / b, np.sqrt(sched.alpha_at(t)) * sab * Hy / b
    else:  # ddnmplus: the x0 estimate is itself affine in x
        lam = ddnmplus_scale(model, sched, t)
        X0 = (eye + oma * S) / sab
        x00 = oma * s0 / sab
        F = (sab * (1.0 - lam) * P @ X0 - P) / oma
        f0 = sab * (lam * Hy + (1.0 - lam) * P @ x00) / oma
    return Pc @ S + F, Pc @ s0 + f0


def propagate_affine(spec: SamplerSpec, target, model, sched) -> AffineLawSequence:
    """Exact mean/covariance recursion of the sampler for a Gaussian target."""
    if not isinstance(target, tg.GaussianTarget):
        raise ConfigError("affine propagation needs a Gaussian target")
    if not spec.exact:
        raise ConfigError("affine propagation needs exact scores (eps = 0)")
    spec.validate(model)
    tg._check_dims(target, model)
    d, T = target.d, sched.T
    means = np.full((T + 1, d), np.nan)
    covs = np.full((T + 1, d, d), np.nan)
    m, C = np.zeros(d), np.eye(d)
    means[T], covs[T] = m, C
    eye = np.eye(d)
    for t in range(T, spec.stop_t, -1):
        G, g0 = affine_drift(spec, target, model, sched, t)
        a, b = sched.alpha_at(t), sched.beta_at(t)
        A = (eye + b * G) / np.sqrt(a)
        m = A @ m + b * g0 / np.sqrt(a)
        C = sym(A @ C @ A.T) + (b / a) * eye
        means[t - 1], covs[t - 1] = m, C
    return AffineLawSequence(means, covs, spec.stop_t)
